#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "overton/csv.hpp"
#include "overton/dataset.hpp"
#include "overton/vote_matrix.hpp"

using namespace overton;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

/// Fresh copy of the mini dataset in a per-test scratch directory.
fs::path scratch_copy(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("overton_dataset_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    for (const auto& e : fs::directory_iterator(fs::path(OVERTON_MINI_MANIFEST).parent_path()))
        fs::copy_file(e.path(), dir / e.path().filename());
    return dir;
}

void replace_once(const fs::path& p, const std::string& from, const std::string& to) {
    auto text = slurp(p);
    const auto pos = text.find(from);
    ASSERT_NE(pos, std::string::npos) << from;
    text.replace(pos, from.size(), to);
    spit(p, text);
}

DataError::Kind load_error_kind(const fs::path& manifest, std::string* message = nullptr) {
    try {
        load_dataset(manifest);
    } catch (const DataError& e) {
        if (message) *message = e.what();
        return e.kind();
    }
    ADD_FAILURE() << "expected DataError";
    return DataError::Kind::schema;
}

TEST(Csv, QuotedFieldsAndLineNumbers) {
    const auto rows = csv::parse("a,b\r\n\"x, y\",\"he said \"\"hi\"\"\"\n\"multi\nline\",z\n", "t.csv");
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[1].fields[0], "x, y");
    EXPECT_EQ(rows[1].fields[1], "he said \"hi\"");
    EXPECT_EQ(rows[2].fields[0], "multi\nline");
    EXPECT_EQ(rows[2].line, 3u);
    EXPECT_THROW(csv::parse("a,b\"c\n", "t.csv"), DataError);
    EXPECT_THROW(csv::parse("\"open\n", "t.csv"), DataError);
    EXPECT_EQ(csv::quote("plain"), "plain");
    EXPECT_EQ(csv::quote("a,\"b\""), "\"a,\"\"b\"\"\"");
}

TEST(Dataset, MiniFixtureCounts) {
    const auto ds = load_dataset(OVERTON_MINI_MANIFEST);
    EXPECT_EQ(ds.participants().size(), 40u);
    EXPECT_EQ(ds.questions().size(), 3u);
    EXPECT_EQ(ds.models().size(), 3u);
    EXPECT_EQ(ds.ratings().size(), 3u * 40u * 3u);
    EXPECT_EQ(ds.responses().size(), 9u);
    EXPECT_FALSE(ds.stances().empty());
    const auto report = validate_dataset(ds);
    EXPECT_TRUE(report.ok());
    EXPECT_EQ(report.entries.size(), 3u);  // one seed_statements note per question
    for (const auto& e : report.entries) EXPECT_EQ(e.code, "seed_statements");
}

TEST(Dataset, IndexesAndLookups) {
    const auto ds = load_dataset(OVERTON_MINI_MANIFEST);
    ASSERT_NE(ds.find_question("q01"), nullptr);
    EXPECT_EQ(ds.find_question("q01")->source, QuestionSource::model_slant);
    EXPECT_EQ(ds.find_question("nope"), nullptr);
    EXPECT_EQ(ds.statements_for("q02").size(), 43u);
    EXPECT_EQ(ds.ratings_for("q03").size(), 120u);
    EXPECT_EQ(ds.ratings_by("p007").size(), 9u);
    const auto fr = ds.free_response("p007", "q01");
    ASSERT_TRUE(fr.has_value());
    EXPECT_NE(fr->find("p007"), std::string::npos);
    EXPECT_TRUE(ds.stance("p007", "q01").has_value());
    EXPECT_NE(ds.find_response("q02", "beta"), nullptr);
}

TEST(Dataset, RatingOfSixIsSchemaErrorNamingRecord) {
    const auto dir = scratch_copy("rating6");
    const auto ratings = slurp(dir / "ratings.csv");
    const auto line_end = ratings.find('\n', ratings.find('\n') + 1);
    std::string edited = ratings.substr(0, line_end - 1) + "6" + ratings.substr(line_end);
    spit(dir / "ratings.csv", edited);
    std::string msg;
    EXPECT_EQ(load_error_kind(dir / "manifest.json", &msg), DataError::Kind::schema);
    EXPECT_NE(msg.find("ratings.csv:2:4"), std::string::npos) << msg;
    EXPECT_NE(msg.find("rating '6'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("participant p001"), std::string::npos) << msg;
}

TEST(Dataset, UnknownStatementIsIntegrityError) {
    const auto dir = scratch_copy("unknown_statement");
    replace_once(dir / "votes.csv", "p001,q01-p002,", "p001,q01-p999,");
    std::string msg;
    EXPECT_EQ(load_error_kind(dir / "manifest.json", &msg), DataError::Kind::integrity);
    EXPECT_NE(msg.find("q01-p999"), std::string::npos) << msg;
}

TEST(Dataset, MissingFileAndBadVocabulary) {
    auto dir = scratch_copy("missing");
    fs::remove(dir / "votes.csv");
    EXPECT_EQ(load_error_kind(dir / "manifest.json"), DataError::Kind::missing_file);
    dir = scratch_copy("vocab");
    replace_once(dir / "participants.csv", "p001,", "p001,999,");
    EXPECT_EQ(load_error_kind(dir / "manifest.json"), DataError::Kind::schema);
    EXPECT_EQ(load_error_kind(fs::temp_directory_path() / "overton_no_such" / "manifest.json"),
              DataError::Kind::missing_file);
}

TEST(Dataset, ExportRoundTripIsCanonical) {
    const auto ds = load_dataset(OVERTON_MINI_MANIFEST);
    const auto a = fs::temp_directory_path() / "overton_export_a";
    const auto b = fs::temp_directory_path() / "overton_export_b";
    fs::remove_all(a);
    fs::remove_all(b);
    const auto ma = export_dataset(ds, a);
    const auto again = load_dataset(ma);
    EXPECT_TRUE(again == ds);
    export_dataset(again, b);
    for (const auto& e : fs::directory_iterator(a))
        EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path().filename();
}

DatasetParts tiny() {
    DatasetParts p;
    p.version = "t";
    p.vocabularies = {{"age_band", {"x"}}, {"sex", {"x"}}, {"ethnicity", {"x"}},
                      {"ethnicity_simplified", {"x"}}, {"party", {"x"}}};
    for (const char* id : {"u1", "u2", "u3"}) p.participants.push_back({id, "x", "x", "x", "x", "x"});
    p.questions.push_back({"q", "text", QuestionSource::prism, std::nullopt});
    p.statements.push_back({"s1", "q", "u1", "one"});
    p.statements.push_back({"s2", "q", "u2", "two"});
    p.statements.push_back({"s3", "q", "seed", "three"});
    p.responses.push_back({"q", "m1", "r1"});
    p.responses.push_back({"q", "m2", "r2"});
    p.votes.push_back({"u1", "s2", VoteValue::agree});
    p.votes.push_back({"u1", "s3", VoteValue::disagree});
    p.votes.push_back({"u2", "s1", VoteValue::neutral});
    for (const char* u : {"u1", "u2", "u3"})
        for (const char* m : {"m1", "m2"}) p.ratings.push_back({u, "q", m, 4});
    return p;
}

TEST(Validation, WarningsAndErrors) {
    auto parts = tiny();
    auto report = validate_dataset(Dataset(parts), {.min_votes_per_question = 2});
    EXPECT_TRUE(report.ok());
    auto has = [&](const std::string& code) {
        return std::any_of(report.entries.begin(), report.entries.end(),
                           [&](const auto& e) { return e.code == code; });
    };
    EXPECT_TRUE(has("no_votes"));      // u3 rated but never voted
    EXPECT_TRUE(has("sparse_voter"));  // u2 cast one vote
    EXPECT_TRUE(has("seed_statements"));

    parts.ratings.pop_back();  // u3 rated only m1
    parts.votes.push_back({"u1", "s2", VoteValue::agree});
    report = validate_dataset(Dataset(parts));
    EXPECT_TRUE(has("partial_ratings"));
    EXPECT_TRUE(has("duplicate_vote"));
    EXPECT_FALSE(report.ok());
    EXPECT_EQ(to_json(report)["errors"], 1);
}

TEST(Validation, BrokenReferencesRejectedAtConstruction) {
    auto parts = tiny();
    parts.ratings.push_back({"u1", "q", "m9", 3});  // no response for m9
    EXPECT_THROW(Dataset{parts}, DataError);
    parts = tiny();
    parts.votes.push_back({"ghost", "s1", VoteValue::agree});
    EXPECT_THROW(Dataset{parts}, DataError);
}

TEST(VoteMatrix, ShapeAndCells) {
    const Dataset ds(tiny());
    const auto m = build_vote_matrix(ds, "q");
    EXPECT_EQ(m.cols(), 3u);
    ASSERT_EQ(m.rows(), 2u);  // u3 never voted
    EXPECT_EQ(m.row_ids(), (std::vector<std::string>{"u1", "u2"}));
    EXPECT_EQ(m.column_ids(), (std::vector<std::string>{"s1", "s2", "s3"}));
    EXPECT_FALSE(m.voted(0, 0));
    EXPECT_EQ(m.value(0, 1), 1);
    EXPECT_EQ(m.value(0, 2), -1);
    EXPECT_EQ(m.value(1, 0), 0);
    EXPECT_EQ(m.answered(0), 2u);
    EXPECT_EQ(m.answered(1), 1u);
}

TEST(VoteMatrix, Errors) {
    auto parts = tiny();
    parts.votes.clear();
    EXPECT_THROW(build_vote_matrix(Dataset(parts), "q"), DataError);
    EXPECT_THROW(build_vote_matrix(Dataset(tiny()), "zz"), DataError);
    parts = tiny();
    parts.votes.push_back({"u1", "s2", VoteValue::disagree});
    try {
        build_vote_matrix(Dataset(parts), "q");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_EQ(e.kind(), DataError::Kind::integrity);
    }
}

TEST(VoteMatrix, MiniFixtureRowsVoteAtLeastTenTimes) {
    const auto ds = load_dataset(OVERTON_MINI_MANIFEST);
    for (const auto& q : ds.questions()) {
        const auto m = build_vote_matrix(ds, q.id);
        EXPECT_EQ(m.rows(), 40u);
        EXPECT_EQ(m.cols(), 43u);
        for (std::size_t r = 0; r < m.rows(); ++r) EXPECT_GE(m.answered(r), 10u);
    }
}

}  // namespace
