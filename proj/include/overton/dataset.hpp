#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "overton/csv.hpp"
#include "overton/error.hpp"

namespace overton {

inline constexpr std::string_view kSeedAuthor = "seed";

enum class QuestionSource { model_slant, prism };

inline std::string_view to_string(QuestionSource s) {
    return s == QuestionSource::model_slant ? "model_slant" : "prism";
}

inline std::optional<QuestionSource> parse_source(std::string_view s) {
    if (s == "model_slant") return QuestionSource::model_slant;
    if (s == "prism") return QuestionSource::prism;
    return std::nullopt;
}

/// Ternary vote value: +1 agree, -1 disagree, 0 neutral.
enum class VoteValue : int { disagree = -1, neutral = 0, agree = 1 };

inline std::optional<VoteValue> parse_vote(std::string_view s) {
    if (s == "agree") return VoteValue::agree;
    if (s == "disagree") return VoteValue::disagree;
    if (s == "neutral") return VoteValue::neutral;
    return std::nullopt;
}

inline std::string_view to_string(VoteValue v) {
    switch (v) {
        case VoteValue::agree: return "agree";
        case VoteValue::disagree: return "disagree";
        case VoteValue::neutral: return "neutral";
    }
    return "neutral";
}

struct Participant {
    std::string id;
    std::string age_band;
    std::string sex;
    std::string ethnicity;
    std::string ethnicity_simplified;
    std::string party;
    auto operator<=>(const Participant&) const = default;
};

struct Question {
    std::string id;
    std::string text;
    QuestionSource source = QuestionSource::prism;
    std::optional<std::string> topic;
    auto operator<=>(const Question&) const = default;
};

struct Statement {
    std::string id;
    std::string question_id;
    std::string author_id;
    std::string text;
    bool is_seed() const { return author_id == kSeedAuthor; }
    auto operator<=>(const Statement&) const = default;
};

struct Vote {
    std::string voter_id;
    std::string statement_id;
    VoteValue value = VoteValue::neutral;
    auto operator<=>(const Vote&) const = default;
};

struct ModelResponse {
    std::string question_id;
    std::string model_id;
    std::string text;
    auto operator<=>(const ModelResponse&) const = default;
};

struct RatingRecord {
    std::string participant_id;
    std::string question_id;
    std::string model_id;
    int rating = 0;
    auto operator<=>(const RatingRecord&) const = default;
};

/// Optional per-(participant, question) self-reported stance.
struct StanceRecord {
    std::string participant_id;
    std::string question_id;
    std::string stance;
    auto operator<=>(const StanceRecord&) const = default;
};

/// Declared categorical vocabularies, keyed by participant field name.
using Vocabularies = std::map<std::string, std::vector<std::string>>;

inline const std::vector<std::string>& demographic_fields() {
    static const std::vector<std::string> fields{"age_band", "sex", "ethnicity",
                                                 "ethnicity_simplified", "party"};
    return fields;
}

inline const std::string& demographic(const Participant& p, std::string_view field) {
    if (field == "age_band") return p.age_band;
    if (field == "sex") return p.sex;
    if (field == "ethnicity") return p.ethnicity;
    if (field == "ethnicity_simplified") return p.ethnicity_simplified;
    if (field == "party") return p.party;
    throw Error("unknown demographic field '" + std::string(field) + "'");
}

/// Raw collections before indexing. Also the unit of canonical export.
struct DatasetParts {
    std::string version;
    Vocabularies vocabularies;
    std::vector<Participant> participants;
    std::vector<Question> questions;
    std::vector<Statement> statements;
    std::vector<Vote> votes;
    std::vector<ModelResponse> responses;
    std::vector<RatingRecord> ratings;
    std::vector<StanceRecord> stances;

    bool operator==(const DatasetParts&) const = default;

    /// Sorts every collection into canonical key order.
    void canonicalize() {
        std::ranges::sort(participants, {}, &Participant::id);
        std::ranges::sort(questions, {}, &Question::id);
        std::ranges::sort(statements, {}, &Statement::id);
        std::ranges::sort(votes);
        std::ranges::sort(responses);
        std::ranges::sort(ratings);
        std::ranges::sort(stances);
    }
};

/// Immutable, indexed study data. Construction verifies referential
/// integrity; duplicate records and partial rating sets are left for
/// validate_dataset to report.
class Dataset {
public:
    explicit Dataset(DatasetParts parts) : parts_(std::move(parts)) {
        parts_.canonicalize();
        index();
    }

    const DatasetParts& parts() const { return parts_; }
    const std::string& version() const { return parts_.version; }
    const std::vector<Participant>& participants() const { return parts_.participants; }
    const std::vector<Question>& questions() const { return parts_.questions; }
    const std::vector<Statement>& statements() const { return parts_.statements; }
    const std::vector<Vote>& votes() const { return parts_.votes; }
    const std::vector<ModelResponse>& responses() const { return parts_.responses; }
    const std::vector<RatingRecord>& ratings() const { return parts_.ratings; }
    const std::vector<StanceRecord>& stances() const { return parts_.stances; }

    /// Sorted distinct model ids with at least one response.
    const std::vector<std::string>& models() const { return models_; }

    const Participant* find_participant(std::string_view id) const {
        return lookup(participant_index_, parts_.participants, id);
    }
    const Question* find_question(std::string_view id) const {
        return lookup(question_index_, parts_.questions, id);
    }
    const Statement* find_statement(std::string_view id) const {
        return lookup(statement_index_, parts_.statements, id);
    }
    const ModelResponse* find_response(std::string_view question_id,
                                       std::string_view model_id) const {
        auto it = response_index_.find({std::string(question_id), std::string(model_id)});
        return it == response_index_.end() ? nullptr : &parts_.responses[it->second];
    }

    /// Statements of a question in id order.
    std::vector<const Statement*> statements_for(std::string_view question_id) const {
        return gather(statements_by_question_, parts_.statements, question_id);
    }
    /// Votes cast on statements of a question, in canonical order.
    std::vector<const Vote*> votes_for(std::string_view question_id) const {
        return gather(votes_by_question_, parts_.votes, question_id);
    }
    std::vector<const RatingRecord*> ratings_for(std::string_view question_id) const {
        return gather(ratings_by_question_, parts_.ratings, question_id);
    }
    std::vector<const RatingRecord*> ratings_by(std::string_view participant_id) const {
        return gather(ratings_by_participant_, parts_.ratings, participant_id);
    }
    /// The participant's own (non-seed) statement text for a question, if any.
    std::optional<std::string> free_response(std::string_view participant_id,
                                             std::string_view question_id) const {
        for (const auto* s : statements_for(question_id))
            if (s->author_id == participant_id) return s->text;
        return std::nullopt;
    }
    std::optional<std::string> stance(std::string_view participant_id,
                                      std::string_view question_id) const {
        for (const auto& s : parts_.stances)
            if (s.participant_id == participant_id && s.question_id == question_id) return s.stance;
        return std::nullopt;
    }

    bool operator==(const Dataset& other) const { return parts_ == other.parts_; }

private:
    using Index = std::map<std::string, std::size_t, std::less<>>;
    using MultiIndex = std::map<std::string, std::vector<std::size_t>, std::less<>>;

    template <typename T>
    static const T* lookup(const Index& index, const std::vector<T>& items, std::string_view id) {
        auto it = index.find(id);
        return it == index.end() ? nullptr : &items[it->second];
    }

    template <typename T>
    static std::vector<const T*> gather(const MultiIndex& index, const std::vector<T>& items,
                                        std::string_view key) {
        std::vector<const T*> out;
        if (auto it = index.find(key); it != index.end())
            for (auto i : it->second) out.push_back(&items[i]);
        return out;
    }

    template <typename T, typename Key>
    static Index unique_index(const std::vector<T>& items, Key key, std::string_view what) {
        Index index;
        for (std::size_t i = 0; i < items.size(); ++i) {
            const std::string& id = std::invoke(key, items[i]);
            if (!index.emplace(id, i).second)
                throw DataError(DataError::Kind::integrity,
                                "duplicate " + std::string(what) + " id '" + id + "'");
        }
        return index;
    }

    static void fail_refs(std::string_view what, const std::set<std::string>& ids) {
        if (ids.empty()) return;
        std::string msg = "unknown " + std::string(what) + " id(s):";
        for (const auto& id : ids) msg += " " + id;
        throw DataError(DataError::Kind::integrity, msg);
    }

    void index() {
        participant_index_ = unique_index(parts_.participants, &Participant::id, "participant");
        question_index_ = unique_index(parts_.questions, &Question::id, "question");
        statement_index_ = unique_index(parts_.statements, &Statement::id, "statement");

        std::set<std::string> bad;
        for (std::size_t i = 0; i < parts_.statements.size(); ++i) {
            const auto& s = parts_.statements[i];
            if (!question_index_.contains(s.question_id)) bad.insert(s.question_id);
            statements_by_question_[s.question_id].push_back(i);
        }
        fail_refs("question (statements.csv)", bad);

        for (const auto& s : parts_.statements)
            if (!s.is_seed() && !participant_index_.contains(s.author_id)) bad.insert(s.author_id);
        fail_refs("author (statements.csv)", bad);

        std::set<std::string> bad_statements;
        for (std::size_t i = 0; i < parts_.votes.size(); ++i) {
            const auto& v = parts_.votes[i];
            if (!participant_index_.contains(v.voter_id)) bad.insert(v.voter_id);
            auto it = statement_index_.find(v.statement_id);
            if (it == statement_index_.end()) {
                bad_statements.insert(v.statement_id);
                continue;
            }
            votes_by_question_[parts_.statements[it->second].question_id].push_back(i);
        }
        fail_refs("statement (votes.csv)", bad_statements);
        fail_refs("voter (votes.csv)", bad);

        std::set<std::string> model_set;
        for (std::size_t i = 0; i < parts_.responses.size(); ++i) {
            const auto& r = parts_.responses[i];
            if (!question_index_.contains(r.question_id)) bad.insert(r.question_id);
            response_index_.emplace(std::pair{r.question_id, r.model_id}, i);
            model_set.insert(r.model_id);
        }
        fail_refs("question (responses.json)", bad);
        models_.assign(model_set.begin(), model_set.end());

        std::set<std::string> bad_pairs;
        for (std::size_t i = 0; i < parts_.ratings.size(); ++i) {
            const auto& r = parts_.ratings[i];
            if (!participant_index_.contains(r.participant_id)) bad.insert(r.participant_id);
            if (!question_index_.contains(r.question_id))
                bad.insert(r.question_id);
            else if (!response_index_.contains({r.question_id, r.model_id}))
                bad_pairs.insert(r.question_id + "/" + r.model_id);
            ratings_by_question_[r.question_id].push_back(i);
            ratings_by_participant_[r.participant_id].push_back(i);
        }
        fail_refs("participant or question (ratings.csv)", bad);
        fail_refs("question/model response (ratings.csv)", bad_pairs);

        for (const auto& s : parts_.stances) {
            if (!participant_index_.contains(s.participant_id)) bad.insert(s.participant_id);
            if (!question_index_.contains(s.question_id)) bad.insert(s.question_id);
        }
        fail_refs("participant or question (stances.csv)", bad);
    }

    DatasetParts parts_;
    std::vector<std::string> models_;
    Index participant_index_;
    Index question_index_;
    Index statement_index_;
    std::map<std::pair<std::string, std::string>, std::size_t> response_index_;
    MultiIndex statements_by_question_;
    MultiIndex votes_by_question_;
    MultiIndex ratings_by_question_;
    MultiIndex ratings_by_participant_;
};

// ---------------------------------------------------------------------------
// On-disk format

namespace detail {

inline std::string require_text(const csv::Table& t, const csv::Row& row, std::size_t col) {
    if (row.fields[col].empty()) t.fail(row, col, "empty value");
    return row.fields[col];
}

inline std::string categorical(const csv::Table& t, const csv::Row& row, std::size_t col,
                               const Vocabularies& vocab, const std::string& field) {
    const std::string& value = row.fields[col];
    auto it = vocab.find(field);
    if (it == vocab.end())
        throw DataError(DataError::Kind::schema,
                        "manifest declares no vocabulary for '" + field + "'");
    if (std::ranges::find(it->second, value) == it->second.end())
        t.fail(row, col, "value '" + value + "' not in declared vocabulary");
    return value;
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(DataError::Kind::missing_file, "cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(DataError::Kind::schema, path.string() + ": " + e.what());
    }
}

}  // namespace detail

/// Manifest file names for each collection, relative to the manifest.
struct ManifestFiles {
    std::string participants = "participants.csv";
    std::string questions = "questions.csv";
    std::string statements = "statements.csv";
    std::string votes = "votes.csv";
    std::string ratings = "ratings.csv";
    std::string responses = "responses.json";
    std::optional<std::string> stances;
};

/// Loads a dataset from its JSON manifest. Throws DataError on missing files,
/// schema violations (with file:line:column) and broken references.
inline Dataset load_dataset(const std::filesystem::path& manifest_path) {
    using Kind = DataError::Kind;
    const auto manifest = detail::read_json(manifest_path);
    const auto base = manifest_path.parent_path();
    DatasetParts parts;
    ManifestFiles files;
    try {
        parts.version = manifest.at("version").get<std::string>();
        const auto& f = manifest.at("files");
        files.participants = f.at("participants").get<std::string>();
        files.questions = f.at("questions").get<std::string>();
        files.statements = f.at("statements").get<std::string>();
        files.votes = f.at("votes").get<std::string>();
        files.ratings = f.at("ratings").get<std::string>();
        files.responses = f.at("responses").get<std::string>();
        if (f.contains("stances")) files.stances = f.at("stances").get<std::string>();
        parts.vocabularies = manifest.at("vocabularies").get<Vocabularies>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(Kind::schema, manifest_path.string() + ": " + e.what());
    }
    auto path = [&](const std::string& name) { return (base / name).string(); };

    {
        const auto t = csv::read(path(files.participants));
        const auto c_id = t.column("id");
        std::vector<std::pair<std::string, std::size_t>> cats;
        for (const auto& field : demographic_fields()) cats.emplace_back(field, t.column(field));
        for (const auto& row : t.rows) {
            Participant p;
            p.id = detail::require_text(t, row, c_id);
            p.age_band = detail::categorical(t, row, cats[0].second, parts.vocabularies, "age_band");
            p.sex = detail::categorical(t, row, cats[1].second, parts.vocabularies, "sex");
            p.ethnicity = detail::categorical(t, row, cats[2].second, parts.vocabularies, "ethnicity");
            p.ethnicity_simplified = detail::categorical(t, row, cats[3].second, parts.vocabularies,
                                                         "ethnicity_simplified");
            p.party = detail::categorical(t, row, cats[4].second, parts.vocabularies, "party");
            parts.participants.push_back(std::move(p));
        }
    }
    {
        const auto t = csv::read(path(files.questions));
        const auto c_id = t.column("id"), c_src = t.column("source"), c_topic = t.column("topic"),
                   c_text = t.column("text");
        for (const auto& row : t.rows) {
            Question q;
            q.id = detail::require_text(t, row, c_id);
            auto src = parse_source(row.fields[c_src]);
            if (!src) t.fail(row, c_src, "expected model_slant or prism");
            q.source = *src;
            if (!row.fields[c_topic].empty()) q.topic = row.fields[c_topic];
            q.text = detail::require_text(t, row, c_text);
            parts.questions.push_back(std::move(q));
        }
    }
    {
        const auto t = csv::read(path(files.statements));
        const auto c_id = t.column("id"), c_q = t.column("question_id"),
                   c_a = t.column("author_id"), c_text = t.column("text");
        for (const auto& row : t.rows) {
            parts.statements.push_back({detail::require_text(t, row, c_id),
                                        detail::require_text(t, row, c_q),
                                        detail::require_text(t, row, c_a),
                                        detail::require_text(t, row, c_text)});
        }
    }
    {
        const auto t = csv::read(path(files.votes));
        const auto c_v = t.column("voter_id"), c_s = t.column("statement_id"),
                   c_val = t.column("value");
        for (const auto& row : t.rows) {
            auto value = parse_vote(row.fields[c_val]);
            if (!value) t.fail(row, c_val, "expected agree, disagree or neutral");
            parts.votes.push_back({detail::require_text(t, row, c_v),
                                   detail::require_text(t, row, c_s), *value});
        }
    }
    {
        const auto t = csv::read(path(files.ratings));
        const auto c_p = t.column("participant_id"), c_q = t.column("question_id"),
                   c_m = t.column("model_id"), c_r = t.column("rating");
        for (const auto& row : t.rows) {
            const std::string& raw = row.fields[c_r];
            if (raw.size() != 1 || raw[0] < '1' || raw[0] > '5')
                t.fail(row, c_r, "rating '" + raw + "' outside 1..5 (participant " +
                                     row.fields[c_p] + ", question " + row.fields[c_q] +
                                     ", model " + row.fields[c_m] + ")");
            parts.ratings.push_back({detail::require_text(t, row, c_p),
                                     detail::require_text(t, row, c_q),
                                     detail::require_text(t, row, c_m), raw[0] - '0'});
        }
    }
    {
        const auto responses_path = base / files.responses;
        const auto j = detail::read_json(responses_path);
        if (!j.is_array()) throw DataError(Kind::schema, responses_path.string() + ": expected a list");
        for (std::size_t i = 0; i < j.size(); ++i) {
            try {
                ModelResponse r{j[i].at("question_id").get<std::string>(),
                                j[i].at("model_id").get<std::string>(),
                                j[i].at("text").get<std::string>()};
                if (r.text.empty()) throw DataError(Kind::schema, "empty text");
                parts.responses.push_back(std::move(r));
            } catch (const std::exception& e) {
                throw DataError(Kind::schema, responses_path.string() + ": entry " +
                                                  std::to_string(i) + ": " + e.what());
            }
        }
    }
    if (files.stances) {
        const auto t = csv::read(path(*files.stances));
        const auto c_p = t.column("participant_id"), c_q = t.column("question_id"),
                   c_s = t.column("stance");
        for (const auto& row : t.rows)
            parts.stances.push_back({detail::require_text(t, row, c_p),
                                     detail::require_text(t, row, c_q),
                                     detail::require_text(t, row, c_s)});
    }
    return Dataset(std::move(parts));
}

/// Writes the dataset in canonical form (sorted records, fixed column order)
/// into `dir`, returning the manifest path.
inline std::filesystem::path export_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const auto& p = ds.parts();
    auto open = [&](const std::string& name) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw Error("cannot write " + (dir / name).string());
        return out;
    };
    {
        auto out = open("participants.csv");
        csv::write_row(out, {"id", "age_band", "sex", "ethnicity", "ethnicity_simplified", "party"});
        for (const auto& x : p.participants)
            csv::write_row(out, {x.id, x.age_band, x.sex, x.ethnicity, x.ethnicity_simplified, x.party});
    }
    {
        auto out = open("questions.csv");
        csv::write_row(out, {"id", "source", "topic", "text"});
        for (const auto& x : p.questions)
            csv::write_row(out, {x.id, std::string(to_string(x.source)), x.topic.value_or(""), x.text});
    }
    {
        auto out = open("statements.csv");
        csv::write_row(out, {"id", "question_id", "author_id", "text"});
        for (const auto& x : p.statements) csv::write_row(out, {x.id, x.question_id, x.author_id, x.text});
    }
    {
        auto out = open("votes.csv");
        csv::write_row(out, {"voter_id", "statement_id", "value"});
        for (const auto& x : p.votes)
            csv::write_row(out, {x.voter_id, x.statement_id, std::string(to_string(x.value))});
    }
    {
        auto out = open("ratings.csv");
        csv::write_row(out, {"participant_id", "question_id", "model_id", "rating"});
        for (const auto& x : p.ratings)
            csv::write_row(out, {x.participant_id, x.question_id, x.model_id, std::to_string(x.rating)});
    }
    {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& x : p.responses)
            j.push_back({{"question_id", x.question_id}, {"model_id", x.model_id}, {"text", x.text}});
        open("responses.json") << j.dump(2) << '\n';
    }
    nlohmann::json files{{"participants", "participants.csv"}, {"questions", "questions.csv"},
                         {"statements", "statements.csv"},     {"votes", "votes.csv"},
                         {"ratings", "ratings.csv"},           {"responses", "responses.json"}};
    if (!p.stances.empty()) {
        auto out = open("stances.csv");
        csv::write_row(out, {"participant_id", "question_id", "stance"});
        for (const auto& x : p.stances) csv::write_row(out, {x.participant_id, x.question_id, x.stance});
        files["stances"] = "stances.csv";
    }
    nlohmann::json manifest{{"version", p.version}, {"files", files}, {"vocabularies", p.vocabularies}};
    const auto manifest_path = dir / "manifest.json";
    open("manifest.json") << manifest.dump(2) << '\n';
    return manifest_path;
}

// ---------------------------------------------------------------------------
// Validation

enum class Severity { warning, error };

struct ValidationEntry {
    Severity severity = Severity::warning;
    std::string code;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationEntry> entries;

    std::size_t count(Severity s) const {
        return static_cast<std::size_t>(
            std::ranges::count(entries, s, &ValidationEntry::severity));
    }
    std::size_t errors() const { return count(Severity::error); }
    std::size_t warnings() const { return count(Severity::warning); }
    bool ok() const { return errors() == 0; }
};

struct ValidationOptions {
    /// Participants with fewer votes than this on an assigned question are
    /// reported as sparse voters (the study protocol asked for ten).
    std::size_t min_votes_per_question = 10;
};

inline ValidationReport validate_dataset(const Dataset& ds, const ValidationOptions& opts = {}) {
    ValidationReport report;
    auto add = [&](Severity s, std::string code, std::string msg) {
        report.entries.push_back({s, std::move(code), std::move(msg)});
    };

    {
        std::map<std::pair<std::string, std::string>, int> seen;
        for (const auto& v : ds.votes())
            if (++seen[{v.voter_id, v.statement_id}] == 2)
                add(Severity::error, "duplicate_vote",
                    "voter " + v.voter_id + " voted more than once on statement " + v.statement_id);
    }
    {
        std::map<std::tuple<std::string, std::string, std::string>, int> seen;
        for (const auto& r : ds.ratings())
            if (++seen[{r.participant_id, r.question_id, r.model_id}] == 2)
                add(Severity::error, "duplicate_rating",
                    "participant " + r.participant_id + " rated model " + r.model_id +
                        " more than once on question " + r.question_id);
    }
    {
        std::map<std::pair<std::string, std::string>, int> seen;
        for (const auto& r : ds.responses())
            if (++seen[{r.question_id, r.model_id}] == 2)
                add(Severity::error, "duplicate_response",
                    "more than one response for question " + r.question_id + ", model " + r.model_id);
    }
    for (const auto& r : ds.ratings())
        if (r.rating < 1 || r.rating > 5)
            add(Severity::error, "rating_range",
                "rating " + std::to_string(r.rating) + " outside 1..5 for " + r.participant_id + "/" +
                    r.question_id + "/" + r.model_id);
    for (const auto& q : ds.questions())
        if (q.text.empty()) add(Severity::error, "empty_text", "question " + q.id + " has empty text");

    for (const auto& q : ds.questions()) {
        std::set<std::string> statement_ids;
        std::size_t seeds = 0;
        for (const auto* s : ds.statements_for(q.id)) {
            statement_ids.insert(s->id);
            if (s->is_seed()) ++seeds;
        }
        if (seeds)
            add(Severity::warning, "seed_statements",
                "question " + q.id + " has " + std::to_string(seeds) +
                    " seed-authored statement(s); excluded from author-linked diagnostics");

        std::map<std::string, std::size_t> votes_by_voter;
        for (const auto* v : ds.votes_for(q.id)) ++votes_by_voter[v->voter_id];

        std::map<std::string, std::set<std::string>> rated;
        for (const auto* r : ds.ratings_for(q.id)) rated[r->participant_id].insert(r->model_id);

        std::set<std::string> question_models;
        for (const auto& m : ds.models())
            if (ds.find_response(q.id, m)) question_models.insert(m);

        for (const auto& [pid, models] : rated) {
            if (models.size() < question_models.size())
                add(Severity::warning, "partial_ratings",
                    "participant " + pid + " rated " + std::to_string(models.size()) + " of " +
                        std::to_string(question_models.size()) + " models on question " + q.id);
            auto it = votes_by_voter.find(pid);
            const std::size_t n = it == votes_by_voter.end() ? 0 : it->second;
            if (n == 0)
                add(Severity::warning, "no_votes",
                    "participant " + pid + " cast no votes on assigned question " + q.id);
            else if (n < opts.min_votes_per_question)
                add(Severity::warning, "sparse_voter",
                    "participant " + pid + " cast " + std::to_string(n) + " vote(s) on question " + q.id);
        }
        if (statement_ids.empty())
            add(Severity::warning, "no_statements", "question " + q.id + " has no statements");
    }
    return report;
}

inline nlohmann::json to_json(const ValidationReport& r) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : r.entries)
        entries.push_back({{"severity", e.severity == Severity::error ? "error" : "warning"},
                           {"code", e.code},
                           {"message", e.message}});
    return {{"errors", r.errors()}, {"warnings", r.warnings()}, {"entries", entries}};
}

}  // namespace overton
