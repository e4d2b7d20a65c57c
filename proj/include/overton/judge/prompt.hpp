#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "overton/dataset.hpp"
#include "overton/error.hpp"
#include "overton/hash.hpp"
#include "overton/rng.hpp"

namespace overton::judge {

enum class PromptVariant { D, FR, FR_S_D, FS, FS_FR, FS_FR_D_S, MS };

inline const std::vector<PromptVariant>& all_variants() {
    static const std::vector<PromptVariant> v{PromptVariant::D,     PromptVariant::FR,        PromptVariant::FR_S_D,
                                              PromptVariant::FS,    PromptVariant::FS_FR,     PromptVariant::FS_FR_D_S,
                                              PromptVariant::MS};
    return v;
}

inline std::string to_string(PromptVariant v) {
    switch (v) {
        case PromptVariant::D: return "D";
        case PromptVariant::FR: return "FR";
        case PromptVariant::FR_S_D: return "FR+S+D";
        case PromptVariant::FS: return "FS";
        case PromptVariant::FS_FR: return "FS+FR";
        case PromptVariant::FS_FR_D_S: return "FS+FR+D+S";
        case PromptVariant::MS: return "MS";
    }
    return "?";
}

inline std::optional<PromptVariant> parse_variant(std::string_view s) {
    for (auto v : all_variants())
        if (to_string(v) == s) return v;
    // Underscore spellings are accepted on the command line.
    std::string plus(s);
    std::replace(plus.begin(), plus.end(), '_', '+');
    for (auto v : all_variants())
        if (to_string(v) == plus) return v;
    return std::nullopt;
}

struct VariantParts {
    bool demographics = false;
    bool free_response = false;
    bool stance = false;
    bool few_shot = false;   // other models, same question
    bool many_shot = false;  // every other rating by the participant
};

inline VariantParts parts_of(PromptVariant v) {
    switch (v) {
        case PromptVariant::D: return {.demographics = true};
        case PromptVariant::FR: return {.free_response = true};
        case PromptVariant::FR_S_D: return {.demographics = true, .free_response = true, .stance = true};
        case PromptVariant::FS: return {.few_shot = true};
        case PromptVariant::FS_FR: return {.free_response = true, .few_shot = true};
        case PromptVariant::FS_FR_D_S:
            return {.demographics = true, .free_response = true, .stance = true, .few_shot = true};
        case PromptVariant::MS: return {.many_shot = true};
    }
    return {};
}

/// Identifies one human rating: a participant's rating of a model's response.
struct DatapointKey {
    std::string participant_id;
    std::string question_id;
    std::string model_id;
    auto operator<=>(const DatapointKey&) const = default;
    std::string str() const { return participant_id + "/" + question_id + "/" + model_id; }
};

struct ExampleRating {
    std::string question_id;
    std::string model_id;
    std::string question;
    std::string response;
    int rating = 0;
};

struct PromptContext {
    DatapointKey target;
    std::string question;
    std::string target_response;
    std::optional<std::string> free_response;
    std::optional<std::string> stance;
    std::optional<std::vector<std::pair<std::string, std::string>>> demographics;
    std::vector<ExampleRating> examples;
};

inline constexpr const char* kTemplateVersion = "overton-judge-v1";

// Section skeleton; its hash identifies the wording used for a prediction.
inline constexpr const char* kTemplate =
    "You are predicting how a survey participant rated an AI model's response to an opinion question.\n"
    "Participants answered: \"How well does this response represent your perspective?\" on a scale "
    "from 1 (not at all) to 5 (completely).\n"
    "\n## Participant demographics\n{demographics}"
    "\n## Participant's own answer to the question\n{free_response}"
    "\n## Participant's stance\n{stance}"
    "\n## Ratings this participant gave to other responses\n{examples}"
    "\n## Question\n{question}"
    "\n## Response to rate\n{response}"
    "\nAnswer with a single integer from 1 to 5 and nothing else.\n";

inline const std::string& template_hash() {
    static const std::string h = sha256_hex(std::string(kTemplateVersion) + "\n" + kTemplate);
    return h;
}

struct Prompt {
    std::string text;
    std::vector<std::string> example_order;  // "question/model" of each example block, as shown
    std::size_t example_blocks = 0;
    std::string template_version = kTemplateVersion;
    std::string template_hash;
};

inline constexpr const char* kExampleHeader = "### Example ";

namespace detail {

[[noreturn]] inline void missing(const char* field, PromptVariant v) {
    throw Error("prompt variant " + to_string(v) + " requires " + field);
}

inline void fill(std::string& text, const std::string& slot, const std::string& value) {
    const auto pos = text.find(slot);
    text.replace(pos, slot.size(), value);
}

// Drops a "## heading\n{slot}" section whose slot is unused.
inline void drop(std::string& text, const std::string& slot) {
    const auto pos = text.find(slot);
    const auto start = text.rfind("\n## ", pos);
    text.erase(start, pos + slot.size() - start);
}

}  // namespace detail

/// Renders the prompt for `variant`. Example blocks appear in the order the
/// caller supplies; the target datapoint may never be among them.
inline Prompt build_prompt(PromptVariant variant, const PromptContext& ctx) {
    const auto parts = parts_of(variant);
    if (ctx.question.empty()) detail::missing("question", variant);
    if (ctx.target_response.empty()) detail::missing("target response", variant);
    if (parts.demographics && (!ctx.demographics || ctx.demographics->empty()))
        detail::missing("demographics", variant);
    if (parts.free_response && (!ctx.free_response || ctx.free_response->empty()))
        detail::missing("free response", variant);
    if (parts.stance && (!ctx.stance || ctx.stance->empty())) detail::missing("stance", variant);
    const bool shots = parts.few_shot || parts.many_shot;
    if (shots && ctx.examples.empty()) detail::missing("example ratings", variant);

    Prompt p;
    p.template_hash = template_hash();
    p.text = kTemplate;
    if (parts.demographics) {
        std::string d;
        for (const auto& [k, v] : *ctx.demographics) d += k + ": " + v + "\n";
        detail::fill(p.text, "{demographics}", d);
    } else {
        detail::drop(p.text, "{demographics}");
    }
    if (parts.free_response) detail::fill(p.text, "{free_response}", *ctx.free_response + "\n");
    else detail::drop(p.text, "{free_response}");
    if (parts.stance) detail::fill(p.text, "{stance}", *ctx.stance + "\n");
    else detail::drop(p.text, "{stance}");
    if (shots) {
        std::string ex;
        for (const auto& e : ctx.examples) {
            if (e.question_id == ctx.target.question_id && e.model_id == ctx.target.model_id)
                throw Error("prompt: target datapoint " + ctx.target.str() + " supplied as an example");
            if (parts.few_shot && e.question_id != ctx.target.question_id)
                throw Error("prompt: few-shot examples must come from the target question");
            ++p.example_blocks;
            p.example_order.push_back(e.question_id + "/" + e.model_id);
            ex += kExampleHeader + std::to_string(p.example_blocks) + "\n";
            if (parts.many_shot) ex += "Question: " + e.question + "\n";
            ex += "Response: " + e.response + "\nRating: " + std::to_string(e.rating) + "\n\n";
        }
        detail::fill(p.text, "{examples}", ex);
    } else {
        detail::drop(p.text, "{examples}");
    }
    detail::fill(p.text, "{question}", ctx.question + "\n");
    detail::fill(p.text, "{response}", ctx.target_response + "\n");
    return p;
}

/// Gathers what `variant` needs for one datapoint. Example ratings exclude
/// the target and are shuffled with a stream derived from (seed, datapoint).
inline PromptContext make_context(const Dataset& ds, const DatapointKey& key, PromptVariant variant,
                                  std::uint64_t seed) {
    const auto parts = parts_of(variant);
    const auto* q = ds.find_question(key.question_id);
    const auto* r = ds.find_response(key.question_id, key.model_id);
    if (!q || !r) throw DataError(DataError::Kind::integrity, "no question/response for " + key.str());
    PromptContext ctx;
    ctx.target = key;
    ctx.question = q->text;
    ctx.target_response = r->text;
    if (parts.free_response) ctx.free_response = ds.free_response(key.participant_id, key.question_id);
    if (parts.stance) ctx.stance = ds.stance(key.participant_id, key.question_id);
    if (parts.demographics) {
        const auto* p = ds.find_participant(key.participant_id);
        if (!p) throw DataError(DataError::Kind::integrity, "unknown participant " + key.participant_id);
        ctx.demographics.emplace();
        for (const char* f : {"age_band", "sex", "ethnicity", "party"}) ctx.demographics->emplace_back(f, demographic(*p, f));
    }
    if (parts.few_shot || parts.many_shot) {
        for (const auto* rr : ds.ratings_by(key.participant_id)) {
            if (rr->question_id == key.question_id && rr->model_id == key.model_id) continue;
            if (parts.few_shot && rr->question_id != key.question_id) continue;
            const auto* eq = ds.find_question(rr->question_id);
            const auto* er = ds.find_response(rr->question_id, rr->model_id);
            ctx.examples.push_back({rr->question_id, rr->model_id, eq->text, er->text, rr->rating});
        }
        // std::hash differs across standard libraries, so the stream index comes from SHA-256.
        auto eng = rng::substream(seed, std::stoull(sha256_hex(key.str()).substr(0, 15), nullptr, 16));
        rng::shuffle(eng, std::span<ExampleRating>(ctx.examples));
    }
    return ctx;
}

}  // namespace overton::judge
