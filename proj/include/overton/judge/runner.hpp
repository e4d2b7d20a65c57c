#pragma once

#include <exception>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "overton/dataset.hpp"
#include "overton/judge/client.hpp"
#include "overton/judge/evaluate.hpp"
#include "overton/judge/prompt.hpp"
#include "overton/parallel.hpp"

namespace overton::judge {

struct RunOptions {
    std::vector<PromptVariant> variants{PromptVariant::FS_FR_D_S};
    int runs = 3;
    std::uint64_t seed = 0;
    unsigned workers = 1;      // concurrent judge calls
    std::size_t chunk = 64;    // predictions committed to the store together
    std::optional<std::set<std::string>> questions;
};

struct RunStats {
    std::size_t calls = 0;       // replies fetched from the client
    std::size_t cache_hits = 0;
    std::size_t resumed = 0;     // already in the store
    std::size_t parse_errors = 0;
    std::size_t unavailable = 0;  // datapoints lacking a field the variant needs
};

/// Predicts every (rating, variant, run) not yet in the store. Results are
/// appended in canonical order per chunk; on failure the chunk's completed
/// predictions are kept and the first error is rethrown.
inline RunStats run_judge(const Dataset& ds, JudgeClient& client, const ResponseCache* cache, PredictionStore& store,
                          const RunOptions& opt) {
    struct Task {
        PredictionRecord record;
        std::string prompt;
    };
    RunStats st;
    std::vector<Task> tasks;
    for (const auto& r : ds.ratings()) {
        if (opt.questions && !opt.questions->count(r.question_id)) continue;
        const DatapointKey key{r.participant_id, r.question_id, r.model_id};
        for (auto v : opt.variants) {
            std::optional<Prompt> prompt;
            for (int run = 1; run <= opt.runs; ++run) {
                if (store.has(key, to_string(v), run)) {
                    ++st.resumed;
                    continue;
                }
                if (!prompt) {
                    try {
                        prompt = build_prompt(v, make_context(ds, key, v, opt.seed));
                    } catch (const DataError&) {
                        throw;
                    } catch (const Error&) {
                        ++st.unavailable;
                        break;
                    }
                }
                Task t;
                t.record.key = key;
                t.record.variant = to_string(v);
                t.record.judge = client.id();
                t.record.run_index = run;
                t.record.template_hash = prompt->template_hash;
                t.record.example_order = prompt->example_order;
                t.record.seed = opt.seed;
                t.prompt = prompt->text;
                tasks.push_back(std::move(t));
            }
        }
    }
    const std::size_t chunk = std::max<std::size_t>(1, opt.chunk);
    for (std::size_t begin = 0; begin < tasks.size(); begin += chunk) {
        const std::size_t end = std::min(tasks.size(), begin + chunk);
        std::vector<std::optional<Prediction>> out(end - begin);
        std::vector<std::exception_ptr> errors(end - begin);
        parallel_for(end - begin, opt.workers, [&](std::size_t i) {
            auto& t = tasks[begin + i];
            try {
                out[i] = predict_rating(client, {t.record.key, t.prompt, t.record.run_index}, cache);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        });
        std::exception_ptr first;
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (!out[i]) {
                if (!first) first = errors[i];
                continue;
            }
            auto& rec = tasks[begin + i].record;
            rec.rating = out[i]->rating;
            rec.raw = out[i]->raw;
            rec.parse_error = out[i]->parse_error;
            rec.cache_key = out[i]->cache_key;
            (out[i]->cache_hit ? st.cache_hits : st.calls)++;
            st.parse_errors += rec.parse_error;
            store.append(rec);
        }
        if (first) std::rethrow_exception(first);
    }
    return st;
}

}  // namespace overton::judge
