#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "overton/judge/client.hpp"

namespace overton::judge {

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::vector<double> embed(const std::string& text) = 0;
    virtual std::string id() const = 0;
};

/// Deterministic offline embedding: lowercase word tokens hashed into a
/// fixed number of buckets (FNV-1a), counts as coordinates.
class HashingEmbedding : public EmbeddingProvider {
public:
    explicit HashingEmbedding(std::size_t dimension = 256) : dim_(dimension) {}
    std::vector<double> embed(const std::string& text) override {
        std::vector<double> v(dim_, 0.0);
        std::string word;
        auto flush = [&] {
            if (word.empty()) return;
            std::uint64_t h = 1469598103934665603ULL;
            for (unsigned char c : word) h = (h ^ c) * 1099511628211ULL;
            v[h % dim_] += 1.0;
            word.clear();
        };
        for (unsigned char c : text) {
            if (std::isalnum(c)) word.push_back(static_cast<char>(std::tolower(c)));
            else flush();
        }
        flush();
        return v;
    }
    std::string id() const override { return "stub:hashing:" + std::to_string(dim_); }

private:
    std::size_t dim_;
};

/// Fixed vectors for known texts; unknown texts are an error.
class TableEmbedding : public EmbeddingProvider {
public:
    explicit TableEmbedding(std::map<std::string, std::vector<double>> table) : table_(std::move(table)) {}
    std::vector<double> embed(const std::string& text) override {
        auto it = table_.find(text);
        if (it == table_.end()) throw Error("table embedding: unknown text '" + text.substr(0, 40) + "'");
        return it->second;
    }
    std::string id() const override { return "stub:table"; }

private:
    std::map<std::string, std::vector<double>> table_;
};

struct EmbeddingConfig {
    std::string endpoint;  // full URL of an embeddings route
    std::string model;
    std::size_t dimension = 0;  // expected vector length; 0 accepts any
    int max_retries = 4;
    int backoff_ms = 500;
    int timeout_s = 120;
};

/// OpenAI-style embeddings client. The key comes from OVERTON_EMBEDDING_API_KEY.
class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    explicit HttpEmbeddingProvider(EmbeddingConfig config) : config_(std::move(config)), url_(parse_url(config_.endpoint)) {}
    std::vector<double> embed(const std::string& text) override {
        const nlohmann::json body{{"model", config_.model}, {"input", text}};
        const auto reply = detail::post_json(url_, env_value(kEmbeddingKeyEnv), body, config_.max_retries,
                                             config_.backoff_ms, config_.timeout_s);
        try {
            return reply.at("data").at(0).at("embedding").get<std::vector<double>>();
        } catch (const nlohmann::json::exception&) {
            throw TransportError("embedding reply has no data[0].embedding");
        }
    }
    std::string id() const override { return config_.endpoint + "#" + config_.model; }

private:
    EmbeddingConfig config_;
    Url url_;
};

/// Memoizes another provider in memory and, when given a directory, on disk
/// under sha256(provider id) / sha256(text). Vectors of the wrong dimension
/// are rejected when an expected dimension is set.
class CachedEmbedding : public EmbeddingProvider {
public:
    explicit CachedEmbedding(std::shared_ptr<EmbeddingProvider> inner, std::optional<std::filesystem::path> dir = {},
                             std::size_t dimension = 0)
        : inner_(std::move(inner)), dimension_(dimension) {
        if (dir) {
            dir_ = *dir / sha256_hex(inner_->id()).substr(0, 16);
            std::filesystem::create_directories(*dir_);
        }
    }
    std::vector<double> embed(const std::string& text) override {
        {
            std::lock_guard lock(mutex_);
            if (auto it = memo_.find(text); it != memo_.end()) return it->second;
        }
        std::vector<double> v;
        const auto file = dir_ ? std::optional(*dir_ / sha256_hex(text)) : std::nullopt;
        if (file && std::filesystem::exists(*file)) {
            std::ifstream in(*file);
            v = nlohmann::json::parse(in).get<std::vector<double>>();
        } else {
            v = inner_->embed(text);
            std::lock_guard lock(mutex_);
            ++misses_;
        }
        if (dimension_ && v.size() != dimension_)
            throw TransportError("embedding: expected dimension " + std::to_string(dimension_) + ", got " +
                                 std::to_string(v.size()));
        if (file && !std::filesystem::exists(*file)) {
            std::ostringstream tid;
            tid << std::this_thread::get_id();
            const auto tmp = file->string() + ".tmp" + tid.str();
            std::ofstream(tmp) << nlohmann::json(v).dump();
            std::filesystem::rename(tmp, *file);
        }
        std::lock_guard lock(mutex_);
        return memo_.emplace(text, std::move(v)).first->second;
    }
    std::string id() const override { return inner_->id(); }
    std::size_t misses() const { return misses_; }

private:
    std::shared_ptr<EmbeddingProvider> inner_;
    std::optional<std::filesystem::path> dir_;
    std::size_t dimension_;
    std::map<std::string, std::vector<double>> memo_;
    std::size_t misses_ = 0;
    std::mutex mutex_;
};

inline std::shared_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingConfig& config,
                                                                  std::optional<std::filesystem::path> cache_dir = {}) {
    const auto& e = config.endpoint;
    if (e.empty() || e == "stub:hashing")
        return std::make_shared<CachedEmbedding>(
            std::make_shared<HashingEmbedding>(config.dimension ? config.dimension : 256), cache_dir, config.dimension);
    if (e.rfind("http://", 0) == 0 || e.rfind("https://", 0) == 0)
        return std::make_shared<CachedEmbedding>(std::make_shared<HttpEmbeddingProvider>(config), cache_dir,
                                                 config.dimension);
    throw Error("unknown embedding endpoint '" + e + "'");
}

inline std::optional<double> cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw NumericError("cosine: dimension mismatch");
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0 || bb == 0) return std::nullopt;
    return ab / std::sqrt(aa * bb);
}

/// A response the same participant rated on the same question.
struct RatedResponse {
    std::string model_id;
    std::string text;
    int rating = 0;
};

struct SimilarityChoice {
    std::string model_id;
    double similarity = 0;
    int rating = 0;
};

/// Copies the rating of the most similar other response. Ties go to the
/// smallest model id; zero vectors are never chosen.
inline std::optional<SimilarityChoice> baseline_semantic_similarity(const std::string& target_text,
                                                                    std::vector<RatedResponse> others,
                                                                    EmbeddingProvider& provider) {
    std::sort(others.begin(), others.end(), [](const auto& a, const auto& b) { return a.model_id < b.model_id; });
    const auto target = provider.embed(target_text);
    std::optional<SimilarityChoice> best;
    for (const auto& o : others) {
        const auto v = provider.embed(o.text);
        const auto s = cosine(target, v);
        if (!s) continue;
        if (!best || *s > best->similarity) best = SimilarityChoice{o.model_id, *s, o.rating};
    }
    return best;
}

}  // namespace overton::judge
