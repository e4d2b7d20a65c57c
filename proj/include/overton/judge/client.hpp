#pragma once

#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <semaphore>
#include <sstream>
#include <string>
#include <thread>

#include <httplib.h>
// <resolv.h> (via httplib) defines _res as a macro, which breaks Eigen's parameter names.
#ifdef _res
#undef _res
#endif
#include <nlohmann/json.hpp>

#include "overton/error.hpp"
#include "overton/hash.hpp"
#include "overton/judge/prompt.hpp"

namespace overton::judge {

/// Network or protocol failure while talking to a judge or embedding service.
class TransportError : public Error {
public:
    using Error::Error;
};

struct JudgeRequest {
    DatapointKey key;
    std::string prompt;
    int run_index = 0;
};

class JudgeClient {
public:
    virtual ~JudgeClient() = default;
    /// Raw completion text for one prompt.
    virtual std::string complete(const JudgeRequest& request) = 0;
    /// Stable identifier; part of every cache path and prediction record.
    virtual std::string id() const = 0;
};

// ---------------------------------------------------------------------------
// Offline clients

/// Replies with the human rating of the requested datapoint. Used to check
/// that the pipeline reproduces human scores exactly.
class EchoJudge : public JudgeClient {
public:
    explicit EchoJudge(std::map<DatapointKey, int> ratings) : ratings_(std::move(ratings)) {}
    std::string complete(const JudgeRequest& r) override {
        auto it = ratings_.find(r.key);
        if (it == ratings_.end()) throw Error("echo judge: no human rating for " + r.key.str());
        return std::to_string(it->second);
    }
    std::string id() const override { return "stub:echo"; }

private:
    std::map<DatapointKey, int> ratings_;
};

class ConstantJudge : public JudgeClient {
public:
    explicit ConstantJudge(std::string reply) : reply_(std::move(reply)) {}
    std::string complete(const JudgeRequest&) override { return reply_; }
    std::string id() const override { return "stub:constant:" + reply_; }

private:
    std::string reply_;
};

class FunctionJudge : public JudgeClient {
public:
    FunctionJudge(std::string id, std::function<std::string(const JudgeRequest&)> fn)
        : id_(std::move(id)), fn_(std::move(fn)) {}
    std::string complete(const JudgeRequest& r) override { return fn_(r); }
    std::string id() const override { return id_; }

private:
    std::string id_;
    std::function<std::string(const JudgeRequest&)> fn_;
};

/// Forwards to `inner` for the first `limit` calls, then throws TransportError.
/// Simulates a run that dies part way through.
class FailAfterJudge : public JudgeClient {
public:
    FailAfterJudge(std::shared_ptr<JudgeClient> inner, std::size_t limit) : inner_(std::move(inner)), limit_(limit) {}
    std::string complete(const JudgeRequest& r) override {
        {
            std::lock_guard lock(mutex_);
            if (calls_ >= limit_) throw TransportError("fail-after: call limit " + std::to_string(limit_) + " reached");
            ++calls_;
        }
        return inner_->complete(r);
    }
    std::string id() const override { return inner_->id(); }

private:
    std::shared_ptr<JudgeClient> inner_;
    std::size_t limit_;
    std::size_t calls_ = 0;
    std::mutex mutex_;
};

/// Counts calls that reach the wrapped client.
class CountingJudge : public JudgeClient {
public:
    explicit CountingJudge(std::shared_ptr<JudgeClient> inner) : inner_(std::move(inner)) {}
    std::string complete(const JudgeRequest& r) override {
        calls_.fetch_add(1);
        return inner_->complete(r);
    }
    std::string id() const override { return inner_->id(); }
    std::size_t calls() const { return calls_.load(); }

private:
    std::shared_ptr<JudgeClient> inner_;
    std::atomic<std::size_t> calls_{0};
};

// ---------------------------------------------------------------------------
// HTTP

inline constexpr const char* kJudgeKeyEnv = "OVERTON_JUDGE_API_KEY";
inline constexpr const char* kEmbeddingKeyEnv = "OVERTON_EMBEDDING_API_KEY";

struct JudgeConfig {
    std::string endpoint;  // full URL of a chat-completions route
    std::string model;
    double temperature = 0.0;
    unsigned max_in_flight = 4;
    int max_retries = 4;
    int backoff_ms = 500;  // doubled after every failed attempt
    int timeout_s = 120;
};

struct Url {
    std::string scheme_host_port;
    std::string path;
};

inline Url parse_url(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw Error("invalid endpoint URL '" + url + "'");
    return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

inline std::optional<std::string> env_value(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

namespace detail {

/// POSTs JSON with bounded retries. Retries on transport failures, 429 and
/// 5xx; any other non-200 status fails immediately.
inline nlohmann::json post_json(const Url& url, const std::optional<std::string>& key, const nlohmann::json& body,
                                int max_retries, int backoff_ms, int timeout_s) {
    std::string last;
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        if (attempt) std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms) * (1LL << (attempt - 1)));
        httplib::Client cli(url.scheme_host_port);
        cli.set_connection_timeout(timeout_s);
        cli.set_read_timeout(timeout_s);
        httplib::Headers headers;
        if (key) headers.emplace("Authorization", "Bearer " + *key);
        auto res = cli.Post(url.path, headers, body.dump(), "application/json");
        if (!res) {
            last = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) {
            try {
                return nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::exception& e) {
                throw TransportError(std::string("malformed JSON reply: ") + e.what());
            }
        }
        last = "HTTP " + std::to_string(res->status);
        if (res->status != 429 && res->status < 500) throw TransportError(last + ": " + res->body.substr(0, 200));
    }
    throw TransportError("giving up after " + std::to_string(max_retries + 1) + " attempts: " + last);
}

}  // namespace detail

/// OpenAI-style chat-completions client. The API key is read from
/// OVERTON_JUDGE_API_KEY and nowhere else.
class HttpJudgeClient : public JudgeClient {
public:
    explicit HttpJudgeClient(JudgeConfig config)
        : config_(std::move(config)), url_(parse_url(config_.endpoint)),
          slots_(static_cast<std::ptrdiff_t>(std::max(1u, config_.max_in_flight))) {
        if (config_.model.empty()) throw Error("judge: model name is required for HTTP endpoints");
    }

    std::string complete(const JudgeRequest& r) override {
        nlohmann::json body{{"model", config_.model},
                            {"temperature", config_.temperature},
                            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", r.prompt}}})}};
        slots_.acquire();
        nlohmann::json reply;
        try {
            reply = detail::post_json(url_, env_value(kJudgeKeyEnv), body, config_.max_retries, config_.backoff_ms,
                                      config_.timeout_s);
        } catch (...) {
            slots_.release();
            throw;
        }
        slots_.release();
        try {
            return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw TransportError("judge reply has no choices[0].message.content");
        }
    }
    std::string id() const override { return config_.endpoint + "#" + config_.model; }

private:
    JudgeConfig config_;
    Url url_;
    std::counting_semaphore<1024> slots_;
};

/// "stub:echo", "stub:constant:N", "stub:fail-after:N" (echo, then failure)
/// or an http(s) URL.
inline std::shared_ptr<JudgeClient> make_judge_client(const JudgeConfig& config,
                                                      const std::map<DatapointKey, int>& human) {
    const auto& e = config.endpoint;
    if (e == "stub:echo") return std::make_shared<EchoJudge>(human);
    if (e.rfind("stub:constant:", 0) == 0) return std::make_shared<ConstantJudge>(e.substr(14));
    if (e.rfind("stub:fail-after:", 0) == 0)
        return std::make_shared<FailAfterJudge>(std::make_shared<EchoJudge>(human), std::stoull(e.substr(16)));
    if (e.rfind("http://", 0) == 0 || e.rfind("https://", 0) == 0) return std::make_shared<HttpJudgeClient>(config);
    throw Error("unknown judge endpoint '" + e + "'");
}

// ---------------------------------------------------------------------------
// Parsing and caching

/// First run of digits in the reply, if it is a rating from 1 to 5.
inline std::optional<int> parse_rating(std::string_view text) {
    std::size_t i = 0;
    while (i < text.size() && !std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
    if (i == text.size()) return std::nullopt;
    std::size_t j = i;
    while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
    if (j - i != 1) return std::nullopt;
    const int v = text[i] - '0';
    if (v < 1 || v > 5) return std::nullopt;
    return v;
}

/// Raw judge replies on disk, one file per (prompt, run). Writes go through
/// a temporary file and a rename so readers never see partial content.
class ResponseCache {
public:
    ResponseCache(std::filesystem::path root, const std::string& judge_id)
        : dir_(std::move(root) / sha256_hex(judge_id).substr(0, 16)) {
        std::filesystem::create_directories(dir_);
    }

    static std::string key(const std::string& prompt, int run_index) {
        return sha256_hex(prompt) + "-r" + std::to_string(run_index);
    }

    std::optional<std::string> get(const std::string& key) const {
        std::ifstream in(dir_ / key, std::ios::binary);
        if (!in) return std::nullopt;
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    void put(const std::string& key, const std::string& value) const {
        std::ostringstream tid;
        tid << std::this_thread::get_id();
        const auto tmp = dir_ / (key + ".tmp" + tid.str());
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out << value;
            if (!out) throw Error("cache: cannot write " + tmp.string());
        }
        std::filesystem::rename(tmp, dir_ / key);
    }

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
};

struct Prediction {
    std::optional<int> rating;
    std::string raw;
    bool parse_error = false;
    bool cache_hit = false;
    std::string cache_key;
};

/// One judge call, served from the cache when possible. Unparseable replies
/// are cached too and surface as parse_error rather than as exceptions.
inline Prediction predict_rating(JudgeClient& client, const JudgeRequest& request, const ResponseCache* cache) {
    Prediction p;
    p.cache_key = ResponseCache::key(request.prompt, request.run_index);
    if (cache) {
        if (auto hit = cache->get(p.cache_key)) {
            p.raw = std::move(*hit);
            p.cache_hit = true;
        }
    }
    if (!p.cache_hit) {
        p.raw = client.complete(request);
        if (cache) cache->put(p.cache_key, p.raw);
    }
    p.rating = parse_rating(p.raw);
    p.parse_error = !p.rating;
    return p;
}

}  // namespace overton::judge
