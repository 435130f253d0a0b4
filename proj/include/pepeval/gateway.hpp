#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pepeval/prompts.hpp"
#include "pepeval/sha256.hpp"
#include "pepeval/util.hpp"

namespace pepeval {

struct TokenUsage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::int64_t total_tokens = 0;

    json to_json() const {
        return json{{"prompt_tokens", prompt_tokens},
                    {"completion_tokens", completion_tokens},
                    {"total_tokens", total_tokens}};
    }
    static TokenUsage from_json(const json& j) {
        TokenUsage u;
        u.prompt_tokens = j.value("prompt_tokens", 0);
        u.completion_tokens = j.value("completion_tokens", 0);
        u.total_tokens = j.value("total_tokens", 0);
        return u;
    }
};

enum class FinishReason { stop, length, error };

inline std::string to_string(FinishReason r) {
    switch (r) {
        case FinishReason::stop: return "stop";
        case FinishReason::length: return "length";
        case FinishReason::error: return "error";
    }
    return "error";
}

inline FinishReason finish_reason_from(std::string_view s) {
    if (s == "stop") return FinishReason::stop;
    if (s == "length") return FinishReason::length;
    return FinishReason::error;
}

struct GenRequest {
    std::string model;
    PromptText prompt;
    double temperature = 0.0;
    int max_tokens = 1024;
    int sample_index = 0;
    std::vector<std::string> stop;

    void validate() const {
        if (temperature < 0) throw std::invalid_argument("temperature must be non-negative");
        if (max_tokens <= 0) throw std::invalid_argument("max_tokens must be positive");
        if (sample_index < 0) throw std::invalid_argument("sample_index must be non-negative");
        if (temperature == 0.0 && sample_index != 0)
            throw std::invalid_argument("greedy requests use sample_index 0");
    }
};

struct GenResponse {
    std::string text;
    FinishReason finish_reason = FinishReason::stop;
    TokenUsage usage;
    bool cached = false;
    std::int64_t latency_ms = 0;
};

struct CacheKey {
    std::string digest;  // 64 hex chars

    friend bool operator==(const CacheKey& a, const CacheKey& b) { return a.digest == b.digest; }
};

/// Content address of a request: any byte change in the listed fields
/// changes the digest; wall clock and field iteration order never do.
inline CacheKey cache_key(const GenRequest& req, std::string_view backend_id) {
    Sha256 h;
    auto field = [&h](std::string_view name, std::string_view value) {
        h.update(name);
        h.update("=");
        h.update(std::to_string(value.size()));
        h.update(":");
        h.update(value);
        h.update("\x1f");
    };
    char temp[32];
    std::snprintf(temp, sizeof(temp), "%.6g", req.temperature);
    field("backend", backend_id);
    field("model", req.model);
    field("temperature", temp);
    field("max_tokens", std::to_string(req.max_tokens));
    field("sample_index", std::to_string(req.sample_index));
    for (const std::string& s : req.stop) field("stop", s);
    field("prompt", req.prompt.text);
    return CacheKey{h.hex_digest()};
}

class GatewayError : public std::runtime_error {
public:
    enum class Kind { config, auth, rate_limit, timeout, network, malformed };

    GatewayError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}

    Kind kind() const { return kind_; }
    bool retryable() const {
        return kind_ == Kind::rate_limit || kind_ == Kind::timeout || kind_ == Kind::network;
    }

private:
    Kind kind_;
};

/// Append-only on-disk response store. Layout: one `records-<run>.jsonl`
/// file per writer plus a shared `index.jsonl` listing committed digests.
/// Readers see every committed record; writers only ever append.
class ResponseCache {
public:
    ResponseCache(std::filesystem::path dir, std::string run_id)
        : dir_(std::move(dir)), run_id_(std::move(run_id)) {
        std::filesystem::create_directories(dir_);
        load_existing();
    }

    std::optional<GenResponse> lookup(const CacheKey& key) const {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = entries_.find(key.digest);
        if (it == entries_.end()) return std::nullopt;
        GenResponse r = it->second;
        r.cached = true;
        return r;
    }

    void store(const CacheKey& key, const GenResponse& resp) {
        std::lock_guard<std::mutex> lock(mutex_);
        if (entries_.count(key.digest)) return;  // first write wins
        json rec{{"digest", key.digest},
                 {"text", resp.text},
                 {"finish_reason", to_string(resp.finish_reason)},
                 {"usage", resp.usage.to_json()},
                 {"latency_ms", resp.latency_ms}};
        append_line(records_path(), rec.dump());
        append_line(dir_ / "index.jsonl",
                    json{{"digest", key.digest}, {"file", records_filename()}}.dump());
        entries_.emplace(key.digest, resp);
    }

    size_t size() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return entries_.size();
    }

    const std::filesystem::path& dir() const { return dir_; }

    /// Rebuilds index.jsonl from the record files, dropping duplicate
    /// digests. Returns (records kept, duplicates dropped).
    std::pair<size_t, size_t> gc() {
        std::lock_guard<std::mutex> lock(mutex_);
        size_t kept = 0, dropped = 0;
        std::string index_text;
        std::map<std::string, bool> seen;
        for (const auto& file : record_files()) {
            for (const std::string& line : split_lines(read_file(file))) {
                if (trim(line).empty()) continue;
                json rec = json::parse(line, nullptr, false);
                if (rec.is_discarded() || !rec.contains("digest")) continue;
                std::string digest = rec["digest"].get<std::string>();
                if (seen.emplace(digest, true).second) {
                    index_text += json{{"digest", digest}, {"file", file.filename().string()}}.dump();
                    index_text += '\n';
                    ++kept;
                } else {
                    ++dropped;
                }
            }
        }
        write_file(dir_ / "index.jsonl", index_text);
        return {kept, dropped};
    }

private:
    std::vector<std::filesystem::path> record_files() const {
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
            const std::string name = entry.path().filename().string();
            if (starts_with(name, "records-") && ends_with(name, ".jsonl"))
                files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        return files;
    }

    void load_existing() {
        for (const auto& file : record_files()) {
            for (const std::string& line : split_lines(read_file(file))) {
                if (trim(line).empty()) continue;
                json rec = json::parse(line, nullptr, false);
                if (rec.is_discarded() || !rec.contains("digest")) continue;  // torn tail line
                GenResponse r;
                r.text = rec.value("text", "");
                r.finish_reason = finish_reason_from(rec.value("finish_reason", "stop"));
                if (rec.contains("usage")) r.usage = TokenUsage::from_json(rec["usage"]);
                r.latency_ms = rec.value("latency_ms", 0);
                entries_.emplace(rec["digest"].get<std::string>(), std::move(r));
            }
        }
    }

    std::string records_filename() const { return "records-" + run_id_ + ".jsonl"; }
    std::filesystem::path records_path() const { return dir_ / records_filename(); }

    static void append_line(const std::filesystem::path& path, const std::string& line) {
        std::ofstream out(path, std::ios::binary | std::ios::app);
        if (!out) throw std::runtime_error("cannot append to " + path.string());
        out << line << '\n';
        out.flush();
    }

    std::filesystem::path dir_;
    std::string run_id_;
    mutable std::mutex mutex_;
    std::map<std::string, GenResponse> entries_;
};

enum class BackendKind { mock, openai_chat, openai_completions };

inline std::string to_string(BackendKind k) {
    switch (k) {
        case BackendKind::mock: return "mock";
        case BackendKind::openai_chat: return "openai_chat";
        case BackendKind::openai_completions: return "openai_completions";
    }
    return "mock";
}

inline std::optional<BackendKind> backend_from(std::string_view s) {
    if (s == "mock") return BackendKind::mock;
    if (s == "openai_chat" || s == "openai-chat" || s == "chat") return BackendKind::openai_chat;
    if (s == "openai_completions" || s == "openai-completions" || s == "completions")
        return BackendKind::openai_completions;
    return std::nullopt;
}

struct BackendConfig {
    BackendKind kind = BackendKind::mock;
    std::string base_url;                           // e.g. https://api.openai.com/v1
    std::string api_key_env = "PEPEVAL_API_KEY";    // falls back to OPENAI_API_KEY
    std::string mock_script;                        // path to a script file, or inline json
    int http_timeout_s = 120;

    json to_json() const {
        return json{{"kind", to_string(kind)},
                    {"base_url", base_url},
                    {"api_key_env", api_key_env},
                    {"mock_script", mock_script},
                    {"http_timeout_s", http_timeout_s}};
    }
    static BackendConfig from_json(const json& j) {
        BackendConfig c;
        if (auto k = backend_from(j.value("kind", "mock"))) c.kind = *k;
        c.base_url = j.value("base_url", "");
        c.api_key_env = j.value("api_key_env", "PEPEVAL_API_KEY");
        c.mock_script = j.value("mock_script", "");
        c.http_timeout_s = j.value("http_timeout_s", 120);
        return c;
    }
};

struct RetryPolicy {
    int max_attempts = 5;
    int initial_backoff_ms = 250;
    double backoff_multiplier = 2.0;
    int max_backoff_ms = 20000;
    int max_inflight = 4;

    json to_json() const {
        return json{{"max_attempts", max_attempts},
                    {"initial_backoff_ms", initial_backoff_ms},
                    {"backoff_multiplier", backoff_multiplier},
                    {"max_backoff_ms", max_backoff_ms},
                    {"max_inflight", max_inflight}};
    }
    static RetryPolicy from_json(const json& j) {
        RetryPolicy p;
        p.max_attempts = j.value("max_attempts", 5);
        p.initial_backoff_ms = j.value("initial_backoff_ms", 250);
        p.backoff_multiplier = j.value("backoff_multiplier", 2.0);
        p.max_backoff_ms = j.value("max_backoff_ms", 20000);
        p.max_inflight = j.value("max_inflight", 4);
        return p;
    }
};

namespace detail {

class Semaphore {
public:
    explicit Semaphore(int count) : count_(count < 1 ? 1 : count) {}

    void acquire() {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [this] { return count_ > 0; });
        --count_;
    }
    void release() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            ++count_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int count_;
};

struct SemaphoreGuard {
    explicit SemaphoreGuard(Semaphore& s) : sem(s) { sem.acquire(); }
    ~SemaphoreGuard() { sem.release(); }
    Semaphore& sem;
};

/// Deterministic offline backend. Modes:
///   scripted - digest table plus substring rules
///   echo     - canned solution embedding a configured answer
///   fault    - injected failures before delegating to an inner mode
class MockBackend {
public:
    explicit MockBackend(const std::string& script) {
        if (script.empty()) {
            config_ = json{{"mode", "echo"}, {"answer", "0"}};
        } else if (!script.empty() && script.front() == '{') {
            config_ = json::parse(script);
        } else {
            config_ = json::parse(read_file(script));
        }
    }

    std::string respond(const GenRequest& req, const std::string& digest) {
        // optional artificial latency for concurrency tests; response bytes
        // stay deterministic
        if (int delay = config_.value("delay_ms", 0); delay > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        return respond(config_, req, digest);
    }

private:
    std::string respond(const json& cfg, const GenRequest& req, const std::string& digest) {
        const std::string mode = cfg.value("mode", "scripted");
        if (mode == "echo") {
            std::string answer;
            if (cfg.contains("answers")) {
                const auto& answers = cfg["answers"];
                answer = answers[static_cast<size_t>(req.sample_index) % answers.size()]
                             .get<std::string>();
            } else {
                answer = cfg.value("answer", "0");
            }
            std::string tpl = cfg.value(
                "template", std::string("Step 1: read the problem.\nStep 2: compute the result.\n"
                                        "Final answer: \\boxed{{answer}}"));
            return replace_all(tpl, "{answer}", answer);
        }
        if (mode == "fault") {
            const int failures = cfg.value("failures_before_success", 1);
            const std::string kind = cfg.value("fault_kind", "rate_limit");
            int seen;
            {
                std::lock_guard<std::mutex> lock(mutex_);
                seen = attempt_counts_[digest]++;
            }
            if (seen < failures) {
                if (kind == "timeout")
                    throw GatewayError(GatewayError::Kind::timeout, "mock: injected timeout");
                if (kind == "server_error")
                    throw GatewayError(GatewayError::Kind::network, "mock: injected 500");
                if (kind == "auth")
                    throw GatewayError(GatewayError::Kind::auth, "mock: injected 401");
                throw GatewayError(GatewayError::Kind::rate_limit, "mock: injected 429");
            }
            if (cfg.contains("inner")) return respond(cfg["inner"], req, digest);
            return "Final answer: \\boxed{0}";
        }
        // scripted
        if (cfg.contains("responses")) {
            const auto& table = cfg["responses"];
            if (table.contains(digest)) return table[digest].get<std::string>();
        }
        if (cfg.contains("rules")) {
            for (const json& rule : cfg["rules"]) {
                if (rule.contains("sample_index") &&
                    rule["sample_index"].get<int>() != req.sample_index)
                    continue;
                if (rule.contains("contains") &&
                    req.prompt.text.find(rule["contains"].get<std::string>()) == std::string::npos)
                    continue;
                return rule.at("text").get<std::string>();
            }
        }
        if (cfg.contains("default")) return cfg["default"].get<std::string>();
        throw GatewayError(GatewayError::Kind::malformed,
                           "mock: no rule matched prompt for digest " + digest.substr(0, 12));
    }

    json config_;
    std::mutex mutex_;
    std::map<std::string, int> attempt_counts_;
};

}  // namespace detail

/// Issues generation requests against the configured backend with a
/// content-addressed cache, bounded in-flight concurrency and exponential
/// backoff on transient failures. Shareable across worker threads.
class Gateway {
public:
    Gateway(BackendConfig config, RetryPolicy policy, std::shared_ptr<ResponseCache> cache = nullptr)
        : config_(std::move(config)),
          policy_(policy),
          cache_(std::move(cache)),
          semaphore_(policy.max_inflight) {
        if (config_.kind == BackendKind::mock)
            mock_ = std::make_unique<detail::MockBackend>(config_.mock_script);
    }

    std::string backend_id() const {
        if (config_.kind == BackendKind::mock) return "mock";
        return to_string(config_.kind) + ":" + config_.base_url;
    }

    CacheKey key_for(const GenRequest& req) const { return cache_key(req, backend_id()); }

    /// Cache hit -> stored response, no backend call. Miss -> bounded,
    /// retried backend call whose response is committed before returning.
    GenResponse generate(const GenRequest& req) {
        req.validate();
        const CacheKey key = key_for(req);
        if (cache_) {
            if (auto hit = cache_->lookup(key)) {
                cache_hits_.fetch_add(1);
                return *hit;
            }
        }
        detail::SemaphoreGuard slot(semaphore_);
        if (cache_) {
            // another worker may have filled the entry while we waited
            if (auto hit = cache_->lookup(key)) {
                cache_hits_.fetch_add(1);
                return *hit;
            }
        }
        const int now = inflight_.fetch_add(1) + 1;
        int prev = peak_inflight_.load();
        while (now > prev && !peak_inflight_.compare_exchange_weak(prev, now)) {
        }
        GenResponse resp;
        try {
            resp = call_with_retries(req, key);
        } catch (...) {
            inflight_.fetch_sub(1);
            throw;
        }
        inflight_.fetch_sub(1);
        if (cache_) cache_->store(key, resp);
        return resp;
    }

    std::int64_t network_calls() const { return network_calls_.load(); }
    std::int64_t cache_hits() const { return cache_hits_.load(); }
    int peak_inflight() const { return peak_inflight_.load(); }
    const BackendConfig& config() const { return config_; }

private:
    GenResponse call_with_retries(const GenRequest& req, const CacheKey& key) {
        int backoff = policy_.initial_backoff_ms;
        for (int attempt = 1;; ++attempt) {
            try {
                return call_backend(req, key);
            } catch (const GatewayError& e) {
                if (!e.retryable() || attempt >= policy_.max_attempts) throw;
                std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
                backoff = std::min(static_cast<int>(backoff * policy_.backoff_multiplier),
                                   policy_.max_backoff_ms);
            }
        }
    }

    GenResponse call_backend(const GenRequest& req, const CacheKey& key);

    BackendConfig config_;
    RetryPolicy policy_;
    std::shared_ptr<ResponseCache> cache_;
    detail::Semaphore semaphore_;
    std::unique_ptr<detail::MockBackend> mock_;
    std::atomic<std::int64_t> network_calls_{0};
    std::atomic<std::int64_t> cache_hits_{0};
    std::atomic<int> inflight_{0};
    std::atomic<int> peak_inflight_{0};
};

}  // namespace pepeval

// The HTTP leg lives in a separate header so that pulling in the gateway
// types does not force cpp-httplib (and its OpenSSL define) on every TU.
#include "pepeval/gateway_http.hpp"
