#pragma once

// Implementation of Gateway::call_backend. Kept out of gateway.hpp so the
// declaration-heavy header stays readable; include order is managed by
// gateway.hpp itself.

#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

namespace pepeval {

namespace detail {

inline std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    // scheme://host[:port][/path] -> (scheme://host[:port], /path)
    size_t scheme = base_url.find("://");
    size_t path_start = scheme == std::string::npos ? base_url.find('/')
                                                    : base_url.find('/', scheme + 3);
    if (path_start == std::string::npos) return {base_url, ""};
    std::string host = base_url.substr(0, path_start);
    std::string path = base_url.substr(path_start);
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {host, path};
}

inline std::string resolve_api_key(const BackendConfig& config) {
    if (!config.api_key_env.empty()) {
        if (const char* v = std::getenv(config.api_key_env.c_str()); v && *v) return v;
    }
    if (const char* v = std::getenv("OPENAI_API_KEY"); v && *v) return v;
    return "";
}

}  // namespace detail

inline GenResponse Gateway::call_backend(const GenRequest& req, const CacheKey& key) {
    const auto t0 = std::chrono::steady_clock::now();

    if (config_.kind == BackendKind::mock) {
        network_calls_.fetch_add(1);
        GenResponse resp;
        resp.text = mock_->respond(req, key.digest);
        resp.finish_reason = FinishReason::stop;
        resp.usage.prompt_tokens = static_cast<std::int64_t>(req.prompt.text.size() / 4);
        resp.usage.completion_tokens = static_cast<std::int64_t>(resp.text.size() / 4);
        resp.usage.total_tokens = resp.usage.prompt_tokens + resp.usage.completion_tokens;
        resp.latency_ms = 0;  // mock runs are byte-reproducible
        return resp;
    }

    if (config_.base_url.empty())
        throw GatewayError(GatewayError::Kind::config, "backend base_url not configured");
    const std::string api_key = detail::resolve_api_key(config_);
    if (api_key.empty())
        throw GatewayError(GatewayError::Kind::auth,
                           "no API key in $" + config_.api_key_env + " or $OPENAI_API_KEY");

    auto [host, prefix] = detail::split_base_url(config_.base_url);
    if (prefix.empty()) prefix = "/v1";
    const bool chat = config_.kind == BackendKind::openai_chat;
    const std::string path = prefix + (chat ? "/chat/completions" : "/completions");

    json payload{{"model", req.model},
                 {"temperature", req.temperature},
                 {"max_tokens", req.max_tokens},
                 {"n", 1}};
    if (chat) {
        payload["messages"] = json::array({json{{"role", "user"}, {"content", req.prompt.text}}});
    } else {
        payload["prompt"] = req.prompt.text;
    }
    if (!req.stop.empty()) payload["stop"] = req.stop;

    httplib::Client client(host);
    client.set_connection_timeout(config_.http_timeout_s, 0);
    client.set_read_timeout(config_.http_timeout_s, 0);
    client.set_write_timeout(config_.http_timeout_s, 0);
    httplib::Headers headers{{"Authorization", "Bearer " + api_key}};

    network_calls_.fetch_add(1);
    auto result = client.Post(path, headers, payload.dump(), "application/json");
    const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - t0)
                             .count();

    if (!result) {
        const auto err = result.error();
        if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
            err == httplib::Error::Write)
            throw GatewayError(GatewayError::Kind::timeout,
                               "request timed out: " + httplib::to_string(err));
        throw GatewayError(GatewayError::Kind::network,
                           "connection failed: " + httplib::to_string(err));
    }
    if (result->status == 401 || result->status == 403)
        throw GatewayError(GatewayError::Kind::auth,
                           "authentication rejected (HTTP " + std::to_string(result->status) + ")");
    if (result->status == 429)
        throw GatewayError(GatewayError::Kind::rate_limit, "rate limited (HTTP 429)");
    if (result->status >= 500)
        throw GatewayError(GatewayError::Kind::network,
                           "server error (HTTP " + std::to_string(result->status) + ")");
    if (result->status != 200)
        throw GatewayError(GatewayError::Kind::malformed,
                           "unexpected HTTP status " + std::to_string(result->status) + ": " +
                               result->body.substr(0, 200));

    json body = json::parse(result->body, nullptr, false);
    if (body.is_discarded() || !body.contains("choices") || body["choices"].empty())
        throw GatewayError(GatewayError::Kind::malformed,
                           "response body is not a completions payload");
    const json& choice = body["choices"][0];

    GenResponse resp;
    try {
        if (chat)
            resp.text = choice.at("message").at("content").get<std::string>();
        else
            resp.text = choice.at("text").get<std::string>();
    } catch (const json::exception& e) {
        throw GatewayError(GatewayError::Kind::malformed,
                           std::string("missing completion text: ") + e.what());
    }
    resp.finish_reason = finish_reason_from(choice.value("finish_reason", "stop"));
    if (body.contains("usage")) resp.usage = TokenUsage::from_json(body["usage"]);
    resp.latency_ms = latency;
    return resp;
}

}  // namespace pepeval
