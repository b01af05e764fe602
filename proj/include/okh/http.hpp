#pragma once

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>

#include <httplib.h>
// <resolv.h> defines _res, which collides with identifiers in Eigen.
#ifdef _res
#undef _res
#endif
#include <nlohmann/json.hpp>

#include "okh/error.hpp"

namespace okh {

struct HttpEndpoint {
    std::string base;    // scheme://host[:port]
    std::string prefix;  // path prefix without trailing slash

    static HttpEndpoint parse(const std::string& url) {
        const auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) throw ConfigError("endpoint must include a scheme: " + url);
        const auto path_start = url.find('/', scheme_end + 3);
        HttpEndpoint ep;
        ep.base = url.substr(0, path_start);
        if (path_start != std::string::npos) ep.prefix = url.substr(path_start);
        while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
        return ep;
    }
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    std::chrono::seconds timeout{60};
};

inline std::string env_or_empty(const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
}

inline bool retryable_status(int status) { return status == 429 || status >= 500; }

// POSTs a JSON body with bearer auth, retrying transport failures, 429 and 5xx
// with exponential backoff. Returns the parsed response body.
inline nlohmann::json post_json_with_retry(const HttpEndpoint& ep, const std::string& path,
                                           const nlohmann::json& body, const std::string& api_key,
                                           const RetryPolicy& policy) {
    httplib::Client client(ep.base);
    client.set_connection_timeout(policy.timeout);
    client.set_read_timeout(policy.timeout);
    client.set_write_timeout(policy.timeout);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    const std::string payload = body.dump();
    auto backoff = policy.initial_backoff;
    int last_status = 0;
    std::string last_body;
    for (int attempt = 1; attempt <= policy.attempts; ++attempt) {
        auto res = client.Post(ep.prefix + path, headers, payload, "application/json");
        if (res) {
            last_status = res->status;
            last_body = res->body.substr(0, 512);
            if (res->status >= 200 && res->status < 300) {
                try {
                    return nlohmann::json::parse(res->body);
                } catch (const nlohmann::json::parse_error&) {
                    throw ProviderError(res->status, "response is not JSON: " + last_body);
                }
            }
            if (!retryable_status(res->status)) throw ProviderError(res->status, last_body);
        } else {
            last_status = 0;
            last_body = httplib::to_string(res.error());
        }
        if (attempt < policy.attempts) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    throw ProviderError(last_status, last_body);
}

}  // namespace okh
