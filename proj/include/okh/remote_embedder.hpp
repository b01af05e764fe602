#pragma once

#include <string>
#include <utility>
#include <vector>

#include "okh/embedding.hpp"
#include "okh/http.hpp"

namespace okh {

inline constexpr const char* kEmbedApiKeyEnv = "OKH_EMBED_API_KEY";

struct RemoteEmbedderConfig {
    std::string endpoint;
    std::string model = "text-embedding-3-small";
    std::size_t dimension = 1536;
    std::size_t batch_size = 64;
    RetryPolicy retry{};
    std::string api_key = env_or_empty(kEmbedApiKeyEnv);
};

class RemoteEmbedder final : public EmbeddingProvider {
public:
    explicit RemoteEmbedder(RemoteEmbedderConfig config)
        : config_(std::move(config)), endpoint_(HttpEndpoint::parse(config_.endpoint)) {
        if (config_.batch_size == 0) throw ConfigError("embedding batch size must be positive");
    }

    std::size_t dimension() const override { return config_.dimension; }
    std::string id() const override { return "remote-" + config_.model + "-" + std::to_string(config_.dimension); }

    std::vector<Vector> embed(const std::vector<std::string>& texts) override {
        std::vector<Vector> out;
        out.reserve(texts.size());
        for (std::size_t start = 0; start < texts.size(); start += config_.batch_size) {
            const std::size_t end = std::min(texts.size(), start + config_.batch_size);
            std::vector<std::string> batch(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                           texts.begin() + static_cast<std::ptrdiff_t>(end));
            auto vectors = embed_batch(batch);
            for (auto& v : vectors) out.push_back(std::move(v));
        }
        return out;
    }

private:
    std::vector<Vector> embed_batch(const std::vector<std::string>& batch) {
        const nlohmann::json body{{"model", config_.model}, {"input", batch}};
        const auto res = post_json_with_retry(endpoint_, "/embeddings", body, config_.api_key, config_.retry);
        const auto data = res.find("data");
        if (data == res.end() || !data->is_array()) throw ProviderError(200, "response lacks a data array");
        std::vector<Vector> out(batch.size());
        std::vector<bool> seen(batch.size(), false);
        for (const auto& item : *data) {
            const auto index = item.value("index", static_cast<std::size_t>(-1));
            if (index >= batch.size() || seen[index]) throw ProviderError(200, "bad or duplicate embedding index");
            Vector v = item.at("embedding").get<Vector>();
            if (v.size() != config_.dimension) throw DimensionMismatch(config_.dimension, v.size());
            if (!normalize_in_place(v)) throw ZeroNorm();
            out[index] = std::move(v);
            seen[index] = true;
        }
        for (bool s : seen)
            if (!s) throw ProviderError(200, "response is missing embeddings");
        return out;
    }

    RemoteEmbedderConfig config_;
    HttpEndpoint endpoint_;
};

}  // namespace okh
