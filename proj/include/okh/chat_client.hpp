#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "okh/evidence.hpp"
#include "okh/http.hpp"

namespace okh {

struct ChatMessage {
    std::string role;
    std::string content;
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

struct HttpChatConfig {
    std::string endpoint;
    std::string model;
    RetryPolicy retry{};
    std::string api_key = env_or_empty("OKH_EMBED_API_KEY");
};

// POST <endpoint>/chat {"model", "messages"}. The reply text is read from
// "content", "message.content" or "choices[0].message.content".
class HttpChatClient final : public ChatClient {
public:
    explicit HttpChatClient(HttpChatConfig config)
        : config_(std::move(config)), endpoint_(HttpEndpoint::parse(config_.endpoint)) {}

    std::string complete(const std::vector<ChatMessage>& messages) override {
        nlohmann::json msgs = nlohmann::json::array();
        for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
        const auto res = post_json_with_retry(endpoint_, "/chat", {{"model", config_.model}, {"messages", msgs}},
                                              config_.api_key, config_.retry);
        if (res.contains("content") && res["content"].is_string()) return res["content"];
        if (res.contains("message")) return res["message"].at("content");
        if (res.contains("choices") && !res["choices"].empty()) return res["choices"][0]["message"].at("content");
        throw ProviderError(200, "chat response has no content");
    }

private:
    HttpChatConfig config_;
    HttpEndpoint endpoint_;
};

// Extracts the outermost JSON object from a model reply.
inline AnswerRecord parse_answer_text(const std::string& reply) {
    const auto b = reply.find('{');
    const auto e = reply.rfind('}');
    if (b == std::string::npos || e == std::string::npos || e < b) throw SchemaError("/", "reply holds no JSON object");
    try {
        return answer_from_json(nlohmann::json::parse(reply.substr(b, e - b + 1)));
    } catch (const nlohmann::json::exception& ex) {
        throw SchemaError("/", std::string("reply is not a valid answer: ") + ex.what());
    }
}

inline AnswerRecord answer_with_prompt(ChatClient& client, const std::string& prompt) {
    return parse_answer_text(client.complete({{"user", prompt}}));
}

// Fallback mode: one call per trajectory, then aggregation.
inline AnswerRecord answer_per_trajectory(ChatClient& client, const std::string& query,
                                          const std::vector<Trajectory>& trajectories,
                                          const KnowledgeHypergraph& graph, AnswerKind kind) {
    std::vector<AnswerRecord> records;
    for (const auto& t : trajectories) records.push_back(answer_with_prompt(client, assemble_prompt(query, {t}, graph)));
    return aggregate_answers(records, kind);
}

}  // namespace okh
