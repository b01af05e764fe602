#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "okh/embedding.hpp"
#include "okh/hypergraph.hpp"
#include "okh/precedence.hpp"
#include "okh/retrieval.hpp"
#include "okh/transition.hpp"

namespace okh {

// Supplies the |C| x |C| log-transition table for a candidate set.
class TransitionScorer {
public:
    virtual ~TransitionScorer() = default;
    virtual std::vector<std::vector<double>> matrix(const std::vector<std::string>& ids,
                                                    const EdgeEmbeddings& embeddings) const = 0;
};

class LearnedTransitions final : public TransitionScorer {
public:
    explicit LearnedTransitions(const TransitionModel& model) : model_(&model) {}

    std::vector<std::vector<double>> matrix(const std::vector<std::string>& ids,
                                            const EdgeEmbeddings& embeddings) const override {
        std::vector<const Vector*> vecs;
        vecs.reserve(ids.size());
        for (const auto& id : ids) vecs.push_back(&embeddings.at(id));
        return model_->logprob_matrix(vecs);
    }

private:
    const TransitionModel* model_;
};

// Rule scores in place of learned log-probabilities: 0 when prev precedes
// next, -1 when unrelated, -5 when next precedes prev.
class HeuristicTransitions final : public TransitionScorer {
public:
    static constexpr double kForward = 0.0;
    static constexpr double kUnrelated = -1.0;
    static constexpr double kBackward = -5.0;

    explicit HeuristicTransitions(const PrecedenceIndex& precedence) : precedence_(&precedence) {}

    std::vector<std::vector<double>> matrix(const std::vector<std::string>& ids, const EdgeEmbeddings&) const override {
        std::vector<std::vector<double>> out(ids.size(), std::vector<double>(ids.size(), kUnrelated));
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t j = 0; j < ids.size(); ++j) {
                if (i == j) continue;
                switch (precedence_->precedes(ids[i], ids[j])) {
                    case Order::Before: out[i][j] = kForward; break;
                    case Order::After: out[i][j] = kBackward; break;
                    case Order::Unrelated: break;
                }
            }
        return out;
    }

private:
    const PrecedenceIndex* precedence_;
};

// Uniform transitions: log(1/|C|) everywhere.
class UniformTransitions final : public TransitionScorer {
public:
    std::vector<std::vector<double>> matrix(const std::vector<std::string>& ids, const EdgeEmbeddings&) const override {
        const double v = ids.empty() ? 0.0 : -std::log(static_cast<double>(ids.size()));
        return std::vector<std::vector<double>>(ids.size(), std::vector<double>(ids.size(), v));
    }
};

struct RetrievalOptions {
    RetrievalWeights weights{};
    SearchConfig search{};
    ScopeConfig scope{};
};

struct RetrievalResult {
    std::string query;
    std::vector<Trajectory> trajectories;
};

// Frozen retrieval state: hypergraph, precedence, edge embeddings, a
// transition scorer and the provider used for query text.
class Retriever {
public:
    Retriever(const KnowledgeHypergraph& graph, const PrecedenceIndex& precedence, const EdgeEmbeddings& embeddings,
              const TransitionScorer& transitions, EmbeddingProvider& provider)
        : graph_(&graph), precedence_(&precedence), embeddings_(&embeddings), transitions_(&transitions),
          provider_(&provider) {}

    Vector embed_query(const std::string& query) const {
        auto v = provider_->embed({query});
        if (v.size() != 1) throw ProviderError(0, "provider returned no query embedding");
        if (!normalize_in_place(v[0])) throw ZeroNorm();
        return std::move(v[0]);
    }

    ScoringContext context(const Vector& query, const RetrievalOptions& options,
                           const std::optional<std::string>& query_group = std::nullopt) const {
        auto scoped = scope_candidates(query, *graph_, *embeddings_, options.scope, query_group);
        auto trans = transitions_->matrix(scoped.ids, *embeddings_);
        return ScoringContext::build(*graph_, *precedence_, std::move(scoped.ids), std::move(scoped.relevance),
                                     std::move(trans));
    }

    RetrievalResult retrieve_vector(const std::string& query_text, const Vector& query, const RetrievalOptions& options,
                                    const std::optional<std::string>& query_group = std::nullopt) const {
        const auto ctx = context(query, options, query_group);
        return {query_text, beam_search(ctx, options.weights, options.search).trajectories};
    }

    RetrievalResult retrieve(const std::string& query, const RetrievalOptions& options,
                             const std::optional<std::string>& query_group = std::nullopt) const {
        return retrieve_vector(query, embed_query(query), options, query_group);
    }

private:
    const KnowledgeHypergraph* graph_;
    const PrecedenceIndex* precedence_;
    const EdgeEmbeddings* embeddings_;
    const TransitionScorer* transitions_;
    EmbeddingProvider* provider_;
};

inline nlohmann::json to_json(const Trajectory& t) {
    return {{"steps", t.steps},
            {"total", t.total},
            {"breakdown",
             {{"relevance", t.breakdown.relevance},
              {"coherence", t.breakdown.coherence},
              {"precedence", t.breakdown.precedence},
              {"continuity", t.breakdown.continuity},
              {"coverage", t.breakdown.coverage}}}};
}

inline nlohmann::json to_json(const RetrievalResult& r) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& t : r.trajectories) list.push_back(to_json(t));
    return {{"query", r.query}, {"trajectories", std::move(list)}};
}

}  // namespace okh
