#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "okh/corpus.hpp"
#include "okh/evidence.hpp"
#include "okh/parallel.hpp"
#include "okh/retriever.hpp"

namespace okh {

enum class AblationVariant { Full, Shuffled, NoLambda, NoMu, NoNu, NoRho, NoOrder, HeuristicOrder };

inline constexpr std::array<std::pair<AblationVariant, std::string_view>, 8> kVariantNames{{
    {AblationVariant::Full, "full"},
    {AblationVariant::Shuffled, "shuffled"},
    {AblationVariant::NoLambda, "no_lambda"},
    {AblationVariant::NoMu, "no_mu"},
    {AblationVariant::NoNu, "no_nu"},
    {AblationVariant::NoRho, "no_rho"},
    {AblationVariant::NoOrder, "no_order"},
    {AblationVariant::HeuristicOrder, "heuristic_order"},
}};

inline std::string_view to_string(AblationVariant v) {
    for (const auto& [x, name] : kVariantNames)
        if (x == v) return name;
    return "full";
}

inline AblationVariant parse_variant(std::string_view name) {
    for (const auto& [x, n] : kVariantNames)
        if (n == name) return x;
    throw ConfigError("unknown variant '" + std::string(name) + "'");
}

inline RetrievalWeights variant_weights(AblationVariant v, RetrievalWeights w) {
    switch (v) {
        case AblationVariant::NoLambda: w.lambda = 0; break;
        case AblationVariant::NoMu: w.mu = 0; break;
        case AblationVariant::NoNu: w.nu = 0; break;
        case AblationVariant::NoRho: w.rho = 0; break;
        case AblationVariant::NoOrder: w.lambda = 0; w.mu = 0; break;
        default: break;
    }
    return w;
}

// Frozen state shared by all evaluation queries.
struct EvalContext {
    const KnowledgeHypergraph& graph;
    const PrecedenceIndex& precedence;
    const EdgeEmbeddings& embeddings;
    const TransitionModel* model;  // required unless only heuristic/no-order variants run
    EmbeddingProvider& provider;
};

struct QueryOutcome {
    std::vector<std::string> steps;
    ScoreBreakdown breakdown;
    double total = 0.0;
    std::optional<double> tau;  // empty when fewer than two in-group steps
    std::string answer;
    bool correct = false;
};

struct AblationReport {
    std::string variant;
    std::size_t n_queries = 0;
    std::size_t n_tau = 0;
    double mean_tau = 0.0;
    double mean_prec = 0.0;
    double mean_ovlp = 0.0;
    double mean_cov = 0.0;
    double oracle_accuracy = 0.0;
    double mean_score = 0.0;
    std::vector<QueryOutcome> outcomes;
};

// Seeded permutation that differs from the identity whenever size >= 2.
inline void shuffle_non_identity(std::vector<std::size_t>& path, Rng& rng) {
    if (path.size() < 2) return;
    const auto original = path;
    do {
        rng.shuffle(path);
    } while (path == original);
}

// Kendall tau of the in-group steps against their canonical order.
inline std::optional<double> order_fidelity(const std::vector<std::string>& steps, const std::string& group,
                                            const PrecedenceIndex& precedence) {
    std::vector<std::string> in_group;
    const auto* g = precedence.group(group);
    if (!g) return std::nullopt;
    for (const auto& s : steps)
        if (g->contains(s)) in_group.push_back(s);
    if (in_group.size() < 2) return std::nullopt;
    auto canonical = in_group;
    std::sort(canonical.begin(), canonical.end(), [&](const std::string& a, const std::string& b) {
        return g->sequence_position(a) < g->sequence_position(b);
    });
    return kendall_tau(in_group, canonical);
}

inline AblationReport run_ablation(const EvalContext& ctx, AblationVariant variant, const std::vector<QaItem>& queries,
                                   const RetrievalOptions& base, std::uint64_t seed = 0, std::size_t threads = 0) {
    HeuristicTransitions heuristic(ctx.precedence);
    UniformTransitions uniform;
    std::optional<LearnedTransitions> learned;
    const TransitionScorer* scorer = nullptr;
    if (variant == AblationVariant::HeuristicOrder) {
        scorer = &heuristic;
    } else if (ctx.model) {
        learned.emplace(*ctx.model);
        scorer = &*learned;
    } else if (variant == AblationVariant::NoOrder || variant == AblationVariant::NoLambda) {
        scorer = &uniform;
    } else {
        throw ConfigError("variant " + std::string(to_string(variant)) + " needs a trained transition model");
    }

    RetrievalOptions options = base;
    options.weights = variant_weights(variant, base.weights);
    const Retriever retriever(ctx.graph, ctx.precedence, ctx.embeddings, *scorer, ctx.provider);

    AblationReport report;
    report.variant = std::string(to_string(variant));
    report.n_queries = queries.size();
    report.outcomes.resize(queries.size());
    parallel_for(
        queries.size(),
        [&](std::size_t i) {
            const QaItem& q = queries[i];
            const auto sc = retriever.context(retriever.embed_query(q.question), options, q.group);
            const auto result = beam_search(sc, options.weights, options.search);
            QueryOutcome out;
            if (!result.paths.empty()) {
                Path path = result.paths.front();
                if (variant == AblationVariant::Shuffled) {
                    Rng rng(seed ^ fnv1a64(q.id));
                    shuffle_non_identity(path, rng);
                }
                const auto t = make_trajectory(sc, path, options.weights);
                out.steps = t.steps;
                out.breakdown = t.breakdown;
                out.total = t.total;
            }
            out.tau = order_fidelity(out.steps, q.group, ctx.precedence);
            out.answer = oracle_answer(q, out.steps, ctx.graph);
            out.correct = !out.answer.empty() && out.answer == q.answer;
            report.outcomes[i] = std::move(out);
        },
        threads);

    double tau = 0, prec = 0, ovlp = 0, cov = 0, score = 0;
    std::size_t correct = 0;
    for (const auto& o : report.outcomes) {
        if (o.tau) {
            tau += *o.tau;
            ++report.n_tau;
        }
        prec += o.breakdown.precedence;
        ovlp += o.breakdown.continuity;
        cov += o.breakdown.coverage;
        score += o.total;
        correct += o.correct ? 1 : 0;
    }
    const double n = std::max<double>(1.0, static_cast<double>(queries.size()));
    report.mean_tau = report.n_tau ? tau / static_cast<double>(report.n_tau) : 0.0;
    report.mean_prec = prec / n;
    report.mean_ovlp = ovlp / n;
    report.mean_cov = cov / n;
    report.mean_score = score / n;
    report.oracle_accuracy = static_cast<double>(correct) / n;
    return report;
}

inline nlohmann::json to_json(const AblationReport& r) {
    return {{"variant", r.variant},         {"n_queries", r.n_queries}, {"mean_tau", r.mean_tau},
            {"mean_prec", r.mean_prec},     {"mean_ovlp", r.mean_ovlp}, {"mean_cov", r.mean_cov},
            {"oracle_accuracy", r.oracle_accuracy}, {"mean_score", r.mean_score}};
}

inline std::string format_report_table(const std::vector<AblationReport>& reports) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-16s %9s %9s %9s %9s %9s %9s %10s\n", "variant", "queries", "tau", "prec", "ovlp",
                  "cov", "accuracy", "score");
    out += line;
    for (const auto& r : reports) {
        std::snprintf(line, sizeof line, "%-16s %9zu %9.4f %9.4f %9.4f %9.4f %9.4f %10.4f\n", r.variant.c_str(),
                      r.n_queries, r.mean_tau, r.mean_prec, r.mean_ovlp, r.mean_cov, r.oracle_accuracy, r.mean_score);
        out += line;
    }
    return out;
}

}  // namespace okh
