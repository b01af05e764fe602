#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "okh/embedding.hpp"
#include "okh/error.hpp"
#include "okh/hypergraph.hpp"
#include "okh/precedence.hpp"

namespace okh {

struct RetrievalWeights {
    double lambda = 1.2;  // order coherence
    double mu = 0.3;      // precedence consistency
    double nu = 0.2;      // entity continuity
    double rho = 0.5;     // phase coverage

    static RetrievalWeights zero() { return {0.0, 0.0, 0.0, 0.0}; }

    void validate() const {
        if (!(lambda >= 0 && mu >= 0 && nu >= 0 && rho >= 0)) throw ConfigError("retrieval weights must be non-negative");
    }
};

struct SearchConfig {
    std::size_t beam_width = 8;
    std::size_t traj_length = 8;
    std::size_t num_trajectories = 3;
    double diversity_overlap_threshold = 0.5;
    double diversity_penalty = 0.5;

    void validate() const {
        if (beam_width < 1 || traj_length < 1 || num_trajectories < 1)
            throw ConfigError("beam width, trajectory length and path count must be >= 1");
        if (diversity_penalty < 0) throw ConfigError("diversity penalty must be non-negative");
    }
};

struct ScopeConfig {
    std::size_t top_k = 80;
    std::size_t pool_cap = 150;
    double group_reserve_fraction = 0.40;

    void validate() const {
        if (top_k > pool_cap) throw ConfigError("top_k must not exceed pool_cap");
        if (pool_cap < 1) throw ConfigError("pool_cap must be >= 1");
        if (!(group_reserve_fraction >= 0.0 && group_reserve_fraction <= 1.0))
            throw ConfigError("group reserve fraction must lie in [0, 1]");
    }
};

struct ScoreBreakdown {
    double relevance = 0.0;   // sum over steps
    double coherence = 0.0;   // sum of log P(next | prev)
    double precedence = 0.0;  // fraction in [0, 1]
    double continuity = 0.0;  // mean Jaccard in [0, 1]
    double coverage = 0.0;    // fraction in [0, 1]

    double total(const RetrievalWeights& w) const {
        return relevance + w.lambda * coherence + w.mu * precedence + w.nu * continuity + w.rho * coverage;
    }
};

struct Trajectory {
    std::vector<std::string> steps;
    double total = 0.0;
    ScoreBreakdown breakdown;
};

// Per-query scoring tables over a candidate set. Candidates are stored in id
// order so index order doubles as the lexicographic tie-break.
class ScoringContext {
public:
    static constexpr std::size_t kPhaseCount = kCoveragePhases.size();

    ScoringContext() = default;

    // `relevance` and `log_transition` are indexed like `ids`, which need not
    // be sorted; the context reorders everything by id.
    static ScoringContext build(const KnowledgeHypergraph& graph, const PrecedenceIndex& precedence,
                                std::vector<std::string> ids, std::vector<double> relevance,
                                std::vector<std::vector<double>> log_transition) {
        const std::size_t n = ids.size();
        if (relevance.size() != n || log_transition.size() != n) throw DimensionMismatch(n, relevance.size());
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
        for (std::size_t k = 1; k < n; ++k)
            if (ids[perm[k]] == ids[perm[k - 1]]) throw ConfigError("duplicate candidate " + ids[perm[k]]);

        ScoringContext ctx;
        ctx.ids_.resize(n);
        ctx.relevance_.resize(n);
        ctx.log_transition_.assign(n, std::vector<double>(n, 0.0));
        for (std::size_t a = 0; a < n; ++a) {
            if (log_transition[perm[a]].size() != n) throw DimensionMismatch(n, log_transition[perm[a]].size());
            ctx.ids_[a] = ids[perm[a]];
            ctx.relevance_[a] = relevance[perm[a]];
            for (std::size_t b = 0; b < n; ++b) ctx.log_transition_[a][b] = log_transition[perm[a]][perm[b]];
        }

        std::map<std::string, int> entity_index;
        ctx.entities_.resize(n);
        ctx.phase_.resize(n);
        for (std::size_t a = 0; a < n; ++a) {
            const Hyperedge& e = graph.edge(ctx.ids_[a]);
            for (const auto& ent : e.entity_ids) {
                auto [it, inserted] = entity_index.emplace(ent, static_cast<int>(entity_index.size()));
                ctx.entities_[a].push_back(it->second);
            }
            std::sort(ctx.entities_[a].begin(), ctx.entities_[a].end());
            ctx.phase_[a] = PhaseMap::coverage_index(e.family);
        }
        ctx.order_.assign(n, std::vector<Order>(n, Order::Unrelated));
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b)
                if (a != b) ctx.order_[a][b] = precedence.precedes(ctx.ids_[a], ctx.ids_[b]);
        return ctx;
    }

    // Context with explicit tables, for search over abstract instances.
    static ScoringContext from_tables(std::vector<std::string> ids, std::vector<double> relevance,
                                      std::vector<std::vector<double>> log_transition,
                                      std::vector<std::vector<Order>> order = {},
                                      std::vector<std::vector<int>> entities = {}, std::vector<int> phases = {}) {
        const std::size_t n = ids.size();
        if (!std::is_sorted(ids.begin(), ids.end())) throw ConfigError("table ids must be sorted");
        ScoringContext ctx;
        ctx.ids_ = std::move(ids);
        ctx.relevance_ = std::move(relevance);
        ctx.log_transition_ = std::move(log_transition);
        ctx.order_ = order.empty() ? std::vector<std::vector<Order>>(n, std::vector<Order>(n, Order::Unrelated))
                                   : std::move(order);
        ctx.entities_ = entities.empty() ? std::vector<std::vector<int>>(n) : std::move(entities);
        for (auto& s : ctx.entities_) std::sort(s.begin(), s.end());
        ctx.phase_ = phases.empty() ? std::vector<int>(n, -1) : std::move(phases);
        if (ctx.relevance_.size() != n || ctx.log_transition_.size() != n || ctx.order_.size() != n ||
            ctx.entities_.size() != n || ctx.phase_.size() != n)
            throw DimensionMismatch(n, ctx.relevance_.size());
        return ctx;
    }

    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::string& id(std::size_t i) const { return ids_[i]; }
    std::optional<std::size_t> index_of(std::string_view id) const {
        auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
        if (it == ids_.end() || *it != id) return std::nullopt;
        return static_cast<std::size_t>(it - ids_.begin());
    }
    double relevance(std::size_t i) const { return relevance_[i]; }
    const std::vector<double>& relevance() const { return relevance_; }
    double log_transition(std::size_t i, std::size_t j) const { return log_transition_[i][j]; }
    Order order(std::size_t i, std::size_t j) const { return order_[i][j]; }
    bool precedes(std::size_t i, std::size_t j) const { return order_[i][j] == Order::Before; }
    int phase(std::size_t i) const { return phase_[i]; }
    const std::vector<int>& entities(std::size_t i) const { return entities_[i]; }

    double jaccard(std::size_t i, std::size_t j) const {
        const auto& a = entities_[i];
        const auto& b = entities_[j];
        if (a.empty() && b.empty()) return 0.0;
        std::size_t common = 0;
        auto x = a.begin();
        auto y = b.begin();
        while (x != a.end() && y != b.end()) {
            if (*x == *y) {
                ++common;
                ++x;
                ++y;
            } else if (*x < *y) {
                ++x;
            } else {
                ++y;
            }
        }
        return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
    }

    // Bit p set when phase p of the coverage set is present.
    unsigned phase_bit(std::size_t i) const { return phase_[i] < 0 ? 0u : (1u << phase_[i]); }

private:
    std::vector<std::string> ids_;
    std::vector<double> relevance_;
    std::vector<std::vector<double>> log_transition_;
    std::vector<std::vector<Order>> order_;
    std::vector<std::vector<int>> entities_;
    std::vector<int> phase_;
};

using Path = std::vector<std::size_t>;

// ---------------------------------------------------------------------------
// Scoring terms over index paths

inline double coherence(const ScoringContext& ctx, const Path& p) {
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < p.size(); ++k) s += ctx.log_transition(p[k], p[k + 1]);
    return s;
}

// Forward consecutive pairs over comparable consecutive pairs; 0 when none is comparable.
inline double precedence_consistency(const ScoringContext& ctx, const Path& p) {
    std::size_t forward = 0;
    std::size_t comparable = 0;
    for (std::size_t k = 0; k + 1 < p.size(); ++k) {
        const Order o = ctx.order(p[k], p[k + 1]);
        if (o == Order::Unrelated) continue;
        ++comparable;
        if (o == Order::Before) ++forward;
    }
    return comparable == 0 ? 0.0 : static_cast<double>(forward) / static_cast<double>(comparable);
}

inline double entity_continuity(const ScoringContext& ctx, const Path& p) {
    if (p.size() < 2) return 0.0;
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < p.size(); ++k) s += ctx.jaccard(p[k], p[k + 1]);
    return s / static_cast<double>(p.size() - 1);
}

inline double phase_coverage(const ScoringContext& ctx, const Path& p) {
    unsigned mask = 0;
    for (std::size_t i : p) mask |= ctx.phase_bit(i);
    return static_cast<double>(std::popcount(mask)) / static_cast<double>(ScoringContext::kPhaseCount);
}

inline ScoreBreakdown score_breakdown(const ScoringContext& ctx, const Path& p) {
    ScoreBreakdown b;
    for (std::size_t i : p) b.relevance += ctx.relevance(i);
    b.coherence = coherence(ctx, p);
    b.precedence = precedence_consistency(ctx, p);
    b.continuity = entity_continuity(ctx, p);
    b.coverage = phase_coverage(ctx, p);
    return b;
}

inline Trajectory make_trajectory(const ScoringContext& ctx, const Path& p, const RetrievalWeights& w) {
    Trajectory t;
    for (std::size_t i : p) t.steps.push_back(ctx.id(i));
    t.breakdown = score_breakdown(ctx, p);
    t.total = t.breakdown.total(w);
    return t;
}

inline Path to_path(const ScoringContext& ctx, const std::vector<std::string>& steps) {
    Path p;
    for (const auto& s : steps) {
        auto i = ctx.index_of(s);
        if (!i) throw UnknownEdge(s);
        p.push_back(*i);
    }
    return p;
}

// ---------------------------------------------------------------------------
// Beam search

struct BeamCandidate {
    Path path;
    std::vector<char> used;
    unsigned covered = 0;
    double sum_log_transition = 0.0;
    std::size_t forward_steps = 0;
    double sum_jaccard = 0.0;
    double score = 0.0;     // incremental objective
    double adjusted = 0.0;  // after the diversity penalty
};

namespace detail {

// Relevance is summed in index order over the step set so reorderings of the
// same set score identically in the relevance term.
inline double beam_score(const ScoringContext& ctx, const BeamCandidate& b, const RetrievalWeights& w) {
    double rel = 0.0;
    for (std::size_t i = 0; i < b.used.size(); ++i)
        if (b.used[i]) rel += ctx.relevance(i);
    return rel + w.lambda * b.sum_log_transition + w.mu * static_cast<double>(b.forward_steps) +
           w.nu * b.sum_jaccard +
           w.rho * static_cast<double>(std::popcount(b.covered)) / static_cast<double>(ScoringContext::kPhaseCount);
}

// Higher score first; then the per-step relevance sequence, larger first;
// then the smaller index (id) sequence.
inline bool beam_before(const ScoringContext& ctx, const BeamCandidate& a, const BeamCandidate& b, bool adjusted) {
    const double sa = adjusted ? a.adjusted : a.score;
    const double sb = adjusted ? b.adjusted : b.score;
    if (sa != sb) return sa > sb;
    const std::size_t n = std::min(a.path.size(), b.path.size());
    for (std::size_t k = 0; k < n; ++k) {
        const double ra = ctx.relevance(a.path[k]);
        const double rb = ctx.relevance(b.path[k]);
        if (ra != rb) return ra > rb;
    }
    return a.path < b.path;
}

inline double shared_fraction(const BeamCandidate& a, const BeamCandidate& b) {
    std::size_t shared = 0;
    for (std::size_t i : a.path)
        if (b.used[i]) ++shared;
    const std::size_t len = std::max(a.path.size(), b.path.size());
    return len == 0 ? 0.0 : static_cast<double>(shared) / static_cast<double>(len);
}

// Walks candidates in score order. A candidate overlapping a higher-scoring
// unpenalized one by more than the threshold is penalized once. Keeps the top
// `keep` by adjusted score.
inline std::vector<BeamCandidate> select_diverse(const ScoringContext& ctx, std::vector<BeamCandidate> pool,
                                                 std::size_t keep, const SearchConfig& cfg) {
    std::sort(pool.begin(), pool.end(),
              [&](const BeamCandidate& a, const BeamCandidate& b) { return beam_before(ctx, a, b, false); });
    std::vector<BeamCandidate> out;
    if (cfg.diversity_penalty == 0.0) {
        if (pool.size() > keep) pool.resize(keep);
        for (auto& b : pool) b.adjusted = b.score;
        return pool;
    }
    std::vector<std::size_t> heads;
    std::vector<std::size_t> seen;
    for (std::size_t i = 0; i < pool.size() && heads.size() < keep; ++i) {
        bool overlaps = false;
        for (std::size_t h : heads)
            if (shared_fraction(pool[i], pool[h]) > cfg.diversity_overlap_threshold) {
                overlaps = true;
                break;
            }
        pool[i].adjusted = overlaps ? pool[i].score - cfg.diversity_penalty : pool[i].score;
        if (!overlaps) heads.push_back(i);
        seen.push_back(i);
    }
    for (std::size_t i : seen) out.push_back(std::move(pool[i]));
    std::stable_sort(out.begin(), out.end(),
                     [&](const BeamCandidate& a, const BeamCandidate& b) { return beam_before(ctx, a, b, true); });
    if (out.size() > keep) out.resize(keep);
    return out;
}

}  // namespace detail

struct BeamResult {
    std::vector<Trajectory> trajectories;
    std::vector<Path> paths;
    std::vector<double> search_scores;
};

inline BeamResult beam_search(const ScoringContext& ctx, const RetrievalWeights& w, const SearchConfig& cfg) {
    w.validate();
    cfg.validate();
    const std::size_t n = ctx.size();
    BeamResult result;
    if (n == 0) return result;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (ctx.relevance(a) != ctx.relevance(b)) return ctx.relevance(a) > ctx.relevance(b);
        return a < b;
    });
    std::vector<BeamCandidate> beams;
    for (std::size_t k = 0; k < std::min(n, 2 * cfg.beam_width); ++k) {
        BeamCandidate b;
        b.path = {order[k]};
        b.used.assign(n, 0);
        b.used[order[k]] = 1;
        b.covered = ctx.phase_bit(order[k]);
        b.score = b.adjusted = detail::beam_score(ctx, b, w);
        beams.push_back(std::move(b));
    }

    for (std::size_t len = 2; len <= cfg.traj_length; ++len) {
        std::vector<BeamCandidate> pool;
        for (const auto& b : beams) {
            const std::size_t prev = b.path.back();
            for (std::size_t j = 0; j < n; ++j) {
                if (b.used[j]) continue;
                BeamCandidate x = b;
                x.path.push_back(j);
                x.used[j] = 1;
                x.covered |= ctx.phase_bit(j);
                x.sum_log_transition += ctx.log_transition(prev, j);
                if (ctx.precedes(prev, j)) ++x.forward_steps;
                x.sum_jaccard += ctx.jaccard(prev, j);
                x.score = detail::beam_score(ctx, x, w);
                pool.push_back(std::move(x));
            }
        }
        if (pool.empty()) break;
        beams = detail::select_diverse(ctx, std::move(pool), cfg.beam_width, cfg);
    }

    beams = detail::select_diverse(ctx, std::move(beams), cfg.num_trajectories, cfg);
    for (const auto& b : beams) {
        result.trajectories.push_back(make_trajectory(ctx, b.path, w));
        result.paths.push_back(b.path);
        result.search_scores.push_back(b.score);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Viterbi over the two-term objective Rel + lambda * log P.

struct ViterbiResult {
    Path path;
    double score = -std::numeric_limits<double>::infinity();
};

inline double two_term_score(const ScoringContext& ctx, const Path& p, double lambda) {
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        s += ctx.relevance(p[k]);
        if (k > 0) s += lambda * ctx.log_transition(p[k - 1], p[k]);
    }
    return s;
}

// Repeats allowed. dp[l][j] = max_i dp[l-1][i] + Rel(j) + lambda log P(j | i),
// reconstructed through backpointers. Among equal scores the predecessor with
// the smaller index wins, and so does the smaller final index.
inline ViterbiResult viterbi(const ScoringContext& ctx, double lambda, std::size_t length) {
    const std::size_t n = ctx.size();
    ViterbiResult out;
    if (n == 0 || length == 0) return out;
    std::vector<std::vector<double>> dp(length, std::vector<double>(n));
    std::vector<std::vector<std::size_t>> back(length, std::vector<std::size_t>(n, 0));
    for (std::size_t j = 0; j < n; ++j) dp[0][j] = ctx.relevance(j);
    for (std::size_t l = 1; l < length; ++l) {
        for (std::size_t j = 0; j < n; ++j) {
            double best = -std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double s = dp[l - 1][i] + ctx.relevance(j) + lambda * ctx.log_transition(i, j);
                if (s > best) {
                    best = s;
                    arg = i;
                }
            }
            dp[l][j] = best;
            back[l][j] = arg;
        }
    }
    std::size_t last = 0;
    for (std::size_t j = 1; j < n; ++j)
        if (dp[length - 1][j] > dp[length - 1][last]) last = j;
    out.score = dp[length - 1][last];
    out.path.assign(length, 0);
    out.path[length - 1] = last;
    for (std::size_t l = length - 1; l > 0; --l) out.path[l - 1] = back[l][out.path[l]];
    return out;
}

// Distinct steps only, via a DP over (visited set, last step). Exponential in
// |C|; meant for small instances. Returns min(length, |C|) steps. Ties resolve
// to the lexicographically smallest index sequence.
inline ViterbiResult viterbi_distinct(const ScoringContext& ctx, double lambda, std::size_t length) {
    const std::size_t n = ctx.size();
    if (n > 16) throw ConfigError("distinct-step Viterbi supports at most 16 candidates");
    ViterbiResult out;
    length = std::min(length, n);
    if (n == 0 || length == 0) return out;
    const std::size_t states = std::size_t{1} << n;
    const double ninf = -std::numeric_limits<double>::infinity();
    // best[mask][last]: best score still obtainable after visiting `mask` and
    // standing on `last`.
    std::vector<std::vector<double>> best(states, std::vector<double>(n, ninf));
    std::vector<std::vector<int>> next(states, std::vector<int>(n, -1));
    std::vector<std::vector<std::size_t>> by_count(n + 1);
    for (std::size_t m = 1; m < states; ++m) {
        const auto c = static_cast<std::size_t>(std::popcount(m));
        if (c <= length) by_count[c].push_back(m);
    }
    for (std::size_t c = length; c >= 1; --c) {
        for (std::size_t m : by_count[c]) {
            for (std::size_t last = 0; last < n; ++last) {
                if (!(m >> last & 1u)) continue;
                if (c == length) {
                    best[m][last] = 0.0;
                    continue;
                }
                double b = ninf;
                int arg = -1;
                for (std::size_t j = 0; j < n; ++j) {
                    if (m >> j & 1u) continue;
                    const double s = ctx.relevance(j) + lambda * ctx.log_transition(last, j) + best[m | (std::size_t{1} << j)][j];
                    if (s > b) {
                        b = s;
                        arg = static_cast<int>(j);
                    }
                }
                best[m][last] = b;
                next[m][last] = arg;
            }
        }
    }
    std::size_t first = 0;
    double top = ninf;
    for (std::size_t j = 0; j < n; ++j) {
        const double s = ctx.relevance(j) + best[std::size_t{1} << j][j];
        if (s > top) {
            top = s;
            first = j;
        }
    }
    out.path.push_back(first);
    std::size_t mask = std::size_t{1} << first;
    while (out.path.size() < length) {
        const int j = next[mask][out.path.back()];
        out.path.push_back(static_cast<std::size_t>(j));
        mask |= std::size_t{1} << j;
    }
    out.score = two_term_score(ctx, out.path, lambda);
    return out;
}

// ---------------------------------------------------------------------------
// Candidate scoping

struct ScopedCandidates {
    std::vector<std::string> ids;  // sorted
    std::vector<double> relevance;
};

// Top-K seeds by cosine, expanded by the seeds' groups, the query group and
// one-hop entity overlap. With a query group, ceil(reserve * cap) slots go to
// that group's best edges first; the rest are filled by relevance.
inline ScopedCandidates scope_candidates(const Vector& query, const KnowledgeHypergraph& graph,
                                         const EdgeEmbeddings& embeddings, const ScopeConfig& cfg,
                                         const std::optional<std::string>& query_group = std::nullopt) {
    cfg.validate();
    if (graph.empty()) throw EmptyCorpus();
    struct Scored {
        const Hyperedge* edge;
        double rel;
    };
    std::vector<Scored> all;
    all.reserve(graph.edge_count());
    for (const auto& [id, e] : graph.hyperedges()) all.push_back({&e, cosine(embeddings.at(id), query)});
    auto by_relevance = [](const Scored& a, const Scored& b) {
        if (a.rel != b.rel) return a.rel > b.rel;
        return a.edge->id < b.edge->id;
    };
    std::sort(all.begin(), all.end(), by_relevance);

    const std::size_t k = std::min(cfg.top_k, all.size());
    std::set<std::string> groups;
    std::set<std::string> seed_entities;
    for (std::size_t i = 0; i < k; ++i) {
        groups.insert(all[i].edge->group_id);
        seed_entities.insert(all[i].edge->entity_ids.begin(), all[i].edge->entity_ids.end());
    }
    if (query_group) groups.insert(*query_group);

    std::vector<Scored> expanded;
    for (std::size_t i = 0; i < all.size(); ++i) {
        const Hyperedge& e = *all[i].edge;
        bool take = i < k || groups.count(e.group_id) > 0;
        for (std::size_t j = 0; !take && j < e.entity_ids.size(); ++j) take = seed_entities.count(e.entity_ids[j]) > 0;
        if (take) expanded.push_back(all[i]);
    }

    std::vector<Scored> pool;
    std::vector<char> taken(expanded.size(), 0);
    if (query_group) {
        const auto reserve = static_cast<std::size_t>(std::ceil(cfg.group_reserve_fraction * static_cast<double>(cfg.pool_cap)));
        for (std::size_t i = 0; i < expanded.size() && pool.size() < std::min(reserve, cfg.pool_cap); ++i) {
            if (expanded[i].edge->group_id != *query_group) continue;
            pool.push_back(expanded[i]);
            taken[i] = 1;
        }
    }
    for (std::size_t i = 0; i < expanded.size() && pool.size() < cfg.pool_cap; ++i)
        if (!taken[i]) pool.push_back(expanded[i]);

    std::sort(pool.begin(), pool.end(), [](const Scored& a, const Scored& b) { return a.edge->id < b.edge->id; });
    ScopedCandidates out;
    for (const auto& s : pool) {
        out.ids.push_back(s.edge->id);
        out.relevance.push_back(s.rel);
    }
    return out;
}

}  // namespace okh
