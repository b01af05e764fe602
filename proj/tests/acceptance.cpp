// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "okh/cli.hpp"
#include "okh/okh.hpp"

namespace {

using namespace okh;

struct Verdict {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::vector<std::string> index_ids(std::size_t n) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(std::string(1, static_cast<char>('a' + i)));
    return ids;
}

ScoringContext random_instance(Rng& rng, std::size_t n) {
    std::vector<double> rel(n);
    for (auto& r : rel) r = rng.uniform();
    std::vector<std::vector<double>> lt(n, std::vector<double>(n));
    for (auto& row : lt)
        for (auto& x : row) x = std::log(rng.uniform(0.01, 1.0));
    return ScoringContext::from_tables(index_ids(n), rel, lt);
}

ScoringContext rich_instance(Rng& rng, std::size_t n) {
    std::vector<double> rel(n);
    for (auto& r : rel) r = rng.uniform();
    std::vector<std::vector<double>> lt(n, std::vector<double>(n));
    for (auto& row : lt)
        for (auto& x : row) x = std::log(rng.uniform(0.01, 1.0));
    std::vector<std::vector<Order>> order(n, std::vector<Order>(n, Order::Unrelated));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (rng.below(3) == 0) {
                const bool fwd = rng.below(2) == 0;
                order[i][j] = fwd ? Order::Before : Order::After;
                order[j][i] = fwd ? Order::After : Order::Before;
            }
    std::vector<std::vector<int>> ents(n);
    for (auto& e : ents)
        for (int k = 0; k < 8; ++k)
            if (rng.below(3) == 0) e.push_back(k);
    std::vector<int> phases(n);
    for (auto& p : phases) p = static_cast<int>(rng.below(9)) - 2;
    return ScoringContext::from_tables(index_ids(n), rel, lt, order, ents, phases);
}

struct Best {
    Path path;
    double score = -INFINITY;
};

// Enumerates every length-L sequence; ties go to the smallest index sequence.
Best enumerate(const ScoringContext& ctx, double lambda, std::size_t length, bool distinct) {
    Best best;
    Path cur;
    std::vector<char> used(ctx.size(), 0);
    std::function<void()> rec = [&] {
        if (cur.size() == length) {
            double s = 0.0;
            for (std::size_t k = 0; k < cur.size(); ++k) {
                s += ctx.relevance(cur[k]);
                if (k) s += lambda * ctx.log_transition(cur[k - 1], cur[k]);
            }
            if (s > best.score + 1e-12 || (std::abs(s - best.score) <= 1e-12 && cur < best.path)) {
                best.score = s;
                best.path = cur;
            }
            return;
        }
        for (std::size_t j = 0; j < ctx.size(); ++j) {
            if (distinct && used[j]) continue;
            used[j] = 1;
            cur.push_back(j);
            rec();
            cur.pop_back();
            used[j] = 0;
        }
    };
    rec();
    return best;
}

struct Instance {
    ScoringContext ctx;
    double lambda;
    std::size_t length;
};

std::vector<Instance> viterbi_instances() {
    Rng rng(20240601);
    std::vector<Instance> out;
    for (int i = 0; i < 100; ++i) {
        const std::size_t n = 2 + rng.below(7);
        const std::size_t len = 1 + rng.below(4);
        const double lambda = rng.uniform(0.0, 2.0);
        out.push_back({random_instance(rng, n), lambda, len});
    }
    return out;
}

// ---------------------------------------------------------------------------

Verdict viterbi_exactness() {
    std::size_t score_bad = 0, path_bad = 0;
    double worst = 0.0;
    for (const auto& in : viterbi_instances()) {
        const auto rep = viterbi(in.ctx, in.lambda, in.length);
        const auto rep_bf = enumerate(in.ctx, in.lambda, in.length, false);
        const std::size_t dl = std::min(in.length, in.ctx.size());
        const auto dis = viterbi_distinct(in.ctx, in.lambda, in.length);
        const auto dis_bf = enumerate(in.ctx, in.lambda, dl, true);
        for (auto [got, want] : {std::pair{&rep, &rep_bf}, std::pair{&dis, &dis_bf}}) {
            const double err = std::abs(got->score - want->score);
            worst = std::max(worst, err);
            if (err > 1e-9) ++score_bad;
            if (got->path != want->path) ++path_bad;
        }
    }
    return {score_bad == 0 && path_bad == 0,
            "100 instances x {repeats, distinct}; score mismatches " + std::to_string(score_bad) + ", path mismatches " +
                std::to_string(path_bad) + ", max |err| " + fmt("%.3g", worst)};
}

Verdict beam_soundness() {
    Rng rng(77);
    std::size_t above = 0, unequal = 0;
    for (const auto& in : viterbi_instances()) {
        const std::size_t n = in.ctx.size();
        RetrievalWeights w = RetrievalWeights::zero();
        w.lambda = in.lambda;
        SearchConfig cfg;
        cfg.traj_length = in.length;
        cfg.num_trajectories = 3;
        cfg.diversity_penalty = 0.0;
        const double vit_distinct = viterbi_distinct(in.ctx, in.lambda, in.length).score;
        // Beam paths hold distinct steps, so they have min(L, |C|) of them.
        const double vit_repeat = viterbi(in.ctx, in.lambda, std::min(in.length, n)).score;

        cfg.beam_width = 1 + rng.below(n * in.length);
        for (const auto& p : beam_search(in.ctx, w, cfg).paths) {
            const double s = two_term_score(in.ctx, p, in.lambda);
            if (s > vit_distinct + 1e-9 || s > vit_repeat + 1e-9) ++above;
        }
        cfg.beam_width = n * in.length;
        const auto wide = beam_search(in.ctx, w, cfg);
        for (const auto& p : wide.paths)
            if (two_term_score(in.ctx, p, in.lambda) > vit_distinct + 1e-9) ++above;
        if (wide.paths.empty() || std::abs(two_term_score(in.ctx, wide.paths[0], in.lambda) - vit_distinct) > 1e-9)
            ++unequal;
    }
    return {above == 0 && unequal == 0, "beam above Viterbi: " + std::to_string(above) +
                                            "; B = |C|*L top beam != distinct Viterbi: " + std::to_string(unequal)};
}

double loss_from_scratch(const BasicTransitionModel<double>& m, const RowMatrix<double>& h,
                         const std::vector<ContrastiveExample>& batch, double alpha) {
    auto logit = [&](std::size_t i, std::size_t j) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < m.u().rows(); ++k) {
            double a = 0.0, b = 0.0;
            for (Eigen::Index c = 0; c < h.cols(); ++c) {
                a += m.u()(k, c) * h(static_cast<Eigen::Index>(i), c);
                b += m.v()(k, c) * h(static_cast<Eigen::Index>(j), c);
            }
            s += a * b;
        }
        return s;
    };
    double pos = 0.0, neg = 0.0;
    std::size_t np = 0, nn = 0;
    for (const auto& ex : batch) {
        std::vector<double> l{logit(ex.anchor, ex.target)};
        for (auto k : ex.negatives) l.push_back(logit(ex.anchor, k));
        double z = 0.0;
        for (double x : l) z += std::exp(x);
        const double logp = l[0] - std::log(z);
        if (ex.positive) {
            pos -= logp;
            ++np;
        } else {
            neg += std::max(logp, -30.0);
            ++nn;
        }
    }
    return (np ? pos / static_cast<double>(np) : 0.0) + alpha * (nn ? neg / static_cast<double>(nn) : 0.0);
}

Verdict gradient_correctness() {
    double worst = 0.0;
    Rng rng(3);
    for (int inst = 0; inst < 20; ++inst) {
        const std::size_t d = 4 + rng.below(13);
        const std::size_t r = 1 + rng.below(4);
        const std::size_t n = 6;
        auto m = BasicTransitionModel<double>::random(d, r, 100 + static_cast<std::uint64_t>(inst));
        m.u() *= 4.0;
        m.v() *= 4.0;
        RowMatrix<double> h(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
        for (Eigen::Index i = 0; i < h.rows(); ++i) {
            for (Eigen::Index c = 0; c < h.cols(); ++c) h(i, c) = rng.uniform(-1.0, 1.0);
            h.row(i).normalize();
        }
        std::vector<ContrastiveExample> batch;
        for (int b = 0; b < 6; ++b) {
            ContrastiveExample ex;
            ex.anchor = rng.below(n);
            ex.target = rng.below(n);
            for (int k = 0; k < 3; ++k) ex.negatives.push_back(rng.below(n));
            ex.positive = b % 3 != 2;
            batch.push_back(ex);
        }
        const double alpha = 0.5;
        const auto lg = contrastive_loss(m, h, batch, alpha);
        const double eps = 1e-5;
        for (int which = 0; which < 2; ++which) {
            auto& param = which == 0 ? m.u() : m.v();
            const auto& grad = which == 0 ? lg.grad_u : lg.grad_v;
            for (Eigen::Index k = 0; k < param.size(); ++k) {
                const double orig = param.data()[k];
                param.data()[k] = orig + eps;
                const double up = loss_from_scratch(m, h, batch, alpha);
                param.data()[k] = orig - eps;
                const double down = loss_from_scratch(m, h, batch, alpha);
                param.data()[k] = orig;
                const double fd = (up - down) / (2 * eps);
                const double an = grad.data()[k];
                worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}));
            }
        }
    }
    return {worst <= 1e-4, "20 instances, d <= 16, r <= 4, h = 1e-5; max relative error " + fmt("%.3g", worst)};
}

Verdict order_learning() {
    const std::uint64_t seed = 1;
    const std::size_t train_groups = 20;
    const std::size_t held_groups = 5;
    const auto corpus = generate_synthetic(seed, train_groups + held_groups, 4);
    std::set<std::string> held;
    for (std::size_t i = train_groups; i < corpus.scenarios.size(); ++i) held.insert(corpus.scenarios[i].group);
    std::vector<Fact> train_facts, held_facts;
    for (const auto& f : corpus.facts) (held.count(f.group) ? held_facts : train_facts).push_back(f);

    const auto g_train = merge_facts({train_facts});
    const auto g_held = merge_facts({held_facts});
    const auto p_train = PrecedenceIndex::build(g_train);
    const auto p_held = PrecedenceIndex::build(g_held);
    LocalEmbedder embedder(256);
    const auto e_train = EdgeEmbeddings::compute(g_train, embedder);
    const auto e_held = EdgeEmbeddings::compute(g_held, embedder);

    PairOptions po;
    po.seed = seed;
    const auto pairs = build_pairs(g_train, p_train, {}, po);
    auto model = TransitionModel::random(256, 32, seed);
    TrainingConfig tc;
    tc.seed = seed;
    train(model, e_train, pairs, tc);

    const auto held_pairs = build_pairs(g_held, p_held, {}, po);
    std::size_t preferred = 0;
    double mean_gap = 0.0;
    for (const auto& q : held_pairs.positives) {
        const double gap = model.logit(e_held.at(q.source), e_held.at(q.target)) -
                           model.logit(e_held.at(q.target), e_held.at(q.source));
        mean_gap += gap;
        if (gap > 0) ++preferred;
    }
    const double n = static_cast<double>(held_pairs.positives.size());
    const double rate = static_cast<double>(preferred) / n;
    mean_gap /= n;

    double worst_row = 0.0;
    std::vector<const Vector*> cands;
    for (const auto& [id, v] : e_held.vectors()) {
        cands.push_back(&v);
        if (cands.size() == 200) break;
    }
    for (const auto& row : model.logprob_matrix(cands)) {
        double s = 0.0;
        for (double x : row) s += std::exp(x);
        worst_row = std::max(worst_row, std::abs(s - 1.0));
    }
    return {rate >= 0.80 && worst_row <= 1e-9,
            "train 20 groups, held out 5; held-out forward preferred " + std::to_string(preferred) + "/" +
                std::to_string(held_pairs.positives.size()) + " = " + fmt("%.4f", rate) + " (need >= 0.80), mean gap " +
                fmt("%.4g", mean_gap) + "; max |row sum - 1| " + fmt("%.3g", worst_row)};
}

Verdict low_rank_equivalence() {
    const auto m = BasicTransitionModel<double>::random(16, 4, 42);
    Rng rng(5);
    std::vector<Vector> vs(6, Vector(16));
    for (auto& v : vs) {
        for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
        normalize_in_place(v);
    }
    double worst = 0.0;
    for (const auto& a : vs)
        for (const auto& b : vs) {
            double dense = 0.0;
            for (std::size_t i = 0; i < 16; ++i)
                for (std::size_t j = 0; j < 16; ++j) {
                    double w = 0.0;
                    for (std::size_t k = 0; k < 4; ++k)
                        w += m.u()(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) *
                             m.v()(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
                    dense += double(a[i]) * w * double(b[j]);
                }
            worst = std::max(worst, std::abs(m.logit(a, b) - dense));
        }
    const std::size_t count = TransitionModel(1536, 64).parameter_count();
    return {worst <= 1e-9 && count == 196608,
            "max |factored - dense| " + fmt("%.3g", worst) + "; parameters at d=1536, r=64: " + std::to_string(count)};
}

Verdict precedence_validity() {
    const auto corpus = generate_synthetic(6, 100, 6);
    const auto graph = merge_facts({corpus.facts});
    std::size_t bad_cycle = 0, bad_topo = 0, bad_perm = 0, bad_truth = 0, bad_direct = 0;
    Rng rng(6);
    for (const auto& s : corpus.scenarios) {
        auto edges = graph.group_edges(s.group);
        const auto gp = GroupPrecedence::build(edges);
        const auto& canon = gp.canonical_trajectory();
        for (const auto& a : canon) {
            if (gp.precedes(a, a) != Order::Unrelated) ++bad_cycle;
        }
        for (std::size_t i = 0; i < canon.size(); ++i)
            for (std::size_t j = i + 1; j < canon.size(); ++j) {
                if (gp.precedes(canon[j], canon[i]) == Order::Before) ++bad_topo;
                const auto fwd = gp.precedes(canon[i], canon[j]);
                const auto rev = gp.precedes(canon[j], canon[i]);
                if ((fwd == Order::Before) != (rev == Order::After)) ++bad_cycle;
            }
        for (const auto& [a, b] : gp.direct_edges())
            if (gp.sequence_position(a) >= gp.sequence_position(b)) ++bad_direct;
        for (int k = 0; k < 3; ++k) {
            rng.shuffle(edges);
            if (GroupPrecedence::build(edges).canonical_trajectory() != canon) ++bad_perm;
        }
        if (s.ground_truth != canon) ++bad_truth;
    }
    const bool ok = bad_cycle + bad_topo + bad_perm + bad_truth + bad_direct == 0;
    return {ok, std::to_string(corpus.scenarios.size()) + " groups x 6 horizons; cycle/antisymmetry " +
                    std::to_string(bad_cycle) + ", topological " + std::to_string(bad_topo) + ", direct-edge " +
                    std::to_string(bad_direct) + ", permutation " + std::to_string(bad_perm) + ", ground truth " +
                    std::to_string(bad_truth) + " violations"};
}

Verdict reduction_property() {
    Rng rng(8);
    std::size_t bad = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 6 + rng.below(10);
        const std::size_t len = 1 + rng.below(6);
        std::vector<std::string> ids;
        std::vector<double> rel;
        for (std::size_t i = 0; i < n; ++i) {
            ids.push_back("e" + std::to_string(100 + i));
            rel.push_back(rng.uniform());
        }
        std::vector<std::vector<double>> lt(n, std::vector<double>(n));
        for (auto& row : lt)
            for (auto& x : row) x = std::log(rng.uniform(0.01, 1.0));
        std::vector<std::size_t> by_rel(n);
        std::iota(by_rel.begin(), by_rel.end(), 0);
        std::sort(by_rel.begin(), by_rel.end(), [&](auto a, auto b) { return rel[a] > rel[b]; });
        SearchConfig cfg;
        cfg.beam_width = 1 + rng.below(8);
        cfg.traj_length = len;
        // Candidate perm[k] is stored under id k; the output must follow relevance alone.
        auto check = [&](const std::vector<std::size_t>& perm) {
            std::vector<double> prel(n);
            std::vector<std::vector<double>> plt(n, std::vector<double>(n));
            std::vector<std::string> want(std::min(len, n));
            for (std::size_t k = 0; k < n; ++k) {
                prel[k] = rel[perm[k]];
                for (std::size_t j = 0; j < n; ++j) plt[k][j] = lt[perm[k]][perm[j]];
                for (std::size_t r = 0; r < want.size(); ++r)
                    if (by_rel[r] == perm[k]) want[r] = ids[k];
            }
            const auto ctx = ScoringContext::from_tables(ids, prel, plt);
            return beam_search(ctx, RetrievalWeights::zero(), cfg).trajectories.at(0).steps == want;
        };
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        if (!check(perm)) ++bad;
        rng.shuffle(perm);
        if (!check(perm)) ++bad;
    }

    // End to end through the retriever on a synthetic corpus.
    const auto corpus = generate_synthetic(8, 4, 4);
    const auto graph = merge_facts({corpus.facts});
    const auto prec = PrecedenceIndex::build(graph);
    LocalEmbedder embedder(256);
    const auto emb = EdgeEmbeddings::compute(graph, embedder);
    UniformTransitions uniform;
    const Retriever retriever(graph, prec, emb, uniform, embedder);
    RetrievalOptions options;
    options.weights = RetrievalWeights::zero();
    options.search.traj_length = 8;
    std::size_t e2e_bad = 0;
    for (const auto& q : corpus.qa) {
        const auto qv = retriever.embed_query(q.question);
        auto cosine_to = [&](const Vector& v) {
            double s = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) s += double(v[i]) * double(qv[i]);
            return s;
        };
        std::vector<double> ranked;
        for (const auto& [id, v] : emb.vectors()) ranked.push_back(cosine_to(v));
        std::sort(ranked.begin(), ranked.end(), std::greater<>());
        const auto got = retriever.retrieve(q.question, options).trajectories.at(0).steps;
        if (got.size() != options.search.traj_length) ++e2e_bad;
        for (std::size_t k = 0; k < got.size(); ++k)
            if (std::abs(cosine_to(emb.at(got[k])) - ranked[k]) > 1e-6) ++e2e_bad;
    }
    return {bad == 0 && e2e_bad == 0, "200 table runs (identity + shuffled input order): " + std::to_string(bad) +
                                          " mismatches; " + std::to_string(corpus.qa.size()) +
                                          " retriever queries: " + std::to_string(e2e_bad) + " rank mismatches"};
}

Verdict scoring_ranges() {
    Rng rng(9);
    std::size_t out_of_range = 0;
    double worst_tele = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 2 + rng.below(11);
        const auto ctx = rich_instance(rng, n);
        Path p;
        const std::size_t len = 1 + rng.below(10);
        for (std::size_t k = 0; k < len; ++k) p.push_back(rng.below(n));
        const auto b = score_breakdown(ctx, p);
        for (double x : {b.precedence, b.continuity, b.coverage})
            if (!(x >= 0.0 && x <= 1.0)) ++out_of_range;
        double sum = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k)
            sum += phase_coverage(ctx, Path(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(k + 1))) -
                   phase_coverage(ctx, Path(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(k)));
        worst_tele = std::max(worst_tele, std::abs(sum - b.coverage));
    }
    const auto two = ScoringContext::from_tables({"a", "b"}, {0.0, 0.0}, {{0.0, 0.0}, {0.0, 0.0}}, {},
                                                 {{0, 1}, {1, 2}}, {-1, -1});
    const double j = entity_continuity(two, {0, 1});
    const auto three = ScoringContext::from_tables({"a", "b", "c"}, {0, 0, 0}, std::vector(3, std::vector(3, 0.0)), {},
                                                   {{}, {}, {}}, {0, 2, 4});
    const double cov = phase_coverage(three, {0, 1, 2});
    const bool ok = out_of_range == 0 && std::abs(j - 1.0 / 3.0) < 1e-15 && std::abs(cov - 0.5) < 1e-15 &&
                    worst_tele < 1e-12;
    return {ok, "1000 fuzzed trajectories, " + std::to_string(out_of_range) + " out of [0,1]; J = " + fmt("%.6f", j) +
                    "; Cov(3 phases) = " + fmt("%.4f", cov) + "; max telescoping error " + fmt("%.3g", worst_tele)};
}

Verdict ablation_hierarchy() {
    const std::vector<AblationVariant> variants{AblationVariant::Full, AblationVariant::NoOrder,
                                                AblationVariant::HeuristicOrder, AblationVariant::Shuffled};
    std::map<AblationVariant, double> tau_sum;
    std::map<AblationVariant, std::size_t> correct;
    std::size_t queries = 0;
    const std::size_t seeds = 10;
    for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
        const auto corpus = generate_synthetic(seed, 5, 4);
        const auto graph = merge_facts({corpus.facts});
        const auto prec = PrecedenceIndex::build(graph);
        LocalEmbedder embedder(256);
        const auto emb = EdgeEmbeddings::compute(graph, embedder);
        PairOptions po;
        po.seed = seed;
        auto model = TransitionModel::random(256, 32, seed);
        TrainingConfig tc;
        tc.seed = seed;
        train(model, emb, build_pairs(graph, prec, {}, po), tc);
        std::vector<QaItem> order_sensitive;
        for (const auto& q : corpus.qa)
            if (q.type == QaType::OrderSensitive) order_sensitive.push_back(q);
        queries += order_sensitive.size();
        const EvalContext ctx{graph, prec, emb, &model, embedder};
        for (auto v : variants) {
            const auto r = run_ablation(ctx, v, order_sensitive, RetrievalOptions{}, seed);
            tau_sum[v] += r.mean_tau;
            for (const auto& o : r.outcomes) correct[v] += o.correct ? 1 : 0;
        }
    }
    auto tau = [&](AblationVariant v) { return tau_sum[v] / static_cast<double>(seeds); };
    auto acc = [&](AblationVariant v) { return static_cast<double>(correct[v]) / static_cast<double>(queries); };
    const double full = tau(AblationVariant::Full), none = tau(AblationVariant::NoOrder),
                 heur = tau(AblationVariant::HeuristicOrder);
    const bool ok = queries >= 50 && full > none && full >= heur && heur >= none &&
                    acc(AblationVariant::Shuffled) < acc(AblationVariant::Full);
    return {ok, std::to_string(seeds) + " seeds, " + std::to_string(queries) + " order-sensitive queries; tau full " +
                    fmt("%.4f", full) + ", heuristic " + fmt("%.4f", heur) + ", no_order " + fmt("%.4f", none) +
                    "; accuracy full " + fmt("%.4f", acc(AblationVariant::Full)) + ", shuffled " +
                    fmt("%.4f", acc(AblationVariant::Shuffled))};
}

int cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"okh"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    return okh::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

Verdict determinism() {
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / "okh_acceptance_determinism";
    fs::remove_all(root);
    std::size_t failures = 0;
    for (const char* run : {"a", "b"}) {
        const std::string dir = (root / run).string();
        failures += cli({"synth", "--seed", "3", "--groups", "4", "--out", dir}) != 0;
        failures += cli({"build", "--corpus", dir + "/facts.jsonl", "--snapshot", dir + "/snapshot.json"}) != 0;
        failures += cli({"train", "--snapshot", dir + "/snapshot.json", "--checkpoint", dir + "/model.okht", "--seed",
                         "3"}) != 0;
        failures += cli({"retrieve", "--snapshot", dir + "/snapshot.json", "--checkpoint", dir + "/model.okht",
                         "--query", "Did the storm intensify before the port closed?", "--out",
                         dir + "/retrieval.json"}) != 0;
    }
    std::size_t differing = 0;
    for (const char* name : {"facts.jsonl", "snapshot.json", "model.okht", "retrieval.json"})
        if (read_text_file((root / "a" / name).string()) != read_text_file((root / "b" / name).string())) ++differing;

    // Roundtrip: scores from reloaded state equal in-memory scores bit for bit.
    const auto corpus = generate_synthetic(3, 4, 4);
    const auto graph = merge_facts({corpus.facts});
    const auto prec = PrecedenceIndex::build(graph);
    LocalEmbedder embedder(256);
    const auto emb = EdgeEmbeddings::compute(graph, embedder);
    PairOptions po;
    po.seed = 3;
    auto model = TransitionModel::random(256, 32, 3);
    TrainingConfig tc;
    tc.seed = 3;
    train(model, emb, build_pairs(graph, prec, {}, po), tc);
    const auto snap = parse_snapshot(dump_snapshot(graph, prec));
    const auto model2 = deserialize_checkpoint(serialize_checkpoint(model));
    const auto emb2 = EdgeEmbeddings::compute(snap.graph, embedder);
    const LearnedTransitions t1(model), t2(model2);
    const Retriever r1(graph, prec, emb, t1, embedder), r2(snap.graph, snap.precedence, emb2, t2, embedder);
    std::size_t drift = 0;
    for (const auto& q : corpus.qa) {
        const auto a = r1.retrieve(q.question, {}, q.group);
        const auto b = r2.retrieve(q.question, {}, q.group);
        if (a.trajectories.size() != b.trajectories.size()) {
            ++drift;
            continue;
        }
        for (std::size_t i = 0; i < a.trajectories.size(); ++i) {
            const auto& x = a.trajectories[i];
            const auto& y = b.trajectories[i];
            if (x.steps != y.steps || x.total != y.total || x.breakdown.coherence != y.breakdown.coherence ||
                x.breakdown.relevance != y.breakdown.relevance)
                ++drift;
        }
    }
    const bool snapshot_stable = dump_snapshot(snap.graph, snap.precedence) == dump_snapshot(graph, prec);
    fs::remove_all(root);
    return {failures == 0 && differing == 0 && drift == 0 && snapshot_stable && model2 == model,
            "CLI failures " + std::to_string(failures) + ", differing artifacts " + std::to_string(differing) +
                " of 4; roundtrip score drift " + std::to_string(drift) + ", snapshot re-dump " +
                (snapshot_stable ? "identical" : "differs") + ", checkpoint " + (model2 == model ? "identical" : "differs")};
}

Verdict serialization_order_fidelity() {
    const auto corpus = generate_synthetic(11, 2, 4);
    const auto graph = merge_facts({corpus.facts});
    const auto prec = PrecedenceIndex::build(graph);
    const auto& canon = prec.canonical_trajectory(corpus.scenarios[0].group);
    Trajectory base;
    base.total = 1.0;
    std::size_t checked = 0, collisions = 0;

    // Every permutation of a 5-step trajectory.
    std::vector<std::string> five(canon.begin(), canon.begin() + 5);
    base.steps = five;
    const auto reference = format_trajectory(base, graph);
    auto perm = five;
    std::sort(perm.begin(), perm.end());
    do {
        if (perm == five) continue;
        base.steps = perm;
        ++checked;
        if (format_trajectory(base, graph) == reference) ++collisions;
    } while (std::next_permutation(perm.begin(), perm.end()));

    // Random shuffles of longer trajectories, including repeated relations.
    Rng rng(11);
    for (int t = 0; t < 500; ++t) {
        const std::size_t len = 2 + rng.below(11);
        std::vector<std::string> steps;
        std::vector<std::string> pool = canon;
        rng.shuffle(pool);
        steps.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(len));
        auto shuffled = steps;
        do {
            rng.shuffle(shuffled);
        } while (shuffled == steps);
        base.steps = steps;
        const auto a = format_trajectory(base, graph);
        base.steps = shuffled;
        ++checked;
        if (format_trajectory(base, graph) == a) ++collisions;
    }
    return {collisions == 0, std::to_string(checked) + " order-changing shuffles, " + std::to_string(collisions) +
                                 " identical serializations"};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, Verdict (*)()>> criteria{
        {"viterbi exactness", viterbi_exactness},
        {"beam soundness", beam_soundness},
        {"gradient correctness", gradient_correctness},
        {"transition order learning", order_learning},
        {"low-rank equivalence", low_rank_equivalence},
        {"precedence validity", precedence_validity},
        {"reduction property", reduction_property},
        {"scoring ranges and identities", scoring_ranges},
        {"ablation hierarchy", ablation_hierarchy},
        {"determinism and persistence", determinism},
        {"serialization order fidelity", serialization_order_fidelity},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s criterion %zu (%s): %s [%.1fs]\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                    v.detail.c_str(), secs);
        std::fflush(stdout);
        failed += v.pass ? 0 : 1;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
