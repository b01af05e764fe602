#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "okh/embedding.hpp"
#include "okh/error.hpp"
#include "okh/hypergraph.hpp"
#include "okh/precedence.hpp"
#include "okh/random.hpp"

namespace okh {

template <std::floating_point Real>
using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <std::floating_point Real>
using ColVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

template <std::floating_point Real>
ColVector<Real> to_eigen(const Vector& v) {
    ColVector<Real> out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = static_cast<Real>(v[i]);
    return out;
}

// Numerically stable log-softmax.
inline std::vector<double> log_softmax(const std::vector<double>& logits) {
    if (logits.empty()) return {};
    const double m = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (double x : logits) s += std::exp(x - m);
    const double lse = m + std::log(s);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
    return out;
}

// Low-rank bilinear transition scorer: logit(i, j) = (U h_i) . (V h_j), with
// U and V of shape r x d. W = U^T V is never formed outside tests.
template <std::floating_point Real>
class BasicTransitionModel {
public:
    using Matrix = RowMatrix<Real>;

    BasicTransitionModel() = default;
    BasicTransitionModel(std::size_t dimension, std::size_t rank, std::uint64_t seed = 0)
        : u_(Matrix::Zero(static_cast<Eigen::Index>(rank), static_cast<Eigen::Index>(dimension))),
          v_(Matrix::Zero(static_cast<Eigen::Index>(rank), static_cast<Eigen::Index>(dimension))),
          seed_(seed) {
        if (dimension == 0 || rank == 0) throw ConfigError("transition model needs positive dimension and rank");
    }

    // Entries i.i.d. uniform in [-1/sqrt(d), 1/sqrt(d)].
    static BasicTransitionModel random(std::size_t dimension, std::size_t rank, std::uint64_t seed) {
        BasicTransitionModel m(dimension, rank, seed);
        Rng rng(seed);
        const double bound = 1.0 / std::sqrt(static_cast<double>(dimension));
        for (Eigen::Index i = 0; i < m.u_.size(); ++i) m.u_.data()[i] = static_cast<Real>(rng.uniform(-bound, bound));
        for (Eigen::Index i = 0; i < m.v_.size(); ++i) m.v_.data()[i] = static_cast<Real>(rng.uniform(-bound, bound));
        return m;
    }

    std::size_t dimension() const { return static_cast<std::size_t>(u_.cols()); }
    std::size_t rank() const { return static_cast<std::size_t>(u_.rows()); }
    std::size_t parameter_count() const { return 2 * rank() * dimension(); }
    std::uint64_t seed() const { return seed_; }

    const Matrix& u() const { return u_; }
    const Matrix& v() const { return v_; }
    Matrix& u() { return u_; }
    Matrix& v() { return v_; }

    template <class Other>
    BasicTransitionModel<Other> cast() const {
        BasicTransitionModel<Other> out(dimension(), rank(), seed_);
        out.u() = u_.template cast<Other>();
        out.v() = v_.template cast<Other>();
        return out;
    }

    Matrix dense() const { return u_.transpose() * v_; }

    double logit(const ColVector<Real>& hi, const ColVector<Real>& hj) const {
        check(hi);
        check(hj);
        return static_cast<double>((u_ * hi).dot(v_ * hj));
    }

    double logit(const Vector& hi, const Vector& hj) const { return logit(to_eigen<Real>(hi), to_eigen<Real>(hj)); }

    // log P(. | anchor) over the candidate set.
    std::vector<double> logprob(const Vector& anchor, const std::vector<const Vector*>& candidates) const {
        const ColVector<Real> a = u_ * checked(anchor);
        std::vector<double> logits;
        logits.reserve(candidates.size());
        for (const Vector* c : candidates) logits.push_back(static_cast<double>(a.dot(v_ * checked(*c))));
        return log_softmax(logits);
    }

    // Row-normalized log-transition matrix over a candidate set: entry [i][j]
    // is log P(j | i) with the softmax taken over all candidates.
    std::vector<std::vector<double>> logprob_matrix(const std::vector<const Vector*>& candidates) const {
        const auto n = static_cast<Eigen::Index>(candidates.size());
        Matrix h(n, u_.cols());
        for (Eigen::Index i = 0; i < n; ++i) h.row(i) = checked(*candidates[static_cast<std::size_t>(i)]).transpose();
        const Matrix a = h * u_.transpose();
        const Matrix b = h * v_.transpose();
        const Matrix s = a * b.transpose();
        std::vector<std::vector<double>> out(candidates.size());
        for (Eigen::Index i = 0; i < n; ++i) {
            std::vector<double> row(static_cast<std::size_t>(n));
            for (Eigen::Index j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = static_cast<double>(s(i, j));
            out[static_cast<std::size_t>(i)] = log_softmax(row);
        }
        return out;
    }

    bool operator==(const BasicTransitionModel& o) const { return seed_ == o.seed_ && u_ == o.u_ && v_ == o.v_; }

private:
    void check(const ColVector<Real>& h) const {
        if (h.size() != u_.cols()) throw DimensionMismatch(dimension(), static_cast<std::size_t>(h.size()));
    }
    ColVector<Real> checked(const Vector& h) const {
        if (h.size() != dimension()) throw DimensionMismatch(dimension(), h.size());
        return to_eigen<Real>(h);
    }

    Matrix u_;
    Matrix v_;
    std::uint64_t seed_ = 0;
};

using TransitionModel = BasicTransitionModel<float>;

// ---------------------------------------------------------------------------
// Contrastive objective

// One term of the objective. The softmax denominator is {target} plus the
// sampled negatives (a multiset). Positive examples contribute
// -log P(target | anchor); negative examples contribute
// alpha * max(log P(target | anchor), kNegativeClamp).
struct ContrastiveExample {
    std::size_t anchor = 0;
    std::size_t target = 0;
    std::vector<std::size_t> negatives;
    bool positive = true;
};

inline constexpr double kNegativeClamp = -30.0;

template <std::floating_point Real>
struct LossAndGradient {
    double loss = 0.0;
    RowMatrix<Real> grad_u;
    RowMatrix<Real> grad_v;
};

// H holds one embedding per row; examples index into it.
template <std::floating_point Real>
LossAndGradient<Real> contrastive_loss(const BasicTransitionModel<Real>& model, const RowMatrix<Real>& h,
                                       const std::vector<ContrastiveExample>& batch, double alpha) {
    if (static_cast<std::size_t>(h.cols()) != model.dimension())
        throw DimensionMismatch(model.dimension(), static_cast<std::size_t>(h.cols()));
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
    for (const auto& ex : batch) (ex.positive ? n_pos : n_neg)++;
    if (n_pos == 0 && n_neg == 0) throw EmptyBatch();

    const RowMatrix<Real> a = h * model.u().transpose();
    const RowMatrix<Real> b = h * model.v().transpose();
    RowMatrix<Real> ga = RowMatrix<Real>::Zero(a.rows(), a.cols());
    RowMatrix<Real> gb = RowMatrix<Real>::Zero(b.rows(), b.cols());

    double loss = 0.0;
    std::vector<std::size_t> denom;
    std::vector<double> scores;
    for (const auto& ex : batch) {
        denom.clear();
        denom.push_back(ex.target);
        denom.insert(denom.end(), ex.negatives.begin(), ex.negatives.end());
        scores.resize(denom.size());
        const auto ai = a.row(static_cast<Eigen::Index>(ex.anchor));
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < denom.size(); ++k) {
            scores[k] = static_cast<double>(ai.dot(b.row(static_cast<Eigen::Index>(denom[k]))));
            m = std::max(m, scores[k]);
        }
        double z = 0.0;
        for (double s : scores) z += std::exp(s - m);
        const double lse = m + std::log(z);
        const double logp = scores[0] - lse;

        // d(term)/d(logp): -1/n_pos for positives, alpha/n_neg for unclamped negatives.
        double coef;
        if (ex.positive) {
            loss -= logp / static_cast<double>(n_pos);
            coef = -1.0 / static_cast<double>(n_pos);
        } else {
            loss += alpha * std::max(logp, kNegativeClamp) / static_cast<double>(n_neg);
            coef = logp > kNegativeClamp ? alpha / static_cast<double>(n_neg) : 0.0;
        }
        if (coef == 0.0) continue;
        for (std::size_t k = 0; k < denom.size(); ++k) {
            const double p = std::exp(scores[k] - lse);
            const double g = coef * ((k == 0 ? 1.0 : 0.0) - p);
            const auto row = static_cast<Eigen::Index>(denom[k]);
            ga.row(static_cast<Eigen::Index>(ex.anchor)) += static_cast<Real>(g) * b.row(row);
            gb.row(row) += static_cast<Real>(g) * ai;
        }
    }
    return {loss, ga.transpose() * h, gb.transpose() * h};
}

// ---------------------------------------------------------------------------
// Training pairs

enum class PairSignal { DocOrder, EntityOverlap, RetrievalInduced, CrossGroup };

inline std::string_view to_string(PairSignal s) {
    switch (s) {
        case PairSignal::DocOrder: return "doc_order";
        case PairSignal::EntityOverlap: return "entity_overlap";
        case PairSignal::RetrievalInduced: return "retrieval_induced";
        case PairSignal::CrossGroup: return "cross_group";
    }
    return "doc_order";
}

struct TrainingPair {
    std::string source;
    std::string target;
    PairSignal signal = PairSignal::DocOrder;
    bool operator==(const TrainingPair&) const = default;
};

struct TrainingPairs {
    std::vector<TrainingPair> positives;
    std::vector<TrainingPair> negatives;
};

struct PairOptions {
    // Two edges co-occur when at most this many positions apart in document order.
    std::size_t window = 4;
    bool cross_group_negatives = true;
    std::uint64_t seed = 0;
};

namespace detail {

inline bool shares_entity(const Hyperedge& a, const Hyperedge& b) {
    auto i = a.entity_ids.begin();
    auto j = b.entity_ids.begin();
    while (i != a.entity_ids.end() && j != b.entity_ids.end()) {
        if (*i == *j) return true;
        if (*i < *j) ++i;
        else ++j;
    }
    return false;
}

}  // namespace detail

inline TrainingPairs build_pairs(const KnowledgeHypergraph& graph, const PrecedenceIndex& precedence,
                                 const std::vector<std::vector<std::string>>& retrieval_traces = {},
                                 PairOptions options = {}) {
    TrainingPairs out;
    std::set<std::pair<std::string, std::string>> seen_pos;
    std::set<std::pair<std::string, std::string>> seen_neg;
    std::vector<TrainingPair> raw_neg;
    auto add_pos = [&](const std::string& a, const std::string& b, PairSignal s) {
        if (a != b && seen_pos.emplace(a, b).second) out.positives.push_back({a, b, s});
    };
    auto add_neg = [&](const std::string& a, const std::string& b, PairSignal s) {
        if (a != b && seen_neg.emplace(a, b).second) raw_neg.push_back({a, b, s});
    };

    std::vector<const Hyperedge*> all;
    for (const auto& [id, e] : graph.hyperedges()) all.push_back(&e);
    Rng rng(options.seed);
    const bool multi_group = graph.groups().size() >= 2;

    for (const auto& [group, ids] : graph.groups()) {
        std::vector<const Hyperedge*> doc;
        for (const auto& id : ids) doc.push_back(&graph.edge(id));
        std::sort(doc.begin(), doc.end(), [](const Hyperedge* x, const Hyperedge* y) {
            return std::tie(x->text_position, x->id) < std::tie(y->text_position, y->id);
        });
        for (std::size_t i = 0; i < doc.size(); ++i) {
            for (std::size_t j = i + 1; j < doc.size() && j <= i + options.window; ++j) {
                if (doc[i]->text_position >= doc[j]->text_position) continue;
                add_pos(doc[i]->id, doc[j]->id, PairSignal::DocOrder);
                add_neg(doc[j]->id, doc[i]->id, PairSignal::DocOrder);
                if (options.cross_group_negatives && multi_group) {
                    const Hyperedge* other = nullptr;
                    while (!other || other->group_id == group) other = all[rng.below(all.size())];
                    add_neg(doc[i]->id, other->id, PairSignal::CrossGroup);
                }
            }
        }

        const GroupPrecedence* gp = precedence.group(group);
        if (!gp) continue;
        const auto& canon = gp->canonical_trajectory();
        for (std::size_t i = 0; i < canon.size(); ++i)
            for (std::size_t j = i + 1; j < canon.size(); ++j)
                if (detail::shares_entity(graph.edge(canon[i]), graph.edge(canon[j])))
                    add_pos(canon[i], canon[j], PairSignal::EntityOverlap);
    }

    for (const auto& trace : retrieval_traces)
        for (std::size_t k = 0; k + 1 < trace.size(); ++k)
            if (graph.find_edge(trace[k]) && graph.find_edge(trace[k + 1]))
                add_pos(trace[k], trace[k + 1], PairSignal::RetrievalInduced);

    for (auto& p : raw_neg)
        if (!seen_pos.count({p.source, p.target})) out.negatives.push_back(std::move(p));
    return out;
}

// ---------------------------------------------------------------------------
// Training loop

struct TrainingConfig {
    double alpha = 0.5;
    std::size_t negatives_per_example = 64;
    double step_size = 0.01;
    std::size_t epochs = 5;
    std::size_t batch = 128;
    std::uint64_t seed = 0;

    void validate() const {
        if (negatives_per_example < 1) throw ConfigError("negatives_per_example must be >= 1");
        if (batch < 1) throw ConfigError("batch must be >= 1");
        if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
        if (!(step_size > 0.0)) throw ConfigError("step_size must be > 0");
    }
};

template <std::floating_point Real>
class NonFiniteLoss : public Error {
public:
    explicit NonFiniteLoss(BasicTransitionModel<Real> last_good)
        : Error("training produced a non-finite loss"), model_(std::move(last_good)) {}
    const BasicTransitionModel<Real>& last_good() const noexcept { return model_; }

private:
    BasicTransitionModel<Real> model_;
};

struct TrainingReport {
    std::vector<double> epoch_loss;
    std::vector<double> step_sizes;
};

// Row layout used for training: one row per embedded edge, ordered by id.
template <std::floating_point Real>
struct EmbeddingTable {
    RowMatrix<Real> h;
    std::map<std::string, std::size_t> index;

    static EmbeddingTable from(const EdgeEmbeddings& embeddings) {
        EmbeddingTable t;
        t.h.resize(static_cast<Eigen::Index>(embeddings.size()), static_cast<Eigen::Index>(embeddings.dimension()));
        std::size_t row = 0;
        for (const auto& [id, v] : embeddings.vectors()) {
            for (std::size_t k = 0; k < v.size(); ++k)
                t.h(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(k)) = static_cast<Real>(v[k]);
            t.index.emplace(id, row++);
        }
        return t;
    }
};

// Mini-batch gradient descent over positives and negatives. The step size is
// halved after any epoch whose mean loss exceeds the previous epoch's.
template <std::floating_point Real>
TrainingReport train(BasicTransitionModel<Real>& model, const EdgeEmbeddings& embeddings,
                     const TrainingPairs& pairs, const TrainingConfig& config) {
    config.validate();
    TrainingReport report;
    if (config.epochs == 0) return report;
    if (embeddings.dimension() != model.dimension()) throw DimensionMismatch(model.dimension(), embeddings.dimension());
    const auto table = EmbeddingTable<Real>::from(embeddings);
    const std::size_t n = table.index.size();
    if (n < 2) throw EmptyBatch();

    std::vector<ContrastiveExample> examples;
    auto push = [&](const TrainingPair& p, bool positive) {
        auto a = table.index.find(p.source);
        auto b = table.index.find(p.target);
        if (a == table.index.end() || b == table.index.end()) return;
        examples.push_back({a->second, b->second, {}, positive});
    };
    for (const auto& p : pairs.positives) push(p, true);
    for (const auto& p : pairs.negatives) push(p, false);
    if (examples.empty()) throw EmptyBatch();

    Rng rng(config.seed);
    double step = config.step_size;
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(examples);
        double total = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < examples.size(); start += config.batch) {
            const std::size_t end = std::min(examples.size(), start + config.batch);
            std::vector<ContrastiveExample> batch(examples.begin() + static_cast<std::ptrdiff_t>(start),
                                                  examples.begin() + static_cast<std::ptrdiff_t>(end));
            for (auto& ex : batch) {
                ex.negatives.resize(config.negatives_per_example);
                for (auto& neg : ex.negatives) {
                    auto k = static_cast<std::size_t>(rng.below(n - 1));
                    neg = k >= ex.target ? k + 1 : k;
                }
            }
            auto lg = contrastive_loss(model, table.h, batch, config.alpha);
            if (!std::isfinite(lg.loss) || !lg.grad_u.allFinite() || !lg.grad_v.allFinite())
                throw NonFiniteLoss<Real>(model);
            model.u() -= static_cast<Real>(step) * lg.grad_u;
            model.v() -= static_cast<Real>(step) * lg.grad_v;
            total += lg.loss;
            ++batches;
        }
        const double mean = total / static_cast<double>(batches);
        report.epoch_loss.push_back(mean);
        report.step_sizes.push_back(step);
        if (mean > previous) step *= 0.5;
        previous = mean;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Checkpoint: "OKHT", u32 version, u32 d, u32 r, U and V row-major f32, u64 seed.
// All integers and floats little-endian.

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
    if (pos + 4 > in.size()) throw IoError("truncated checkpoint");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

}  // namespace detail

template <std::floating_point Real>
std::string serialize_checkpoint(const BasicTransitionModel<Real>& model) {
    std::string out = "OKHT";
    detail::put_u32(out, kCheckpointVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(model.dimension()));
    detail::put_u32(out, static_cast<std::uint32_t>(model.rank()));
    for (const auto* m : {&model.u(), &model.v()})
        for (Eigen::Index i = 0; i < m->size(); ++i)
            detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(m->data()[i])));
    const std::uint64_t seed = model.seed();
    detail::put_u32(out, static_cast<std::uint32_t>(seed));
    detail::put_u32(out, static_cast<std::uint32_t>(seed >> 32));
    return out;
}

inline TransitionModel deserialize_checkpoint(const std::string& bytes) {
    if (bytes.size() < 16 || bytes.compare(0, 4, "OKHT") != 0) throw IoError("not a transition checkpoint");
    std::size_t pos = 4;
    if (detail::get_u32(bytes, pos) != kCheckpointVersion) throw IoError("unsupported checkpoint version");
    const std::size_t d = detail::get_u32(bytes, pos);
    const std::size_t r = detail::get_u32(bytes, pos);
    if (bytes.size() != 16 + 2 * r * d * 4 + 8) throw IoError("checkpoint size does not match its header");
    TransitionModel model(d, r);
    for (auto* m : {&model.u(), &model.v()})
        for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = std::bit_cast<float>(detail::get_u32(bytes, pos));
    const std::uint64_t lo = detail::get_u32(bytes, pos);
    const std::uint64_t hi = detail::get_u32(bytes, pos);
    TransitionModel out(d, r, lo | (hi << 32));
    out.u() = model.u();
    out.v() = model.v();
    return out;
}

template <std::floating_point Real>
void save_checkpoint(const std::string& path, const BasicTransitionModel<Real>& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    const auto bytes = serialize_checkpoint(model);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline TransitionModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

}  // namespace okh
