#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "okh/error.hpp"
#include "okh/hypergraph.hpp"
#include "okh/vocabulary.hpp"

namespace okh {

enum class Order { Before, After, Unrelated };

// ---------------------------------------------------------------------------
// Reasoning phases. Six phases form the coverage set; every other family
// maps to "other".

inline constexpr std::array<std::string_view, 6> kCoveragePhases{
    "advisory", "hazard_forecast", "hazard_observation", "operation_status", "impact_prediction", "recovery_status"};

struct PhaseMap {
    // Index into kCoveragePhases, or -1 when the family is outside the set.
    static constexpr int coverage_index(int family) {
        switch (family) {
            case 4:
                return 0;
            case 6:
                return 1;
            case 7:
                return 2;
            case 10:
                return 3;
            case 11:
                return 4;
            case 12:
                return 5;
            default:
                return -1;
        }
    }

    static std::string_view phase_of_family(int family) {
        const int idx = coverage_index(family);
        return idx < 0 ? std::string_view("other") : kCoveragePhases[static_cast<std::size_t>(idx)];
    }

    static std::string_view phase_of(const Hyperedge& edge) { return phase_of_family(edge.family); }
};

// Family index of a canonical relation, used as the within-horizon phase rank.
inline int phase_rank(std::string_view relation) { return RelationVocabulary::standard().family_of(relation); }

// ---------------------------------------------------------------------------

struct PrecedenceRules {
    bool phase_order = true;       // same horizon, increasing family
    bool family_evolution = true;  // same family, decreasing lead time
    bool causal_chain = true;      // advisory -> hazard -> operations / impact -> recovery
    bool change_order = true;      // before-state -> change edge -> after-state

    static PrecedenceRules none() { return {false, false, false, false}; }
};

inline constexpr std::array<std::pair<int, int>, 6> kCausalLinks{{{4, 6}, {6, 10}, {7, 10}, {6, 11}, {7, 11}, {11, 12}}};

inline std::string_view causal_tag(int from_family, int to_family) {
    if (from_family == 4 && to_family == 6) return "advisory_to_hazard";
    if ((from_family == 6 || from_family == 7) && to_family == 10) return "hazard_to_operation";
    if ((from_family == 6 || from_family == 7) && to_family == 11) return "hazard_to_impact";
    if (from_family == 11 && to_family == 12) return "impact_to_recovery";
    return {};
}

// Lead time used for ordering. Cross-horizon edges take the earliest
// (largest) horizon they mention; edges without any horizon get -1.
inline int effective_lead(const Hyperedge& edge) {
    if (edge.horizon) return *edge.horizon;
    int lead = -1;
    for (const auto& id : edge.entity_ids) {
        if (auto h = parse_horizon_anchor(id))
            lead = std::max(lead, *h);
        else if (auto s = split_state_id(id))
            lead = std::max(lead, s->horizon);
    }
    return lead;
}

struct ChangeStates {
    std::vector<std::string> from;  // states at the change's earliest horizon
    std::vector<std::string> to;    // states at its latest horizon
};

inline ChangeStates change_states(const Hyperedge& change) {
    ChangeStates out;
    int hi = -1;
    int lo = -1;
    for (const auto& id : change.entity_ids) {
        if (auto s = split_state_id(id)) {
            hi = hi < 0 ? s->horizon : std::max(hi, s->horizon);
            lo = lo < 0 ? s->horizon : std::min(lo, s->horizon);
        }
    }
    if (hi < 0 || hi == lo) return out;
    for (const auto& id : change.entity_ids) {
        if (auto s = split_state_id(id)) {
            if (s->horizon == hi) out.from.push_back(id);
            if (s->horizon == lo) out.to.push_back(id);
        }
    }
    return out;
}

// Rule tags describing how `prev` leads into `next` when they appear
// consecutively. Returns {"none"} when no rule or horizon relation applies.
inline std::vector<std::string> reasoning_tags(const Hyperedge& prev, const Hyperedge& next) {
    std::vector<std::string> tags;
    if (prev.horizon && next.horizon) {
        tags.emplace_back(*prev.horizon == *next.horizon ? "within_horizon" : "cross_horizon");
        if (*prev.horizon == *next.horizon && prev.family < next.family && next.family < kCrossHorizonFamily) {
            tags.emplace_back("phase_progression");
            if (auto c = causal_tag(prev.family, next.family); !c.empty()) tags.emplace_back(c);
        }
        if (prev.family == next.family && *prev.horizon > *next.horizon) tags.emplace_back("family_evolution");
    }
    if (next.family == kCrossHorizonFamily && prev.family < kCrossHorizonFamily) {
        for (const auto& s : change_states(next).from)
            if (prev.has_entity(s)) {
                tags.emplace_back("state_to_change");
                break;
            }
    }
    if (prev.family == kCrossHorizonFamily && next.family < kCrossHorizonFamily) {
        for (const auto& s : change_states(prev).to)
            if (next.has_entity(s)) {
                tags.emplace_back("change_to_state");
                break;
            }
    }
    if (tags.empty()) tags.emplace_back("none");
    return tags;
}

// ---------------------------------------------------------------------------

// Precedence DAG of one knowledge group with its transitive closure and
// canonical linearization.
class GroupPrecedence {
public:
    GroupPrecedence() = default;

    // Builds the DAG from the enabled rule families.
    static GroupPrecedence build(std::vector<const Hyperedge*> edges, PrecedenceRules rules = {}) {
        GroupPrecedence g(std::move(edges));
        g.materialize(rules);
        g.finish();
        return g;
    }

    // Rebuilds from an explicit list of direct edges (as stored in snapshots).
    static GroupPrecedence from_direct_edges(std::vector<const Hyperedge*> edges,
                                             const std::vector<std::pair<std::string, std::string>>& direct) {
        GroupPrecedence g(std::move(edges));
        for (const auto& [from, to] : direct) {
            auto a = g.local_.find(from);
            auto b = g.local_.find(to);
            if (a == g.local_.end()) throw UnknownEdge(from);
            if (b == g.local_.end()) throw UnknownEdge(to);
            g.link(a->second, b->second);
        }
        g.finish();
        return g;
    }

    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }
    bool contains(std::string_view id) const { return local_.count(std::string(id)) > 0; }

    // Tri-state reachability query.
    Order precedes(std::string_view a, std::string_view b) const {
        auto ia = local_.find(std::string(a));
        auto ib = local_.find(std::string(b));
        if (ia == local_.end() || ib == local_.end() || ia->second == ib->second) return Order::Unrelated;
        if (reaches(ia->second, ib->second)) return Order::Before;
        if (reaches(ib->second, ia->second)) return Order::After;
        return Order::Unrelated;
    }

    const std::vector<std::string>& canonical_trajectory() const { return canonical_; }

    // 1-based position in the canonical trajectory, 0 if unknown.
    int sequence_position(std::string_view id) const {
        auto it = local_.find(std::string(id));
        return it == local_.end() ? 0 : position_[it->second];
    }

    std::vector<std::pair<std::string, std::string>> direct_edges() const {
        std::vector<std::pair<std::string, std::string>> out;
        for (std::size_t i = 0; i < succ_.size(); ++i)
            for (auto j : succ_[i]) out.emplace_back(ids_[i], ids_[j]);
        std::sort(out.begin(), out.end());
        return out;
    }

    std::size_t direct_edge_count() const {
        std::size_t n = 0;
        for (const auto& s : succ_) n += s.size();
        return n;
    }

private:
    using Key = std::tuple<int, int, int, std::int64_t, std::string>;

    explicit GroupPrecedence(std::vector<const Hyperedge*> edges) : edges_(std::move(edges)) {
        std::sort(edges_.begin(), edges_.end(), [](const Hyperedge* a, const Hyperedge* b) { return a->id < b->id; });
        edges_.erase(std::unique(edges_.begin(), edges_.end(),
                                 [](const Hyperedge* a, const Hyperedge* b) { return a->id == b->id; }),
                     edges_.end());
        const auto& vocab = RelationVocabulary::standard();
        for (std::size_t i = 0; i < edges_.size(); ++i) {
            const auto& e = *edges_[i];
            ids_.push_back(e.id);
            local_.emplace(e.id, i);
            keys_.emplace_back(-effective_lead(e), e.family, vocab.rank_within_family(e.relation), e.text_position,
                               e.id);
        }
        succ_.assign(edges_.size(), {});
    }

    void link(std::size_t from, std::size_t to) {
        if (from == to) return;
        succ_[from].push_back(to);
    }

    void materialize(const PrecedenceRules& rules) {
        // horizon -> family -> members (within-horizon families only)
        std::map<int, std::map<int, std::vector<std::size_t>>> by_horizon;
        // family -> horizon (descending) -> members
        std::map<int, std::map<int, std::vector<std::size_t>, std::greater<>>> by_family;
        std::unordered_map<std::string, std::vector<std::size_t>> by_state;
        std::vector<std::size_t> changes;
        for (std::size_t i = 0; i < edges_.size(); ++i) {
            const auto& e = *edges_[i];
            if (e.family == kCrossHorizonFamily) {
                changes.push_back(i);
                continue;
            }
            for (const auto& id : e.entity_ids)
                if (split_state_id(id)) by_state[id].push_back(i);
            if (!e.horizon || e.family < 1) continue;
            by_horizon[*e.horizon][e.family].push_back(i);
            by_family[e.family][*e.horizon].push_back(i);
        }
        auto connect = [this](const std::vector<std::size_t>& from, const std::vector<std::size_t>& to) {
            for (auto a : from)
                for (auto b : to) link(a, b);
        };
        if (rules.phase_order) {
            // Consecutive present families only; transitivity supplies the rest.
            for (auto& [h, fams] : by_horizon)
                for (auto it = fams.begin(); it != fams.end() && std::next(it) != fams.end(); ++it)
                    connect(it->second, std::next(it)->second);
        }
        if (rules.family_evolution) {
            for (auto& [f, hs] : by_family)
                for (auto it = hs.begin(); it != hs.end() && std::next(it) != hs.end(); ++it)
                    connect(it->second, std::next(it)->second);
        }
        if (rules.causal_chain) {
            for (auto& [h, fams] : by_horizon)
                for (const auto& [from, to] : kCausalLinks) {
                    auto a = fams.find(from);
                    auto b = fams.find(to);
                    if (a != fams.end() && b != fams.end()) connect(a->second, b->second);
                }
        }
        if (rules.change_order) {
            for (auto c : changes) {
                const auto states = change_states(*edges_[c]);
                for (const auto& s : states.from)
                    if (auto it = by_state.find(s); it != by_state.end()) connect(it->second, {c});
                for (const auto& s : states.to)
                    if (auto it = by_state.find(s); it != by_state.end()) connect({c}, it->second);
            }
        }
    }

    void finish() {
        for (auto& s : succ_) {
            std::sort(s.begin(), s.end());
            s.erase(std::unique(s.begin(), s.end()), s.end());
        }
        const std::size_t n = ids_.size();
        std::vector<std::size_t> indegree(n, 0);
        for (const auto& s : succ_)
            for (auto j : s) ++indegree[j];
        std::set<std::pair<Key, std::size_t>> ready;
        for (std::size_t i = 0; i < n; ++i)
            if (indegree[i] == 0) ready.emplace(keys_[i], i);
        std::vector<std::size_t> order;
        order.reserve(n);
        while (!ready.empty()) {
            const auto i = ready.begin()->second;
            ready.erase(ready.begin());
            order.push_back(i);
            for (auto j : succ_[i])
                if (--indegree[j] == 0) ready.emplace(keys_[j], j);
        }
        if (order.size() != n) throw CycleDetected(find_cycle(indegree));

        words_ = (n + 63) / 64;
        reach_.assign(n * words_, 0);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            const auto i = *it;
            for (auto j : succ_[i]) {
                reach_[i * words_ + j / 64] |= (std::uint64_t{1} << (j % 64));
                for (std::size_t w = 0; w < words_; ++w) reach_[i * words_ + w] |= reach_[j * words_ + w];
            }
        }
        canonical_.clear();
        position_.assign(n, 0);
        for (std::size_t k = 0; k < order.size(); ++k) {
            canonical_.push_back(ids_[order[k]]);
            position_[order[k]] = static_cast<int>(k + 1);
        }
        edges_.clear();
    }

    bool reaches(std::size_t from, std::size_t to) const {
        return (reach_[from * words_ + to / 64] >> (to % 64)) & 1U;
    }

    std::vector<std::string> find_cycle(const std::vector<std::size_t>& indegree) const {
        // Nodes with remaining indegree all lie on or behind a cycle; walk
        // predecessors-free DFS among them until a node repeats.
        const std::size_t n = ids_.size();
        std::vector<int> color(n, 0);
        std::vector<std::size_t> stack;
        std::vector<std::string> cycle;
        std::function<bool(std::size_t)> dfs = [&](std::size_t u) {
            color[u] = 1;
            stack.push_back(u);
            for (auto v : succ_[u]) {
                if (indegree[v] == 0) continue;
                if (color[v] == 1) {
                    auto it = std::find(stack.begin(), stack.end(), v);
                    for (; it != stack.end(); ++it) cycle.push_back(ids_[*it]);
                    return true;
                }
                if (color[v] == 0 && dfs(v)) return true;
            }
            stack.pop_back();
            color[u] = 2;
            return false;
        };
        for (std::size_t i = 0; i < n; ++i)
            if (indegree[i] != 0 && color[i] == 0 && dfs(i)) break;
        return cycle;
    }

    std::vector<const Hyperedge*> edges_;
    std::vector<std::string> ids_;
    std::unordered_map<std::string, std::size_t> local_;
    std::vector<Key> keys_;
    std::vector<std::vector<std::size_t>> succ_;
    std::size_t words_ = 0;
    std::vector<std::uint64_t> reach_;
    std::vector<std::string> canonical_;
    std::vector<int> position_;
};

// Precedence over a whole hypergraph: one GroupPrecedence per knowledge group.
// Pairs from different groups are always unrelated.
class PrecedenceIndex {
public:
    PrecedenceIndex() = default;

    static PrecedenceIndex build(const KnowledgeHypergraph& graph, PrecedenceRules rules = {}) {
        PrecedenceIndex index;
        for (const auto& [group, ids] : graph.groups())
            index.add(group, GroupPrecedence::build(graph.group_edges(group), rules));
        return index;
    }

    static PrecedenceIndex from_direct_edges(
        const KnowledgeHypergraph& graph,
        const std::map<std::string, std::vector<std::pair<std::string, std::string>>>& direct) {
        PrecedenceIndex index;
        static const std::vector<std::pair<std::string, std::string>> kNone;
        for (const auto& [group, ids] : graph.groups()) {
            auto it = direct.find(group);
            index.add(group, GroupPrecedence::from_direct_edges(graph.group_edges(group),
                                                                it == direct.end() ? kNone : it->second));
        }
        return index;
    }

    Order precedes(std::string_view a, std::string_view b) const {
        const auto* ga = group_of(a);
        if (ga == nullptr || ga != group_of(b)) return Order::Unrelated;
        return ga->precedes(a, b);
    }

    const GroupPrecedence* group(const std::string& group_id) const {
        auto it = groups_.find(group_id);
        return it == groups_.end() ? nullptr : &it->second;
    }

    const std::map<std::string, GroupPrecedence>& groups() const { return groups_; }

    const std::vector<std::string>& canonical_trajectory(const std::string& group_id) const {
        static const std::vector<std::string> kEmpty;
        const auto* g = group(group_id);
        return g == nullptr ? kEmpty : g->canonical_trajectory();
    }

    int sequence_position(std::string_view id) const {
        const auto* g = group_of(id);
        return g == nullptr ? 0 : g->sequence_position(id);
    }

    std::map<std::string, std::vector<std::pair<std::string, std::string>>> direct_edges() const {
        std::map<std::string, std::vector<std::pair<std::string, std::string>>> out;
        for (const auto& [group, g] : groups_) out[group] = g.direct_edges();
        return out;
    }

private:
    void add(const std::string& group_id, GroupPrecedence g) {
        auto [it, inserted] = groups_.insert_or_assign(group_id, std::move(g));
        for (const auto& id : it->second.ids()) owner_[id] = group_id;
    }

    const GroupPrecedence* group_of(std::string_view id) const {
        auto it = owner_.find(std::string(id));
        return it == owner_.end() ? nullptr : &groups_.at(it->second);
    }

    std::map<std::string, GroupPrecedence> groups_;
    std::unordered_map<std::string, std::string> owner_;
};

}  // namespace okh
