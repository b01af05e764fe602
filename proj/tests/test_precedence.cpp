#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "okh/precedence.hpp"
#include "okh/random.hpp"
#include "support.hpp"

namespace okh {
namespace {

using test::graph_of;
using test::make_edge;

std::vector<const Hyperedge*> ptrs(const std::vector<Hyperedge>& edges) {
    std::vector<const Hyperedge*> out;
    for (const auto& e : edges) out.push_back(&e);
    return out;
}

TEST(PhaseRank, TableRows) {
    EXPECT_EQ(phase_rank("has_cyclone_state"), 1);
    EXPECT_EQ(phase_rank("has_recovery_status"), 12);
    EXPECT_EQ(phase_rank("forecast_updates_to"), 13);
}

TEST(PhaseMap, CoverageSetHasSix) {
    std::set<int> covered;
    for (int f = 1; f <= 13; ++f)
        if (PhaseMap::coverage_index(f) >= 0) covered.insert(PhaseMap::coverage_index(f));
    EXPECT_EQ(covered.size(), 6u);
    EXPECT_EQ(kCoveragePhases.size(), 6u);
    EXPECT_EQ(PhaseMap::coverage_index(1), -1);
    EXPECT_EQ(PhaseMap::coverage_index(13), -1);
}

TEST(BuildPrecedence, AdvisoryBeforeHazard) {
    const std::vector<Hyperedge> edges{
        make_edge("has_warning_status", {"port:p", "adv:X:p:T-48"}, "warning", 48, "g", 2),
        make_edge("forecasts_hazard_at_horizon", {"port:p", "wind:X:p:T-48"}, "wind", 48, "g", 1),
    };
    const auto g = GroupPrecedence::build(ptrs(edges));
    EXPECT_EQ(g.precedes(edges[0].id, edges[1].id), Order::Before);
    EXPECT_EQ(g.precedes(edges[1].id, edges[0].id), Order::After);
    EXPECT_EQ(g.precedes(edges[0].id, edges[0].id), Order::Unrelated);
}

TEST(BuildPrecedence, SingleEdgeEmptyDag) {
    const std::vector<Hyperedge> edges{make_edge("has_warning_status", {"port:p", "adv"}, "w", 48)};
    const auto g = GroupPrecedence::build(ptrs(edges));
    EXPECT_EQ(g.direct_edge_count(), 0u);
    EXPECT_EQ(g.canonical_trajectory(), std::vector<std::string>{edges[0].id});
    EXPECT_EQ(g.sequence_position(edges[0].id), 1);
}

std::vector<Hyperedge> three_edge_fixture() {
    std::vector<Hyperedge> edges{
        make_edge("forecasts_hazard_at_horizon", {"port:p", "wind_fcst:X:p:T-72"}, "wind 72", 72, "g", 1),
        make_edge("forecasts_hazard_at_horizon", {"port:p", "wind_fcst:X:p:T-48"}, "wind 48", 48, "g", 2),
    };
    auto change = synthesize_cross_horizon(edges);
    edges.push_back(change.at(0));
    return edges;
}

TEST(BuildPrecedence, ThreeEdgeFixture) {
    const auto edges = three_edge_fixture();
    const auto& w72 = edges[0].id;
    const auto& w48 = edges[1].id;
    const auto& ch = edges[2].id;
    const auto g = GroupPrecedence::build(ptrs(edges));
    EXPECT_EQ(g.precedes(w72, w48), Order::Before);
    EXPECT_EQ(g.precedes(w72, ch), Order::Before);
    EXPECT_EQ(g.precedes(ch, w48), Order::Before);
    EXPECT_EQ(g.canonical_trajectory(), (std::vector<std::string>{w72, ch, w48}));
}

TEST(CanonicalTrajectory, IncomparableSameHorizonSortsByFamilyThenPosition) {
    const auto rules = PrecedenceRules::none();
    const std::vector<Hyperedge> edges{
        make_edge("has_impact_prediction", {"a", "b"}, "i", 48, "g", 1),
        make_edge("has_watch_status", {"a", "c"}, "w2", 48, "g", 9),
        make_edge("has_watch_status", {"a", "d"}, "w1", 48, "g", 3),
        make_edge("has_category_state", {"a", "e"}, "c", 48, "g", 7),
    };
    const auto g = GroupPrecedence::build(ptrs(edges), rules);
    EXPECT_EQ(g.canonical_trajectory(),
              (std::vector<std::string>{edges[3].id, edges[2].id, edges[1].id, edges[0].id}));
}

// Progressive escalation fixture: depression at T-96, Category 2 with the
// cone over the port at T-48, vessel restrictions at T-12.
TEST(CanonicalTrajectory, EscalationFixture) {
    const std::vector<Hyperedge> edges{
        make_edge("has_category_state", {"cyclone:X", "cat:X:T-96"},
                  "At T-96, the storm is a tropical depression (Category 0)", 96, "g", 1),
        make_edge("has_category_state", {"cyclone:X", "cat:X:T-48", "port:p"},
                  "At T-48, the storm has intensified to Category 2; uncertainty cone covers the port", 48, "g", 2),
        make_edge("affects_vessel_handling", {"port:p", "ops:X:p:T-12"},
                  "At T-12, gale-force wind probability exceeds 80%; port restricts vessel movements", 12, "g", 3),
    };
    std::vector<const Hyperedge*> shuffled{&edges[2], &edges[0], &edges[1]};
    const auto g = GroupPrecedence::build(shuffled);
    EXPECT_EQ(g.canonical_trajectory(), (std::vector<std::string>{edges[0].id, edges[1].id, edges[2].id}));
    EXPECT_EQ(g.precedes(edges[0].id, edges[1].id), Order::Before);
}

TEST(BuildPrecedence, CycleDetectedOnCorruptDirectEdges) {
    const auto edges = three_edge_fixture();
    const std::vector<std::pair<std::string, std::string>> direct{
        {edges[0].id, edges[1].id}, {edges[1].id, edges[2].id}, {edges[2].id, edges[0].id}};
    try {
        GroupPrecedence::from_direct_edges(ptrs(edges), direct);
        FAIL() << "expected CycleDetected";
    } catch (const CycleDetected& e) {
        EXPECT_EQ(e.cycle().size(), 3u);
    }
}

TEST(Precedes, CrossGroupUnrelated) {
    const std::vector<Hyperedge> edges{
        make_edge("has_warning_status", {"port:p", "adv"}, "w", 48, "g1", 1),
        make_edge("forecasts_hazard_at_horizon", {"port:p", "wind"}, "h", 48, "g2", 2),
    };
    const auto graph = graph_of(edges);
    const auto index = PrecedenceIndex::build(graph);
    EXPECT_EQ(index.precedes(edges[0].id, edges[1].id), Order::Unrelated);
    EXPECT_EQ(index.precedes(edges[1].id, edges[0].id), Order::Unrelated);
}

// ---------------------------------------------------------------------------
// Property checks over randomized groups.

std::vector<Hyperedge> random_group(Rng& rng, const std::string& group) {
    const int horizons[] = {120, 96, 72, 48, 24, 12};
    std::vector<Hyperedge> edges;
    const std::size_t n = 5 + rng.below(30);
    for (std::size_t i = 0; i < n; ++i) {
        const int family = 1 + static_cast<int>(rng.below(12));
        const auto& fam = RelationVocabulary::standard().families()[family - 1];
        const std::string rel(fam.relations[rng.below(fam.relations.size())]);
        const int h = horizons[rng.below(6)];
        const std::string state = "s" + std::to_string(family) + "_" + std::to_string(rng.below(2)) + ":X:p:T-" +
                                  std::to_string(h);
        edges.push_back(make_edge(rel, {"port:p", state}, "e" + std::to_string(i), h, group,
                                  static_cast<std::int64_t>(rng.below(50))));
    }
    auto changes = synthesize_cross_horizon(edges);
    edges.insert(edges.end(), changes.begin(), changes.end());
    std::sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    edges.erase(std::unique(edges.begin(), edges.end(), [](const auto& a, const auto& b) { return a.id == b.id; }),
                edges.end());
    return edges;
}

// Brute-force reachability from the direct edges.
std::map<std::string, std::set<std::string>> closure(const std::vector<std::pair<std::string, std::string>>& direct) {
    std::map<std::string, std::set<std::string>> reach;
    for (const auto& [a, b] : direct) reach[a].insert(b);
    bool changed = true;
    while (changed) {
        changed = false;
        for (auto& [a, succ] : reach) {
            std::set<std::string> add;
            for (const auto& b : succ)
                if (auto it = reach.find(b); it != reach.end())
                    for (const auto& c : it->second)
                        if (!succ.count(c)) add.insert(c);
            if (!add.empty()) {
                succ.insert(add.begin(), add.end());
                changed = true;
            }
        }
    }
    return reach;
}

TEST(PrecedenceProperties, RandomGroupsAreAcyclicAndTopological) {
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const auto edges = random_group(rng, "g");
        GroupPrecedence g;
        ASSERT_NO_THROW(g = GroupPrecedence::build(ptrs(edges))) << "trial " << trial;
        const auto& order = g.canonical_trajectory();
        ASSERT_EQ(order.size(), edges.size());
        std::map<std::string, std::size_t> pos;
        for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
        for (const auto& [a, b] : g.direct_edges()) EXPECT_LT(pos[a], pos[b]);
        for (std::size_t i = 0; i < order.size(); ++i) EXPECT_EQ(g.sequence_position(order[i]), int(i + 1));

        const auto reach = closure(g.direct_edges());
        for (const auto& a : edges)
            for (const auto& b : edges) {
                const bool fwd = reach.count(a.id) && reach.at(a.id).count(b.id);
                const bool bwd = reach.count(b.id) && reach.at(b.id).count(a.id);
                const auto o = g.precedes(a.id, b.id);
                ASSERT_FALSE(fwd && bwd);
                if (a.id == b.id)
                    EXPECT_EQ(o, Order::Unrelated);
                else
                    EXPECT_EQ(o, fwd ? Order::Before : bwd ? Order::After : Order::Unrelated);
            }
    }
}

// Rule oracle written directly from the rule statements; the closure of the
// materialized DAG must equal the closure of these pairs.
TEST(PrecedenceProperties, ClosureMatchesRuleOracle) {
    Rng rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        const auto edges = random_group(rng, "g");
        std::vector<std::pair<std::string, std::string>> implied;
        const std::set<std::pair<int, int>> causal{{4, 6}, {6, 10}, {7, 10}, {6, 11}, {7, 11}, {11, 12}};
        for (const auto& a : edges)
            for (const auto& b : edges) {
                if (a.id == b.id) continue;
                const bool both_within = a.family <= 12 && b.family <= 12 && a.horizon && b.horizon;
                if (both_within && *a.horizon == *b.horizon && a.family < b.family) implied.emplace_back(a.id, b.id);
                if (both_within && a.family == b.family && *a.horizon > *b.horizon) implied.emplace_back(a.id, b.id);
                if (both_within && *a.horizon == *b.horizon && causal.count({a.family, b.family}))
                    implied.emplace_back(a.id, b.id);
                if (a.family <= 12 && b.family == 13) {
                    const auto states = change_states(b);
                    for (const auto& s : states.from)
                        if (a.has_entity(s)) implied.emplace_back(a.id, b.id);
                }
                if (a.family == 13 && b.family <= 12) {
                    const auto states = change_states(a);
                    for (const auto& s : states.to)
                        if (b.has_entity(s)) implied.emplace_back(a.id, b.id);
                }
            }
        const auto g = GroupPrecedence::build(ptrs(edges));
        EXPECT_EQ(closure(implied), closure(g.direct_edges())) << "trial " << trial;
    }
}

TEST(PrecedenceProperties, DeterministicUnderPermutation) {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto edges = random_group(rng, "g");
        auto p = ptrs(edges);
        const auto a = GroupPrecedence::build(p).canonical_trajectory();
        rng.shuffle(p);
        const auto b = GroupPrecedence::build(p).canonical_trajectory();
        EXPECT_EQ(a, b);
    }
}

TEST(PrecedenceProperties, NoRulesReducesToUnordered) {
    Rng rng(11);
    const auto edges = random_group(rng, "g");
    const auto g = GroupPrecedence::build(ptrs(edges), PrecedenceRules::none());
    EXPECT_EQ(g.direct_edge_count(), 0u);
    for (const auto& a : edges)
        for (const auto& b : edges) EXPECT_EQ(g.precedes(a.id, b.id), Order::Unrelated);
}

TEST(PrecedenceIndex, DirectEdgesRoundTrip) {
    Rng rng(3);
    auto edges = random_group(rng, "g1");
    auto more = random_group(rng, "g2");
    edges.insert(edges.end(), more.begin(), more.end());
    const auto graph = graph_of(edges);
    const auto built = PrecedenceIndex::build(graph);
    const auto restored = PrecedenceIndex::from_direct_edges(graph, built.direct_edges());
    for (const auto& [group, ids] : graph.groups())
        EXPECT_EQ(built.canonical_trajectory(group), restored.canonical_trajectory(group));
    for (const auto& a : edges) EXPECT_EQ(built.sequence_position(a.id), restored.sequence_position(a.id));
}

TEST(ReasoningTags, DescribeTransitions) {
    const auto edges = three_edge_fixture();
    const auto t1 = reasoning_tags(edges[0], edges[2]);
    EXPECT_NE(std::find(t1.begin(), t1.end(), "state_to_change"), t1.end());
    const auto t2 = reasoning_tags(edges[2], edges[1]);
    EXPECT_NE(std::find(t2.begin(), t2.end(), "change_to_state"), t2.end());
    const auto t3 = reasoning_tags(edges[0], edges[1]);
    EXPECT_NE(std::find(t3.begin(), t3.end(), "family_evolution"), t3.end());
    EXPECT_NE(std::find(t3.begin(), t3.end(), "cross_horizon"), t3.end());
}

}  // namespace
}  // namespace okh
