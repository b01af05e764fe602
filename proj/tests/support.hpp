#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "okh/hypergraph.hpp"
#include "okh/vocabulary.hpp"

namespace okh::test {

// Straight-line FNV-1a 64 written from the published parameters.
inline std::uint64_t reference_fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h = h ^ c;
        h = h * 1099511628211ULL;
    }
    return h;
}

inline std::string reference_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline Hyperedge make_edge(const std::string& relation, std::vector<std::string> entities, const std::string& evidence,
                           std::optional<int> horizon = std::nullopt, const std::string& group = "g",
                           std::int64_t position = 0, std::map<std::string, std::string> attributes = {}) {
    Hyperedge e;
    const auto norm = normalize_relation(relation);
    e.relation = norm.relation;
    e.family = norm.family;
    e.entity_ids = std::move(entities);
    if (horizon) e.entity_ids.push_back(horizon_anchor_id(*horizon));
    sort_unique(e.entity_ids);
    e.evidence = evidence;
    e.attributes = std::move(attributes);
    e.group_id = group;
    e.horizon = horizon;
    e.text_position = position;
    e.id = dedup_id(e);
    return e;
}

// Builds a hypergraph from ready-made edges, creating placeholder entities.
inline KnowledgeHypergraph graph_of(const std::vector<Hyperedge>& edges) {
    KnowledgeHypergraph g;
    for (const auto& e : edges) {
        for (const auto& id : e.entity_ids) {
            if (g.find_entity(id)) continue;
            if (auto h = parse_horizon_anchor(id))
                g.add_entity(make_horizon_anchor(*h));
            else
                g.add_entity(Entity{id, id, EntityType::Other, "", 1.0});
        }
        g.add_edge(e);
    }
    g.rebuild_groups();
    return g;
}

inline Fact make_fact(const std::string& relation, std::vector<std::pair<std::string, EntityType>> entities,
                      const std::string& evidence, std::optional<int> horizon = std::nullopt,
                      const std::string& group = "", std::int64_t position = 0) {
    Fact f;
    f.relation = relation;
    f.evidence = evidence;
    for (auto& [id, type] : entities) f.entities.push_back(Entity{id, id, type, "", 1.0});
    f.horizon = horizon;
    f.group = group;
    f.text_position = position;
    return f;
}

}  // namespace okh::test
