#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "okh/error.hpp"
#include "okh/hash.hpp"
#include "okh/vocabulary.hpp"

namespace okh {

enum class EntityType {
    Port,
    Cyclone,
    CycloneState,
    OperationStatus,
    HazardForecast,
    HazardObservation,
    AdvisoryStatus,
    ProbabilityState,
    ImpactPrediction,
    RecoveryStatus,
    HorizonTime,
    Other,
};

inline constexpr std::array<std::pair<EntityType, std::string_view>, 12> kEntityTypeNames{{
    {EntityType::Port, "port"},
    {EntityType::Cyclone, "cyclone"},
    {EntityType::CycloneState, "cyclone_state"},
    {EntityType::OperationStatus, "operation_status"},
    {EntityType::HazardForecast, "hazard_forecast"},
    {EntityType::HazardObservation, "hazard_observation"},
    {EntityType::AdvisoryStatus, "advisory_status"},
    {EntityType::ProbabilityState, "probability_state"},
    {EntityType::ImpactPrediction, "impact_prediction"},
    {EntityType::RecoveryStatus, "recovery_status"},
    {EntityType::HorizonTime, "horizon_time"},
    {EntityType::Other, "other"},
}};

inline std::string_view to_string(EntityType type) {
    for (const auto& [t, name] : kEntityTypeNames)
        if (t == type) return name;
    return "other";
}

// Case-insensitive; unknown names map to Other.
inline EntityType parse_entity_type(std::string_view name) {
    const std::string folded = RelationVocabulary::fold(name);
    for (const auto& [t, n] : kEntityTypeNames)
        if (folded == n) return t;
    return EntityType::Other;
}

struct Entity {
    std::string id;
    std::string name;
    EntityType type = EntityType::Other;
    std::string description;
    double confidence = 1.0;

    bool operator==(const Entity&) const = default;
};

// ---------------------------------------------------------------------------
// Horizon anchors: entities whose id is exactly "horizon:T-<lead hours>".

inline std::string horizon_label(int lead_hours) { return "T-" + std::to_string(lead_hours); }

inline std::string horizon_anchor_id(int lead_hours) { return "horizon:" + horizon_label(lead_hours); }

inline std::optional<int> parse_int(std::string_view text) {
    int value = 0;
    if (text.empty()) return std::nullopt;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

inline std::optional<int> parse_horizon_anchor(std::string_view id) {
    constexpr std::string_view prefix = "horizon:T-";
    if (!id.starts_with(prefix)) return std::nullopt;
    const auto digits = id.substr(prefix.size());
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }))
        return std::nullopt;
    return parse_int(digits);
}

inline bool is_horizon_anchor(std::string_view id) { return parse_horizon_anchor(id).has_value(); }

inline Entity make_horizon_anchor(int lead_hours) {
    return Entity{horizon_anchor_id(lead_hours), horizon_label(lead_hours), EntityType::HorizonTime,
                  std::to_string(lead_hours) + " hours before expected landfall", 1.0};
}

// Horizon-specific state ids look like "<stem>:T-<h>". Anchors are excluded.
struct StateIdParts {
    std::string stem;
    int horizon;
};

inline std::optional<StateIdParts> split_state_id(std::string_view id) {
    if (is_horizon_anchor(id)) return std::nullopt;
    const auto pos = id.find(":T-");
    if (pos == std::string_view::npos || pos == 0) return std::nullopt;
    const auto digits = id.substr(pos + 3);
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }))
        return std::nullopt;
    auto h = parse_int(digits);
    if (!h) return std::nullopt;
    return StateIdParts{std::string(id.substr(0, pos)), *h};
}

// ---------------------------------------------------------------------------
// Identifier folding.

namespace detail {

inline std::string fold_name(std::string_view raw, int case_mode) {  // -1 lower, 0 keep, 1 upper
    std::string out;
    bool pending = false;
    for (char c : raw) {
        const auto uc = static_cast<unsigned char>(c);
        if (std::isspace(uc)) {
            pending = !out.empty();
            continue;
        }
        if (pending) out.push_back('_');
        pending = false;
        if (case_mode < 0)
            out.push_back(static_cast<char>(std::tolower(uc)));
        else if (case_mode > 0)
            out.push_back(static_cast<char>(std::toupper(uc)));
        else
            out.push_back(c);
    }
    return out;
}

}  // namespace detail

// Trims and joins internal whitespace runs with '_'; case is preserved.
inline std::string fold_entity_id(std::string_view raw) { return detail::fold_name(raw, 0); }

// Hierarchical id "<kind>:<storm>:<port>:T-<h>"; absent parts are dropped.
// Kind and port are lowercased, storm names are uppercased.
inline std::string canonical_entity_id(std::string_view kind, std::optional<std::string_view> storm,
                                       std::optional<std::string_view> port, std::optional<int> horizon) {
    std::string id = detail::fold_name(kind, -1);
    if (storm && !storm->empty()) id += ":" + detail::fold_name(*storm, 1);
    if (port && !port->empty()) id += ":" + detail::fold_name(*port, -1);
    if (horizon) id += ":" + horizon_label(*horizon);
    return id;
}

// ---------------------------------------------------------------------------

struct Hyperedge {
    std::string id;
    std::vector<std::string> entity_ids;  // sorted, unique
    std::string relation;
    int family = 0;
    std::string evidence;
    std::map<std::string, std::string> attributes;
    double confidence = 1.0;
    std::string group_id;
    std::optional<int> horizon;
    std::int64_t text_position = 0;

    bool operator==(const Hyperedge&) const = default;

    bool has_entity(std::string_view entity_id) const {
        return std::binary_search(entity_ids.begin(), entity_ids.end(), entity_id);
    }

    std::optional<double> numeric_attribute(const std::string& key) const {
        auto it = attributes.find(key);
        if (it == attributes.end()) return std::nullopt;
        double value = 0.0;
        const auto& s = it->second;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
        if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
        return value;
    }

    std::vector<int> anchor_horizons() const {
        std::vector<int> out;
        for (const auto& e : entity_ids)
            if (auto h = parse_horizon_anchor(e)) out.push_back(*h);
        return out;
    }
};

inline void sort_unique(std::vector<std::string>& ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
}

// FNV-1a-64 over "relation|sorted ids joined by ','|evidence".
inline std::string dedup_id(std::string_view relation, std::vector<std::string> entity_ids, std::string_view evidence) {
    sort_unique(entity_ids);
    std::string key(relation);
    key += '|';
    for (std::size_t i = 0; i < entity_ids.size(); ++i) {
        if (i) key += ',';
        key += entity_ids[i];
    }
    key += '|';
    key += evidence;
    return hex64(fnv1a64(key));
}

inline std::string dedup_id(const Hyperedge& edge) { return dedup_id(edge.relation, edge.entity_ids, edge.evidence); }

// Adds the "horizon:T-<h>" anchor and sets the horizon field. Idempotent.
inline Hyperedge inject_horizon(Hyperedge edge, int horizon) {
    if (horizon <= 0) throw ConflictingHorizon("horizon must be positive, got " + std::to_string(horizon));
    if (edge.horizon && *edge.horizon != horizon)
        throw ConflictingHorizon("edge " + edge.id + " already at " + horizon_label(*edge.horizon));
    for (int h : edge.anchor_horizons())
        if (h != horizon)
            throw ConflictingHorizon("edge " + edge.id + " carries anchor " + horizon_anchor_id(h) +
                                     ", cannot inject " + horizon_anchor_id(horizon));
    edge.entity_ids.push_back(horizon_anchor_id(horizon));
    sort_unique(edge.entity_ids);
    edge.horizon = horizon;
    edge.id = dedup_id(edge);
    return edge;
}

inline std::string_view cross_horizon_relation_for(int source_family) {
    switch (source_family) {
        case 5:
            return "changes_probability_to";
        case 4:
        case 8:
        case 10:
        case 12:
            return "changes_status_to";
        default:
            return "forecast_updates_to";
    }
}

// For each (family, state stem) observed at two or more horizons, emits one
// family-13 edge per consecutive pair of horizons in descending lead time.
inline std::vector<Hyperedge> synthesize_cross_horizon(const std::vector<Hyperedge>& group_edges) {
    struct Seen {
        std::string state_id;
        std::int64_t position = 0;
        double confidence = 1.0;
    };
    // (family, stem) -> lead time (descending) -> observation
    std::map<std::pair<int, std::string>, std::map<int, Seen, std::greater<>>> seen;
    std::string group;
    for (const auto& edge : group_edges) {
        if (edge.family < 1 || edge.family >= kCrossHorizonFamily || !edge.horizon) continue;
        group = edge.group_id;
        for (const auto& id : edge.entity_ids) {
            auto parts = split_state_id(id);
            if (!parts) continue;
            auto& slot = seen[{edge.family, parts->stem}];
            auto [it, inserted] = slot.try_emplace(parts->horizon, Seen{id, edge.text_position, edge.confidence});
            if (!inserted) {
                it->second.position = std::max(it->second.position, edge.text_position);
                it->second.confidence = std::min(it->second.confidence, edge.confidence);
            }
        }
    }

    std::vector<Hyperedge> out;
    const auto& vocab = RelationVocabulary::standard();
    for (const auto& [key, by_horizon] : seen) {
        if (by_horizon.size() < 2) continue;
        const auto& [family, stem] = key;
        for (auto it = by_horizon.begin(); std::next(it) != by_horizon.end(); ++it) {
            const auto next = std::next(it);
            const int from = it->first;
            const int to = next->first;
            Hyperedge edge;
            edge.relation = std::string(cross_horizon_relation_for(family));
            edge.family = vocab.family_of(edge.relation);
            edge.entity_ids = {it->second.state_id, next->second.state_id, horizon_anchor_id(from),
                               horizon_anchor_id(to)};
            sort_unique(edge.entity_ids);
            edge.evidence = stem + " evolves from " + horizon_label(from) + " to " + horizon_label(to);
            edge.attributes = {{"from_horizon", std::to_string(from)},
                               {"to_horizon", std::to_string(to)},
                               {"source_family", std::to_string(family)},
                               {"stem", stem}};
            edge.confidence = std::min(it->second.confidence, next->second.confidence);
            edge.group_id = group;
            edge.text_position = std::max(it->second.position, next->second.position);
            edge.id = dedup_id(edge);
            out.push_back(std::move(edge));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

// One extracted n-ary fact as it arrives in the facts JSON Lines input.
struct Fact {
    std::string relation;
    std::string evidence;
    std::vector<Entity> entities;
    std::map<std::string, std::string> attributes;
    double confidence = 1.0;
    std::optional<int> horizon;
    std::string group;
    std::int64_t text_position = 0;

    bool operator==(const Fact&) const = default;
};

class KnowledgeHypergraph {
public:
    const std::map<std::string, Entity>& entities() const { return entities_; }
    const std::map<std::string, Hyperedge>& hyperedges() const { return edges_; }
    const std::map<std::string, std::vector<std::string>>& groups() const { return groups_; }

    std::size_t edge_count() const { return edges_.size(); }
    bool empty() const { return edges_.empty(); }

    const Hyperedge* find_edge(std::string_view id) const {
        auto it = edges_.find(std::string(id));
        return it == edges_.end() ? nullptr : &it->second;
    }

    const Hyperedge& edge(std::string_view id) const {
        if (const auto* e = find_edge(id)) return *e;
        throw UnknownEdge(std::string(id));
    }

    const Entity* find_entity(std::string_view id) const {
        auto it = entities_.find(std::string(id));
        return it == entities_.end() ? nullptr : &it->second;
    }

    std::vector<const Hyperedge*> group_edges(const std::string& group) const {
        std::vector<const Hyperedge*> out;
        auto it = groups_.find(group);
        if (it == groups_.end()) return out;
        for (const auto& id : it->second) out.push_back(&edges_.at(id));
        return out;
    }

    // Construction is single-writer; the graph is treated as immutable
    // once handed to precedence or retrieval.

    // Entities with the same id keep the higher-confidence record; equal
    // confidence falls back to the smaller (type, name, description).
    void add_entity(Entity entity) {
        auto [it, inserted] = entities_.try_emplace(entity.id, entity);
        if (inserted) return;
        auto& cur = it->second;
        auto rank = [](const Entity& e) { return std::make_tuple(-e.confidence, e.type, e.name, e.description); };
        if (rank(entity) < rank(cur)) cur = std::move(entity);
    }

    // Duplicate ids collapse to the record with the smallest
    // (text_position, -confidence, attributes, group).
    void add_edge(Hyperedge edge) {
        auto [it, inserted] = edges_.try_emplace(edge.id, edge);
        if (inserted) return;
        auto& cur = it->second;
        auto rank = [](const Hyperedge& e) {
            return std::make_tuple(e.text_position, -e.confidence, e.attributes, e.group_id, e.horizon);
        };
        if (rank(edge) < rank(cur)) cur = std::move(edge);
    }

    // Group lists are ordered by (text_position, id).
    void rebuild_groups() {
        groups_.clear();
        for (const auto& [id, edge] : edges_) groups_[edge.group_id].push_back(id);
        for (auto& [g, ids] : groups_) {
            std::sort(ids.begin(), ids.end(), [this](const std::string& a, const std::string& b) {
                const auto& ea = edges_.at(a);
                const auto& eb = edges_.at(b);
                return std::tie(ea.text_position, ea.id) < std::tie(eb.text_position, eb.id);
            });
        }
    }

    // Referential integrity and per-edge invariants.
    void validate() const {
        for (const auto& [id, entity] : entities_) {
            if (!(entity.confidence > 0.0 && entity.confidence <= 1.0))
                throw SchemaError("entity " + id, "confidence must lie in (0, 1]");
            if (entity.type == EntityType::HorizonTime && !is_horizon_anchor(id))
                throw SchemaError("entity " + id, "horizon_time entities must have id horizon:T-<int>");
        }
        for (const auto& [id, edge] : edges_) {
            if (edge.entity_ids.size() < 2) throw SchemaError("hyperedge " + id, "needs at least two entities");
            for (const auto& e : edge.entity_ids)
                if (!entities_.count(e)) throw SchemaError("hyperedge " + id, "references unknown entity " + e);
            if (edge.horizon) {
                const auto anchors = edge.anchor_horizons();
                if (anchors.size() != 1 || anchors.front() != *edge.horizon)
                    throw SchemaError("hyperedge " + id, "horizon-grounded edge needs exactly one matching anchor");
            }
            if (RelationVocabulary::standard().family_of(edge.relation) != edge.family)
                throw SchemaError("hyperedge " + id, "family inconsistent with relation " + edge.relation);
            if (!(edge.confidence > 0.0 && edge.confidence <= 1.0))
                throw SchemaError("hyperedge " + id, "confidence must lie in (0, 1]");
        }
    }

private:
    std::map<std::string, Entity> entities_;
    std::map<std::string, Hyperedge> edges_;
    std::map<std::string, std::vector<std::string>> groups_;
};

// "<storm>:<port>" from the last id segment of the cyclone and port entities.
inline std::string derive_group_id(const std::vector<Entity>& entities) {
    std::string storm;
    std::string port;
    auto tail = [](const std::string& id) {
        const auto pos = id.rfind(':');
        return pos == std::string::npos ? id : id.substr(pos + 1);
    };
    for (const auto& e : entities) {
        if (e.type == EntityType::Cyclone && storm.empty()) storm = tail(e.id);
        if (e.type == EntityType::Port && port.empty()) port = tail(e.id);
    }
    if (storm.empty() && port.empty()) return "ungrouped";
    return storm + ":" + port;
}

struct MergeOptions {
    bool synthesize_cross_horizon = true;
};

// Runs the normalization pipeline over every fact and aggregates the result.
// The output depends only on the multiset of facts, not on batch order.
inline KnowledgeHypergraph merge_facts(const std::vector<std::vector<Fact>>& batches, MergeOptions options = {}) {
    KnowledgeHypergraph graph;
    std::size_t batch_index = 0;
    for (const auto& batch : batches) {
        std::size_t fact_index = 0;
        for (const auto& fact : batch) {
            const std::string where =
                "batch " + std::to_string(batch_index) + " fact " + std::to_string(fact_index++);
            if (fact.relation.empty()) throw SchemaError(where + "/relation", "must be non-empty");
            Hyperedge edge;
            const auto norm = normalize_relation(fact.relation);
            edge.relation = norm.relation;
            edge.family = norm.family;
            edge.evidence = fact.evidence;
            edge.attributes = fact.attributes;
            edge.confidence = fact.confidence;
            edge.text_position = fact.text_position;
            std::vector<Entity> entities;
            for (auto entity : fact.entities) {
                entity.id = fold_entity_id(entity.id);
                if (entity.id.empty()) throw SchemaError(where + "/entities", "entity id must be non-empty");
                if (is_horizon_anchor(entity.id)) entity.type = EntityType::HorizonTime;
                edge.entity_ids.push_back(entity.id);
                entities.push_back(std::move(entity));
            }
            sort_unique(edge.entity_ids);
            edge.group_id = fact.group.empty() ? derive_group_id(entities) : fact.group;
            edge.id = dedup_id(edge);
            if (fact.horizon) {
                try {
                    edge = inject_horizon(std::move(edge), *fact.horizon);
                } catch (const ConflictingHorizon& e) {
                    throw SchemaError(where + "/horizon", e.what());
                }
                graph.add_entity(make_horizon_anchor(*fact.horizon));
            }
            if (edge.entity_ids.size() < 2) throw SchemaError(where + "/entities", "needs at least two entities");
            for (auto& entity : entities) graph.add_entity(std::move(entity));
            graph.add_edge(std::move(edge));
        }
        ++batch_index;
    }
    graph.rebuild_groups();
    if (options.synthesize_cross_horizon) {
        std::vector<Hyperedge> synthetic;
        for (const auto& [group, ids] : graph.groups()) {
            std::vector<Hyperedge> members;
            for (const auto& id : ids) members.push_back(*graph.find_edge(id));
            auto made = synthesize_cross_horizon(members);
            synthetic.insert(synthetic.end(), made.begin(), made.end());
        }
        for (auto& e : synthetic) graph.add_edge(std::move(e));
        graph.rebuild_groups();
    }
    graph.validate();
    return graph;
}

}  // namespace okh
