#pragma once

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "okh/error.hpp"
#include "okh/hypergraph.hpp"
#include "okh/precedence.hpp"

namespace okh {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Facts input: JSON Lines, one fact per line.

namespace detail {

inline const json& require(const json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(path + "/" + key, "missing required field");
    return *it;
}

inline std::string get_string(const json& obj, const char* key, const std::string& path, bool required,
                              std::string fallback = {}) {
    auto it = obj.find(key);
    if (it == obj.end() || (!required && it->is_null())) {
        if (required) throw SchemaError(path + "/" + key, "missing required field");
        return fallback;
    }
    if (!it->is_string()) throw SchemaError(path + "/" + key, "expected string");
    return it->get<std::string>();
}

inline double get_confidence(const json& obj, const std::string& path) {
    auto it = obj.find("confidence");
    if (it == obj.end() || it->is_null()) return 1.0;
    if (!it->is_number()) throw SchemaError(path + "/confidence", "expected number");
    const double c = it->get<double>();
    if (!(c > 0.0 && c <= 1.0)) throw SchemaError(path + "/confidence", "must lie in (0, 1]");
    return c;
}

}  // namespace detail

inline Fact parse_fact(const json& j, const std::string& path = "") {
    if (!j.is_object()) throw SchemaError(path.empty() ? "/" : path, "fact must be a JSON object");
    Fact fact;
    fact.relation = detail::get_string(j, "relation", path, true);
    if (fact.relation.empty()) throw SchemaError(path + "/relation", "must be non-empty");
    fact.evidence = detail::get_string(j, "evidence", path, true);
    const auto& entities = detail::require(j, "entities", path);
    if (!entities.is_array()) throw SchemaError(path + "/entities", "expected array");
    for (std::size_t i = 0; i < entities.size(); ++i) {
        const std::string p = path + "/entities/" + std::to_string(i);
        const auto& e = entities[i];
        if (!e.is_object()) throw SchemaError(p, "expected object");
        Entity entity;
        entity.id = detail::get_string(e, "id", p, true);
        if (fold_entity_id(entity.id).empty()) throw SchemaError(p + "/id", "must be non-empty");
        entity.name = detail::get_string(e, "name", p, false, entity.id);
        entity.type = parse_entity_type(detail::get_string(e, "type", p, false, "other"));
        entity.description = detail::get_string(e, "description", p, false);
        entity.confidence = detail::get_confidence(e, p);
        if (entity.type == EntityType::HorizonTime && !is_horizon_anchor(fold_entity_id(entity.id)))
            throw SchemaError(p + "/id", "horizon_time entity ids must match horizon:T-<int>");
        fact.entities.push_back(std::move(entity));
    }
    if (fact.entities.size() < 2 && !j.contains("horizon"))
        throw SchemaError(path + "/entities", "a fact needs at least two entities");
    if (auto it = j.find("attributes"); it != j.end() && !it->is_null()) {
        if (!it->is_object()) throw SchemaError(path + "/attributes", "expected object");
        for (const auto& [k, v] : it->items()) {
            if (!v.is_string()) throw SchemaError(path + "/attributes/" + k, "expected string value");
            fact.attributes.emplace(k, v.get<std::string>());
        }
    }
    fact.confidence = detail::get_confidence(j, path);
    if (auto it = j.find("horizon"); it != j.end() && !it->is_null()) {
        if (!it->is_number_integer()) throw SchemaError(path + "/horizon", "expected integer or null");
        const auto h = it->get<long long>();
        if (h <= 0 || h > 100000) throw SchemaError(path + "/horizon", "must be a positive lead time in hours");
        fact.horizon = static_cast<int>(h);
    }
    fact.group = detail::get_string(j, "group", path, false);
    if (auto it = j.find("text_position"); it != j.end() && !it->is_null()) {
        if (!it->is_number_integer()) throw SchemaError(path + "/text_position", "expected integer");
        fact.text_position = it->get<std::int64_t>();
        if (fact.text_position < 0) throw SchemaError(path + "/text_position", "must be >= 0");
    }
    return fact;
}

inline json fact_to_json(const Fact& fact) {
    json entities = json::array();
    for (const auto& e : fact.entities) {
        entities.push_back({{"id", e.id},
                            {"name", e.name},
                            {"type", std::string(to_string(e.type))},
                            {"description", e.description},
                            {"confidence", e.confidence}});
    }
    json j;
    j["relation"] = fact.relation;
    j["evidence"] = fact.evidence;
    j["entities"] = std::move(entities);
    j["attributes"] = fact.attributes;
    j["confidence"] = fact.confidence;
    j["horizon"] = fact.horizon ? json(*fact.horizon) : json(nullptr);
    j["group"] = fact.group;
    j["text_position"] = fact.text_position;
    return j;
}

// Blank lines are skipped; errors carry the 1-based line number.
inline std::vector<Fact> read_facts_jsonl(std::istream& in) {
    std::vector<Fact> facts;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string path = "line " + std::to_string(lineno);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw SchemaError(path, std::string("invalid JSON: ") + e.what());
        }
        facts.push_back(parse_fact(j, path));
    }
    return facts;
}

inline std::vector<Fact> read_facts_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open facts file " + path);
    return read_facts_jsonl(in);
}

inline void write_facts_jsonl(std::ostream& out, const std::vector<Fact>& facts) {
    for (const auto& f : facts) out << fact_to_json(f).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Snapshot: one JSON document holding the hypergraph and its direct
// precedence edges. Keys are emitted sorted.

inline constexpr int kSnapshotVersion = 1;

inline json snapshot_to_json(const KnowledgeHypergraph& graph, const PrecedenceIndex& precedence) {
    json entities = json::array();
    for (const auto& [id, e] : graph.entities()) {
        entities.push_back({{"id", e.id},
                            {"name", e.name},
                            {"type", std::string(to_string(e.type))},
                            {"description", e.description},
                            {"confidence", e.confidence}});
    }
    json edges = json::array();
    for (const auto& [id, e] : graph.hyperedges()) {
        edges.push_back({{"id", e.id},
                         {"relation", e.relation},
                         {"family", e.family},
                         {"entities", e.entity_ids},
                         {"evidence", e.evidence},
                         {"attributes", e.attributes},
                         {"confidence", e.confidence},
                         {"group", e.group_id},
                         {"horizon", e.horizon ? json(*e.horizon) : json(nullptr)},
                         {"text_position", e.text_position}});
    }
    json prec = json::object();
    for (const auto& [group, pairs] : precedence.direct_edges()) {
        json list = json::array();
        for (const auto& [a, b] : pairs) list.push_back(json::array({a, b}));
        prec[group] = std::move(list);
    }
    return json{{"version", kSnapshotVersion},
                {"entities", std::move(entities)},
                {"hyperedges", std::move(edges)},
                {"groups", graph.groups()},
                {"precedence", std::move(prec)}};
}

inline std::string dump_snapshot(const KnowledgeHypergraph& graph, const PrecedenceIndex& precedence) {
    return snapshot_to_json(graph, precedence).dump(1) + "\n";
}

struct Snapshot {
    KnowledgeHypergraph graph;
    PrecedenceIndex precedence;
};

inline Snapshot snapshot_from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("/", "snapshot must be an object");
    if (j.value("version", 0) != kSnapshotVersion) throw SchemaError("/version", "unsupported snapshot version");
    Snapshot snap;
    const auto& entities = detail::require(j, "entities", "");
    for (std::size_t i = 0; i < entities.size(); ++i) {
        const auto& e = entities[i];
        const std::string p = "/entities/" + std::to_string(i);
        Entity entity;
        entity.id = detail::get_string(e, "id", p, true);
        entity.name = detail::get_string(e, "name", p, false);
        entity.type = parse_entity_type(detail::get_string(e, "type", p, false, "other"));
        entity.description = detail::get_string(e, "description", p, false);
        entity.confidence = detail::get_confidence(e, p);
        snap.graph.add_entity(std::move(entity));
    }
    const auto& edges = detail::require(j, "hyperedges", "");
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const auto& e = edges[i];
        const std::string p = "/hyperedges/" + std::to_string(i);
        Hyperedge edge;
        edge.id = detail::get_string(e, "id", p, true);
        edge.relation = detail::get_string(e, "relation", p, true);
        edge.family = detail::require(e, "family", p).get<int>();
        edge.entity_ids = detail::require(e, "entities", p).get<std::vector<std::string>>();
        sort_unique(edge.entity_ids);
        edge.evidence = detail::get_string(e, "evidence", p, true);
        edge.attributes = e.value("attributes", json::object()).get<std::map<std::string, std::string>>();
        edge.confidence = detail::get_confidence(e, p);
        edge.group_id = detail::get_string(e, "group", p, false);
        if (auto it = e.find("horizon"); it != e.end() && !it->is_null()) edge.horizon = it->get<int>();
        edge.text_position = e.value("text_position", std::int64_t{0});
        if (dedup_id(edge) != edge.id) throw SchemaError(p + "/id", "id does not match content hash");
        snap.graph.add_edge(std::move(edge));
    }
    snap.graph.rebuild_groups();
    snap.graph.validate();
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> direct;
    if (auto it = j.find("precedence"); it != j.end()) {
        for (const auto& [group, pairs] : it->items())
            for (const auto& pr : pairs) direct[group].emplace_back(pr.at(0).get<std::string>(), pr.at(1).get<std::string>());
    }
    snap.precedence = PrecedenceIndex::from_direct_edges(snap.graph, direct);
    return snap;
}

inline Snapshot parse_snapshot(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError("/", std::string("invalid snapshot JSON: ") + e.what());
    }
    try {
        return snapshot_from_json(j);
    } catch (const json::exception& e) {
        throw SchemaError("/", std::string("malformed snapshot: ") + e.what());
    }
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
}

inline Snapshot load_snapshot(const std::string& path) { return parse_snapshot(read_text_file(path)); }

inline void save_snapshot(const std::string& path, const KnowledgeHypergraph& graph,
                          const PrecedenceIndex& precedence) {
    write_text_file(path, dump_snapshot(graph, precedence));
}

}  // namespace okh
