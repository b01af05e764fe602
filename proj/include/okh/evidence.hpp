#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "okh/error.hpp"
#include "okh/hypergraph.hpp"
#include "okh/precedence.hpp"
#include "okh/retrieval.hpp"

namespace okh {

inline constexpr std::string_view kNoHorizonLabel = "—";

struct EvidenceStep {
    int step_index = 0;
    std::string horizon_label;
    std::string phase;
    int family = 0;
    std::string edge_id;
    std::string relation;
    std::string evidence;
    std::vector<std::string> reasoning_tags;
    std::vector<std::pair<std::string, std::string>> entities;  // (name, type)
};

inline std::string format_fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

inline std::vector<EvidenceStep> evidence_steps(const std::vector<std::string>& steps, const KnowledgeHypergraph& graph) {
    std::vector<EvidenceStep> out;
    const Hyperedge* prev = nullptr;
    for (std::size_t k = 0; k < steps.size(); ++k) {
        const Hyperedge* e = graph.find_edge(steps[k]);
        if (!e) throw UnknownEdge(steps[k]);
        EvidenceStep s;
        s.step_index = static_cast<int>(k + 1);
        s.horizon_label = e->horizon ? horizon_label(*e->horizon) : std::string(kNoHorizonLabel);
        s.phase = std::string(PhaseMap::phase_of(*e));
        s.family = e->family;
        s.edge_id = e->id;
        s.relation = e->relation;
        s.evidence = e->evidence;
        s.reasoning_tags = prev ? reasoning_tags(*prev, *e) : std::vector<std::string>{"start"};
        for (const auto& id : e->entity_ids) {
            const Entity* ent = graph.find_entity(id);
            s.entities.emplace_back(ent ? ent->name : id, ent ? std::string(to_string(ent->type)) : "other");
        }
        out.push_back(std::move(s));
        prev = e;
    }
    return out;
}

inline std::string quality_line(const Trajectory& t) {
    return "[Quality] total=" + format_fixed(t.total) + " relevance=" + format_fixed(t.breakdown.relevance) +
           " coherence=" + format_fixed(t.breakdown.coherence) + " precedence=" + format_fixed(t.breakdown.precedence) +
           " continuity=" + format_fixed(t.breakdown.continuity) + " coverage=" + format_fixed(t.breakdown.coverage);
}

inline std::string format_step(const EvidenceStep& s) {
    std::vector<std::string> ents;
    for (const auto& [name, type] : s.entities) ents.push_back(name + " [" + type + "]");
    std::string out = "[Step " + std::to_string(s.step_index) + "] [" + s.horizon_label + "] [phase=" + s.phase +
                      "] [family=" + std::to_string(s.family) + "] [edge=" + s.edge_id + "]\n";
    out += "  Relation: " + s.relation + "\n";
    out += "  Evidence: " + s.evidence + "\n";
    out += "  Reasoning: " + join(s.reasoning_tags, ", ") + "\n";
    out += "  Entities: " + join(ents, "; ") + "\n";
    return out;
}

// Quality summary line, then one five-line block per step.
inline std::string format_trajectory(const Trajectory& t, const KnowledgeHypergraph& graph) {
    std::string out = quality_line(t) + "\n";
    for (const auto& s : evidence_steps(t.steps, graph)) out += format_step(s);
    return out;
}

inline std::string format_trajectories(const std::vector<Trajectory>& ts, const KnowledgeHypergraph& graph) {
    std::string out;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (i) out += "\n";
        out += "Path " + std::to_string(i + 1) + "\n" + format_trajectory(ts[i], graph);
    }
    return out;
}

inline constexpr std::string_view kPromptPreamble =
    "You are given one or more ordered reasoning paths retrieved from a knowledge hypergraph.\n"
    "Read all paths before answering. Steps within a path are in order; earlier steps come first.\n"
    "Treat convergence across paths as a reliability signal, and note which path supports your answer.\n"
    "Respond with JSON: {\"answer\": string, \"confidence\": number in [0, 1], \"rationale\": string}.\n"
    "Use \"Yes\"/\"No\" for true/false questions and letter labels for multiple choice.\n";

// Paths appear in descending total score; identical step lists are merged
// into one path with a multiplicity note.
inline std::string assemble_prompt(const std::string& query, std::vector<Trajectory> trajectories,
                                   const KnowledgeHypergraph& graph) {
    if (trajectories.empty()) throw ConfigError("assemble_prompt needs at least one trajectory");
    std::stable_sort(trajectories.begin(), trajectories.end(),
                     [](const Trajectory& a, const Trajectory& b) { return a.total > b.total; });
    std::vector<std::pair<const Trajectory*, int>> unique;
    for (const auto& t : trajectories) {
        auto it = std::find_if(unique.begin(), unique.end(), [&](const auto& u) { return u.first->steps == t.steps; });
        if (it == unique.end())
            unique.emplace_back(&t, 1);
        else
            ++it->second;
    }
    std::string out(kPromptPreamble);
    out += "\nQuestion: " + query + "\n";
    for (std::size_t i = 0; i < unique.size(); ++i) {
        out += "\nPath " + std::to_string(i + 1);
        if (unique[i].second > 1) out += " (retrieved " + std::to_string(unique[i].second) + " times)";
        out += "\n" + format_trajectory(*unique[i].first, graph);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Answers

struct AnswerRecord {
    std::string answer;
    double confidence = 0.0;
    std::string rationale;
    bool operator==(const AnswerRecord&) const = default;
};

enum class AnswerKind { Categorical, Numeric };

inline nlohmann::json to_json(const AnswerRecord& r) {
    return {{"answer", r.answer}, {"confidence", r.confidence}, {"rationale", r.rationale}};
}

inline AnswerRecord answer_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw SchemaError("/", "answer must be an object");
    AnswerRecord r;
    const auto& a = j.at("answer");
    r.answer = a.is_string() ? a.get<std::string>() : a.dump();
    r.confidence = std::clamp(j.value("confidence", 0.0), 0.0, 1.0);
    r.rationale = j.value("rationale", std::string());
    return r;
}

inline double parse_numeric_answer(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    auto e = s.find_last_not_of(" \t\r\n");
    if (b == std::string::npos) throw UnparseableNumeric(s);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data() + b, s.data() + e + 1, v);
    if (ec != std::errc{} || ptr != s.data() + e + 1) throw UnparseableNumeric(s);
    return v;
}

// Shortest text that parses back to the same double ("15", "2.5").
inline std::string format_number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

// Categorical: confidence-weighted vote, confidence = winning mass / total
// mass, ties to the lexicographically smaller answer. Numeric:
// confidence-weighted mean, confidence = mean confidence.
inline AnswerRecord aggregate_answers(const std::vector<AnswerRecord>& records, AnswerKind kind) {
    if (records.empty()) throw ConfigError("aggregate_answers needs at least one record");
    if (kind == AnswerKind::Categorical) {
        std::map<std::string, double> mass;
        std::map<std::string, std::vector<std::string>> rationales;
        double total = 0.0;
        for (const auto& r : records) {
            mass[r.answer] += r.confidence;
            total += r.confidence;
            if (!r.rationale.empty()) rationales[r.answer].push_back(r.rationale);
        }
        auto best = mass.begin();
        for (auto it = mass.begin(); it != mass.end(); ++it)
            if (it->second > best->second) best = it;
        std::vector<std::string> notes = rationales[best->first];
        std::sort(notes.begin(), notes.end());
        return {best->first, total > 0.0 ? best->second / total : 0.0, join(notes, " | ")};
    }
    double weighted = 0.0;
    double weights = 0.0;
    double plain = 0.0;
    double conf = 0.0;
    for (const auto& r : records) {
        const double v = parse_numeric_answer(r.answer);
        weighted += r.confidence * v;
        weights += r.confidence;
        plain += v;
        conf += r.confidence;
    }
    const double n = static_cast<double>(records.size());
    const double value = weights > 0.0 ? weighted / weights : plain / n;
    return {format_number(value), conf / n, ""};
}

}  // namespace okh
