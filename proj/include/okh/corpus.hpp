#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "okh/error.hpp"
#include "okh/hypergraph.hpp"
#include "okh/random.hpp"
#include "okh/vocabulary.hpp"

namespace okh {

// ---------------------------------------------------------------------------
// Horizon splitting

struct HorizonBlock {
    std::optional<int> lead_time;  // empty when the document has no headers
    std::string text;
    std::size_t position = 0;      // byte offset of the block in the document
};

struct HorizonSplit {
    std::vector<HorizonBlock> blocks;
    bool no_horizons_found = false;  // the whole document came back as one block
};

// Splits at lines starting with "T-<n> hours before expected landfall:".
// Text before the first header belongs to the first block.
inline HorizonSplit split_horizons(std::string_view document) {
    static const std::regex header(R"(T-(\d+)\s+hours before expected landfall:)");
    struct Header {
        std::size_t pos;
        int lead;
    };
    std::vector<Header> headers;
    std::size_t line = 0;
    while (line <= document.size()) {
        std::match_results<std::string_view::const_iterator> m;
        if (std::regex_search(document.begin() + static_cast<std::ptrdiff_t>(line), document.end(), m, header,
                              std::regex_constants::match_continuous)) {
            if (auto lead = parse_int(m[1].str())) headers.push_back({line, *lead});
        }
        const auto nl = document.find('\n', line);
        if (nl == std::string_view::npos) break;
        line = nl + 1;
    }

    HorizonSplit out;
    if (headers.empty()) {
        out.blocks.push_back({std::nullopt, std::string(document), 0});
        out.no_horizons_found = true;
        return out;
    }
    for (std::size_t i = 0; i < headers.size(); ++i) {
        const std::size_t start = i == 0 ? 0 : headers[i].pos;
        const std::size_t end = i + 1 < headers.size() ? headers[i + 1].pos : document.size();
        out.blocks.push_back({headers[i].lead, std::string(document.substr(start, end - start)), start});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Kendall tau

// Tau-a between two orderings of the same elements. Lists shorter than two
// elements count as perfectly concordant.
inline double kendall_tau(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.size() != b.size()) throw ElementMismatch("orderings differ in length");
    std::map<std::string, std::size_t> rank;
    for (std::size_t i = 0; i < b.size(); ++i)
        if (!rank.emplace(b[i], i).second) throw ElementMismatch("duplicate element " + b[i]);
    std::vector<std::size_t> r;
    std::set<std::string> seen;
    for (const auto& x : a) {
        auto it = rank.find(x);
        if (it == rank.end() || !seen.insert(x).second) throw ElementMismatch("element sets differ at " + x);
        r.push_back(it->second);
    }
    const std::size_t n = r.size();
    if (n < 2) return 1.0;
    long long concordant = 0;
    long long discordant = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) (r[i] < r[j] ? concordant : discordant)++;
    return static_cast<double>(concordant - discordant) / static_cast<double>(n * (n - 1) / 2);
}

// ---------------------------------------------------------------------------
// Synthetic scenarios

inline constexpr std::array<int, 6> kSyntheticHorizons{120, 96, 72, 48, 24, 12};

enum class QaType { OrderSensitive, WithinHorizon };

inline std::string_view to_string(QaType t) { return t == QaType::OrderSensitive ? "order_sensitive" : "within_horizon"; }

struct QaItem {
    std::string id;
    std::string group;
    QaType type = QaType::OrderSensitive;
    std::string kind;  // final_category | did_intensify | value_at_horizon
    std::string question;
    std::string answer;
    std::optional<int> horizon;
    std::string attribute;
    bool operator==(const QaItem&) const = default;
};

struct SyntheticScenario {
    std::string storm;
    std::string port;  // display name
    std::string group;
    std::vector<int> horizons;  // descending lead time
    std::vector<std::string> ground_truth;
};

struct SyntheticCorpus {
    std::vector<Fact> facts;
    std::vector<QaItem> qa;
    std::vector<SyntheticScenario> scenarios;
};

namespace synth {

inline constexpr std::array<std::string_view, 26> kStorms{
    "IRMA",  "HARVEY", "LAURA",  "IDA",    "IAN",   "MICHAEL", "FLORENCE", "KATRINA", "RITA",
    "IKE",   "SANDY",  "MATTHEW", "DORIAN", "ISAAC", "ZETA",    "DELTA",    "SALLY",   "HANNA",
    "BETA",  "NATE",   "OPHELIA", "PAULA",  "RICHARD", "TOMAS", "VICKY",    "WILFRED"};

inline constexpr std::array<std::string_view, 12> kPorts{
    "Port Arthur", "Port Miami", "Houston",  "Galveston", "Corpus Christi", "Mobile",
    "New Orleans", "Tampa",      "Savannah", "Charleston", "Jacksonville",  "Lake Charles"};

inline constexpr std::array<std::string_view, 3> kAdvisory{"none", "watch", "warning"};
inline constexpr std::array<std::string_view, 3> kThreshold{"below", "approaching", "exceeded"};
inline constexpr std::array<std::string_view, 4> kOperations{"open", "advisory", "restricted", "closed"};
inline constexpr std::array<std::string_view, 4> kImpact{"low", "moderate", "high", "severe"};
inline constexpr std::array<std::string_view, 3> kRecovery{"pending", "planned", "staged"};

// Escalation level of step t out of n, mapped onto a scale of `levels` values.
inline std::size_t level(std::size_t t, std::size_t n, std::size_t levels, std::size_t offset) {
    const std::size_t span = n <= 1 ? 0 : (t * (levels - 1) + (n - 2)) / (n - 1);
    return std::min(levels - 1, span + offset);
}

struct Template {
    int family;
    std::string_view relation;
    std::string_view kind;
    bool cyclone;
    bool port;
};

inline constexpr std::array<Template, 12> kTemplates{{
    {1, "has_category_state", "cat_state", true, false},
    {2, "forecasts_landfall", "landfall_fcst", true, false},
    {3, "has_hours_to_landfall", "timing", true, false},
    {4, "has_warning_status", "advisory", true, true},
    {5, "has_leadtime_probability", "wind_prob", true, false},
    {6, "forecasts_hazard_at_horizon", "wind_fcst", false, true},
    {7, "observes_hazard_at_horizon", "hazard_obs", false, true},
    {8, "has_threshold_status", "threshold", false, true},
    {9, "has_additional_hazard", "extra_hazard", false, true},
    {10, "has_operation_status", "ops_status", false, true},
    {11, "has_impact_prediction", "impact", false, true},
    {12, "has_recovery_status", "recovery", false, true},
}};

}  // namespace synth

// Per group, per horizon: one fact for each of families 1-12, with values
// escalating toward landfall. Cross-horizon edges come from merging.
inline SyntheticCorpus generate_synthetic(std::uint64_t seed, std::size_t n_groups, std::size_t horizons_per_group) {
    if (n_groups < 1) throw ConfigError("n_groups must be >= 1");
    if (horizons_per_group < 1 || horizons_per_group > kSyntheticHorizons.size())
        throw ConfigError("horizons_per_group must lie in [1, 6]");
    Rng rng(seed);
    SyntheticCorpus corpus;

    std::vector<std::pair<std::size_t, std::size_t>> combos;
    for (std::size_t s = 0; s < synth::kStorms.size(); ++s)
        for (std::size_t p = 0; p < synth::kPorts.size(); ++p) combos.emplace_back(s, p);
    rng.shuffle(combos);

    const auto& vocab = RelationVocabulary::standard();
    for (std::size_t g = 0; g < n_groups; ++g) {
        const auto [si, pi] = combos[g % combos.size()];
        std::string storm(synth::kStorms[si]);
        if (g >= combos.size()) storm += std::to_string(g / combos.size());
        const std::string port(synth::kPorts[pi]);
        const std::string storm_id = canonical_entity_id("cyclone", storm, std::nullopt, std::nullopt);
        const std::string port_id = canonical_entity_id("port", std::nullopt, port, std::nullopt);
        const std::string group = storm + ":" + port_id.substr(port_id.find(':') + 1);

        std::vector<int> pool(kSyntheticHorizons.begin(), kSyntheticHorizons.end());
        rng.shuffle(pool);
        std::vector<int> horizons(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(horizons_per_group));
        std::sort(horizons.begin(), horizons.end(), std::greater<>());

        const std::size_t n = horizons.size();
        const auto base_cat = static_cast<int>(rng.below(2));
        std::vector<int> category(n);
        int c = base_cat;
        for (std::size_t t = 0; t < n; ++t) {
            if (t > 0 && rng.below(3) != 0) c = std::min(5, c + 1);
            category[t] = c;
        }
        const auto wind_base = 35 + static_cast<int>(rng.below(15));
        const auto offset = static_cast<std::size_t>(rng.below(2));

        SyntheticScenario scenario{storm, port, group, horizons, {}};
        std::vector<std::vector<std::string>> state_ids(n, std::vector<std::string>(13));
        std::vector<std::vector<std::string>> edge_ids(n, std::vector<std::string>(13));

        for (std::size_t t = 0; t < n; ++t) {
            const int h = horizons[t];
            const std::string label = horizon_label(h);
            const int wind = wind_base + 20 * category[t] + 5 * static_cast<int>(t);
            const int gust = wind + 10 + static_cast<int>(rng.below(10));
            const int prob = std::min(99, 20 + static_cast<int>(t * 60 / std::max<std::size_t>(1, n - 1)) +
                                              static_cast<int>(rng.below(10)));
            const int surge = 2 + category[t] + static_cast<int>(t);
            const int rain = 2 + static_cast<int>(t) + static_cast<int>(rng.below(3));
            for (const auto& tpl : synth::kTemplates) {
                Fact f;
                f.relation = std::string(tpl.relation);
                f.horizon = h;
                f.group = group;
                f.text_position = static_cast<std::int64_t>(t * 100 + static_cast<std::size_t>(tpl.family));
                std::map<std::string, std::string> attrs;
                std::string evidence;
                switch (tpl.family) {
                    case 1:
                        attrs = {{"category", std::to_string(category[t])}, {"wind_kt", std::to_string(wind)}};
                        evidence = storm + " is a category " + std::to_string(category[t]) + " storm with winds of " +
                                   std::to_string(wind) + " kt at " + label;
                        break;
                    case 2:
                        attrs = {{"landfall_hours", std::to_string(h)}};
                        evidence = storm + " track forecast shows landfall near " + port + " in " + std::to_string(h) + " hours";
                        break;
                    case 3:
                        attrs = {{"hours", std::to_string(h)}};
                        evidence = std::to_string(h) + " hours remain before " + storm + " reaches the coast";
                        break;
                    case 4: {
                        const auto s = synth::kAdvisory[synth::level(t, n, 3, offset)];
                        attrs = {{"status", std::string(s)}};
                        evidence = "coastal advisory status for " + port + " is " + std::string(s);
                        break;
                    }
                    case 5:
                        attrs = {{"probability", std::to_string(prob)}};
                        evidence = "probability of tropical storm force winds at " + port + " is " + std::to_string(prob) + " percent";
                        break;
                    case 6:
                        attrs = {{"wind_kt", std::to_string(wind)}, {"surge_ft", std::to_string(surge)}};
                        evidence = "forecast winds of " + std::to_string(wind) + " kt and surge of " + std::to_string(surge) +
                                   " ft expected at " + port;
                        break;
                    case 7:
                        attrs = {{"gust_kt", std::to_string(gust)}};
                        evidence = "observed gusts of " + std::to_string(gust) + " kt recorded near " + port;
                        break;
                    case 8: {
                        const auto s = synth::kThreshold[synth::level(t, n, 3, 0)];
                        attrs = {{"status", std::string(s)}};
                        evidence = "wind threshold for " + port + " operations is " + std::string(s);
                        break;
                    }
                    case 9:
                        attrs = {{"rain_in", std::to_string(rain)}};
                        evidence = "rainfall of " + std::to_string(rain) + " inches possible around " + port;
                        break;
                    case 10: {
                        const auto s = synth::kOperations[synth::level(t, n, 4, offset)];
                        attrs = {{"status", std::string(s)}};
                        evidence = port + " port condition is " + std::string(s);
                        break;
                    }
                    case 11: {
                        const auto s = synth::kImpact[synth::level(t, n, 4, 0)];
                        attrs = {{"severity", std::string(s)}};
                        evidence = "expected impact on " + port + " terminals is " + std::string(s);
                        break;
                    }
                    case 12: {
                        const auto s = synth::kRecovery[synth::level(t, n, 3, 0)];
                        attrs = {{"status", std::string(s)}};
                        evidence = "recovery teams for " + port + " are " + std::string(s);
                        break;
                    }
                }
                f.attributes = attrs;
                f.evidence = evidence;
                const std::string state = canonical_entity_id(tpl.kind, storm, port, h);
                f.entities.push_back({state, std::string(tpl.kind) + " " + label, EntityType::Other, "", 1.0});
                if (tpl.cyclone) f.entities.push_back({storm_id, storm, EntityType::Cyclone, "", 1.0});
                if (tpl.port) f.entities.push_back({port_id, port, EntityType::Port, "", 1.0});
                f.entities.push_back(make_horizon_anchor(h));

                std::vector<std::string> ids;
                for (const auto& e : f.entities) ids.push_back(e.id);
                state_ids[t][static_cast<std::size_t>(tpl.family)] = state;
                edge_ids[t][static_cast<std::size_t>(tpl.family)] = dedup_id(f.relation, ids, f.evidence);
                corpus.facts.push_back(std::move(f));
            }
        }

        // Ground truth: horizons from earliest to latest; within one horizon
        // families 1..12, then that horizon's outgoing changes ordered by
        // relation rank and source family.
        for (std::size_t t = 0; t < n; ++t) {
            for (int fam = 1; fam <= 12; ++fam) scenario.ground_truth.push_back(edge_ids[t][static_cast<std::size_t>(fam)]);
            if (t + 1 == n) break;
            std::vector<std::tuple<int, int, std::string>> changes;
            for (int fam = 1; fam <= 12; ++fam) {
                const std::string rel(cross_horizon_relation_for(fam));
                const auto& from = state_ids[t][static_cast<std::size_t>(fam)];
                const auto& to = state_ids[t + 1][static_cast<std::size_t>(fam)];
                const std::string stem = from.substr(0, from.rfind(":T-"));
                const std::string id = dedup_id(rel, {from, to, horizon_anchor_id(horizons[t]), horizon_anchor_id(horizons[t + 1])},
                                                stem + " evolves from " + horizon_label(horizons[t]) + " to " +
                                                    horizon_label(horizons[t + 1]));
                changes.emplace_back(vocab.rank_within_family(rel), fam, id);
            }
            std::sort(changes.begin(), changes.end());
            for (const auto& ch : changes) scenario.ground_truth.push_back(std::get<2>(ch));
        }

        // Questions.
        const std::string qprefix = group + "/";
        corpus.qa.push_back({qprefix + "final_category", group, QaType::OrderSensitive, "final_category",
                             "What is the latest forecast category of " + storm + " as it approaches " + port + "?",
                             std::to_string(category.back()), std::nullopt, "category"});
        corpus.qa.push_back({qprefix + "did_intensify", group, QaType::OrderSensitive, "did_intensify",
                             "Did " + storm + " intensify to a higher category on approach to " + port + "?",
                             category.back() > category.front() ? "Yes" : "No", std::nullopt, "category"});
        const std::size_t pick = static_cast<std::size_t>(rng.below(n));
        const int wind_at = wind_base + 20 * category[pick] + 5 * static_cast<int>(pick);
        corpus.qa.push_back({qprefix + "wind_" + horizon_label(horizons[pick]), group, QaType::WithinHorizon,
                             "value_at_horizon",
                             "What wind speed in kt is forecast for " + port + " at " + horizon_label(horizons[pick]) + "?",
                             std::to_string(wind_at), horizons[pick], "wind_kt"});
        corpus.scenarios.push_back(std::move(scenario));
    }
    return corpus;
}

inline nlohmann::json to_json(const QaItem& q) {
    return {{"id", q.id},
            {"group", q.group},
            {"type", std::string(to_string(q.type))},
            {"kind", q.kind},
            {"question", q.question},
            {"answer", q.answer},
            {"horizon", q.horizon ? nlohmann::json(*q.horizon) : nlohmann::json(nullptr)},
            {"attribute", q.attribute}};
}

inline QaItem qa_from_json(const nlohmann::json& j) {
    QaItem q;
    q.id = j.at("id").get<std::string>();
    q.group = j.at("group").get<std::string>();
    const auto type = j.at("type").get<std::string>();
    if (type == "order_sensitive") q.type = QaType::OrderSensitive;
    else if (type == "within_horizon") q.type = QaType::WithinHorizon;
    else throw SchemaError("/type", "unknown question type " + type);
    q.kind = j.at("kind").get<std::string>();
    q.question = j.at("question").get<std::string>();
    q.answer = j.at("answer").get<std::string>();
    if (j.contains("horizon") && !j["horizon"].is_null()) q.horizon = j["horizon"].get<int>();
    q.attribute = j.value("attribute", std::string());
    return q;
}

inline void write_qa_jsonl(std::ostream& out, const std::vector<QaItem>& qa) {
    for (const auto& q : qa) out << to_json(q).dump() << '\n';
}

inline std::vector<QaItem> read_qa_jsonl(std::istream& in) {
    std::vector<QaItem> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(qa_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError("line " + std::to_string(lineno), e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Oracle reader: answers synthetic questions from the structured attributes of
// the presented steps, honoring their order. Returns an empty string when the
// steps do not support an answer.

inline std::string oracle_answer(const QaItem& q, const std::vector<std::string>& steps, const KnowledgeHypergraph& graph) {
    std::vector<const Hyperedge*> carrying;
    for (const auto& id : steps) {
        const Hyperedge* e = graph.find_edge(id);
        if (e && e->group_id == q.group && e->attributes.count(q.attribute)) carrying.push_back(e);
    }
    if (q.kind == "final_category") {
        return carrying.empty() ? std::string() : carrying.back()->attributes.at(q.attribute);
    }
    if (q.kind == "did_intensify") {
        if (carrying.size() < 2) return {};
        const auto first = carrying.front()->numeric_attribute(q.attribute);
        const auto last = carrying.back()->numeric_attribute(q.attribute);
        if (!first || !last) return {};
        return *last > *first ? "Yes" : "No";
    }
    if (q.kind == "value_at_horizon") {
        for (const Hyperedge* e : carrying)
            if (e->horizon == q.horizon) return e->attributes.at(q.attribute);
        return {};
    }
    return {};
}

}  // namespace okh
