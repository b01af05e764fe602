#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace okh {

inline constexpr int kFamilyCount = 13;
inline constexpr int kCrossHorizonFamily = 13;

struct RelationFamily {
    int index;  // 1-based, canonical phase order
    std::string_view name;
    std::vector<std::string_view> relations;
};

struct NormalizedRelation {
    std::string relation;
    int family = 0;
    bool operator==(const NormalizedRelation&) const = default;
};

// Controlled relation vocabulary. Families 1-12 are within-horizon and
// ordered by reasoning phase; family 13 links one horizon to the next.
class RelationVocabulary {
public:
    static const RelationVocabulary& standard() {
        static const RelationVocabulary vocab;
        return vocab;
    }

    const std::vector<RelationFamily>& families() const { return families_; }

    const RelationFamily& family(int index) const { return families_.at(static_cast<std::size_t>(index - 1)); }

    bool is_canonical(std::string_view relation) const {
        return family_of_.find(std::string(relation)) != family_of_.end();
    }

    // 0 when the relation is not canonical.
    int family_of(std::string_view relation) const {
        auto it = family_of_.find(std::string(relation));
        return it == family_of_.end() ? 0 : it->second;
    }

    // Position of the relation within its family's list, 0-based.
    int rank_within_family(std::string_view relation) const {
        const int f = family_of(relation);
        if (f == 0) return 0;
        const auto& rels = family(f).relations;
        auto it = std::find(rels.begin(), rels.end(), relation);
        return static_cast<int>(it - rels.begin());
    }

    const std::map<std::string, std::string>& aliases() const { return aliases_; }

    // Always returns a canonical relation. Lookup order: case and whitespace
    // folded exact match against canonical names and aliases, then the best
    // token-Jaccard match (>= 0.5, ties to the lexicographically smallest
    // alias key), else the generic attribute relation.
    NormalizedRelation normalize(std::string_view raw) const {
        const std::string key = fold(raw);
        if (auto it = aliases_.find(key); it != aliases_.end()) {
            return {it->second, family_of(it->second)};
        }
        const auto tokens = tokenize(key);
        double best = 0.0;
        const std::string* best_target = nullptr;
        for (const auto& [alias, target] : aliases_) {  // map iteration is lexicographic
            const double score = jaccard(tokens, tokenize(alias));
            if (score >= 0.5 && score > best) {
                best = score;
                best_target = &target;
            }
        }
        if (best_target != nullptr) return {*best_target, family_of(*best_target)};
        return {std::string(kFallbackRelation), family_of(kFallbackRelation)};
    }

    static constexpr std::string_view kFallbackRelation = "has_attribute";

    // Lowercase, trim, and collapse runs of spaces, hyphens and underscores
    // into single underscores.
    static std::string fold(std::string_view raw) {
        std::string out;
        bool pending_sep = false;
        for (char c : raw) {
            const auto uc = static_cast<unsigned char>(c);
            if (std::isspace(uc) || c == '-' || c == '_') {
                pending_sep = !out.empty();
                continue;
            }
            if (pending_sep) out.push_back('_');
            pending_sep = false;
            out.push_back(static_cast<char>(std::tolower(uc)));
        }
        return out;
    }

private:
    RelationVocabulary() {
        families_ = {
            {1, "cyclone_state", {"has_cyclone_state", "has_category_state", "has_motion"}},
            {2, "track_landfall", {"forecasts_track", "forecasts_landfall"}},
            {3, "timing", {"has_hours_to_landfall", "has_forecast_window"}},
            {4, "advisory", {"has_watch_status", "has_warning_status"}},
            {5, "probability", {"has_leadtime_probability", "has_cumulative_probability"}},
            {6, "hazard_forecast", {"forecasts_hazard_at_horizon"}},
            {7, "hazard_observation", {"observes_hazard_at_horizon"}},
            {8, "threshold", {"has_threshold_status"}},
            {9, "additional_hazards", {"has_additional_hazard", kFallbackRelation}},
            {10, "operations", {"has_operation_status", "affects_vessel_handling"}},
            {11, "impact", {"has_impact_prediction", "causes_operational_disruption"}},
            {12, "recovery", {"has_recovery_status", "starts_recovery"}},
            {13, "cross_horizon",
             {"forecast_updates_to", "intensifies_to", "changes_status_to", "changes_probability_to"}},
        };
        for (const auto& fam : families_) {
            for (auto rel : fam.relations) {
                family_of_.emplace(std::string(rel), fam.index);
                aliases_.emplace(std::string(rel), std::string(rel));
            }
        }
        const std::pair<const char*, const char*> extra[] = {
            {"closes_port", "has_operation_status"},
            {"reopens_port", "has_recovery_status"},
            {"restricts_port", "has_operation_status"},
            {"port_closure", "has_operation_status"},
            {"restricts_vessel_movement", "affects_vessel_handling"},
            {"has_category", "has_category_state"},
            {"has_intensity", "has_category_state"},
            {"has_storm_state", "has_cyclone_state"},
            {"moves_toward", "has_motion"},
            {"has_track", "forecasts_track"},
            {"makes_landfall", "forecasts_landfall"},
            {"has_watch", "has_watch_status"},
            {"has_warning", "has_warning_status"},
            {"issues_warning", "has_warning_status"},
            {"has_probability", "has_leadtime_probability"},
            {"forecasts_hazard", "forecasts_hazard_at_horizon"},
            {"forecasts_wind", "forecasts_hazard_at_horizon"},
            {"forecasts_surge", "forecasts_hazard_at_horizon"},
            {"observes_hazard", "observes_hazard_at_horizon"},
            {"exceeds_threshold", "has_threshold_status"},
            {"predicts_impact", "has_impact_prediction"},
            {"disrupts_operations", "causes_operational_disruption"},
            {"begins_recovery", "starts_recovery"},
            {"updates_forecast", "forecast_updates_to"},
            {"intensifies", "intensifies_to"},
            {"changes_status", "changes_status_to"},
            {"changes_probability", "changes_probability_to"},
        };
        for (const auto& [alias, target] : extra) aliases_.emplace(alias, target);
    }

    static std::set<std::string> tokenize(const std::string& folded) {
        std::set<std::string> out;
        std::size_t start = 0;
        while (start <= folded.size()) {
            const auto end = folded.find('_', start);
            const auto stop = end == std::string::npos ? folded.size() : end;
            if (stop > start) out.insert(folded.substr(start, stop - start));
            if (end == std::string::npos) break;
            start = end + 1;
        }
        return out;
    }

    static double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
        if (a.empty() && b.empty()) return 0.0;
        std::size_t inter = 0;
        for (const auto& t : a) inter += b.count(t);
        return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
    }

    std::vector<RelationFamily> families_;
    std::map<std::string, int> family_of_;
    std::map<std::string, std::string> aliases_;
};

inline NormalizedRelation normalize_relation(std::string_view raw) {
    return RelationVocabulary::standard().normalize(raw);
}

}  // namespace okh
