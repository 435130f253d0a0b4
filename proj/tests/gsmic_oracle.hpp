#pragma once

// Test-only brute-force recount of the distractor metrics over a flat
// synthetic structure. Written against the metric definitions directly and
// kept independent of the report code path it checks.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "pepeval/metrics.hpp"
#include "pepeval/util.hpp"

namespace pepeval::testing {

struct SynthVariant {
    std::string base;
    bool two_step = true;
    bool correct = false;
    int topic = 0;  // 0 in_topic, 1 off_topic
    int role = 0;   // 0 overlap, 1 non_overlap
    int range = 0;  // 0 in_range, 1 out_range
};

struct SynthSet {
    std::vector<SynthVariant> variants;
    std::map<std::string, std::pair<bool, bool>> bases;  // base -> (correct, two_step)
};

inline bool in_stratum(const SynthVariant& v, int stratum) {
    return stratum == 2 || (stratum == 0 ? v.two_step : !v.two_step);
}

inline double oracle_micro(const SynthSet& s, int stratum) {
    int num = 0, den = 0;
    for (const auto& v : s.variants) {
        if (!in_stratum(v, stratum)) continue;
        ++den;
        num += v.correct;
    }
    return den ? static_cast<double>(num) / den : -1;
}

inline double oracle_macro_all(const SynthSet& s, int stratum) {
    std::map<std::string, bool> all_ok;
    for (const auto& v : s.variants) {
        if (!in_stratum(v, stratum)) continue;
        auto [it, fresh] = all_ok.try_emplace(v.base, true);
        it->second = it->second && v.correct;
    }
    if (all_ok.empty()) return -1;
    int num = 0;
    for (const auto& [b, ok] : all_ok) num += ok;
    return static_cast<double>(num) / static_cast<double>(all_ok.size());
}

inline double oracle_macro_mean(const SynthSet& s, int stratum) {
    std::map<std::string, std::pair<int, int>> per;
    for (const auto& v : s.variants) {
        if (!in_stratum(v, stratum)) continue;
        per[v.base].second++;
        per[v.base].first += v.correct;
    }
    if (per.empty()) return -1;
    double sum = 0;
    for (const auto& [b, c] : per) sum += static_cast<double>(c.first) / c.second;
    return sum / static_cast<double>(per.size());
}

inline double oracle_base_micro(const SynthSet& s, int stratum) {
    int num = 0, den = 0;
    for (const auto& v : s.variants) {
        if (!in_stratum(v, stratum)) continue;
        ++den;
        num += s.bases.at(v.base).first;
    }
    return den ? static_cast<double>(num) / den : -1;
}

inline double oracle_base_macro(const SynthSet& s, int stratum) {
    std::set<std::string> seen;
    int num = 0;
    for (const auto& v : s.variants) {
        if (!in_stratum(v, stratum)) continue;
        if (seen.insert(v.base).second) num += s.bases.at(v.base).first;
    }
    return seen.empty() ? -1 : static_cast<double>(num) / static_cast<double>(seen.size());
}

inline std::pair<double, double> oracle_factor(const SynthSet& s, int which, int level) {
    int num = 0, den = 0;
    std::map<std::string, bool> all_ok;
    for (const auto& v : s.variants) {
        int value = which == 0 ? v.topic : which == 1 ? v.role : v.range;
        if (value != level) continue;
        ++den;
        num += v.correct;
        auto [it, fresh] = all_ok.try_emplace(v.base, true);
        it->second = it->second && v.correct;
    }
    if (den == 0) return {-1, -1};
    int mnum = 0;
    for (const auto& [b, ok] : all_ok) mnum += ok;
    return {static_cast<double>(num) / den,
            static_cast<double>(mnum) / static_cast<double>(all_ok.size())};
}

inline SynthSet random_synth(SplitMix64& rng) {
    SynthSet s;
    int bases_two = 1 + static_cast<int>(rng.bounded(5));
    int bases_m = 1 + static_cast<int>(rng.bounded(5));
    int id = 0;
    for (int stratum = 0; stratum < 2; ++stratum) {
        int n = stratum == 0 ? bases_two : bases_m;
        for (int b = 0; b < n; ++b) {
            std::string base = "b" + std::to_string(id++);
            s.bases[base] = {rng.bounded(4) != 0, stratum == 0};
            int variants = 1 + static_cast<int>(rng.bounded(6));
            for (int v = 0; v < variants; ++v) {
                SynthVariant sv;
                sv.base = base;
                sv.two_step = stratum == 0;
                sv.correct = rng.bounded(3) != 0;
                sv.topic = static_cast<int>(rng.bounded(2));
                sv.role = static_cast<int>(rng.bounded(2));
                sv.range = static_cast<int>(rng.bounded(2));
                s.variants.push_back(sv);
            }
        }
    }
    return s;
}

inline std::pair<std::vector<ScoredItem>, std::vector<ScoredItem>> to_items(const SynthSet& s) {
    std::vector<ScoredItem> variants, bases;
    for (const auto& [base, info] : s.bases) {
        ScoredItem item;
        item.problem_id = base;
        item.correct = info.first;
        GsmicMeta meta;
        meta.base_id = base;
        meta.is_base = true;
        meta.n_steps = info.second ? StepClass::two_step : StepClass::m_step;
        item.gsmic = meta;
        bases.push_back(item);
    }
    int i = 0;
    for (const auto& v : s.variants) {
        ScoredItem item;
        item.problem_id = v.base + "_v" + std::to_string(i++);
        item.correct = v.correct;
        GsmicMeta meta;
        meta.base_id = v.base;
        meta.is_base = false;
        meta.n_steps = v.two_step ? StepClass::two_step : StepClass::m_step;
        meta.topic = v.topic == 0 ? TopicLevel::in_topic : TopicLevel::off_topic;
        meta.role_overlap = v.role == 0 ? RoleOverlapLevel::overlap : RoleOverlapLevel::non_overlap;
        meta.num_range = v.range == 0 ? NumRangeLevel::in_range : NumRangeLevel::out_range;
        item.gsmic = meta;
        variants.push_back(item);
    }
    return {variants, bases};
}

}  // namespace pepeval::testing
