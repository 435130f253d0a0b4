#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pepeval/decoding.hpp"
#include "pepeval/extraction.hpp"
#include "pepeval/problems.hpp"

namespace pepeval {

/// A reported fraction always travels with its denominator.
struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 0;

    double value() const { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }
    double pct() const { return value() * 100.0; }

    json to_json() const { return json{{"num", num}, {"den", den}, {"value", value()}}; }
    static Fraction from_json(const json& j) {
        return Fraction{j.value("num", std::int64_t{0}), j.value("den", std::int64_t{0})};
    }
};

struct ScoredItem {
    std::string problem_id;
    bool correct = false;
    std::optional<GsmicMeta> gsmic;
};

/// Robustness measure: variant accuracy divided by base accuracy, x100.
inline double norm_accuracy(double accuracy_pct, double base_accuracy_pct) {
    return accuracy_pct / base_accuracy_pct * 100.0;
}

inline Fraction accuracy(std::span<const ScoredItem> items) {
    if (items.empty()) throw std::invalid_argument("accuracy over an empty item list");
    Fraction f;
    f.den = static_cast<std::int64_t>(items.size());
    for (const ScoredItem& it : items) f.num += it.correct ? 1 : 0;
    return f;
}

/// One stratum row of the irrelevant-context report. Macro is reported in
/// both readings: all sampled variants of a base correct (primary), and the
/// mean of per-base accuracies (secondary).
struct GsmicCell {
    Fraction micro;
    Fraction macro_all_correct;
    Fraction macro_mean_num{0, 0};  // numerator counts correct variants per base
    double macro_mean = 0.0;
    Fraction base_micro;   // variant-weighted base accuracy
    Fraction base_macro;   // per-base accuracy, each base once
    std::optional<double> norm_micro;
    std::optional<double> norm_macro;

    json to_json() const {
        json j{{"micro", micro.to_json()},
               {"macro", macro_all_correct.to_json()},
               {"macro_mean_per_base", macro_mean},
               {"base_micro", base_micro.to_json()},
               {"base_macro", base_macro.to_json()}};
        if (norm_micro) j["norm_micro"] = *norm_micro;
        if (norm_macro) j["norm_macro"] = *norm_macro;
        return j;
    }
    static GsmicCell from_json(const json& j) {
        GsmicCell c;
        c.micro = Fraction::from_json(j.at("micro"));
        c.macro_all_correct = Fraction::from_json(j.at("macro"));
        c.macro_mean = j.value("macro_mean_per_base", 0.0);
        c.base_micro = Fraction::from_json(j.at("base_micro"));
        c.base_macro = Fraction::from_json(j.at("base_macro"));
        if (j.contains("norm_micro")) c.norm_micro = j["norm_micro"].get<double>();
        if (j.contains("norm_macro")) c.norm_macro = j["norm_macro"].get<double>();
        return c;
    }
};

struct FactorCell {
    Fraction micro;
    Fraction macro;  // all-level-variants-correct per base with >=1 such variant

    json to_json() const { return json{{"micro", micro.to_json()}, {"macro", macro.to_json()}}; }
    static FactorCell from_json(const json& j) {
        return FactorCell{Fraction::from_json(j.at("micro")), Fraction::from_json(j.at("macro"))};
    }
};

struct ScoreReport {
    std::string kind = "plain";  // "plain" | "gsmic"
    Fraction overall;
    std::map<std::string, GsmicCell> strata;                          // two_step | m_step | overall
    std::map<std::string, std::map<std::string, FactorCell>> factors; // factor -> level

    json to_json() const {
        json j{{"kind", kind}, {"overall", overall.to_json()}};
        if (!strata.empty()) {
            json s;
            for (const auto& [name, cell] : strata) s[name] = cell.to_json();
            j["strata"] = s;
        }
        if (!factors.empty()) {
            json f;
            for (const auto& [factor, levels] : factors) {
                json l;
                for (const auto& [level, cell] : levels) l[level] = cell.to_json();
                f[factor] = l;
            }
            j["factors"] = f;
        }
        return j;
    }
    static ScoreReport from_json(const json& j) {
        ScoreReport r;
        r.kind = j.value("kind", "plain");
        r.overall = Fraction::from_json(j.at("overall"));
        if (j.contains("strata"))
            for (const auto& [name, cell] : j["strata"].items())
                r.strata[name] = GsmicCell::from_json(cell);
        if (j.contains("factors"))
            for (const auto& [factor, levels] : j["factors"].items())
                for (const auto& [level, cell] : levels.items())
                    r.factors[factor][level] = FactorCell::from_json(cell);
        return r;
    }
};

inline ScoreReport plain_scores(std::span<const ScoredItem> items) {
    ScoreReport report;
    report.kind = "plain";
    report.overall = accuracy(items);
    return report;
}

namespace detail {

struct BaseScore {
    bool correct = false;
    StepClass steps = StepClass::two_step;
};

inline std::map<std::string, BaseScore> index_bases(std::span<const ScoredItem> base_items) {
    std::map<std::string, BaseScore> out;
    for (const ScoredItem& b : base_items) {
        if (!b.gsmic || !b.gsmic->is_base)
            throw std::invalid_argument("base item list contains a non-base item: " + b.problem_id);
        out[b.problem_id] = BaseScore{b.correct, b.gsmic->n_steps};
    }
    return out;
}

inline bool in_stratum(const GsmicMeta& meta, const std::string& stratum) {
    return stratum == "overall" || to_string(meta.n_steps) == stratum;
}

}  // namespace detail

inline std::map<std::string, std::map<std::string, FactorCell>> factor_levels(
    std::span<const ScoredItem> items);

/// Distractor metrics over variant items. Micro averages per variant; macro
/// marks a base problem correct only when every sampled variant is; norm
/// divides by the matching accuracy on the unperturbed base problems.
inline ScoreReport gsmic_scores(std::span<const ScoredItem> items,
                                std::span<const ScoredItem> base_items) {
    auto bases = detail::index_bases(base_items);
    for (const ScoredItem& it : items) {
        if (!it.gsmic || it.gsmic->is_base)
            throw std::invalid_argument("variant list contains a base or unlabeled item: " +
                                        it.problem_id);
        if (!bases.count(it.gsmic->base_id))
            throw std::invalid_argument("no base score for variant " + it.problem_id +
                                        " (base " + it.gsmic->base_id + ")");
    }

    ScoreReport report;
    report.kind = "gsmic";

    for (const std::string stratum : {"two_step", "m_step", "overall"}) {
        GsmicCell cell;
        std::map<std::string, std::pair<int, int>> per_base;  // base -> (correct, total) variants
        for (const ScoredItem& it : items) {
            if (!detail::in_stratum(*it.gsmic, stratum)) continue;
            ++cell.micro.den;
            cell.micro.num += it.correct ? 1 : 0;
            ++cell.base_micro.den;
            cell.base_micro.num += bases.at(it.gsmic->base_id).correct ? 1 : 0;
            auto& pb = per_base[it.gsmic->base_id];
            ++pb.second;
            pb.first += it.correct ? 1 : 0;
        }
        if (cell.micro.den == 0) continue;  // stratum absent from this run
        double mean_sum = 0.0;
        for (const auto& [base_id, counts] : per_base) {
            ++cell.macro_all_correct.den;
            cell.macro_all_correct.num += counts.first == counts.second ? 1 : 0;
            mean_sum += static_cast<double>(counts.first) / counts.second;
            ++cell.base_macro.den;
            cell.base_macro.num += bases.at(base_id).correct ? 1 : 0;
        }
        cell.macro_mean = mean_sum / static_cast<double>(per_base.size());
        if (cell.base_micro.num > 0)
            cell.norm_micro = norm_accuracy(cell.micro.pct(), cell.base_micro.pct());
        if (cell.base_macro.num > 0)
            cell.norm_macro = norm_accuracy(cell.macro_all_correct.pct(), cell.base_macro.pct());
        report.strata[stratum] = cell;
    }

    report.overall = report.strata.count("overall") ? report.strata["overall"].micro : Fraction{};
    report.factors = factor_levels(items);
    return report;
}

/// Micro and macro accuracy restricted to the variants at each level of each
/// distractor factor (topic, role overlap, number range).
inline std::map<std::string, std::map<std::string, FactorCell>> factor_levels(
    std::span<const ScoredItem> items) {
    std::map<std::string, std::map<std::string, FactorCell>> out;
    struct LevelAgg {
        Fraction micro;
        std::map<std::string, std::pair<int, int>> per_base;
    };
    std::map<std::string, std::map<std::string, LevelAgg>> agg;
    for (const ScoredItem& it : items) {
        if (!it.gsmic || it.gsmic->is_base) continue;
        const GsmicMeta& m = *it.gsmic;
        auto add = [&](const std::string& factor, const std::string& level) {
            LevelAgg& a = agg[factor][level];
            ++a.micro.den;
            a.micro.num += it.correct ? 1 : 0;
            auto& pb = a.per_base[m.base_id];
            ++pb.second;
            pb.first += it.correct ? 1 : 0;
        };
        if (m.topic) add("topic", to_string(*m.topic));
        if (m.role_overlap) add("role_overlap", to_string(*m.role_overlap));
        if (m.num_range) add("num_range", to_string(*m.num_range));
    }
    for (auto& [factor, levels] : agg) {
        for (auto& [level, a] : levels) {
            FactorCell cell;
            cell.micro = a.micro;
            for (const auto& [base_id, counts] : a.per_base) {
                ++cell.macro.den;
                cell.macro.num += counts.first == counts.second ? 1 : 0;
            }
            out[factor][level] = cell;
        }
    }
    return out;
}

/// Breakdown entry point taking the base items for validation; the
/// denominators come from the variants themselves.
inline std::map<std::string, std::map<std::string, FactorCell>> factor_breakdown(
    std::span<const ScoredItem> items, std::span<const ScoredItem> base_items) {
    detail::index_bases(base_items);  // validates the base list
    return factor_levels(items);
}

// ---------------------------------------------------------------------------
// instruction candidate selection
// ---------------------------------------------------------------------------

struct CandidateResult {
    std::string label;
    std::string instruction;
    Fraction accuracy;
    bool winner = false;

    json to_json() const {
        return json{{"label", label},
                    {"instruction", instruction},
                    {"accuracy", accuracy.to_json()},
                    {"winner", winner}};
    }
};

/// Greedy zero-shot evaluation of each candidate instruction over a problem
/// subset; rows come back sorted by accuracy, ties keeping input order.
inline std::vector<CandidateResult> prompt_selection_eval(
    const std::vector<std::pair<std::string, std::string>>& candidates, const ProblemSet& subset,
    const PromptEngine& engine, Gateway& gateway, const DecodeOptions& opts,
    bool include_format_inst = true) {
    if (candidates.empty()) throw std::invalid_argument("no candidate instructions");
    if (subset.empty()) throw std::invalid_argument("empty selection subset");

    std::vector<CandidateResult> rows;
    for (const auto& [label, instruction] : candidates) {
        CandidateResult row;
        row.label = label;
        row.instruction = instruction;
        row.accuracy.den = static_cast<std::int64_t>(subset.size());
        for (const Problem& problem : subset.problems()) {
            MethodSpec spec;
            spec.method = MethodKind::cot;
            spec.k_shots = 0;
            spec.answer_format = problem.choices.empty() ? AnswerFormat::free : AnswerFormat::choice;
            try {
                PromptText prompt = engine.build_zero_shot_prompt(problem, spec, instruction,
                                                                  include_format_inst);
                GenRequest req;
                req.model = opts.model;
                req.prompt = prompt;
                req.temperature = 0.0;
                req.max_tokens = opts.max_tokens;
                GenResponse resp = gateway.generate(req);
                ExtractionOutcome outcome = extract_answer(resp.text, spec.answer_format);
                if (match_answer(outcome.answer, problem.gold)) ++row.accuracy.num;
            } catch (const GatewayError&) {
                // counted incorrect
            }
        }
        rows.push_back(std::move(row));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const CandidateResult& a, const CandidateResult& b) {
        return a.accuracy.value() > b.accuracy.value();
    });
    if (!rows.empty()) rows.front().winner = true;
    return rows;
}

}  // namespace pepeval
