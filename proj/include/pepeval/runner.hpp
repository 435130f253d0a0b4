#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pepeval/decoding.hpp"
#include "pepeval/metrics.hpp"
#include "pepeval/problems.hpp"

namespace pepeval {

inline constexpr const char* kVersion = "0.1.0";

struct DecodingConfig {
    std::string mode = "greedy";  // greedy | sc
    int samples = 20;
    double temperature = 0.7;

    json to_json() const {
        return json{{"mode", mode}, {"samples", samples}, {"temperature", temperature}};
    }
    static DecodingConfig from_json(const json& j) {
        DecodingConfig d;
        d.mode = j.value("mode", "greedy");
        d.samples = j.value("samples", 20);
        d.temperature = j.value("temperature", 0.7);
        return d;
    }
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::string dataset_path;
    DatasetTag format = DatasetTag::canonical;
    MethodSpec method;
    std::string model = "mock-model";
    BackendConfig backend;
    RetryPolicy retry;
    DecodingConfig decoding;
    bool llm_fallback = false;
    PotConfig pot;
    std::string out_dir;
    std::string cache_dir;  // empty -> <out_dir>/cache
    bool cache_enabled = true;
    std::uint64_t seed = 17;
    int concurrency = 0;    // 0 -> 4 live, 8 mock
    int max_tokens = 1024;
    int max_tokens_extract = 64;
    int gsmic_sample_n = 0; // 0 -> run the pool as-is
    std::string template_dir;
    std::map<std::string, std::string> instruction_overrides;

    void validate() const {
        if (dataset_path.empty()) throw ConfigError("dataset path is required");
        if (out_dir.empty()) throw ConfigError("output directory is required");
        method.validate();
        if (decoding.mode != "greedy" && decoding.mode != "sc")
            throw ConfigError("decoding mode must be greedy or sc");
        if (decoding.mode == "sc") {
            if (decoding.samples < 2) throw ConfigError("self-consistency needs samples >= 2");
            if (decoding.temperature <= 0) throw ConfigError("self-consistency needs temperature > 0");
            if (method.method == MethodKind::pot || method.method == MethodKind::pot_pep)
                throw ConfigError("self-consistency is not supported for code-generation methods");
        }
        if (max_tokens <= 0 || max_tokens_extract <= 0)
            throw ConfigError("token limits must be positive");
        if (gsmic_sample_n < 0) throw ConfigError("gsmic sample size must be non-negative");
        if (gsmic_sample_n > 0 && format != DatasetTag::gsmic && format != DatasetTag::canonical)
            throw ConfigError("stratified sampling applies to irrelevant-context pools only");
    }

    int effective_concurrency() const {
        if (concurrency > 0) return concurrency;
        return backend.kind == BackendKind::mock ? 8 : 4;
    }

    json to_json() const {
        json j{{"dataset_path", dataset_path},
               {"format", to_string(format)},
               {"method", method.to_json()},
               {"model", model},
               {"backend", backend.to_json()},
               {"retry", retry.to_json()},
               {"decoding", decoding.to_json()},
               {"llm_fallback", llm_fallback},
               {"pot", pot.to_json()},
               {"out_dir", out_dir},
               {"cache_dir", cache_dir},
               {"cache_enabled", cache_enabled},
               {"seed", seed},
               {"concurrency", concurrency},
               {"max_tokens", max_tokens},
               {"max_tokens_extract", max_tokens_extract},
               {"gsmic_sample_n", gsmic_sample_n},
               {"template_dir", template_dir}};
        if (!instruction_overrides.empty()) j["instructions"] = instruction_overrides;
        return j;
    }
    static ExperimentConfig from_json(const json& j) {
        ExperimentConfig c;
        c.dataset_path = j.value("dataset_path", "");
        if (auto f = dataset_tag_from(j.value("format", "canonical"))) c.format = *f;
        if (j.contains("method")) c.method = MethodSpec::from_json(j["method"]);
        c.model = j.value("model", "mock-model");
        if (j.contains("backend")) c.backend = BackendConfig::from_json(j["backend"]);
        if (j.contains("retry")) c.retry = RetryPolicy::from_json(j["retry"]);
        if (j.contains("decoding")) c.decoding = DecodingConfig::from_json(j["decoding"]);
        c.llm_fallback = j.value("llm_fallback", false);
        if (j.contains("pot")) c.pot = PotConfig::from_json(j["pot"]);
        c.out_dir = j.value("out_dir", "");
        c.cache_dir = j.value("cache_dir", "");
        c.cache_enabled = j.value("cache_enabled", true);
        c.seed = j.value("seed", std::uint64_t{17});
        c.concurrency = j.value("concurrency", 0);
        c.max_tokens = j.value("max_tokens", 1024);
        c.max_tokens_extract = j.value("max_tokens_extract", 64);
        c.gsmic_sample_n = j.value("gsmic_sample_n", 0);
        c.template_dir = j.value("template_dir", "");
        if (j.contains("instructions"))
            c.instruction_overrides = j["instructions"].get<std::map<std::string, std::string>>();
        return c;
    }
};

struct RunRecord {
    json header;
    std::vector<Trace> traces;

    /// Digest over the trace lines only; header timestamps are excluded so
    /// identical reruns hash identically.
    std::string trace_digest() const {
        Sha256 h;
        for (const Trace& t : traces) {
            h.update(t.to_json().dump());
            h.update("\n");
        }
        return h.hex_digest();
    }
};

namespace detail {

inline InstructionSet instructions_for(const ExperimentConfig& config) {
    InstructionSet insts = InstructionSet::defaults();
    if (!config.template_dir.empty()) {
        TemplateStore store{config.template_dir};
        insts.cot_inst = store.get("cot_inst");
        insts.pep_inst = store.get("pep_inst");
        insts.irr_inst = store.get("irr_inst");
        insts.format_inst_free = store.get("format_inst_free");
        insts.format_inst_choice = store.get("format_inst_choice");
        insts.variant_insts = {{"dec", store.get("dec_inst")},
                               {"elu", store.get("elu_inst")},
                               {"etd", store.get("etd_inst")}};
    }
    for (const auto& [key, value] : config.instruction_overrides) {
        if (key == "cot_inst") insts.cot_inst = value;
        else if (key == "pep_inst") insts.pep_inst = value;
        else if (key == "irr_inst") insts.irr_inst = value;
        else if (key == "format_inst_free") insts.format_inst_free = value;
        else if (key == "format_inst_choice") insts.format_inst_choice = value;
        else insts.variant_insts[key] = value;
    }
    return insts;
}

inline std::map<std::string, Trace> load_trace_file(const std::filesystem::path& path) {
    std::map<std::string, Trace> out;
    if (!std::filesystem::exists(path)) return out;
    for (const std::string& line : split_lines(read_file(path))) {
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || j.value("type", "") != "trace") continue;
        Trace t = Trace::from_json(j);
        out[t.problem_id] = std::move(t);
    }
    return out;
}

inline Trace run_one(const Problem& problem, const ExperimentConfig& config,
                     const PromptEngine& engine, Gateway& gateway) {
    DecodeOptions opts;
    opts.model = config.model;
    opts.max_tokens = config.max_tokens;
    opts.max_tokens_extract = config.max_tokens_extract;
    opts.llm_fallback = config.llm_fallback;

    MethodSpec spec = config.method;
    if (!problem.choices.empty()) spec.answer_format = AnswerFormat::choice;

    if (spec.method == MethodKind::pot || spec.method == MethodKind::pot_pep)
        return run_pot_pipeline(problem, spec.method == MethodKind::pot_pep, engine, gateway,
                                config.pot, opts);
    if (config.decoding.mode == "sc")
        return run_self_consistency(problem, spec, config.decoding.samples,
                                    config.decoding.temperature, engine, gateway, opts);
    return run_greedy(problem, spec, engine, gateway, opts);
}

}  // namespace detail

/// Loads the configured dataset and applies stratified sampling when asked.
inline ProblemSet load_problems(const ExperimentConfig& config) {
    ProblemSet set = load_dataset(config.dataset_path, config.format);
    if (config.gsmic_sample_n > 0) set = sample_gsmic(set, config.gsmic_sample_n, config.seed);
    return set;
}

/// Runs (or resumes) an experiment. Completed problems are read back from
/// run.jsonl / run.partial.jsonl and skipped; new traces are appended to the
/// partial file as workers finish, and the final record is written ordered
/// by problem id. A complete run is returned untouched.
inline RunRecord run_experiment(const ExperimentConfig& config,
                                const ProblemSet* preloaded = nullptr) {
    config.validate();
    namespace fs = std::filesystem;
    fs::path out_dir(config.out_dir);
    fs::create_directories(out_dir);

    ProblemSet problems = preloaded ? *preloaded : load_problems(config);
    save_canonical(problems, out_dir / "problems.jsonl");

    const fs::path run_path = out_dir / "run.jsonl";
    const fs::path partial_path = out_dir / "run.partial.jsonl";

    json header{{"type", "header"},
                {"config", config.to_json()},
                {"template_version", template_asset_digest()},
                {"code_version", kVersion},
                {"problems", problems.size()},
                {"started", iso8601_now()}};

    // resume bookkeeping: anything already traced is done
    std::map<std::string, Trace> done = detail::load_trace_file(run_path);
    bool complete = !problems.empty() && done.size() == problems.size();
    for (const Problem& p : problems.problems())
        complete = complete && done.count(p.id) > 0;
    if (complete) {
        RunRecord record;
        record.header = header;
        record.header["resumed"] = true;
        for (const Problem& p : problems.problems()) record.traces.push_back(done.at(p.id));
        std::sort(record.traces.begin(), record.traces.end(),
                  [](const Trace& a, const Trace& b) { return a.problem_id < b.problem_id; });
        return record;  // finished runs are never rewritten
    }
    for (auto& [id, trace] : detail::load_trace_file(partial_path)) done.emplace(id, trace);

    PromptEngine engine{detail::instructions_for(config), TemplateStore{config.template_dir}};
    std::shared_ptr<ResponseCache> cache;
    if (config.cache_enabled) {
        fs::path cache_dir = config.cache_dir.empty() ? out_dir / "cache" : fs::path(config.cache_dir);
        std::string run_id = std::to_string(
            std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::system_clock::now().time_since_epoch())
                .count()) + "-" + std::to_string(getpid());
        cache = std::make_shared<ResponseCache>(cache_dir, run_id);
    }
    RetryPolicy policy = config.retry;
    policy.max_inflight = std::max(policy.max_inflight, config.effective_concurrency());
    Gateway gateway(config.backend, policy, cache);

    std::vector<size_t> todo;
    for (size_t i = 0; i < problems.size(); ++i)
        if (!done.count(problems.problems()[i].id)) todo.push_back(i);

    std::mutex io_mutex;
    std::ofstream partial(partial_path, std::ios::binary | std::ios::app);
    std::atomic<size_t> cursor{0};
    const int workers = std::max(1, std::min<int>(config.effective_concurrency(),
                                                  static_cast<int>(todo.size())));

    auto worker = [&]() {
        while (true) {
            size_t slot = cursor.fetch_add(1);
            if (slot >= todo.size()) return;
            const Problem& problem = problems.problems()[todo[slot]];
            Trace trace;
            try {
                trace = detail::run_one(problem, config, engine, gateway);
            } catch (const std::exception& e) {
                trace.problem_id = problem.id;
                trace.spec = config.method;
                trace.error = e.what();
                trace.final = ExtractedAnswer::unsolved(UnsolvedReason::exec_error);
                trace.samples.push_back(ExtractionOutcome{trace.final, ExtractionTier::exec, "", false});
            }
            std::lock_guard<std::mutex> lock(io_mutex);
            partial << trace.to_json().dump() << '\n';
            partial.flush();
            done.emplace(problem.id, std::move(trace));
        }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    partial.close();

    header["finished"] = iso8601_now();
    header["network_calls"] = gateway.network_calls();
    header["cache_hits"] = gateway.cache_hits();
    RunRecord record;
    record.header = header;
    for (const Problem& p : problems.problems()) {
        auto it = done.find(p.id);
        if (it == done.end()) throw std::runtime_error("missing trace for problem " + p.id);
        record.traces.push_back(it->second);
    }
    std::sort(record.traces.begin(), record.traces.end(),
              [](const Trace& a, const Trace& b) { return a.problem_id < b.problem_id; });

    std::string out = record.header.dump() + "\n";
    for (const Trace& t : record.traces) out += t.to_json().dump() + "\n";
    write_file(run_path, out);
    std::error_code ec;
    fs::remove(partial_path, ec);
    return record;
}

inline RunRecord load_run(const std::filesystem::path& run_path) {
    RunRecord record;
    bool have_header = false;
    for (const std::string& line : split_lines(read_file(run_path))) {
        if (trim(line).empty()) continue;
        json j = json::parse(line);
        if (j.value("type", "") == "header") {
            record.header = j;
            have_header = true;
        } else if (j.value("type", "") == "trace") {
            record.traces.push_back(Trace::from_json(j));
        }
    }
    if (!have_header) record.header = json{{"type", "header"}};
    return record;
}

// ---------------------------------------------------------------------------
// scoring
// ---------------------------------------------------------------------------

/// In-review record for answers the parser could not resolve: a human fills
/// the resolution field and score_run reads it back.
struct UnresolvedEntry {
    std::string problem_id;
    std::string raw;
    std::string resolution;

    json to_json() const {
        return json{{"problem_id", problem_id}, {"raw", raw}, {"resolution", resolution}};
    }
};

inline std::map<std::string, std::string> load_resolutions(const std::filesystem::path& path) {
    std::map<std::string, std::string> out;
    for (const std::string& line : split_lines(read_file(path))) {
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("problem_id"))
            throw std::runtime_error("malformed resolution record: " + line.substr(0, 120));
        std::string res = trim(j.value("resolution", ""));
        if (!res.empty()) out[j["problem_id"].get<std::string>()] = res;
    }
    return out;
}

struct ScoreOutcome {
    ScoreReport report;
    std::vector<UnresolvedEntry> unresolved;
    std::vector<ScoredItem> items;
};

/// Matches every trace's final answer against gold, applying any human
/// resolutions to parse failures first, and dispatches to plain or
/// distractor metrics based on the problem metadata.
inline ScoreOutcome score_run(const RunRecord& run, const ProblemSet& problems,
                              const std::map<std::string, std::string>& resolutions = {}) {
    ScoreOutcome out;
    std::vector<ScoredItem> variants, bases;
    bool any_gsmic = false;

    std::map<std::string, const Trace*> by_id;
    for (const Trace& t : run.traces) by_id[t.problem_id] = &t;
    for (const auto& [id, trace] : by_id)
        if (!problems.find(id))
            throw std::runtime_error("trace for unknown problem " + id);

    for (const Problem& problem : problems.problems()) {
        auto it = by_id.find(problem.id);
        if (it == by_id.end())
            throw std::runtime_error("run has no trace for problem " + problem.id);
        const Trace& trace = *it->second;

        ExtractedAnswer final = trace.final;
        if (!final.solved() && final.reason == UnsolvedReason::parse_failed) {
            auto res = resolutions.find(problem.id);
            if (res != resolutions.end()) {
                if (problem.gold.kind == GoldAnswer::Kind::choice) {
                    final = ExtractedAnswer::option(res->second[0]);
                } else if (auto v = normalize_numeric(res->second)) {
                    final = ExtractedAnswer::numeric(*v);
                }
            } else {
                std::string raw = trace.passes.empty() ? "" : trace.passes.back().response.text;
                out.unresolved.push_back(UnresolvedEntry{problem.id, raw, ""});
            }
        }

        ScoredItem item;
        item.problem_id = problem.id;
        item.correct = match_answer(final, problem.gold);
        item.gsmic = problem.gsmic;
        out.items.push_back(item);
        if (problem.gsmic) {
            any_gsmic = true;
            (problem.gsmic->is_base ? bases : variants).push_back(item);
        }
    }

    if (any_gsmic && !variants.empty()) {
        out.report = gsmic_scores(variants, bases);
    } else {
        out.report = plain_scores(out.items);
    }
    return out;
}

inline void write_unresolved(const std::vector<UnresolvedEntry>& entries,
                             const std::filesystem::path& path) {
    std::string text;
    for (const UnresolvedEntry& e : entries) text += e.to_json().dump() + "\n";
    write_file(path, text);
}

// ---------------------------------------------------------------------------
// report rendering
// ---------------------------------------------------------------------------

struct ReportEntry {
    std::string method_label;
    std::string dataset_label;
    ScoreReport report;
};

namespace detail {

inline std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string fmt_delta(double pep_pct, double base_pct) {
    // deltas are computed on the two-decimal rendered values
    double d = std::round(pep_pct * 100.0) / 100.0 - std::round(base_pct * 100.0) / 100.0;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%+.2f", d);
    return buf;
}

}  // namespace detail

/// Renders the accuracy grid: one row per method label, one column per
/// dataset, cells x100 at two decimals. A row labeled "<base>+PEP" gets a
/// signed delta against its base row in each cell. Output bytes are
/// deterministic. Distractor reports get their own per-stratum section.
inline std::string render_report(const std::vector<ReportEntry>& entries) {
    std::vector<std::string> methods, datasets;
    std::map<std::string, std::map<std::string, const ScoreReport*>> grid;
    for (const ReportEntry& e : entries) {
        if (std::find(methods.begin(), methods.end(), e.method_label) == methods.end())
            methods.push_back(e.method_label);
        if (std::find(datasets.begin(), datasets.end(), e.dataset_label) == datasets.end())
            datasets.push_back(e.dataset_label);
        grid[e.method_label][e.dataset_label] = &e.report;
    }

    std::string md = "# Results\n\n| Method |";
    for (const std::string& d : datasets) md += " " + d + " |";
    md += "\n|---|";
    for (size_t i = 0; i < datasets.size(); ++i) md += "---|";
    md += "\n";
    for (const std::string& m : methods) {
        md += "| " + m + " |";
        std::string base_label;
        if (ends_with(m, "+PEP")) base_label = m.substr(0, m.size() - 4);
        for (const std::string& d : datasets) {
            auto cell = grid[m].find(d);
            if (cell == grid[m].end()) {
                md += " - |";
                continue;
            }
            const double pct = cell->second->overall.pct();
            std::string text = detail::fmt2(pct);
            if (!base_label.empty() && grid.count(base_label) && grid[base_label].count(d)) {
                text += " (" + detail::fmt_delta(pct, grid[base_label][d]->overall.pct()) + ")";
            }
            md += " " + text + " |";
        }
        md += "\n";
    }

    for (const ReportEntry& e : entries) {
        if (e.report.kind != "gsmic") continue;
        md += "\n## " + e.method_label + " on " + e.dataset_label + " (distractor metrics)\n\n";
        md += "| Stratum | Micro | Macro (all-correct) | Macro (mean/base) | Norm micro | Norm macro | n | bases |\n";
        md += "|---|---|---|---|---|---|---|---|\n";
        for (const std::string stratum : {"two_step", "m_step", "overall"}) {
            auto it = e.report.strata.find(stratum);
            if (it == e.report.strata.end()) continue;
            const GsmicCell& c = it->second;
            md += "| " + stratum + " | " + detail::fmt2(c.micro.pct()) + " | " +
                  detail::fmt2(c.macro_all_correct.pct()) + " | " +
                  detail::fmt2(c.macro_mean * 100.0) + " | " +
                  (c.norm_micro ? detail::fmt2(*c.norm_micro) : std::string("-")) + " | " +
                  (c.norm_macro ? detail::fmt2(*c.norm_macro) : std::string("-")) + " | " +
                  std::to_string(c.micro.den) + " | " +
                  std::to_string(c.macro_all_correct.den) + " |\n";
        }
        if (!e.report.factors.empty()) {
            md += "\n| Factor | Level | Micro | Macro | n |\n|---|---|---|---|---|\n";
            for (const auto& [factor, levels] : e.report.factors) {
                for (const auto& [level, cell] : levels) {
                    md += "| " + factor + " | " + level + " | " + detail::fmt2(cell.micro.pct()) +
                          " | " + detail::fmt2(cell.macro.pct()) + " | " +
                          std::to_string(cell.micro.den) + " |\n";
                }
            }
        }
    }
    return md;
}

}  // namespace pepeval
