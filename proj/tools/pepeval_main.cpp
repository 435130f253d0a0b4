// Command-line front end: run experiments, score trace files, render report
// tables, evaluate instruction candidates, and inspect the response cache.
//
// Exit codes: 0 success, 1 per-problem failures occurred, 2 fatal
// configuration error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pepeval/pepeval.hpp"

namespace fs = std::filesystem;
using namespace pepeval;

namespace {

struct RunFlags {
    std::string config_file;
    std::string dataset, format = "canonical", method = "cot", model;
    int shots = 0;
    bool pep_integrate = false, irr_inst = false;
    std::string backend, base_url, api_key_env, mock_script;
    std::string decoding;
    int samples = -1;
    double temperature = -1.0;
    std::uint64_t seed = 17;
    bool seed_set = false;
    int concurrency = 0;
    std::string out_dir, cache_dir, template_dir;
    bool no_cache = false;
    int llm_fallback = -1;  // -1 auto, 0 off, 1 on
    int max_tokens = -1, max_tokens_extract = -1;
    int gsmic_sample = 0;
    std::string pot_interpreter;
    double pot_timeout = -1.0;
    bool dry_run = false;
};

ExperimentConfig build_config(const RunFlags& f, const CLI::App& cmd) {
    ExperimentConfig config;
    if (!f.config_file.empty()) config = ExperimentConfig::from_json(json::parse(read_file(f.config_file)));

    auto given = [&cmd](const std::string& name) { return cmd.count(name) > 0; };

    if (given("--dataset")) config.dataset_path = f.dataset;
    if (given("--format")) {
        auto tag = dataset_tag_from(f.format);
        if (!tag) throw ConfigError("unknown dataset format: " + f.format);
        config.format = *tag;
    }
    if (given("--method")) {
        auto m = method_from(f.method);
        if (!m) throw ConfigError("unknown method: " + f.method);
        config.method.method = *m;
    }
    if (given("--shots")) config.method.k_shots = f.shots;
    if (given("--pep-integrate")) config.method.pep_integrated = true;
    if (given("--irr-inst")) config.method.irr_inst = true;
    if (given("--model")) config.model = f.model;
    if (given("--backend")) {
        auto k = backend_from(f.backend);
        if (!k) throw ConfigError("unknown backend: " + f.backend);
        config.backend.kind = *k;
    }
    if (given("--base-url")) config.backend.base_url = f.base_url;
    if (given("--api-key-env")) config.backend.api_key_env = f.api_key_env;
    if (given("--mock")) {
        config.backend.kind = BackendKind::mock;
        config.backend.mock_script = f.mock_script;
    }
    if (given("--decoding")) config.decoding.mode = f.decoding;
    if (given("--samples")) config.decoding.samples = f.samples;
    if (given("--temperature")) config.decoding.temperature = f.temperature;
    if (given("--seed")) config.seed = f.seed;
    if (given("--concurrency")) config.concurrency = f.concurrency;
    if (given("--out")) config.out_dir = f.out_dir;
    if (given("--cache-dir")) config.cache_dir = f.cache_dir;
    if (f.no_cache) config.cache_enabled = false;
    if (f.llm_fallback >= 0) config.llm_fallback = f.llm_fallback == 1;
    else if (f.config_file.empty()) config.llm_fallback = config.backend.kind != BackendKind::mock;
    if (given("--max-tokens")) config.max_tokens = f.max_tokens;
    if (given("--max-tokens-extract")) config.max_tokens_extract = f.max_tokens_extract;
    if (given("--gsmic-sample")) config.gsmic_sample_n = f.gsmic_sample;
    if (given("--pot-interpreter")) config.pot.interpreter_cmd = f.pot_interpreter;
    if (given("--pot-timeout")) config.pot.timeout_s = f.pot_timeout;
    if (given("--template-dir")) config.template_dir = f.template_dir;
    return config;
}

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    cmd->add_option("--config", f.config_file, "JSON config file; flags override its values");
    cmd->add_option("--dataset", f.dataset, "dataset file");
    cmd->add_option("--format", f.format, "singleeq|gsm8k|aqua|svamp|gsmic|canonical");
    cmd->add_option("--method", f.method, "cot|pep|l2m|pas|self_ask|pot|pot_pep|dec|elu|etd");
    cmd->add_option("--shots", f.shots, "0, 1 or 4");
    cmd->add_flag("--pep-integrate", f.pep_integrate, "weave elaborations into the exemplars");
    cmd->add_flag("--irr-inst", f.irr_inst, "add the ignore-irrelevant-information instruction");
    cmd->add_option("--model", f.model, "model name sent to the backend");
    cmd->add_option("--backend", f.backend, "mock|openai_chat|openai_completions");
    cmd->add_option("--base-url", f.base_url, "endpoint base URL, e.g. https://api.openai.com/v1");
    cmd->add_option("--api-key-env", f.api_key_env, "env var holding the API key");
    cmd->add_option("--mock", f.mock_script, "mock backend script (path or inline JSON)");
    cmd->add_option("--decoding", f.decoding, "greedy|sc");
    cmd->add_option("--samples", f.samples, "self-consistency sample count");
    cmd->add_option("--temperature", f.temperature, "self-consistency temperature");
    cmd->add_option("--seed", f.seed, "sampling seed");
    cmd->add_option("--concurrency", f.concurrency, "worker pool size (0 = default)");
    cmd->add_option("--out", f.out_dir, "output directory");
    cmd->add_option("--cache-dir", f.cache_dir, "response cache directory");
    cmd->add_flag("--no-cache", f.no_cache, "disable the response cache");
    cmd->add_flag_function("--llm-fallback", [&f](std::int64_t) { f.llm_fallback = 1; },
                           "enable the extraction fallback call");
    cmd->add_flag_function("--no-llm-fallback", [&f](std::int64_t) { f.llm_fallback = 0; },
                           "disable the extraction fallback call");
    cmd->add_option("--max-tokens", f.max_tokens, "generation token budget");
    cmd->add_option("--max-tokens-extract", f.max_tokens_extract, "extraction token budget");
    cmd->add_option("--gsmic-sample", f.gsmic_sample, "variants per step stratum (0 = all)");
    cmd->add_option("--pot-interpreter", f.pot_interpreter, "interpreter command, {file} placeholder");
    cmd->add_option("--pot-timeout", f.pot_timeout, "program execution timeout in seconds");
    cmd->add_option("--template-dir", f.template_dir, "template asset override directory");
}

bool run_has_failures(const RunRecord& record) {
    for (const Trace& t : record.traces) {
        if (!t.error.empty()) return true;
        if (!t.final.solved() &&
            (t.final.reason == UnsolvedReason::exec_error || t.final.reason == UnsolvedReason::timeout))
            return true;
    }
    return false;
}

int cmd_run(const RunFlags& flags, const CLI::App& cmd) {
    ExperimentConfig config = build_config(flags, cmd);
    config.validate();
    if (flags.dry_run) {
        ProblemSet problems = load_problems(config);
        fs::create_directories(config.out_dir);
        save_canonical(problems, fs::path(config.out_dir) / "problems.jsonl");
        std::printf("dry run: %zu problems -> %s/problems.jsonl\n", problems.size(),
                    config.out_dir.c_str());
        return 0;
    }
    RunRecord record = run_experiment(config);
    int failures = 0, unsolved = 0;
    for (const Trace& t : record.traces) {
        if (!t.error.empty()) ++failures;
        if (!t.final.solved()) ++unsolved;
    }
    std::printf("run complete: %zu traces (%d unsolved, %d with errors) -> %s/run.jsonl\n",
                record.traces.size(), unsolved, failures, config.out_dir.c_str());
    return run_has_failures(record) ? 1 : 0;
}

int cmd_score(const std::string& run_arg, std::string problems_path, std::string resolutions_path,
              std::string out_path, std::string unresolved_path) {
    fs::path run_path(run_arg);
    if (fs::is_directory(run_path)) run_path /= "run.jsonl";
    fs::path base = run_path.parent_path();
    if (problems_path.empty()) problems_path = (base / "problems.jsonl").string();
    if (out_path.empty()) out_path = (base / "report.json").string();
    if (unresolved_path.empty()) unresolved_path = (base / "unresolved.jsonl").string();

    RunRecord record = load_run(run_path);
    ProblemSet problems = load_dataset(problems_path, DatasetTag::canonical);
    std::map<std::string, std::string> resolutions;
    if (!resolutions_path.empty()) resolutions = load_resolutions(resolutions_path);

    ScoreOutcome outcome = score_run(record, problems, resolutions);
    write_file(out_path, outcome.report.to_json().dump(2) + "\n");
    if (!outcome.unresolved.empty()) {
        write_unresolved(outcome.unresolved, unresolved_path);
        std::printf("%zu unresolved generations -> %s\n", outcome.unresolved.size(),
                    unresolved_path.c_str());
    }
    std::printf("accuracy: %.4f (%lld/%lld) -> %s\n", outcome.report.overall.value(),
                static_cast<long long>(outcome.report.overall.num),
                static_cast<long long>(outcome.report.overall.den), out_path.c_str());
    return 0;
}

int cmd_report(const std::vector<std::string>& cells, const std::string& out_path) {
    std::vector<ReportEntry> entries;
    for (const std::string& cell : cells) {
        // METHOD:DATASET=path
        size_t eq = cell.rfind('=');
        size_t colon = cell.find(':');
        if (eq == std::string::npos || colon == std::string::npos || colon > eq)
            throw ConfigError("bad --add value (want METHOD:DATASET=report.json): " + cell);
        ReportEntry e;
        e.method_label = cell.substr(0, colon);
        e.dataset_label = cell.substr(colon + 1, eq - colon - 1);
        e.report = ScoreReport::from_json(json::parse(read_file(cell.substr(eq + 1))));
        entries.push_back(std::move(e));
    }
    std::string md = render_report(entries);
    if (out_path.empty()) {
        std::fputs(md.c_str(), stdout);
    } else {
        write_file(out_path, md);
        std::printf("report -> %s\n", out_path.c_str());
    }
    return 0;
}

int cmd_select_prompt(const RunFlags& flags, const CLI::App& cmd, const std::string& candidates_path,
                      int subset_n, bool format_inst, const std::string& out_path) {
    ExperimentConfig config = build_config(flags, cmd);
    if (config.dataset_path.empty()) throw ConfigError("dataset path is required");

    std::vector<std::pair<std::string, std::string>> candidates;
    if (candidates_path.empty()) {
        for (const auto& c : assets::kInstructionCandidates) candidates.emplace_back(c.label, c.text);
    } else {
        json j = json::parse(read_file(candidates_path));
        for (const json& c : j.at("candidates"))
            candidates.emplace_back(c.at("label").get<std::string>(),
                                    c.at("instruction").get<std::string>());
    }

    ProblemSet pool = load_dataset(config.dataset_path, config.format);
    ProblemSet subset = static_cast<size_t>(subset_n) >= pool.size()
                            ? pool
                            : sample_subset(pool, subset_n, config.seed);

    std::shared_ptr<ResponseCache> cache;
    if (config.cache_enabled && !config.out_dir.empty()) {
        cache = std::make_shared<ResponseCache>(
            config.cache_dir.empty() ? fs::path(config.out_dir) / "cache" : fs::path(config.cache_dir),
            "select");
    }
    Gateway gateway(config.backend, config.retry, cache);
    PromptEngine engine{InstructionSet::defaults(), TemplateStore{config.template_dir}};
    DecodeOptions opts;
    opts.model = config.model;
    opts.max_tokens = config.max_tokens;

    auto rows = prompt_selection_eval(candidates, subset, engine, gateway, opts, format_inst);

    std::string md = "| Label | Prompt | Accuracy |\n|---|---|---|\n";
    json out_json = json::array();
    for (const CandidateResult& r : rows) {
        char acc[32];
        std::snprintf(acc, sizeof(acc), "%.1f", r.accuracy.pct());
        md += "| " + r.label + (r.winner ? " *" : "") + " | " + r.instruction + " | " + acc + " |\n";
        out_json.push_back(r.to_json());
    }
    std::fputs(md.c_str(), stdout);
    if (!out_path.empty()) {
        write_file(out_path, out_json.dump(2) + "\n");
        std::printf("selection results -> %s\n", out_path.c_str());
    }
    return 0;
}

int cmd_cache_inspect(const std::string& dir) {
    ResponseCache cache(dir, "inspect");
    size_t files = 0;
    std::uintmax_t bytes = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        ++files;
        bytes += entry.file_size();
    }
    std::printf("cache %s: %zu records, %zu files, %ju bytes\n", dir.c_str(), cache.size(), files,
                bytes);
    return 0;
}

int cmd_cache_gc(const std::string& dir) {
    ResponseCache cache(dir, "gc");
    auto [kept, dropped] = cache.gc();
    std::printf("cache %s: rebuilt index, %zu records kept, %zu duplicates dropped\n", dir.c_str(),
                kept, dropped);
    return 0;
}

int cmd_templates_export(const std::string& dir) {
    for (const auto& t : assets::kNamedTemplates)
        write_file(fs::path(dir) / (std::string(t.name) + ".txt"), t.text);
    write_file(fs::path(dir) / "pot_zero_shot.txt", assets::kPotTemplate);
    write_file(fs::path(dir) / "extract_template.txt", assets::kExtractTemplate);
    auto dump_exemplars = [&dir](const std::string& name, MethodKind method) {
        PromptEngine engine;
        json arr = json::array();
        for (const Exemplar& e : engine.default_exemplars(method))
            arr.push_back(json{{"question", e.question}, {"body", e.body}});
        write_file(fs::path(dir) / ("exemplars_" + name + ".json"),
                   json{{"exemplars", arr}}.dump(2) + "\n");
    };
    dump_exemplars("cot", MethodKind::cot);
    dump_exemplars("pep", MethodKind::pep);
    dump_exemplars("l2m", MethodKind::l2m);
    dump_exemplars("pas", MethodKind::pas);
    dump_exemplars("self_ask", MethodKind::self_ask);
    json cands = json::array();
    for (const auto& c : assets::kInstructionCandidates)
        cands.push_back(json{{"label", c.label}, {"instruction", c.text}});
    write_file(fs::path(dir) / "prompt_candidates.json", json{{"candidates", cands}}.dump(2) + "\n");
    std::printf("templates exported -> %s\n", dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"evaluation harness for elaboration-style math prompting"};
    app.require_subcommand(1);

    RunFlags run_flags;
    CLI::App* run = app.add_subcommand("run", "run an experiment over a dataset");
    add_run_flags(run, run_flags);
    run->add_flag("--dry-run", run_flags.dry_run, "load, sample and export problems, then stop");

    CLI::App* score = app.add_subcommand("score", "score a finished run");
    std::string score_run_arg, score_problems, score_resolutions, score_out, score_unresolved;
    score->add_option("--run", score_run_arg, "run directory or run.jsonl")->required();
    score->add_option("--problems", score_problems, "canonical problems file");
    score->add_option("--resolutions", score_resolutions, "reviewed unresolved-queue file");
    score->add_option("--out", score_out, "report JSON output path");
    score->add_option("--unresolved-out", score_unresolved, "unresolved-queue output path");

    CLI::App* report = app.add_subcommand("report", "render a markdown table from score reports");
    std::vector<std::string> report_cells;
    std::string report_out;
    report->add_option("--add", report_cells, "METHOD:DATASET=report.json (repeatable)")->required();
    report->add_option("--out", report_out, "markdown output path (default stdout)");

    RunFlags select_flags;
    CLI::App* select = app.add_subcommand("select-prompt", "rank zero-shot instruction candidates");
    add_run_flags(select, select_flags);
    std::string select_candidates, select_out;
    int select_n = 200;
    bool select_format_inst = true;
    select->add_option("--candidates", select_candidates, "candidates JSON file (default built-in)");
    select->add_option("--n", select_n, "subset size drawn from the dataset");
    select->add_flag("--format-inst,!--no-format-inst", select_format_inst,
                     "include the answer-format instruction");
    select->add_option("--out-json", select_out, "write ranked results as JSON");

    CLI::App* cache = app.add_subcommand("cache", "inspect or clean a response cache");
    cache->require_subcommand(1);
    std::string cache_dir_arg;
    CLI::App* cache_inspect = cache->add_subcommand("inspect", "record and file counts");
    cache_inspect->add_option("--dir", cache_dir_arg, "cache directory")->required();
    CLI::App* cache_gc = cache->add_subcommand("gc", "rebuild the index, drop duplicates");
    cache_gc->add_option("--dir", cache_dir_arg, "cache directory")->required();

    CLI::App* templates = app.add_subcommand("templates", "template asset utilities");
    templates->require_subcommand(1);
    std::string templates_dir;
    CLI::App* templates_export = templates->add_subcommand("export", "write the built-in assets");
    templates_export->add_option("--dir", templates_dir, "target directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) return cmd_run(run_flags, *run);
        if (score->parsed())
            return cmd_score(score_run_arg, score_problems, score_resolutions, score_out,
                             score_unresolved);
        if (report->parsed()) return cmd_report(report_cells, report_out);
        if (select->parsed())
            return cmd_select_prompt(select_flags, *select, select_candidates, select_n,
                                     select_format_inst, select_out);
        if (cache->parsed()) {
            if (cache_inspect->parsed()) return cmd_cache_inspect(cache_dir_arg);
            return cmd_cache_gc(cache_dir_arg);
        }
        if (templates->parsed()) return cmd_templates_export(templates_dir);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const DatasetError& e) {
        std::fprintf(stderr, "dataset error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
