#include <doctest.h>

#include "test_support.hpp"

using namespace pepeval;
using pepeval::testing::data_dir;

namespace {

ExperimentConfig fixture_config(const std::filesystem::path& out_dir) {
    ExperimentConfig config;
    config.dataset_path = (data_dir() / "e2e_20.jsonl").string();
    config.format = DatasetTag::canonical;
    config.method.method = MethodKind::cot;
    config.backend.kind = BackendKind::mock;
    config.backend.mock_script = (data_dir() / "e2e_mock.json").string();
    config.out_dir = out_dir.string();
    config.llm_fallback = false;
    return config;
}

std::string trace_lines_of(const std::filesystem::path& run_path) {
    std::string out;
    for (const std::string& line : split_lines(read_file(run_path))) {
        if (line.find("\"type\":\"trace\"") != std::string::npos) out += line + "\n";
    }
    return out;
}

}  // namespace

TEST_CASE("fixture run end to end: run, score, report") {
    auto dir = pepeval::testing::scratch_dir("e2e");
    ExperimentConfig config = fixture_config(dir);

    RunRecord record = run_experiment(config);
    REQUIRE(record.traces.size() == 20);
    CHECK(std::filesystem::exists(dir / "run.jsonl"));
    CHECK(std::filesystem::exists(dir / "problems.jsonl"));
    CHECK_FALSE(std::filesystem::exists(dir / "run.partial.jsonl"));

    // traces ordered by problem id regardless of completion order
    for (size_t i = 1; i < record.traces.size(); ++i)
        CHECK(record.traces[i - 1].problem_id < record.traces[i].problem_id);

    ProblemSet problems = load_dataset(dir / "problems.jsonl", DatasetTag::canonical);
    ScoreOutcome outcome = score_run(record, problems);
    CHECK(outcome.report.overall.num == 12);  // hand count over the fixture
    CHECK(outcome.report.overall.den == 20);
    CHECK(outcome.report.overall.value() == doctest::Approx(0.6));

    // only parse failures land in the review queue
    REQUIRE(outcome.unresolved.size() == 2);
    CHECK(outcome.unresolved[0].problem_id == "p08");
    CHECK(outcome.unresolved[1].problem_id == "p18");

    std::filesystem::remove_all(dir);
}

TEST_CASE("warm cache rerun: zero backend calls, identical trace bytes") {
    auto dir = pepeval::testing::scratch_dir("warm");
    ExperimentConfig config = fixture_config(dir);

    RunRecord first = run_experiment(config);
    CHECK(first.header["network_calls"].get<std::int64_t>() == 20);
    std::string first_traces = trace_lines_of(dir / "run.jsonl");
    std::string first_digest = first.trace_digest();

    // force re-execution against the warm cache
    std::filesystem::remove(dir / "run.jsonl");
    RunRecord second = run_experiment(config);
    CHECK(second.header["network_calls"].get<std::int64_t>() == 0);
    CHECK(second.header["cache_hits"].get<std::int64_t>() == 20);
    CHECK(second.trace_digest() == first_digest);
    CHECK(trace_lines_of(dir / "run.jsonl") == first_traces);

    std::filesystem::remove_all(dir);
}

TEST_CASE("resuming a partial run executes only the missing problems") {
    auto dir = pepeval::testing::scratch_dir("resume");
    ExperimentConfig config = fixture_config(dir);
    config.cache_enabled = false;  // isolate the resume path from the cache

    RunRecord full = run_experiment(config);
    REQUIRE(full.traces.size() == 20);

    // rebuild a half-finished state: first ten traces in the partial file
    std::string partial;
    for (size_t i = 0; i < 10; ++i) partial += full.traces[i].to_json().dump() + "\n";
    std::filesystem::remove(dir / "run.jsonl");
    write_file(dir / "run.partial.jsonl", partial);

    RunRecord resumed = run_experiment(config);
    REQUIRE(resumed.traces.size() == 20);
    CHECK(resumed.header["network_calls"].get<std::int64_t>() == 10);
    CHECK(resumed.trace_digest() == full.trace_digest());

    std::filesystem::remove_all(dir);
}

TEST_CASE("resumption of a complete run performs no work and changes no bytes") {
    auto dir = pepeval::testing::scratch_dir("idem");
    ExperimentConfig config = fixture_config(dir);
    run_experiment(config);
    std::string before = read_file(dir / "run.jsonl");
    RunRecord again = run_experiment(config);
    CHECK(again.header.value("resumed", false));
    CHECK(read_file(dir / "run.jsonl") == before);
    std::filesystem::remove_all(dir);
}

TEST_CASE("mock runs are deterministic: identical config gives identical trace bytes") {
    auto dir_a = pepeval::testing::scratch_dir("det-a");
    auto dir_b = pepeval::testing::scratch_dir("det-b");
    ExperimentConfig a = fixture_config(dir_a);
    ExperimentConfig b = fixture_config(dir_b);
    a.concurrency = 8;
    b.concurrency = 2;  // scheduling must not leak into the record
    RunRecord ra = run_experiment(a);
    RunRecord rb = run_experiment(b);
    CHECK(ra.trace_digest() == rb.trace_digest());
    CHECK(trace_lines_of(dir_a / "run.jsonl") == trace_lines_of(dir_b / "run.jsonl"));
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
}

TEST_CASE("resolutions flip parse failures and move accuracy by exactly their count") {
    auto dir = pepeval::testing::scratch_dir("resol");
    ExperimentConfig config = fixture_config(dir);
    RunRecord record = run_experiment(config);
    ProblemSet problems = load_dataset(dir / "problems.jsonl", DatasetTag::canonical);

    ScoreOutcome base = score_run(record, problems);

    // write the queue, fill one resolution as a reviewer would, re-score
    write_unresolved(base.unresolved, dir / "unresolved.jsonl");
    std::vector<UnresolvedEntry> edited;
    for (const std::string& line : split_lines(read_file(dir / "unresolved.jsonl"))) {
        if (trim(line).empty()) continue;
        json j = json::parse(line);
        UnresolvedEntry e{j["problem_id"], j["raw"], ""};
        if (e.problem_id == "p08") e.resolution = "5";  // matches gold
        edited.push_back(e);
    }
    write_unresolved(edited, dir / "unresolved.jsonl");

    auto resolutions = load_resolutions(dir / "unresolved.jsonl");
    REQUIRE(resolutions.size() == 1);
    ScoreOutcome fixed = score_run(record, problems, resolutions);
    CHECK(fixed.report.overall.num == base.report.overall.num + 1);
    CHECK(fixed.report.overall.den == base.report.overall.den);
    CHECK(fixed.unresolved.size() == base.unresolved.size() - 1);

    std::filesystem::remove_all(dir);
}

TEST_CASE("distractor runs produce the full metric report") {
    auto dir = pepeval::testing::scratch_dir("gsmic-run");
    ExperimentConfig config = fixture_config(dir);
    config.dataset_path = (data_dir() / "gsmic_mini.jsonl").string();
    config.format = DatasetTag::gsmic;
    config.backend.mock_script = R"({"mode": "echo", "answer": "24"})";

    RunRecord record = run_experiment(config);
    ProblemSet problems = load_dataset(dir / "problems.jsonl", DatasetTag::canonical);
    ScoreOutcome outcome = score_run(record, problems);
    CHECK(outcome.report.kind == "gsmic");
    REQUIRE(outcome.report.strata.count("overall"));
    CHECK(outcome.report.strata.at("overall").micro.den == 10);
    CHECK(outcome.report.strata.at("overall").norm_micro.has_value());
    CHECK_FALSE(outcome.report.factors.empty());

    // the echoed 24 matches exactly the first base's family
    int correct = 0;
    for (const ScoredItem& item : outcome.items) correct += item.correct;
    CHECK(correct == 4);  // base 1 + its 3 variants

    std::filesystem::remove_all(dir);
}

TEST_CASE("option-format datasets flow through with letter answers") {
    auto dir = pepeval::testing::scratch_dir("choice");
    ExperimentConfig config = fixture_config(dir);
    config.dataset_path = (data_dir() / "aqua_mini.jsonl").string();
    config.format = DatasetTag::aqua;
    // both problems answered C; golds are C and D
    config.backend.mock_script = R"({"mode": "scripted", "default": "Final answer: \\boxed{C}"})";

    RunRecord record = run_experiment(config);
    REQUIRE(record.traces.size() == 2);
    for (const Trace& t : record.traces) {
        CHECK(t.spec.answer_format == AnswerFormat::choice);
        CHECK(t.final.kind == ExtractedAnswer::Kind::option);
        // the choice-format instruction was rendered into the prompt
        CHECK(t.passes[0].prompt.text.find("where X is the choice") != std::string::npos);
    }
    ProblemSet problems = load_dataset(dir / "problems.jsonl", DatasetTag::canonical);
    ScoreOutcome outcome = score_run(record, problems);
    CHECK(outcome.report.overall.num == 1);
    CHECK(outcome.report.overall.den == 2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("stratified sampling inside the runner records provenance") {
    auto dir = pepeval::testing::scratch_dir("sampled");
    ExperimentConfig config = fixture_config(dir);
    config.dataset_path = (data_dir() / "gsmic_mini.jsonl").string();
    config.format = DatasetTag::gsmic;
    config.backend.mock_script = R"({"mode": "echo", "answer": "1"})";
    config.gsmic_sample_n = 2;
    config.seed = 31;

    RunRecord record = run_experiment(config);
    ProblemSet problems = load_dataset(dir / "problems.jsonl", DatasetTag::canonical);
    CHECK(problems.provenance().n_per_stratum == 2);
    CHECK(problems.provenance().sampled_ids.size() == 4);
    CHECK(record.traces.size() == problems.size());
    std::filesystem::remove_all(dir);
}

TEST_CASE("config validation failures") {
    ExperimentConfig config;
    CHECK_THROWS_AS(config.validate(), ConfigError);  // no dataset
    config.dataset_path = "x";
    config.out_dir = "y";
    config.decoding.mode = "sc";
    config.decoding.samples = 1;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config.decoding.samples = 20;
    config.decoding.temperature = 0.0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config.decoding.temperature = 0.7;
    CHECK_NOTHROW(config.validate());
    json j = config.to_json();
    ExperimentConfig back = ExperimentConfig::from_json(j);
    CHECK(back.to_json().dump() == j.dump());
}

TEST_CASE("report rendering pairs PEP rows with signed deltas") {
    auto make_report = [](std::int64_t num, std::int64_t den) {
        ScoreReport r;
        r.overall = Fraction{num, den};
        return r;
    };
    std::vector<ReportEntry> entries{
        {"CoT", "gsm8k", make_report(5019, 10000)},
        {"CoT+PEP", "gsm8k", make_report(6012, 10000)},
        {"CoT+SC", "gsm8k", make_report(5231, 10000)},
        {"CoT+SC+PEP", "gsm8k", make_report(6111, 10000)},
    };
    std::string md = render_report(entries);
    CHECK(md.find("50.19") != std::string::npos);
    CHECK(md.find("60.12 (+9.93)") != std::string::npos);
    CHECK(md.find("61.11 (+8.80)") != std::string::npos);

    // deterministic bytes
    CHECK(render_report(entries) == md);

    // single report: no delta annotations anywhere
    std::string solo = render_report({{"CoT", "gsm8k", make_report(5019, 10000)}});
    CHECK(solo.find("(+") == std::string::npos);

    // negative deltas keep their sign
    std::string neg = render_report(
        {{"CoT", "aqua", make_report(5866, 10000)}, {"CoT+PEP", "aqua", make_report(5630, 10000)}});
    CHECK(neg.find("(-2.36)") != std::string::npos);
}

TEST_CASE("self-consistency run writes n samples per trace and n cache entries per problem") {
    auto dir = pepeval::testing::scratch_dir("sc-run");
    ExperimentConfig config = fixture_config(dir);
    config.backend.mock_script = (data_dir() / "sc_mock.json").string();
    config.decoding.mode = "sc";
    config.decoding.samples = 5;
    config.decoding.temperature = 0.7;

    RunRecord record = run_experiment(config);
    for (const Trace& t : record.traces) CHECK(t.samples.size() == 5);
    CHECK(record.header["network_calls"].get<std::int64_t>() == 100);  // 20 problems x 5 samples

    ResponseCache cache(dir / "cache", "probe");
    CHECK(cache.size() == 100);
    std::filesystem::remove_all(dir);
}
