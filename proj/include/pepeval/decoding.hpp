#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pepeval/extraction.hpp"
#include "pepeval/gateway.hpp"
#include "pepeval/pot.hpp"
#include "pepeval/prompts.hpp"

namespace pepeval {

struct PassRecord {
    std::string label;  // "generation", "extraction", "elaboration", "code"
    PromptText prompt;
    GenResponse response;

    json to_json() const {
        return json{{"label", label},
                    {"prompt", prompt.text},
                    {"role_layout", prompt.role_layout == RoleLayout::single_user_message
                                        ? "single_user_message"
                                        : "completion"},
                    {"response",
                     json{{"text", response.text},
                          {"finish_reason", to_string(response.finish_reason)},
                          {"usage", response.usage.to_json()},
                          {"latency_ms", response.latency_ms}}}};
    }
    static PassRecord from_json(const json& j) {
        PassRecord p;
        p.label = j.value("label", "generation");
        p.prompt.text = j.value("prompt", "");
        p.prompt.role_layout = j.value("role_layout", "single_user_message") == "completion"
                                   ? RoleLayout::completion
                                   : RoleLayout::single_user_message;
        const json& r = j.at("response");
        p.response.text = r.value("text", "");
        p.response.finish_reason = finish_reason_from(r.value("finish_reason", "stop"));
        if (r.contains("usage")) p.response.usage = TokenUsage::from_json(r["usage"]);
        p.response.latency_ms = r.value("latency_ms", 0);
        return p;
    }
};

struct VoteGroup {
    ExtractedAnswer answer;
    int count = 0;
    int first_index = 0;
};

struct VoteTally {
    std::vector<VoteGroup> groups;

    json to_json() const {
        json arr = json::array();
        for (const VoteGroup& g : groups)
            arr.push_back(json{{"answer", g.answer.to_json()},
                               {"count", g.count},
                               {"first_index", g.first_index}});
        return json{{"groups", arr}};
    }
    static VoteTally from_json(const json& j) {
        VoteTally t;
        for (const json& g : j.value("groups", json::array())) {
            VoteGroup vg;
            vg.answer = ExtractedAnswer::from_json(g.at("answer"));
            vg.count = g.value("count", 0);
            vg.first_index = g.value("first_index", 0);
            t.groups.push_back(std::move(vg));
        }
        return t;
    }
};

struct PotExecRecord {
    std::string stdout_text;
    std::string stderr_text;
    double wall_time_s = 0.0;
    int exit_code = 0;
    bool timed_out = false;
};

/// Full record of one problem attempt: every prompt issued, every raw
/// generation, per-sample extraction outcomes, and the voted final answer.
struct Trace {
    std::string problem_id;
    MethodSpec spec;
    std::vector<PassRecord> passes;
    std::vector<ExtractionOutcome> samples;
    ExtractedAnswer final;
    std::optional<VoteTally> vote;
    std::optional<PotExecRecord> exec;
    std::string error;  // last gateway/executor failure, empty when clean

    json to_json() const {
        json passes_j = json::array();
        for (const PassRecord& p : passes) passes_j.push_back(p.to_json());
        json samples_j = json::array();
        for (const ExtractionOutcome& s : samples) samples_j.push_back(s.to_json());
        json j{{"type", "trace"},
               {"problem_id", problem_id},
               {"spec", spec.to_json()},
               {"passes", passes_j},
               {"samples", samples_j},
               {"final", final.to_json()}};
        if (vote) j["vote"] = vote->to_json();
        if (exec)
            j["exec"] = json{{"stdout", exec->stdout_text},
                             {"stderr", exec->stderr_text},
                             {"wall_time_s", exec->wall_time_s},
                             {"exit_code", exec->exit_code},
                             {"timed_out", exec->timed_out}};
        if (!error.empty()) j["error"] = error;
        return j;
    }
    static Trace from_json(const json& j) {
        Trace t;
        t.problem_id = j.at("problem_id").get<std::string>();
        t.spec = MethodSpec::from_json(j.value("spec", json::object()));
        for (const json& p : j.value("passes", json::array()))
            t.passes.push_back(PassRecord::from_json(p));
        for (const json& s : j.value("samples", json::array()))
            t.samples.push_back(ExtractionOutcome::from_json(s));
        t.final = ExtractedAnswer::from_json(j.at("final"));
        if (j.contains("vote")) t.vote = VoteTally::from_json(j["vote"]);
        if (j.contains("exec")) {
            PotExecRecord e;
            const json& ej = j["exec"];
            e.stdout_text = ej.value("stdout", "");
            e.stderr_text = ej.value("stderr", "");
            e.wall_time_s = ej.value("wall_time_s", 0.0);
            e.exit_code = ej.value("exit_code", 0);
            e.timed_out = ej.value("timed_out", false);
            t.exec = e;
        }
        t.error = j.value("error", "");
        return t;
    }
};

/// Groups solved answers by the scorer's own equality and picks the largest
/// group; ties go to the group first seen (smallest first sample index).
/// Unsolved samples never form a candidate. With no solved samples the
/// result is unsolved: the shared reason when the samples agree on one,
/// parse_failed otherwise.
inline std::pair<ExtractedAnswer, VoteTally> majority_vote(
    const std::vector<ExtractedAnswer>& samples) {
    VoteTally tally;
    for (size_t i = 0; i < samples.size(); ++i) {
        const ExtractedAnswer& s = samples[i];
        if (!s.solved()) continue;
        bool grouped = false;
        for (VoteGroup& g : tally.groups) {
            if (answers_equivalent(g.answer, s)) {
                ++g.count;
                grouped = true;
                break;
            }
        }
        if (!grouped) tally.groups.push_back(VoteGroup{s, 1, static_cast<int>(i)});
    }
    if (tally.groups.empty()) {
        UnsolvedReason reason = UnsolvedReason::parse_failed;
        if (!samples.empty()) {
            bool uniform = true;
            for (const ExtractedAnswer& s : samples) uniform &= s.reason == samples[0].reason;
            if (uniform) reason = samples[0].reason;
        }
        return {ExtractedAnswer::unsolved(reason), tally};
    }
    const VoteGroup* winner = &tally.groups[0];
    for (const VoteGroup& g : tally.groups) {
        if (g.count > winner->count ||
            (g.count == winner->count && g.first_index < winner->first_index))
            winner = &g;
    }
    return {winner->answer, tally};
}

struct DecodeOptions {
    std::string model = "mock-model";
    int max_tokens = 1024;
    int max_tokens_extract = 64;
    bool llm_fallback = false;
};

namespace detail {

inline ExtractionOutcome extract_with_fallback(const Problem& problem, const std::string& text,
                                               AnswerFormat format, const PromptEngine& engine,
                                               Gateway& gateway, const DecodeOptions& opts,
                                               Trace& trace) {
    ExtractionOutcome outcome = extract_answer(text, format);
    if (outcome.answer.solved() ||
        outcome.answer.reason != UnsolvedReason::parse_failed || !opts.llm_fallback ||
        text.empty())
        return outcome;
    try {
        LlmExtractResult fb = llm_extract_detailed(problem.question, text, engine, gateway,
                                                   opts.model, opts.max_tokens_extract);
        trace.passes.push_back(PassRecord{"extraction", fb.prompt, fb.response});
        outcome.answer = fb.answer;
        outcome.tier = ExtractionTier::llm_fallback;
        outcome.raw_span = trim(fb.response.text);
    } catch (const GatewayError& e) {
        trace.error = e.what();
    }
    return outcome;
}

}  // namespace detail

/// Single greedy pass: build the prompt, generate at temperature zero,
/// extract. Gateway failures are recorded in the trace, never thrown: one
/// bad problem must not abort a run.
inline Trace run_greedy(const Problem& problem, const MethodSpec& spec, const PromptEngine& engine,
                        Gateway& gateway, const DecodeOptions& opts,
                        std::span<const Exemplar> exemplars = {}) {
    spec.validate();
    Trace trace;
    trace.problem_id = problem.id;
    trace.spec = spec;

    std::vector<Exemplar> default_ex;
    if (spec.k_shots > 0 && exemplars.empty()) {
        default_ex = engine.default_exemplars(spec.method, spec.pep_integrated);
        exemplars = default_ex;
    }
    PromptText prompt = spec.k_shots == 0
                            ? engine.build_zero_shot_prompt(problem, spec)
                            : engine.build_few_shot_prompt(problem, spec, exemplars);

    GenRequest req;
    req.model = opts.model;
    req.prompt = prompt;
    req.temperature = 0.0;
    req.max_tokens = opts.max_tokens;

    GenResponse resp;
    try {
        resp = gateway.generate(req);
    } catch (const GatewayError& e) {
        trace.error = e.what();
        trace.passes.push_back(PassRecord{"generation", prompt,
                                          GenResponse{"", FinishReason::error, TokenUsage{}, false, 0}});
        trace.samples.push_back(ExtractionOutcome{
            ExtractedAnswer::unsolved(UnsolvedReason::exec_error), ExtractionTier::exec, "", false});
        trace.final = trace.samples.back().answer;
        return trace;
    }
    trace.passes.push_back(PassRecord{"generation", prompt, resp});

    ExtractionOutcome outcome = detail::extract_with_fallback(
        problem, resp.text, spec.answer_format, engine, gateway, opts, trace);
    trace.samples.push_back(outcome);
    auto [final, tally] = majority_vote({outcome.answer});
    trace.final = final;
    trace.vote = std::move(tally);
    return trace;
}

/// Code-generation pipeline. With use_pep the elaboration is generated in a
/// first pass and inserted into the template; either way the emitted program
/// is extracted and executed, and the printed value becomes the answer.
inline Trace run_pot_pipeline(const Problem& problem, bool use_pep, const PromptEngine& engine,
                              Gateway& gateway, const PotConfig& pot_config,
                              const DecodeOptions& opts) {
    Trace trace;
    trace.problem_id = problem.id;
    trace.spec.method = use_pep ? MethodKind::pot_pep : MethodKind::pot;
    trace.spec.k_shots = 0;
    trace.spec.answer_format = AnswerFormat::free;

    auto fail = [&trace](UnsolvedReason reason, const std::string& message) {
        trace.error = message;
        trace.samples.push_back(ExtractionOutcome{ExtractedAnswer::unsolved(reason),
                                                  reason == UnsolvedReason::parse_failed
                                                      ? ExtractionTier::none
                                                      : ExtractionTier::exec,
                                                  "", false});
        trace.final = trace.samples.back().answer;
        return trace;
    };

    std::optional<std::string> elaboration;
    if (use_pep) {
        PromptText ela_prompt = engine.build_elaboration_prompt(problem);
        GenRequest req;
        req.model = opts.model;
        req.prompt = ela_prompt;
        req.temperature = 0.0;
        req.max_tokens = opts.max_tokens;
        try {
            GenResponse resp = gateway.generate(req);
            trace.passes.push_back(PassRecord{"elaboration", ela_prompt, resp});
            elaboration = trim(resp.text);
        } catch (const GatewayError& e) {
            return fail(UnsolvedReason::exec_error, e.what());
        }
    }

    PromptText code_prompt = engine.build_pot_prompt(problem, elaboration);
    GenRequest req;
    req.model = opts.model;
    req.prompt = code_prompt;
    req.temperature = 0.0;
    req.max_tokens = opts.max_tokens;
    GenResponse resp;
    try {
        resp = gateway.generate(req);
    } catch (const GatewayError& e) {
        return fail(UnsolvedReason::exec_error, e.what());
    }
    trace.passes.push_back(PassRecord{"code", code_prompt, resp});

    auto program = extract_code_block(resp.text, problem.id);
    if (!program)
        return fail(UnsolvedReason::parse_failed, "generation defines no solution() entry point");

    ExecResult exec = execute_solution(*program, pot_config);
    trace.exec = PotExecRecord{exec.stdout_text, exec.stderr_text, exec.wall_time_s,
                               exec.exit_code, exec.timed_out};
    ExtractionOutcome outcome;
    outcome.answer = exec.outcome;
    outcome.tier = exec.outcome.solved() || exec.outcome.reason != UnsolvedReason::parse_failed
                       ? ExtractionTier::exec
                       : ExtractionTier::none;
    trace.samples.push_back(outcome);
    auto [final, tally] = majority_vote({outcome.answer});
    trace.final = final;
    trace.vote = std::move(tally);
    if (!exec.outcome.solved() && exec.outcome.reason != UnsolvedReason::parse_failed) {
        trace.error = exec.timed_out ? "execution timed out"
                                     : "execution failed with exit code " +
                                           std::to_string(exec.exit_code);
    }
    return trace;
}

/// Samples n generations at nonzero temperature (distinct sample indices,
/// hence distinct cache entries) and majority-votes the extractions.
inline Trace run_self_consistency(const Problem& problem, const MethodSpec& spec, int n,
                                  double temperature, const PromptEngine& engine, Gateway& gateway,
                                  const DecodeOptions& opts,
                                  std::span<const Exemplar> exemplars = {}) {
    spec.validate();
    if (n < 1) throw std::invalid_argument("self-consistency needs n >= 1");
    if (temperature <= 0) throw std::invalid_argument("self-consistency needs temperature > 0");

    Trace trace;
    trace.problem_id = problem.id;
    trace.spec = spec;

    std::vector<Exemplar> default_ex;
    if (spec.k_shots > 0 && exemplars.empty()) {
        default_ex = engine.default_exemplars(spec.method, spec.pep_integrated);
        exemplars = default_ex;
    }
    PromptText prompt = spec.k_shots == 0
                            ? engine.build_zero_shot_prompt(problem, spec)
                            : engine.build_few_shot_prompt(problem, spec, exemplars);

    std::vector<ExtractedAnswer> answers;
    for (int i = 0; i < n; ++i) {
        GenRequest req;
        req.model = opts.model;
        req.prompt = prompt;
        req.temperature = temperature;
        req.max_tokens = opts.max_tokens;
        req.sample_index = i;
        try {
            GenResponse resp = gateway.generate(req);
            trace.passes.push_back(PassRecord{"generation", prompt, resp});
            ExtractionOutcome outcome = detail::extract_with_fallback(
                problem, resp.text, spec.answer_format, engine, gateway, opts, trace);
            trace.samples.push_back(outcome);
        } catch (const GatewayError& e) {
            trace.error = e.what();
            trace.samples.push_back(ExtractionOutcome{
                ExtractedAnswer::unsolved(UnsolvedReason::exec_error), ExtractionTier::exec, "",
                false});
        }
        answers.push_back(trace.samples.back().answer);
    }
    auto [final, tally] = majority_vote(answers);
    trace.final = final;
    trace.vote = std::move(tally);
    return trace;
}

}  // namespace pepeval
