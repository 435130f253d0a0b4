#include <doctest.h>

#include <algorithm>

#include "test_support.hpp"

using namespace pepeval;
using pepeval::testing::data_dir;
using pepeval::testing::make_problem;

namespace {

ExtractedAnswer num(const std::string& v) { return ExtractedAnswer::numeric(*Decimal::parse(v)); }
ExtractedAnswer fail() { return ExtractedAnswer::unsolved(UnsolvedReason::parse_failed); }

Gateway mock_gateway(const std::string& script) {
    BackendConfig c;
    c.kind = BackendKind::mock;
    c.mock_script = script;
    return Gateway(c, RetryPolicy{});
}

}  // namespace

TEST_CASE("majority vote basics") {
    auto [w1, t1] = majority_vote({num("5"), num("5"), num("3")});
    CHECK(w1.value.to_string() == "5");
    REQUIRE(t1.groups.size() == 2);
    CHECK(t1.groups[0].count == 2);
    CHECK(t1.groups[1].count == 1);

    // tie broken by first appearance
    auto [w2, t2] = majority_vote({num("7"), num("4"), num("7"), num("4")});
    CHECK(w2.value.to_string() == "7");

    auto [w3, t3] = majority_vote({fail(), num("9"), fail()});
    CHECK(w3.value.to_string() == "9");
    CHECK(t3.groups.size() == 1);

    auto [w4, t4] = majority_vote({fail(), fail()});
    CHECK_FALSE(w4.solved());
    CHECK(w4.reason == UnsolvedReason::parse_failed);

    auto [w5, t5] = majority_vote({ExtractedAnswer::unsolved(UnsolvedReason::timeout),
                                   ExtractedAnswer::unsolved(UnsolvedReason::timeout)});
    CHECK(w5.reason == UnsolvedReason::timeout);

    auto [w6, t6] = majority_vote({});
    CHECK_FALSE(w6.solved());

    // numeric grouping uses the scoring tolerance: 3 and 3.00 are one group
    auto [w7, t7] = majority_vote({num("3"), num("3.00"), num("4")});
    CHECK(t7.groups[0].count == 2);

    // single element: the vote is that element
    auto [w8, t8] = majority_vote({num("1.25")});
    CHECK(w8.value.to_string() == "1.25");
}

TEST_CASE("vote permutation property over randomized multisets") {
    SplitMix64 rng(424242);
    for (int round = 0; round < 300; ++round) {
        size_t n = 1 + rng.bounded(12);
        std::vector<ExtractedAnswer> samples;
        for (size_t i = 0; i < n; ++i) {
            switch (rng.bounded(5)) {
                case 0: samples.push_back(fail()); break;
                default:
                    samples.push_back(num(std::to_string(rng.bounded(4))));
            }
        }
        auto [winner, tally] = majority_vote(samples);

        // permute deterministically and revote
        std::vector<ExtractedAnswer> shuffled = samples;
        for (size_t i = shuffled.size(); i > 1; --i)
            std::swap(shuffled[i - 1], shuffled[rng.bounded(i)]);
        auto [winner2, tally2] = majority_vote(shuffled);

        auto top_count = [](const VoteTally& t) {
            int best = 0;
            for (const VoteGroup& g : t.groups) best = std::max(best, g.count);
            return best;
        };
        CHECK(top_count(tally) == top_count(tally2));  // counts permutation invariant
        if (winner.solved()) {
            REQUIRE(winner2.solved());
            // unique maximum -> identical winner under any order
            int top = top_count(tally);
            int with_top = 0;
            for (const VoteGroup& g : tally.groups) with_top += g.count == top ? 1 : 0;
            if (with_top == 1) CHECK(answers_equivalent(winner, winner2));
            // ties resolve to the first-seen group of the permuted order
            int first_seen = -1;
            for (size_t i = 0; i < shuffled.size(); ++i) {
                if (shuffled[i].solved() && tally2.groups.size() &&
                    answers_equivalent(shuffled[i], winner2)) {
                    first_seen = static_cast<int>(i);
                    break;
                }
            }
            bool winner_group_has_top_count = false;
            for (const VoteGroup& g : tally2.groups)
                if (answers_equivalent(g.answer, winner2) && g.count == top_count(tally2))
                    winner_group_has_top_count = true;
            CHECK(winner_group_has_top_count);
            CHECK(first_seen >= 0);
        } else {
            CHECK_FALSE(winner2.solved());
        }
    }
}

TEST_CASE("greedy trace through the scripted mock") {
    Gateway gw = mock_gateway(
        R"({"mode": "scripted", "rules": [{"contains": "Brian", "text": "Work: 3*15-5.\nFinal answer: \\boxed{40}"}]})");
    PromptEngine engine;
    DecodeOptions opts;
    MethodSpec spec;
    spec.method = MethodKind::pep;

    Problem p = make_problem("b1", "Brian counts his games.", "40");
    Trace t = run_greedy(p, spec, engine, gw, opts);
    REQUIRE(t.final.kind == ExtractedAnswer::Kind::numeric);
    CHECK(t.final.value.to_string() == "40");
    CHECK(t.passes.size() == 1);  // elaboration and solution come in one pass
    CHECK(t.samples.size() == 1);
    CHECK(t.samples[0].tier == ExtractionTier::boxed);
    REQUIRE(t.vote.has_value());
    CHECK(t.error.empty());
}

TEST_CASE("greedy with no parsable answer and fallback disabled") {
    Gateway gw = mock_gateway(R"({"mode": "scripted", "default": "prose with no figure"})");
    PromptEngine engine;
    DecodeOptions opts;
    opts.llm_fallback = false;
    Trace t = run_greedy(make_problem("x", "Q?", "1"), MethodSpec{}, engine, gw, opts);
    CHECK_FALSE(t.final.solved());
    CHECK(t.final.reason == UnsolvedReason::parse_failed);
    CHECK(t.samples[0].tier == ExtractionTier::none);
}

TEST_CASE("greedy fallback performs a recorded second pass") {
    BackendConfig c;
    c.kind = BackendKind::mock;
    c.mock_script = (data_dir() / "fallback_mock.json").string();
    Gateway gw(c, RetryPolicy{});
    PromptEngine engine;
    DecodeOptions opts;
    opts.llm_fallback = true;
    Problem p = make_problem("f1", "[#F1] A puzzling question.", "34");
    Trace t = run_greedy(p, MethodSpec{}, engine, gw, opts);
    REQUIRE(t.final.kind == ExtractedAnswer::Kind::numeric);
    CHECK(t.final.value.to_string() == "34");
    REQUIRE(t.passes.size() == 2);
    CHECK(t.passes[1].label == "extraction");
    CHECK(t.samples[0].tier == ExtractionTier::llm_fallback);
}

TEST_CASE("gateway failure is recorded, not thrown") {
    Gateway gw = mock_gateway(R"({"mode": "scripted"})");  // no rules, no default
    PromptEngine engine;
    Trace t = run_greedy(make_problem("x", "Q?", "1"), MethodSpec{}, engine, gw, DecodeOptions{});
    CHECK_FALSE(t.final.solved());
    CHECK(t.final.reason == UnsolvedReason::exec_error);
    CHECK_FALSE(t.error.empty());
}

TEST_CASE("code-generation pipeline single and two pass") {
    BackendConfig c;
    c.kind = BackendKind::mock;
    c.mock_script = (data_dir() / "pot_mock.json").string();
    PromptEngine engine;
    DecodeOptions opts;
    PotConfig pot;

    SUBCASE("single pass with empty elaboration slot") {
        Gateway gw(c, RetryPolicy{});
        Trace t = run_pot_pipeline(make_problem("p", "product of 3 and 4?", "12"), false, engine, gw,
                                   pot, opts);
        REQUIRE(t.final.kind == ExtractedAnswer::Kind::numeric);
        CHECK(t.final.value.to_string() == "12");
        CHECK(t.passes.size() == 1);
        CHECK(t.spec.method == MethodKind::pot);
        CHECK(t.samples[0].tier == ExtractionTier::exec);
    }
    SUBCASE("two passes when elaboration is requested") {
        Gateway gw(c, RetryPolicy{});
        Trace t = run_pot_pipeline(make_problem("p", "product of 3 and 4?", "12"), true, engine, gw,
                                   pot, opts);
        REQUIRE(t.passes.size() == 2);
        CHECK(t.passes[0].label == "elaboration");
        CHECK(t.passes[1].label == "code");
        // the generated elaboration is inserted into the code prompt
        CHECK(t.passes[1].prompt.text.find("Segment 1: a product of 3 and 4 is asked.") !=
              std::string::npos);
        CHECK(t.final.value.to_string() == "12");
    }
    SUBCASE("code that cannot be extracted is a parse failure") {
        Gateway gw = mock_gateway(R"({"mode": "scripted", "default": "no code here"})");
        Trace t = run_pot_pipeline(make_problem("p", "q", "1"), false, engine, gw, pot, opts);
        CHECK_FALSE(t.final.solved());
        CHECK(t.final.reason == UnsolvedReason::parse_failed);
    }
}

TEST_CASE("self-consistency votes across sampled generations") {
    BackendConfig c;
    c.kind = BackendKind::mock;
    c.mock_script = (data_dir() / "sc_mock.json").string();
    PromptEngine engine;
    DecodeOptions opts;

    SUBCASE("majority of three wins") {
        Gateway gw(c, RetryPolicy{});
        Trace t = run_self_consistency(make_problem("s", "Q?", "5"), MethodSpec{}, 3, 0.7, engine, gw,
                                       opts);
        REQUIRE(t.samples.size() == 3);
        CHECK(t.final.value.to_string() == "5");
        REQUIRE(t.vote.has_value());
        CHECK(t.vote->groups.size() == 2);
        CHECK(t.vote->groups[0].count == 2);
    }
    SUBCASE("twenty samples leave twenty cache entries") {
        auto dir = pepeval::testing::scratch_dir("sc");
        auto cache = std::make_shared<ResponseCache>(dir, "sc");
        Gateway gw(c, RetryPolicy{}, cache);
        Trace t = run_self_consistency(make_problem("s", "Q?", "5"), MethodSpec{}, 20, 0.7, engine,
                                       gw, opts);
        CHECK(t.samples.size() == 20);
        CHECK(cache->size() == 20);
        CHECK(gw.network_calls() == 20);
        std::filesystem::remove_all(dir);
    }
    SUBCASE("n=1 equals the single extraction") {
        Gateway gw(c, RetryPolicy{});
        Trace t = run_self_consistency(make_problem("s", "Q?", "5"), MethodSpec{}, 1, 0.7, engine, gw,
                                       opts);
        REQUIRE(t.samples.size() == 1);
        CHECK(answers_equivalent(t.final, t.samples[0].answer));
    }
    SUBCASE("all samples unsolved yields unsolved") {
        Gateway gw = mock_gateway(R"({"mode": "scripted", "default": "no numbers at all"})");
        Trace t = run_self_consistency(make_problem("s", "Q?", "5"), MethodSpec{}, 4, 0.7, engine, gw,
                                       opts);
        CHECK_FALSE(t.final.solved());
        CHECK(t.final.reason == UnsolvedReason::parse_failed);
    }
    SUBCASE("preconditions") {
        Gateway gw(c, RetryPolicy{});
        CHECK_THROWS_AS(run_self_consistency(make_problem("s", "Q?", "5"), MethodSpec{}, 0, 0.7,
                                             engine, gw, opts),
                        std::invalid_argument);
        CHECK_THROWS_AS(run_self_consistency(make_problem("s", "Q?", "5"), MethodSpec{}, 3, 0.0,
                                             engine, gw, opts),
                        std::invalid_argument);
    }
}

TEST_CASE("self-consistency over a few-shot integrated prompt") {
    BackendConfig c;
    c.kind = BackendKind::mock;
    c.mock_script = (data_dir() / "sc_mock.json").string();
    Gateway gw(c, RetryPolicy{});
    PromptEngine engine;
    MethodSpec spec;
    spec.method = MethodKind::l2m;
    spec.k_shots = 1;
    spec.pep_integrated = true;
    Trace t = run_self_consistency(make_problem("fsc", "How many apples?", "5"), spec, 5, 0.7,
                                   engine, gw, DecodeOptions{});
    REQUIRE(t.samples.size() == 5);
    CHECK(t.final.value.to_string() == "5");
    // the prompt used the elaborated exemplar and the elaboration cue
    CHECK(t.passes[0].prompt.text.find("Rephrased question:") != std::string::npos);
    CHECK(ends_with(t.passes[0].prompt.text, "Problem Elaboration:"));
}

TEST_CASE("every trace's final equals the vote over its samples") {
    BackendConfig c;
    c.kind = BackendKind::mock;
    c.mock_script = (data_dir() / "sc_mock.json").string();
    Gateway gw(c, RetryPolicy{});
    PromptEngine engine;
    Trace t = run_self_consistency(make_problem("s", "Q?", "5"), MethodSpec{}, 7, 0.7, engine, gw,
                                   DecodeOptions{});
    std::vector<ExtractedAnswer> answers;
    for (const auto& s : t.samples) answers.push_back(s.answer);
    auto [expect, tally] = majority_vote(answers);
    CHECK(answers_equivalent(t.final, expect));
}

TEST_CASE("trace serialization round trip") {
    Gateway gw = mock_gateway(
        R"({"mode": "scripted", "default": "Final answer: \\boxed{8}"})");
    PromptEngine engine;
    Trace t = run_greedy(make_problem("r", "Q?", "8"), MethodSpec{}, engine, gw, DecodeOptions{});
    json j = t.to_json();
    Trace back = Trace::from_json(j);
    CHECK(back.problem_id == t.problem_id);
    CHECK(back.to_json().dump() == j.dump());
}
