#include <doctest.h>

#include "test_support.hpp"

using namespace pepeval;

TEST_CASE("curated extraction suite") {
    struct Case {
        const char* text;
        const char* expect;  // canonical value, single letter, or unsolved reason
        AnswerFormat format = AnswerFormat::free;
    };
    const Case cases[] = {
        {"The reasoning leads here. Final answer: \\boxed{40}", "40"},
        {"Anna has 7 apples. The answer is 12.", "12"},
        {"Result line only.\nFinal answer: \\boxed{N/A}", "model_declared"},
        {"Carla spent $1.50 * 2 = $3.00. The answer is 3.00.", "3"},
        {"Stock left: Final answer: \\boxed{$1,630}", "1630"},
        {"Janet makes $34 per day.", "34"},
        {"The answer is 34 dollars.", "34"},
        {"A quarter remains. Final answer: \\boxed{25%}", "0.25"},
        {"Three of four slices. The answer is 3/4.", "0.75"},
        {"It drops to -5 degrees. Final answer: \\boxed{-5}", "-5"},
        {"so the total is 42", "42"},
        {"The total amount is 1,630 nails.", "1630"},
        {"The answer is twelve.", "parse_failed"},
        {"no numbers anywhere", "parse_failed"},
        {"", "parse_failed"},
        {"unsolved", "model_declared"},
        {"Final answer: \\boxed{unsolved}", "model_declared"},
        {"Kody must now be 28 + 4 = 32 years old. The answer is 32.", "32"},
        {"The price is 3.00 and the answer is 3.", "3"},
        {"Final answer: \\boxed{0}", "0"},
        {"Deep nesting: Final answer: \\boxed{\\frac{3}{4}}", "0.75"},
        {"Final answer: \\boxed{C}", "C", AnswerFormat::choice},
        {"I would pick option (B) here.", "B", AnswerFormat::choice},
        {"The answer is D.", "D", AnswerFormat::choice},
    };
    for (const Case& c : cases) {
        CAPTURE(c.text);
        ExtractedAnswer got = extract_answer(c.text, c.format).answer;
        if (std::string(c.expect) == "parse_failed" || std::string(c.expect) == "model_declared") {
            CHECK_FALSE(got.solved());
            CHECK(to_string(got.reason) == c.expect);
        } else if (c.format == AnswerFormat::choice) {
            REQUIRE(got.kind == ExtractedAnswer::Kind::option);
            CHECK(got.letter == c.expect[0]);
        } else {
            REQUIRE_MESSAGE(got.kind == ExtractedAnswer::Kind::numeric, c.text);
            CHECK(got.value.to_string() == c.expect);
        }
    }
}

TEST_CASE("tier precedence: a boxed span silences lower tiers") {
    auto out = extract_answer("The answer is 99. Later: Final answer: \\boxed{40}", AnswerFormat::free);
    CHECK(out.tier == ExtractionTier::boxed);
    CHECK(out.answer.value.to_string() == "40");
    CHECK(out.tier_disagreement);  // the trailing marker says 99

    auto agree = extract_answer("The answer is 40. Final answer: \\boxed{40}", AnswerFormat::free);
    CHECK_FALSE(agree.tier_disagreement);

    auto marker = extract_answer("The answer is 12. And some numbers 99 later.", AnswerFormat::free);
    CHECK(marker.tier == ExtractionTier::marker);
    CHECK(marker.answer.value.to_string() == "12");

    auto bare = extract_answer("values 3 then 4 then 5", AnswerFormat::free);
    CHECK(bare.tier == ExtractionTier::final_number);
    CHECK(bare.answer.value.to_string() == "5");
}

TEST_CASE("extraction is total on arbitrary bytes") {
    SplitMix64 rng(1234);
    for (int i = 0; i < 300; ++i) {
        std::string junk;
        size_t len = rng.bounded(400);
        for (size_t j = 0; j < len; ++j)
            junk.push_back(static_cast<char>(rng.bounded(255) + 1));
        CHECK_NOTHROW(extract_answer(junk, AnswerFormat::free));
        CHECK_NOTHROW(extract_answer(junk, AnswerFormat::choice));
    }
}

TEST_CASE("normalize_numeric handles formats and round-trips canonical decimals") {
    CHECK(normalize_numeric("$34")->to_string() == "34");
    CHECK(normalize_numeric("3.00")->to_string() == "3");
    CHECK(normalize_numeric("1,630")->to_string() == "1630");
    CHECK(normalize_numeric(" 42 apples ")->to_string() == "42");
    CHECK(normalize_numeric("12.")->to_string() == "12");
    CHECK(normalize_numeric("50%")->to_string() == "0.5");
    CHECK(normalize_numeric("7/2")->to_string() == "3.5");
    CHECK_FALSE(normalize_numeric("twelve").has_value());
    CHECK_FALSE(normalize_numeric("").has_value());

    // canonical decimal -> render with noise -> normalize -> identity
    SplitMix64 rng(77);
    const char* prefixes[] = {"", "$", " ", "roughly "};
    const char* suffixes[] = {"", ".", " units", " dollars.", "!"};
    for (int i = 0; i < 400; ++i) {
        std::int64_t mant = static_cast<std::int64_t>(rng.bounded(100000));
        int scale = static_cast<int>(rng.bounded(3));
        Decimal d = Decimal::from_int(mant);
        if (scale > 0) d = *d.shifted_down(scale);
        std::string noisy = std::string(prefixes[rng.bounded(4)]) + d.to_string() +
                            suffixes[rng.bounded(5)];
        auto back = normalize_numeric(noisy);
        REQUIRE_MESSAGE(back.has_value(), noisy);
        CHECK_MESSAGE(*back == d, noisy);
    }
}

TEST_CASE("answer matching semantics") {
    GoldAnswer g3 = GoldAnswer::number(*Decimal::parse("3"));
    CHECK(match_answer(ExtractedAnswer::numeric(*Decimal::parse("3.00")), g3));
    GoldAnswer g655 = GoldAnswer::number(*Decimal::parse("655"));
    CHECK(match_answer(ExtractedAnswer::numeric(*Decimal::parse("655")), g655));
    GoldAnswer g5 = GoldAnswer::number(*Decimal::parse("5"));
    CHECK_FALSE(match_answer(ExtractedAnswer::unsolved(UnsolvedReason::parse_failed), g5));
    // tolerance is relative: 1e-6 * max(1, |gold|)
    CHECK(match_answer(ExtractedAnswer::numeric(*Decimal::parse("655.0006")), g655));
    CHECK_FALSE(match_answer(ExtractedAnswer::numeric(*Decimal::parse("655.01")), g655));
    // cross-kind comparisons are false, not exceptions
    GoldAnswer gc = GoldAnswer::choice('B');
    CHECK_FALSE(match_answer(ExtractedAnswer::numeric(*Decimal::parse("2")), gc));
    CHECK_FALSE(match_answer(ExtractedAnswer::option('B'), g3));
    CHECK(match_answer(ExtractedAnswer::option('B'), gc));
    CHECK_FALSE(match_answer(ExtractedAnswer::option('C'), gc));

    // reflexive within tolerance, symmetric
    SplitMix64 rng(5150);
    for (int i = 0; i < 200; ++i) {
        Decimal d = Decimal::from_int(static_cast<std::int64_t>(rng.bounded(10000)));
        ExtractedAnswer a = ExtractedAnswer::numeric(d);
        GoldAnswer g = GoldAnswer::number(d);
        CHECK(match_answer(a, g));
        CHECK(answers_equivalent(a, a));
    }
}

TEST_CASE("llm fallback parses the extraction completion") {
    PromptEngine engine;
    BackendConfig mock;
    mock.kind = BackendKind::mock;
    mock.mock_script = R"({"mode": "scripted", "rules": [{"contains": "Original Problem:", "text": " 34 "}]})";
    Gateway gateway(mock, RetryPolicy{});
    auto got = llm_extract("q", "a solution", engine, gateway, "m");
    REQUIRE(got.kind == ExtractedAnswer::Kind::numeric);
    CHECK(got.value.to_string() == "34");

    BackendConfig unsolved_mock;
    unsolved_mock.kind = BackendKind::mock;
    unsolved_mock.mock_script =
        R"({"mode": "scripted", "rules": [{"contains": "Original Problem:", "text": "unsolved"}]})";
    Gateway gw2(unsolved_mock, RetryPolicy{});
    auto u = llm_extract("q", "sol", engine, gw2, "m");
    CHECK_FALSE(u.solved());
    CHECK(u.reason == UnsolvedReason::model_declared);

    BackendConfig junk_mock;
    junk_mock.kind = BackendKind::mock;
    junk_mock.mock_script =
        R"({"mode": "scripted", "rules": [{"contains": "Original Problem:", "text": "abc"}]})";
    Gateway gw3(junk_mock, RetryPolicy{});
    auto j = llm_extract("q", "sol", engine, gw3, "m");
    CHECK_FALSE(j.solved());
    CHECK(j.reason == UnsolvedReason::parse_failed);
}
