#include <doctest.h>

#include <cmath>

#include "gsmic_oracle.hpp"
#include "test_support.hpp"

using namespace pepeval;
using namespace pepeval::testing;

namespace {
constexpr double kEps = 1e-12;
}

TEST_CASE("plain accuracy") {
    std::vector<ScoredItem> items;
    for (int i = 0; i < 1319; ++i) items.push_back({"p" + std::to_string(i), i < 662, {}});
    Fraction f = accuracy(items);
    CHECK(f.num == 662);
    CHECK(f.den == 1319);
    CHECK(std::round(f.value() * 10000.0) / 10000.0 == doctest::Approx(0.5019));

    std::vector<ScoredItem> all{{"a", true, {}}, {"b", true, {}}};
    CHECK(accuracy(all).value() == 1.0);

    std::vector<ScoredItem> empty;
    CHECK_THROWS_AS(accuracy(empty), std::invalid_argument);

    // independent recount over a generated 20-item fixture
    SplitMix64 rng(99);
    std::vector<ScoredItem> fixture;
    int hand_count = 0;
    for (int i = 0; i < 20; ++i) {
        bool ok = rng.bounded(2) == 1;
        hand_count += ok ? 1 : 0;
        fixture.push_back({"f" + std::to_string(i), ok, {}});
    }
    CHECK(accuracy(fixture).num == hand_count);
}

TEST_CASE("norm accuracy identities and the reference row") {
    CHECK(norm_accuracy(55.0, 55.0) == doctest::Approx(100.0));
    CHECK(norm_accuracy(0.123, 0.123) == doctest::Approx(100.0));
    // back-solve the base accuracy from micro 76.7 / norm 89.08, re-apply
    double base = 76.7 / 89.08 * 100.0;
    CHECK(base == doctest::Approx(86.10).epsilon(0.0005));
    CHECK(std::abs(norm_accuracy(76.7, 86.10) - 89.08) < 0.05);
}

TEST_CASE("distractor metrics equal the brute-force oracle on random sets") {
    SplitMix64 rng(20240202);
    const char* strata[] = {"two_step", "m_step", "overall"};
    for (int round = 0; round < 200; ++round) {
        SynthSet s = random_synth(rng);
        auto [variants, bases] = to_items(s);
        ScoreReport report = gsmic_scores(variants, bases);

        for (int st = 0; st < 3; ++st) {
            double micro = oracle_micro(s, st);
            if (micro < 0) {
                CHECK_FALSE(report.strata.count(strata[st]));
                continue;
            }
            REQUIRE(report.strata.count(strata[st]));
            const GsmicCell& cell = report.strata.at(strata[st]);
            CHECK(cell.micro.value() == doctest::Approx(micro).epsilon(kEps));
            CHECK(cell.macro_all_correct.value() ==
                  doctest::Approx(oracle_macro_all(s, st)).epsilon(kEps));
            CHECK(cell.macro_mean == doctest::Approx(oracle_macro_mean(s, st)).epsilon(kEps));
            CHECK(cell.base_micro.value() == doctest::Approx(oracle_base_micro(s, st)).epsilon(kEps));
            CHECK(cell.base_macro.value() == doctest::Approx(oracle_base_macro(s, st)).epsilon(kEps));
            double bm = oracle_base_micro(s, st);
            if (bm > 0) {
                REQUIRE(cell.norm_micro.has_value());
                CHECK(*cell.norm_micro == doctest::Approx(micro / bm * 100.0).epsilon(1e-9));
            } else {
                CHECK_FALSE(cell.norm_micro.has_value());
            }
            double bM = oracle_base_macro(s, st);
            if (bM > 0) {
                REQUIRE(cell.norm_macro.has_value());
                CHECK(*cell.norm_macro ==
                      doctest::Approx(oracle_macro_all(s, st) / bM * 100.0).epsilon(1e-9));
            } else {
                CHECK_FALSE(cell.norm_macro.has_value());
            }
        }

        const char* factor_names[] = {"topic", "role_overlap", "num_range"};
        const char* level_names[3][2] = {{"in_topic", "off_topic"},
                                         {"overlap", "non_overlap"},
                                         {"in_range", "out_range"}};
        for (int f = 0; f < 3; ++f) {
            for (int level = 0; level < 2; ++level) {
                auto [micro, macro] = oracle_factor(s, f, level);
                bool has = report.factors.count(factor_names[f]) &&
                           report.factors.at(factor_names[f]).count(level_names[f][level]);
                if (micro < 0) {
                    CHECK_FALSE(has);  // cells with zero items are absent
                    continue;
                }
                REQUIRE(has);
                const FactorCell& cell = report.factors.at(factor_names[f]).at(level_names[f][level]);
                CHECK(cell.micro.value() == doctest::Approx(micro).epsilon(kEps));
                CHECK(cell.macro.value() == doctest::Approx(macro).epsilon(kEps));
            }
        }

        // overall micro is the stratum-size weighted mean of stratum micros
        const GsmicCell& o = report.strata.at("overall");
        double weighted = 0;
        std::int64_t total = 0;
        for (const char* st : {"two_step", "m_step"}) {
            if (!report.strata.count(st)) continue;
            const GsmicCell& c = report.strata.at(st);
            weighted += c.micro.value() * static_cast<double>(c.micro.den);
            total += c.micro.den;
        }
        CHECK(o.micro.value() == doctest::Approx(weighted / static_cast<double>(total)).epsilon(kEps));

        // factor level sets partition the variants
        std::int64_t topic_total = 0;
        for (const auto& [level, cell] : report.factors["topic"]) topic_total += cell.micro.den;
        CHECK(topic_total == static_cast<std::int64_t>(s.variants.size()));
    }
}

TEST_CASE("a structured fixture reproduces the reference stratum row to two decimals") {
    // Target row: micro 75.4 / 78.0 / 76.7 with norm 89.08, macro 31.67 /
    // 40.0 / 35.0 with norm 48.61. Construct 60 two-step and 40 m-step
    // bases, 500 variants per stratum, 72 correct bases carrying 861
    // variants, and 19 / 16 all-correct bases.
    SynthSet s;
    int base_id = 0;
    auto add_bases = [&](bool two_step, bool base_correct, int count, int size) {
        for (int i = 0; i < count; ++i) {
            std::string name = "b" + std::to_string(base_id++);
            s.bases[name] = {base_correct, two_step};
            for (int v = 0; v < size; ++v)
                s.variants.push_back(SynthVariant{name, two_step, false, 0, 0, 0});
        }
    };
    // two-step: 42 correct bases carry 431 variants, 18 incorrect carry 69
    add_bases(true, true, 41, 10);
    add_bases(true, true, 1, 21);
    add_bases(true, false, 17, 4);
    add_bases(true, false, 1, 1);
    // m-step: 30 correct bases carry 430 variants, 10 incorrect carry 70
    add_bases(false, true, 29, 14);
    add_bases(false, true, 1, 24);
    add_bases(false, false, 10, 7);

    // mark correct variants: all-correct bases first, then spread the rest
    // leaving at least one wrong variant per remaining base
    auto mark = [&](bool two_step, int all_correct_bases, int total_correct) {
        std::map<std::string, std::vector<size_t>> members;
        for (size_t i = 0; i < s.variants.size(); ++i)
            if (s.variants[i].two_step == two_step) members[s.variants[i].base].push_back(i);
        int marked = 0, full = 0;
        for (auto& [name, idx] : members) {
            if (full < all_correct_bases) {
                for (size_t i : idx) s.variants[i].correct = true;
                marked += static_cast<int>(idx.size());
                ++full;
            }
        }
        REQUIRE(marked <= total_correct);
        for (auto& [name, idx] : members) {
            if (marked >= total_correct) break;
            if (s.variants[idx[0]].correct) continue;  // already an all-correct base
            int room = static_cast<int>(idx.size()) - 1;
            int take = std::min(room, total_correct - marked);
            for (int i = 0; i < take; ++i) s.variants[idx[static_cast<size_t>(i)]].correct = true;
            marked += take;
        }
        REQUIRE(marked == total_correct);
    };
    mark(true, 19, 377);
    mark(false, 16, 390);

    auto [variants, bases] = to_items(s);
    REQUIRE(variants.size() == 1000);
    REQUIRE(bases.size() == 100);
    ScoreReport report = gsmic_scores(variants, bases);

    auto r2 = [](double v) { return std::round(v * 100.0) / 100.0; };
    CHECK(r2(report.strata.at("two_step").micro.pct()) == doctest::Approx(75.4));
    CHECK(r2(report.strata.at("m_step").micro.pct()) == doctest::Approx(78.0));
    CHECK(r2(report.strata.at("overall").micro.pct()) == doctest::Approx(76.7));
    CHECK(r2(report.strata.at("two_step").macro_all_correct.pct()) == doctest::Approx(31.67));
    CHECK(r2(report.strata.at("m_step").macro_all_correct.pct()) == doctest::Approx(40.0));
    CHECK(r2(report.strata.at("overall").macro_all_correct.pct()) == doctest::Approx(35.0));
    REQUIRE(report.strata.at("overall").norm_micro.has_value());
    CHECK(r2(*report.strata.at("overall").norm_micro) == doctest::Approx(89.08));
    REQUIRE(report.strata.at("overall").norm_macro.has_value());
    CHECK(r2(*report.strata.at("overall").norm_macro) == doctest::Approx(48.61));
    // the realized denominators the table implies
    CHECK(report.strata.at("two_step").macro_all_correct.den == 60);
    CHECK(report.strata.at("m_step").macro_all_correct.den == 40);
    CHECK(report.strata.at("overall").base_micro.num == 861);
    CHECK(report.strata.at("overall").base_macro.num == 72);
}

TEST_CASE("removing all variants of one base shrinks the macro denominator by one") {
    SplitMix64 rng(7);
    SynthSet s = random_synth(rng);
    auto [variants, bases] = to_items(s);
    ScoreReport with_all = gsmic_scores(variants, bases);

    const std::string victim = s.variants.front().base;
    const bool victim_two_step = s.bases.at(victim).second;
    std::vector<ScoredItem> remaining;
    for (const ScoredItem& v : variants)
        if (v.gsmic->base_id != victim) remaining.push_back(v);
    REQUIRE(!remaining.empty());
    ScoreReport without = gsmic_scores(remaining, bases);

    const char* stratum = victim_two_step ? "two_step" : "m_step";
    if (without.strata.count(stratum)) {
        CHECK(with_all.strata.at(stratum).macro_all_correct.den -
                  without.strata.at(stratum).macro_all_correct.den ==
              1);
    }
    CHECK(with_all.strata.at("overall").macro_all_correct.den -
              without.strata.at("overall").macro_all_correct.den ==
          1);
}

TEST_CASE("gsmic scoring rejects inconsistent inputs") {
    GsmicMeta base_meta;
    base_meta.base_id = "b0";
    base_meta.is_base = true;
    GsmicMeta var_meta;
    var_meta.base_id = "b-missing";
    var_meta.is_base = false;
    std::vector<ScoredItem> variants{{"v0", true, var_meta}};
    std::vector<ScoredItem> bases{{"b0", true, base_meta}};
    CHECK_THROWS_WITH_AS(gsmic_scores(variants, bases), doctest::Contains("no base score"),
                         std::invalid_argument);
}

TEST_CASE("score report serialization round trip") {
    SplitMix64 rng(31337);
    SynthSet s = random_synth(rng);
    auto [variants, bases] = to_items(s);
    ScoreReport report = gsmic_scores(variants, bases);
    ScoreReport back = ScoreReport::from_json(report.to_json());
    CHECK(back.to_json().dump() == report.to_json().dump());
}

TEST_CASE("instruction candidate selection ranks and breaks ties by input order") {
    PromptEngine engine;
    BackendConfig c;
    c.kind = BackendKind::mock;
    c.mock_script = R"({"mode": "scripted", "rules": [
        {"contains": "MARK-A", "text": "Final answer: \\boxed{1}"},
        {"contains": "MARK-B", "text": "Final answer: \\boxed{9}"},
        {"contains": "MARK-C", "text": "Final answer: \\boxed{9}"},
        {"contains": "MARK-D", "text": "Final answer: \\boxed{9}"}
    ]})";
    Gateway gw(c, RetryPolicy{});

    std::vector<Problem> probs{make_problem("q1", "one plus zero?", "1"),
                               make_problem("q2", "cos of zero?", "1")};
    ProblemSet subset(std::move(probs), DatasetTag::canonical, Provenance{});

    std::vector<std::pair<std::string, std::string>> candidates{
        {"B", "Lead with MARK-B."},
        {"A", "Lead with MARK-A."},
        {"C", "Lead with MARK-C."},
        {"D", "Lead with MARK-D."},
    };
    auto rows = prompt_selection_eval(candidates, subset, engine, gw, DecodeOptions{});
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].label == "A");  // all correct, ranked first, marked winner
    CHECK(rows[0].winner);
    CHECK(rows[0].accuracy.value() == 1.0);
    CHECK(rows[1].label == "B");  // ties keep input order
    CHECK(rows[2].label == "C");
    CHECK(rows[3].label == "D");

    CHECK_THROWS_AS(prompt_selection_eval({}, subset, engine, gw, DecodeOptions{}),
                    std::invalid_argument);

    // backend failures count the item incorrect instead of aborting
    auto rows2 = prompt_selection_eval({{"A", "Lead with MARK-A."}, {"E", "No rule matches this."}},
                                       subset, engine, gw, DecodeOptions{});
    REQUIRE(rows2.size() == 2);
    CHECK(rows2[1].label == "E");
    CHECK(rows2[1].accuracy.num == 0);
    CHECK(rows2[1].accuracy.den == 2);

    // the built-in candidate list carries the reference labels
    CHECK(assets::kInstructionCandidates.size() == 7);
    CHECK(std::string(assets::kInstructionCandidates[2].label) == "P1");
    CHECK(std::string(assets::kInstructionCandidates[2].text) == assets::kPepInst);
}
