#pragma once

#include <iostream>
#include <optional>
#include <string>
#include <string_view>

#include "pepeval/decimal.hpp"
#include "pepeval/gateway.hpp"
#include "pepeval/problems.hpp"
#include "pepeval/util.hpp"

namespace pepeval {

enum class UnsolvedReason { model_declared, parse_failed, exec_error, timeout };

inline std::string to_string(UnsolvedReason r) {
    switch (r) {
        case UnsolvedReason::model_declared: return "model_declared";
        case UnsolvedReason::parse_failed: return "parse_failed";
        case UnsolvedReason::exec_error: return "exec_error";
        case UnsolvedReason::timeout: return "timeout";
    }
    return "parse_failed";
}

inline UnsolvedReason unsolved_reason_from(std::string_view s) {
    if (s == "model_declared") return UnsolvedReason::model_declared;
    if (s == "exec_error") return UnsolvedReason::exec_error;
    if (s == "timeout") return UnsolvedReason::timeout;
    return UnsolvedReason::parse_failed;
}

/// Canonical model answer: numeric value, option letter, or unsolved.
struct ExtractedAnswer {
    enum class Kind { numeric, option, unsolved };

    Kind kind = Kind::unsolved;
    Decimal value;
    char letter = 'A';
    UnsolvedReason reason = UnsolvedReason::parse_failed;

    static ExtractedAnswer numeric(Decimal v) {
        ExtractedAnswer a;
        a.kind = Kind::numeric;
        a.value = v;
        return a;
    }
    static ExtractedAnswer option(char c) {
        ExtractedAnswer a;
        a.kind = Kind::option;
        a.letter = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        return a;
    }
    static ExtractedAnswer unsolved(UnsolvedReason r) {
        ExtractedAnswer a;
        a.kind = Kind::unsolved;
        a.reason = r;
        return a;
    }

    bool solved() const { return kind != Kind::unsolved; }

    std::string display() const {
        switch (kind) {
            case Kind::numeric: return value.to_string();
            case Kind::option: return std::string(1, letter);
            case Kind::unsolved: return "unsolved(" + to_string(reason) + ")";
        }
        return "unsolved";
    }

    json to_json() const {
        switch (kind) {
            case Kind::numeric: return json{{"kind", "numeric"}, {"value", value.to_string()}};
            case Kind::option: return json{{"kind", "option"}, {"letter", std::string(1, letter)}};
            case Kind::unsolved: return json{{"kind", "unsolved"}, {"reason", to_string(reason)}};
        }
        return json{{"kind", "unsolved"}, {"reason", "parse_failed"}};
    }
    static ExtractedAnswer from_json(const json& j) {
        const std::string kind = j.value("kind", "unsolved");
        if (kind == "numeric") {
            auto v = Decimal::parse(j.value("value", ""));
            return v ? numeric(*v) : unsolved(UnsolvedReason::parse_failed);
        }
        if (kind == "option") {
            std::string letter = j.value("letter", "A");
            return option(letter.empty() ? 'A' : letter[0]);
        }
        return unsolved(unsolved_reason_from(j.value("reason", "parse_failed")));
    }
};

enum class ExtractionTier { boxed, marker, final_number, llm_fallback, exec, none };

inline std::string to_string(ExtractionTier t) {
    switch (t) {
        case ExtractionTier::boxed: return "boxed";
        case ExtractionTier::marker: return "marker";
        case ExtractionTier::final_number: return "final_number";
        case ExtractionTier::llm_fallback: return "llm_fallback";
        case ExtractionTier::exec: return "exec";
        case ExtractionTier::none: return "none";
    }
    return "none";
}

inline ExtractionTier tier_from(std::string_view s) {
    if (s == "boxed") return ExtractionTier::boxed;
    if (s == "marker") return ExtractionTier::marker;
    if (s == "final_number") return ExtractionTier::final_number;
    if (s == "llm_fallback") return ExtractionTier::llm_fallback;
    if (s == "exec") return ExtractionTier::exec;
    return ExtractionTier::none;
}

struct ExtractionOutcome {
    ExtractedAnswer answer;
    ExtractionTier tier = ExtractionTier::none;
    std::string raw_span;
    bool tier_disagreement = false;  // a lower tier would have answered differently

    json to_json() const {
        json j{{"answer", answer.to_json()}, {"tier", to_string(tier)}, {"raw_span", raw_span}};
        if (tier_disagreement) j["tier_disagreement"] = true;
        return j;
    }
    static ExtractionOutcome from_json(const json& j) {
        ExtractionOutcome o;
        o.answer = ExtractedAnswer::from_json(j.at("answer"));
        o.tier = tier_from(j.value("tier", "none"));
        o.raw_span = j.value("raw_span", "");
        o.tier_disagreement = j.value("tier_disagreement", false);
        return o;
    }
};

namespace detail {

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

/// Finds the numeric token starting at or after `from`; returns the token
/// [begin, end) or nullopt. A token is standalone when not glued to a word.
struct NumToken {
    size_t begin;
    size_t end;
};

inline std::optional<NumToken> find_number(std::string_view s, size_t from) {
    for (size_t i = from; i < s.size(); ++i) {
        if (!is_digit(s[i])) continue;
        size_t begin = i;
        // optional sign directly attached, not preceded by a word character
        if (begin > 0 && (s[begin - 1] == '-' || s[begin - 1] == '+')) {
            bool word_before = begin >= 2 && is_word_char(s[begin - 2]);
            bool numeric_before = begin >= 2 && (is_digit(s[begin - 2]) || s[begin - 2] == '.');
            if (!word_before && !numeric_before) --begin;
        }
        if (begin > 0 && is_word_char(s[begin - 1])) {
            // glued to a word ("item3"), skip the whole run
            while (i < s.size() && (is_digit(s[i]) || s[i] == ',' || s[i] == '.')) ++i;
            continue;
        }
        size_t end = i;
        bool seen_dot = false;
        while (end < s.size()) {
            char c = s[end];
            if (is_digit(c)) {
                ++end;
            } else if (c == ',' && end + 1 < s.size() && is_digit(s[end + 1])) {
                ++end;  // thousands separator
            } else if (c == '.' && !seen_dot && end + 1 < s.size() && is_digit(s[end + 1])) {
                seen_dot = true;
                ++end;
            } else {
                break;
            }
        }
        // fraction a/b
        if (end < s.size() && s[end] == '/' && end + 1 < s.size() && is_digit(s[end + 1])) {
            size_t den = end + 1;
            while (den < s.size() && is_digit(s[den])) ++den;
            end = den;
        } else if (end < s.size() && s[end] == '%') {
            ++end;
        }
        if (end < s.size() && is_word_char(s[end])) {
            // glued to a trailing word ("3kg"), not standalone
            continue;
        }
        return NumToken{begin, end};
    }
    return std::nullopt;
}

inline std::optional<NumToken> find_last_number(std::string_view s) {
    std::optional<NumToken> last;
    size_t from = 0;
    while (auto t = find_number(s, from)) {
        last = t;
        from = t->end;
    }
    return last;
}

/// Last standalone option letter. Lowercase letters are accepted only when
/// allow_lower is set (short marker spans); in free-running text they would
/// collide with the article "a".
inline std::optional<size_t> find_last_option_letter(std::string_view s, bool allow_lower = false) {
    for (size_t i = s.size(); i > 0; --i) {
        char c = s[i - 1];
        char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        if (upper < 'A' || upper > 'E') continue;
        if (!allow_lower && c != upper) continue;
        bool left_ok = i < 2 || !is_word_char(s[i - 2]);
        bool right_ok = i >= s.size() || !is_word_char(s[i]);
        if (left_ok && right_ok) return i - 1;
    }
    return std::nullopt;
}

inline bool is_unsolved_span(std::string_view span) {
    std::string t = to_lower(trim(span));
    while (!t.empty() && (t.back() == '.' || t.back() == '!' || t.back() == ',')) t.pop_back();
    return t == "n/a" || t == "n\\a" || t == "na" || t == "n.a." || t == "none" ||
           t == "unsolved" || t == "unsolvable" || t == "no answer";
}

/// Content of the last \boxed{...} (balanced braces), if any.
inline std::optional<std::string> last_boxed_span(std::string_view text) {
    const std::string_view needle = "boxed{";
    size_t best = std::string_view::npos;
    size_t from = 0;
    while (true) {
        size_t hit = text.find(needle, from);
        if (hit == std::string_view::npos) break;
        best = hit;
        from = hit + 1;
    }
    if (best == std::string_view::npos) return std::nullopt;
    size_t open = best + needle.size();
    int depth = 1;
    size_t i = open;
    for (; i < text.size(); ++i) {
        if (text[i] == '{') ++depth;
        if (text[i] == '}' && --depth == 0) break;
    }
    return std::string(text.substr(open, i - open));
}

struct MarkerSpan {
    std::string span;
    size_t pos;
};

/// Marker spans ("final answer" / "the answer is" ...) from last to first,
/// each running to end of line. Spans starting at or beyond clip_at are
/// dropped and earlier ones cut there; the disagreement check uses the clip
/// to look only at what the text claims outside the boxed directive.
inline std::vector<MarkerSpan> marker_spans_desc(std::string_view text,
                                                 size_t clip_at = std::string_view::npos) {
    const std::string lower = to_lower(text);
    std::vector<std::pair<size_t, size_t>> candidates;  // (span_start, hit)
    for (std::string_view marker : {"final answer:", "final answer is", "the answer is", "answer:"}) {
        size_t from = 0;
        while (true) {
            size_t hit = lower.find(marker, from);
            if (hit == std::string::npos) break;
            candidates.emplace_back(hit + marker.size(), hit);
            from = hit + 1;
        }
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<MarkerSpan> out;
    for (const auto& [start, hit] : candidates) {
        if (start >= clip_at) continue;
        size_t eol = text.find('\n', start);
        if (eol == std::string_view::npos) eol = text.size();
        eol = std::min(eol, clip_at);
        out.push_back(MarkerSpan{std::string(text.substr(start, eol - start)), hit});
    }
    return out;
}

inline std::optional<MarkerSpan> last_marker_span(std::string_view text) {
    auto spans = marker_spans_desc(text);
    if (spans.empty()) return std::nullopt;
    return spans.front();
}

}  // namespace detail

namespace detail {

/// Rewrites \frac{a}{b} (and \dfrac) into a/b so the token scanner sees a
/// plain fraction.
inline std::string rewrite_tex_fractions(std::string_view span) {
    std::string out(span);
    auto grab = [&out](size_t open) -> std::optional<std::pair<std::string, size_t>> {
        if (open >= out.size() || out[open] != '{') return std::nullopt;
        int depth = 0;
        size_t i = open;
        for (; i < out.size(); ++i) {
            if (out[i] == '{') ++depth;
            else if (out[i] == '}' && --depth == 0) break;
        }
        if (i >= out.size()) return std::nullopt;
        return std::pair{out.substr(open + 1, i - open - 1), i};
    };
    while (true) {
        size_t cmd = out.find("\\frac{");
        size_t len = 6;
        size_t dfrac = out.find("\\dfrac{");
        if (dfrac != std::string::npos && (cmd == std::string::npos || dfrac < cmd)) {
            cmd = dfrac;
            len = 7;
        }
        if (cmd == std::string::npos) return out;
        auto num = grab(cmd + len - 1);
        if (!num) return out;
        auto den = grab(num->second + 1);
        if (!den) return out;
        out = out.substr(0, cmd) + num->first + "/" + den->first + out.substr(den->second + 1);
    }
}

}  // namespace detail

/// Normalizes a matched span into an exact decimal: currency symbols and
/// thousands separators stripped, percent divided by 100, simple fractions
/// a/b evaluated, unit words after the number ignored.
inline std::optional<Decimal> normalize_numeric(std::string_view span_in) {
    std::string rewritten;
    std::string_view span = span_in;
    if (span.find("frac{") != std::string_view::npos) {
        rewritten = detail::rewrite_tex_fractions(span);
        span = rewritten;
    }
    auto token = detail::find_number(span, 0);
    if (!token) return std::nullopt;
    std::string_view t = span.substr(token->begin, token->end - token->begin);
    bool percent = false;
    if (!t.empty() && t.back() == '%') {
        percent = true;
        t.remove_suffix(1);
    }
    std::string body = replace_all(t, ",", "");
    size_t slash = body.find('/');
    std::optional<Decimal> value;
    if (slash != std::string::npos) {
        auto num = Decimal::parse(body.substr(0, slash));
        auto den = Decimal::parse(body.substr(slash + 1));
        if (!num || !den) return std::nullopt;
        value = Decimal::from_fraction(*num, *den);
    } else {
        value = Decimal::parse(body);
    }
    if (!value) return std::nullopt;
    if (percent) value = value->shifted_down(2);
    return value;
}

namespace detail {

inline std::optional<ExtractedAnswer> answer_from_span(std::string_view span, AnswerFormat format) {
    if (is_unsolved_span(span))
        return ExtractedAnswer::unsolved(UnsolvedReason::model_declared);
    if (format == AnswerFormat::choice) {
        std::string t = trim(span);
        if (auto pos = find_last_option_letter(t, /*allow_lower=*/true))
            return ExtractedAnswer::option(t[*pos]);
        return std::nullopt;
    }
    if (auto v = normalize_numeric(span)) return ExtractedAnswer::numeric(*v);
    return std::nullopt;
}

}  // namespace detail

inline bool answers_equivalent(const ExtractedAnswer& a, const ExtractedAnswer& b);

/// Tiered parse of a raw generation. Total and deterministic: any text maps
/// to an outcome, never an exception. Tier order: boxed span, then answer
/// marker, then the last standalone number (free) or option letter (choice).
/// A present higher tier claims the text even if its span fails to parse.
inline ExtractionOutcome extract_answer(const std::string& text, AnswerFormat format) {
    ExtractionOutcome out;

    if (auto boxed = detail::last_boxed_span(text)) {
        out.tier = ExtractionTier::boxed;
        out.raw_span = *boxed;
        auto parsed = detail::answer_from_span(*boxed, format);
        out.answer = parsed ? *parsed : ExtractedAnswer::unsolved(UnsolvedReason::parse_failed);
        if (!parsed) out.tier = ExtractionTier::none;
        if (parsed && out.answer.solved()) {
            // a contradictory free-standing marker is flagged for the run log
            for (const auto& marker : detail::marker_spans_desc(text, text.rfind("boxed{"))) {
                auto marker_answer = detail::answer_from_span(marker.span, format);
                if (!marker_answer || !marker_answer->solved()) continue;
                out.tier_disagreement = !answers_equivalent(*marker_answer, out.answer);
                break;
            }
        }
        return out;
    }

    if (auto marker = detail::last_marker_span(text)) {
        out.tier = ExtractionTier::marker;
        out.raw_span = marker->span;
        if (auto marker_answer = detail::answer_from_span(marker->span, format)) {
            out.answer = *marker_answer;
        } else {
            out.answer = ExtractedAnswer::unsolved(UnsolvedReason::parse_failed);
            out.tier = ExtractionTier::none;
        }
        return out;
    }

    if (format == AnswerFormat::free) {
        if (auto num = detail::find_last_number(text)) {
            out.tier = ExtractionTier::final_number;
            out.raw_span = std::string(text.substr(num->begin, num->end - num->begin));
            if (auto v = normalize_numeric(out.raw_span)) {
                out.answer = ExtractedAnswer::numeric(*v);
                return out;
            }
        }
    } else {
        if (auto pos = detail::find_last_option_letter(text)) {
            out.tier = ExtractionTier::final_number;
            out.raw_span = std::string(1, text[*pos]);
            out.answer = ExtractedAnswer::option(text[*pos]);
            return out;
        }
    }

    // a bare refusal with no marker at all still counts as declared-unsolved
    if (detail::is_unsolved_span(text)) {
        out.tier = ExtractionTier::final_number;
        out.raw_span = trim(text);
        out.answer = ExtractedAnswer::unsolved(UnsolvedReason::model_declared);
        return out;
    }

    out.tier = ExtractionTier::none;
    out.answer = ExtractedAnswer::unsolved(UnsolvedReason::parse_failed);
    out.raw_span.clear();
    return out;
}

/// Numeric match within |a - g| <= 1e-6 * max(1, |g|); options match on the
/// letter; unsolved never matches. Cross-kind comparisons are wrong answers,
/// not errors.
inline bool match_answer(const ExtractedAnswer& extracted, const GoldAnswer& gold) {
    if (!extracted.solved()) return false;
    if (gold.kind == GoldAnswer::Kind::numeric) {
        if (extracted.kind != ExtractedAnswer::Kind::numeric) {
            std::clog << "[pepeval] comparing option answer against numeric gold\n";
            return false;
        }
        if (extracted.value == gold.value) return true;
        const double g = gold.value.to_double();
        return std::abs(extracted.value.to_double() - g) <= 1e-6 * std::max(1.0, std::abs(g));
    }
    if (extracted.kind != ExtractedAnswer::Kind::option) {
        std::clog << "[pepeval] comparing numeric answer against choice gold\n";
        return false;
    }
    return extracted.letter == gold.letter;
}

/// Same equality the scorer uses, for grouping vote candidates.
inline bool answers_equivalent(const ExtractedAnswer& a, const ExtractedAnswer& b) {
    if (!a.solved() || !b.solved() || a.kind != b.kind) return false;
    if (a.kind == ExtractedAnswer::Kind::option) return a.letter == b.letter;
    if (a.value == b.value) return true;
    const double g = b.value.to_double();
    return std::abs(a.value.to_double() - g) <= 1e-6 * std::max(1.0, std::abs(g));
}

struct LlmExtractResult {
    ExtractedAnswer answer;
    PromptText prompt;
    GenResponse response;
};

/// One-shot extraction fallback: renders the extraction template, generates
/// at temperature 0, and parses the completion ("unsolved" or a number).
inline LlmExtractResult llm_extract_detailed(const std::string& question,
                                             const std::string& solution, const PromptEngine& engine,
                                             Gateway& gateway, const std::string& model,
                                             int max_tokens = 64) {
    LlmExtractResult out;
    out.prompt = engine.build_extraction_prompt(question, solution);
    GenRequest req;
    req.model = model;
    req.prompt = out.prompt;
    req.temperature = 0.0;
    req.max_tokens = max_tokens;
    out.response = gateway.generate(req);
    const std::string completion = trim(out.response.text);
    if (detail::is_unsolved_span(completion)) {
        out.answer = ExtractedAnswer::unsolved(UnsolvedReason::model_declared);
    } else if (auto v = normalize_numeric(completion)) {
        out.answer = ExtractedAnswer::numeric(*v);
    } else {
        out.answer = ExtractedAnswer::unsolved(UnsolvedReason::parse_failed);
    }
    return out;
}

inline ExtractedAnswer llm_extract(const std::string& question, const std::string& solution,
                                   const PromptEngine& engine, Gateway& gateway,
                                   const std::string& model, int max_tokens = 64) {
    return llm_extract_detailed(question, solution, engine, gateway, model, max_tokens).answer;
}

}  // namespace pepeval
