#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pepeval/decimal.hpp"
#include "pepeval/sha256.hpp"
#include "pepeval/util.hpp"

namespace pepeval {

using json = nlohmann::json;

enum class DatasetTag { singleeq, gsm8k, aqua, svamp, gsmic, canonical };

inline std::string to_string(DatasetTag t) {
    switch (t) {
        case DatasetTag::singleeq: return "singleeq";
        case DatasetTag::gsm8k: return "gsm8k";
        case DatasetTag::aqua: return "aqua";
        case DatasetTag::svamp: return "svamp";
        case DatasetTag::gsmic: return "gsmic";
        case DatasetTag::canonical: return "canonical";
    }
    return "canonical";
}

inline std::optional<DatasetTag> dataset_tag_from(std::string_view s) {
    if (s == "singleeq") return DatasetTag::singleeq;
    if (s == "gsm8k") return DatasetTag::gsm8k;
    if (s == "aqua") return DatasetTag::aqua;
    if (s == "svamp") return DatasetTag::svamp;
    if (s == "gsmic") return DatasetTag::gsmic;
    if (s == "canonical") return DatasetTag::canonical;
    return std::nullopt;
}

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Gold label: a free numeric value or an option letter A-E.
struct GoldAnswer {
    enum class Kind { numeric, choice };

    Kind kind = Kind::numeric;
    Decimal value;       // numeric only
    char letter = 'A';   // choice only, uppercase

    static GoldAnswer number(Decimal v) {
        GoldAnswer g;
        g.kind = Kind::numeric;
        g.value = v;
        return g;
    }
    static GoldAnswer choice(char c) {
        GoldAnswer g;
        g.kind = Kind::choice;
        g.letter = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        return g;
    }
};

enum class StepClass { two_step, m_step };
enum class TopicLevel { in_topic, off_topic };
enum class RoleOverlapLevel { overlap, non_overlap };
enum class NumRangeLevel { in_range, out_range };

inline std::string to_string(StepClass s) { return s == StepClass::two_step ? "two_step" : "m_step"; }
inline std::string to_string(TopicLevel t) { return t == TopicLevel::in_topic ? "in_topic" : "off_topic"; }
inline std::string to_string(RoleOverlapLevel r) { return r == RoleOverlapLevel::overlap ? "overlap" : "non_overlap"; }
inline std::string to_string(NumRangeLevel n) { return n == NumRangeLevel::in_range ? "in_range" : "out_range"; }

/// Distractor metadata for irrelevant-context variants; base problems carry
/// only base_id/is_base/n_steps.
struct GsmicMeta {
    std::string base_id;
    bool is_base = false;
    StepClass n_steps = StepClass::two_step;
    std::optional<TopicLevel> topic;
    std::optional<RoleOverlapLevel> role_overlap;
    std::optional<NumRangeLevel> num_range;
};

struct Problem {
    std::string id;
    std::string question;
    GoldAnswer gold;
    std::vector<std::string> choices;  // non-empty iff gold is a choice
    std::optional<GsmicMeta> gsmic;
    DatasetTag source = DatasetTag::canonical;
};

struct Provenance {
    std::string file_digest;
    std::string adapter;
    std::optional<std::uint64_t> seed;
    std::optional<int> n_per_stratum;
    std::vector<std::string> sampled_ids;
    std::map<std::string, int> base_counts;  // realized bases per stratum

    json to_json() const {
        json j{{"file_digest", file_digest}, {"adapter", adapter}};
        if (seed) j["seed"] = *seed;
        if (n_per_stratum) j["n_per_stratum"] = *n_per_stratum;
        if (!sampled_ids.empty()) j["sampled_ids"] = sampled_ids;
        if (!base_counts.empty()) j["base_counts"] = base_counts;
        return j;
    }
    static Provenance from_json(const json& j) {
        Provenance p;
        p.file_digest = j.value("file_digest", "");
        p.adapter = j.value("adapter", "");
        if (j.contains("seed")) p.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("n_per_stratum")) p.n_per_stratum = j["n_per_stratum"].get<int>();
        if (j.contains("sampled_ids")) p.sampled_ids = j["sampled_ids"].get<std::vector<std::string>>();
        if (j.contains("base_counts")) p.base_counts = j["base_counts"].get<std::map<std::string, int>>();
        return p;
    }
};

namespace detail {

inline void check_problem(const Problem& p, const std::string& where) {
    if (trim(p.question).empty()) throw DatasetError(where + ": empty question");
    const bool has_choices = !p.choices.empty();
    if ((p.gold.kind == GoldAnswer::Kind::choice) != has_choices)
        throw DatasetError(where + ": choice gold must come with a choices list and vice versa");
    if (p.gold.kind == GoldAnswer::Kind::choice) {
        int idx = p.gold.letter - 'A';
        if (p.gold.letter < 'A' || p.gold.letter > 'E' || idx >= static_cast<int>(p.choices.size()))
            throw DatasetError(where + ": choice answer missing from choices");
    }
}

}  // namespace detail

/// Ordered, immutable-after-load collection of problems.
class ProblemSet {
public:
    ProblemSet() = default;
    ProblemSet(std::vector<Problem> problems, DatasetTag source, Provenance provenance)
        : problems_(std::move(problems)), source_(source), provenance_(std::move(provenance)) {
        validate();
    }

    const std::vector<Problem>& problems() const { return problems_; }
    DatasetTag source() const { return source_; }
    const Provenance& provenance() const { return provenance_; }
    size_t size() const { return problems_.size(); }
    bool empty() const { return problems_.empty(); }

    const Problem* find(const std::string& id) const {
        auto it = index_.find(id);
        return it == index_.end() ? nullptr : &problems_[it->second];
    }

private:
    void validate() {
        index_.clear();
        for (size_t i = 0; i < problems_.size(); ++i) {
            const Problem& p = problems_[i];
            detail::check_problem(p, "problem '" + p.id + "'");
            if (!index_.emplace(p.id, i).second)
                throw DatasetError("duplicate problem id '" + p.id + "'");
        }
        // every non-base variant must reference a base in this set
        for (const Problem& p : problems_) {
            if (p.gsmic && !p.gsmic->is_base) {
                auto it = index_.find(p.gsmic->base_id);
                if (it == index_.end())
                    throw DatasetError("variant '" + p.id + "' references missing base '" +
                                       p.gsmic->base_id + "'");
                const Problem& base = problems_[it->second];
                if (!base.gsmic || !base.gsmic->is_base)
                    throw DatasetError("variant '" + p.id + "' references non-base '" + base.id + "'");
            }
        }
    }

    std::vector<Problem> problems_;
    DatasetTag source_ = DatasetTag::canonical;
    Provenance provenance_;
    std::map<std::string, size_t> index_;
};

// ---------------------------------------------------------------------------
// canonical on-disk format: jsonl, first line is a header record
// ---------------------------------------------------------------------------

namespace detail {

inline json problem_to_json(const Problem& p) {
    json j{{"id", p.id}, {"question", p.question}};
    if (p.gold.kind == GoldAnswer::Kind::numeric) {
        j["answer"] = p.gold.value.to_string();
    } else {
        j["answer"] = std::string(1, p.gold.letter);
        j["choices"] = p.choices;
    }
    if (p.gsmic) {
        const GsmicMeta& m = *p.gsmic;
        json mj{{"base_id", m.base_id}, {"is_base", m.is_base}, {"n_steps", to_string(m.n_steps)}};
        if (m.topic) mj["topic"] = to_string(*m.topic);
        if (m.role_overlap) mj["role_overlap"] = to_string(*m.role_overlap);
        if (m.num_range) mj["num_range"] = to_string(*m.num_range);
        j["meta"] = mj;
    }
    return j;
}

inline Problem problem_from_json(const json& j, DatasetTag source, const std::string& where) {
    Problem p;
    p.source = source;
    try {
        p.id = j.at("id").get<std::string>();
        p.question = j.at("question").get<std::string>();
        if (j.contains("choices")) {
            p.choices = j["choices"].get<std::vector<std::string>>();
            std::string letter = j.at("answer").get<std::string>();
            if (letter.size() != 1) throw DatasetError(where + ": choice answer must be one letter");
            p.gold = GoldAnswer::choice(letter[0]);
        } else {
            auto v = Decimal::parse(trim(j.at("answer").get<std::string>()));
            if (!v) throw DatasetError(where + ": unparseable numeric answer");
            p.gold = GoldAnswer::number(*v);
        }
        if (j.contains("meta")) {
            const json& mj = j["meta"];
            GsmicMeta m;
            m.base_id = mj.at("base_id").get<std::string>();
            m.is_base = mj.value("is_base", false);
            m.n_steps = mj.value("n_steps", "two_step") == "two_step" ? StepClass::two_step
                                                                      : StepClass::m_step;
            if (mj.contains("topic"))
                m.topic = mj["topic"] == "in_topic" ? TopicLevel::in_topic : TopicLevel::off_topic;
            if (mj.contains("role_overlap"))
                m.role_overlap = mj["role_overlap"] == "overlap" ? RoleOverlapLevel::overlap
                                                                 : RoleOverlapLevel::non_overlap;
            if (mj.contains("num_range"))
                m.num_range = mj["num_range"] == "in_range" ? NumRangeLevel::in_range
                                                            : NumRangeLevel::out_range;
            p.gsmic = m;
        }
    } catch (const json::exception& e) {
        throw DatasetError(where + ": malformed record: " + e.what());
    }
    detail::check_problem(p, where);
    return p;
}

}  // namespace detail

inline void save_canonical(const ProblemSet& set, const std::filesystem::path& path) {
    std::string out;
    json header{{"canonical", 1},
                {"source", to_string(set.source())},
                {"provenance", set.provenance().to_json()}};
    out += header.dump();
    out += '\n';
    for (const Problem& p : set.problems()) {
        out += detail::problem_to_json(p).dump();
        out += '\n';
    }
    write_file(path, out);
}

// ---------------------------------------------------------------------------
// adapters
// ---------------------------------------------------------------------------

namespace detail {


inline Provenance make_provenance(std::string digest, std::string adapter) {
    Provenance p;
    p.file_digest = std::move(digest);
    p.adapter = std::move(adapter);
    return p;
}

inline std::vector<std::pair<int, json>> parse_jsonl(const std::string& text,
                                                     const std::string& path) {
    std::vector<std::pair<int, json>> out;
    int line_no = 0;
    for (const std::string& line : split_lines(text)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            out.emplace_back(line_no, json::parse(line));
        } catch (const json::exception& e) {
            throw DatasetError(path + ":" + std::to_string(line_no) + ": invalid json: " + e.what());
        }
    }
    return out;
}

inline json parse_json_array(const std::string& text, const std::string& path) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DatasetError(path + ": invalid json: " + e.what());
    }
    if (!j.is_array()) throw DatasetError(path + ": expected a top-level array");
    return j;
}

/// Strips "A)" / "A )" / "A:" style prefixes from an option string.
inline std::string strip_option_prefix(const std::string& opt, char letter) {
    std::string t = trim(opt);
    if (t.size() >= 2 && std::toupper(static_cast<unsigned char>(t[0])) == letter &&
        (t[1] == ')' || t[1] == ':' || t[1] == '.')) {
        return trim(t.substr(2));
    }
    return t;
}

inline Decimal decimal_from_json_number(const json& v, const std::string& where) {
    std::optional<Decimal> d;
    if (v.is_number_integer()) {
        d = Decimal::from_int(v.get<std::int64_t>());
    } else if (v.is_number_float()) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.10g", v.get<double>());
        d = Decimal::parse(buf);
    } else if (v.is_string()) {
        d = Decimal::parse(trim(v.get<std::string>()));
    }
    if (!d) throw DatasetError(where + ": unparseable numeric answer");
    return *d;
}

inline ProblemSet load_gsm8k(const std::string& text, const std::string& path, std::string digest) {
    std::vector<Problem> problems;
    for (auto& [line_no, rec] : parse_jsonl(text, path)) {
        const std::string where = path + ":" + std::to_string(line_no);
        Problem p;
        p.source = DatasetTag::gsm8k;
        p.id = "gsm8k_" + std::to_string(problems.size() + 1);
        try {
            p.question = rec.at("question").get<std::string>();
            std::string ans = rec.at("answer").get<std::string>();
            size_t marker = ans.rfind("####");
            if (marker == std::string::npos)
                throw DatasetError(where + ": no final-answer marker in answer field");
            std::string value = trim(ans.substr(marker + 4));
            value = replace_all(value, ",", "");
            auto d = Decimal::parse(value);
            if (!d) throw DatasetError(where + ": unparseable final answer '" + value + "'");
            p.gold = GoldAnswer::number(*d);
        } catch (const json::exception& e) {
            throw DatasetError(where + ": malformed record: " + e.what());
        }
        check_problem(p, where);
        problems.push_back(std::move(p));
    }
    if (problems.empty()) throw DatasetError(path + ": no records");
    return ProblemSet(std::move(problems), DatasetTag::gsm8k, make_provenance(std::move(digest), "gsm8k"));
}

inline ProblemSet load_aqua(const std::string& text, const std::string& path, std::string digest) {
    std::vector<Problem> problems;
    for (auto& [line_no, rec] : parse_jsonl(text, path)) {
        const std::string where = path + ":" + std::to_string(line_no);
        Problem p;
        p.source = DatasetTag::aqua;
        p.id = "aqua_" + std::to_string(problems.size() + 1);
        try {
            p.question = rec.at("question").get<std::string>();
            auto options = rec.at("options").get<std::vector<std::string>>();
            std::string correct = trim(rec.at("correct").get<std::string>());
            if (correct.size() != 1)
                throw DatasetError(where + ": correct answer must be a single letter");
            char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(correct[0])));
            for (size_t i = 0; i < options.size(); ++i)
                p.choices.push_back(strip_option_prefix(options[i], static_cast<char>('A' + i)));
            p.gold = GoldAnswer::choice(letter);
        } catch (const json::exception& e) {
            throw DatasetError(where + ": malformed record: " + e.what());
        }
        check_problem(p, where);
        problems.push_back(std::move(p));
    }
    if (problems.empty()) throw DatasetError(path + ": no records");
    return ProblemSet(std::move(problems), DatasetTag::aqua, make_provenance(std::move(digest), "aqua"));
}

inline ProblemSet load_svamp(const std::string& text, const std::string& path, std::string digest) {
    std::vector<Problem> problems;
    json arr = parse_json_array(text, path);
    int idx = 0;
    for (const json& rec : arr) {
        ++idx;
        const std::string where = path + " item " + std::to_string(idx);
        Problem p;
        p.source = DatasetTag::svamp;
        try {
            p.id = rec.contains("ID") ? rec["ID"].get<std::string>() : "svamp_" + std::to_string(idx);
            std::string body = trim(rec.at("Body").get<std::string>());
            std::string question = trim(rec.at("Question").get<std::string>());
            p.question = body.empty() ? question : body + " " + question;
            p.gold = GoldAnswer::number(decimal_from_json_number(rec.at("Answer"), where));
        } catch (const json::exception& e) {
            throw DatasetError(where + ": malformed record: " + e.what());
        }
        check_problem(p, where);
        problems.push_back(std::move(p));
    }
    if (problems.empty()) throw DatasetError(path + ": no records");
    return ProblemSet(std::move(problems), DatasetTag::svamp, make_provenance(std::move(digest), "svamp"));
}

inline ProblemSet load_singleeq(const std::string& text, const std::string& path, std::string digest) {
    std::vector<Problem> problems;
    json arr = parse_json_array(text, path);
    int idx = 0;
    for (const json& rec : arr) {
        ++idx;
        const std::string where = path + " item " + std::to_string(idx);
        Problem p;
        p.source = DatasetTag::singleeq;
        try {
            p.id = rec.contains("iIndex") ? "singleeq_" + std::to_string(rec["iIndex"].get<std::int64_t>())
                                          : "singleeq_" + std::to_string(idx);
            p.question = rec.at("sQuestion").get<std::string>();
            const json& sols = rec.at("lSolutions");
            if (!sols.is_array() || sols.empty())
                throw DatasetError(where + ": lSolutions must be a non-empty array");
            p.gold = GoldAnswer::number(decimal_from_json_number(sols[0], where));
        } catch (const json::exception& e) {
            throw DatasetError(where + ": malformed record: " + e.what());
        }
        check_problem(p, where);
        problems.push_back(std::move(p));
    }
    if (problems.empty()) throw DatasetError(path + ": no records");
    return ProblemSet(std::move(problems), DatasetTag::singleeq, make_provenance(std::move(digest), "singleeq"));
}

/// Irrelevant-context records: each carries the perturbed question plus the
/// unperturbed original. Bases are deduplicated by original question text and
/// emitted as their own problems so the variant -> base link always resolves.
inline ProblemSet load_gsmic(const std::string& text, const std::string& path, std::string digest) {
    std::vector<Problem> problems;
    std::map<std::string, std::string> base_ids;     // original question -> base id
    std::map<std::string, int> variant_counts;       // base id -> count
    for (auto& [line_no, rec] : parse_jsonl(text, path)) {
        const std::string where = path + ":" + std::to_string(line_no);
        try {
            std::string original = rec.at("original_question").get<std::string>();
            std::string perturbed = rec.at("new_question").get<std::string>();
            std::string ans = trim(rec.at("answer").get<std::string>());
            ans = replace_all(ans, ",", "");
            auto gold = Decimal::parse(ans);
            if (!gold) throw DatasetError(where + ": unparseable answer '" + ans + "'");
            const int n_steps = rec.at("n_steps").get<int>();
            const StepClass steps = n_steps == 2 ? StepClass::two_step : StepClass::m_step;

            auto it = base_ids.find(original);
            if (it == base_ids.end()) {
                std::string base_id = "gsmic_base_" + std::to_string(base_ids.size() + 1);
                it = base_ids.emplace(original, base_id).first;
                Problem base;
                base.source = DatasetTag::gsmic;
                base.id = base_id;
                base.question = original;
                base.gold = GoldAnswer::number(*gold);
                GsmicMeta meta;
                meta.base_id = base_id;
                meta.is_base = true;
                meta.n_steps = steps;
                base.gsmic = meta;
                check_problem(base, where);
                problems.push_back(std::move(base));
            }
            const std::string& base_id = it->second;
            Problem var;
            var.source = DatasetTag::gsmic;
            var.id = base_id + "_v" + std::to_string(++variant_counts[base_id]);
            var.question = perturbed;
            var.gold = GoldAnswer::number(*gold);
            GsmicMeta meta;
            meta.base_id = base_id;
            meta.is_base = false;
            meta.n_steps = steps;
            std::string topic = rec.at("sentence_label").get<std::string>();
            meta.topic = topic == "in_topic" ? TopicLevel::in_topic : TopicLevel::off_topic;
            std::string role = rec.at("role_label").get<std::string>();
            meta.role_overlap = (role == "overlapped" || role == "overlap")
                                    ? RoleOverlapLevel::overlap
                                    : RoleOverlapLevel::non_overlap;
            std::string range = rec.at("number_label").get<std::string>();
            meta.num_range = range == "in_range" ? NumRangeLevel::in_range : NumRangeLevel::out_range;
            var.gsmic = meta;
            check_problem(var, where);
            problems.push_back(std::move(var));
        } catch (const json::exception& e) {
            throw DatasetError(where + ": malformed record: " + e.what());
        }
    }
    if (problems.empty()) throw DatasetError(path + ": no records");
    return ProblemSet(std::move(problems), DatasetTag::gsmic, make_provenance(std::move(digest), "gsmic"));
}

inline ProblemSet load_canonical(const std::string& text, const std::string& path, std::string digest) {
    auto lines = parse_jsonl(text, path);
    if (lines.empty()) throw DatasetError(path + ": no records");
    DatasetTag source = DatasetTag::canonical;
    Provenance prov = make_provenance(std::move(digest), "canonical");
    size_t start = 0;
    if (lines[0].second.contains("canonical")) {
        const json& header = lines[0].second;
        if (auto tag = dataset_tag_from(header.value("source", "canonical"))) source = *tag;
        if (header.contains("provenance")) prov = Provenance::from_json(header["provenance"]);
        start = 1;
    }
    std::vector<Problem> problems;
    for (size_t i = start; i < lines.size(); ++i) {
        const std::string where = path + ":" + std::to_string(lines[i].first);
        problems.push_back(problem_from_json(lines[i].second, source, where));
    }
    if (problems.empty()) throw DatasetError(path + ": no records");
    return ProblemSet(std::move(problems), source, std::move(prov));
}

}  // namespace detail

/// Loads a dataset file through the named adapter into the canonical schema.
inline ProblemSet load_dataset(const std::filesystem::path& path, DatasetTag format) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::exception& e) {
        throw DatasetError(e.what());
    }
    if (trim(text).empty()) throw DatasetError(path.string() + ": no records");
    std::string digest = Sha256::hash_hex(text);
    switch (format) {
        case DatasetTag::gsm8k: return detail::load_gsm8k(text, path.string(), std::move(digest));
        case DatasetTag::aqua: return detail::load_aqua(text, path.string(), std::move(digest));
        case DatasetTag::svamp: return detail::load_svamp(text, path.string(), std::move(digest));
        case DatasetTag::singleeq: return detail::load_singleeq(text, path.string(), std::move(digest));
        case DatasetTag::gsmic: return detail::load_gsmic(text, path.string(), std::move(digest));
        case DatasetTag::canonical: return detail::load_canonical(text, path.string(), std::move(digest));
    }
    throw DatasetError("unknown dataset format");
}

/// Uniform subset of n problems, deterministic in (pool, n, seed), pool
/// order preserved. Used for the instruction-selection subset.
inline ProblemSet sample_subset(const ProblemSet& pool, int n, std::uint64_t seed) {
    if (n <= 0) throw DatasetError("subset size must be positive");
    if (static_cast<size_t>(n) > pool.size())
        throw DatasetError("subset size exceeds pool size");
    std::vector<size_t> idx(pool.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    SplitMix64 rng(seed);
    for (int i = 0; i < n; ++i) {
        size_t j = static_cast<size_t>(i) + rng.bounded(idx.size() - static_cast<size_t>(i));
        std::swap(idx[static_cast<size_t>(i)], idx[j]);
    }
    idx.resize(static_cast<size_t>(n));
    std::sort(idx.begin(), idx.end());
    Provenance prov = pool.provenance();
    prov.seed = seed;
    prov.sampled_ids.clear();
    std::vector<Problem> out;
    out.reserve(idx.size());
    for (size_t i : idx) {
        out.push_back(pool.problems()[i]);
        prov.sampled_ids.push_back(out.back().id);
    }
    return ProblemSet(std::move(out), pool.source(), std::move(prov));
}

/// Draws n variants per step stratum (two_step / m_step) plus every base
/// problem a sampled variant refers to. Pure function of (pool, n, seed):
/// the same inputs give the same ids in the same order.
inline ProblemSet sample_gsmic(const ProblemSet& pool, int n_per_stratum, std::uint64_t seed) {
    if (n_per_stratum <= 0) throw DatasetError("n_per_stratum must be positive");
    std::vector<size_t> two_step, m_step;
    const auto& problems = pool.problems();
    for (size_t i = 0; i < problems.size(); ++i) {
        const Problem& p = problems[i];
        if (!p.gsmic || p.gsmic->is_base) continue;
        (p.gsmic->n_steps == StepClass::two_step ? two_step : m_step).push_back(i);
    }
    auto draw = [&](std::vector<size_t>& stratum, std::uint64_t stream) {
        if (static_cast<int>(stratum.size()) < n_per_stratum)
            throw DatasetError("stratum too small: " + std::to_string(stratum.size()) +
                               " variants, need " + std::to_string(n_per_stratum));
        SplitMix64 rng(seed ^ stream);
        // partial Fisher-Yates over a copy of the index list
        std::vector<size_t> idx = stratum;
        for (int i = 0; i < n_per_stratum; ++i) {
            size_t j = static_cast<size_t>(i) + rng.bounded(idx.size() - static_cast<size_t>(i));
            std::swap(idx[static_cast<size_t>(i)], idx[j]);
        }
        idx.resize(static_cast<size_t>(n_per_stratum));
        return idx;
    };
    std::vector<size_t> picked = draw(two_step, 0x2u);
    std::vector<size_t> picked_m = draw(m_step, 0x3u);
    picked.insert(picked.end(), picked_m.begin(), picked_m.end());

    std::set<size_t> keep(picked.begin(), picked.end());
    std::set<std::string> base_ids;
    for (size_t i : picked) base_ids.insert(problems[i].gsmic->base_id);
    std::map<std::string, int> base_counts;
    for (size_t i = 0; i < problems.size(); ++i) {
        const Problem& p = problems[i];
        if (p.gsmic && p.gsmic->is_base && base_ids.count(p.id)) {
            keep.insert(i);
            ++base_counts[to_string(p.gsmic->n_steps)];
        }
    }

    Provenance prov = pool.provenance();
    prov.seed = seed;
    prov.n_per_stratum = n_per_stratum;
    prov.base_counts = std::move(base_counts);
    prov.sampled_ids.clear();
    std::vector<Problem> out;
    out.reserve(keep.size());
    for (size_t i = 0; i < problems.size(); ++i) {
        if (keep.count(i)) {
            out.push_back(problems[i]);
            if (!problems[i].gsmic->is_base) prov.sampled_ids.push_back(problems[i].id);
        }
    }
    return ProblemSet(std::move(out), pool.source(), std::move(prov));
}

}  // namespace pepeval
