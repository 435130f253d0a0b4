#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pepeval/problems.hpp"
#include "pepeval/prompt_assets.hpp"
#include "pepeval/util.hpp"

namespace pepeval {

enum class MethodKind { cot, pep, l2m, pas, self_ask, pot, pot_pep, dec, elu, etd };

inline std::string to_string(MethodKind m) {
    switch (m) {
        case MethodKind::cot: return "cot";
        case MethodKind::pep: return "pep";
        case MethodKind::l2m: return "l2m";
        case MethodKind::pas: return "pas";
        case MethodKind::self_ask: return "self_ask";
        case MethodKind::pot: return "pot";
        case MethodKind::pot_pep: return "pot_pep";
        case MethodKind::dec: return "dec";
        case MethodKind::elu: return "elu";
        case MethodKind::etd: return "etd";
    }
    return "cot";
}

inline std::optional<MethodKind> method_from(std::string_view s) {
    if (s == "cot") return MethodKind::cot;
    if (s == "pep") return MethodKind::pep;
    if (s == "l2m") return MethodKind::l2m;
    if (s == "pas") return MethodKind::pas;
    if (s == "self_ask" || s == "self-ask") return MethodKind::self_ask;
    if (s == "pot") return MethodKind::pot;
    if (s == "pot_pep" || s == "pot-pep") return MethodKind::pot_pep;
    if (s == "dec") return MethodKind::dec;
    if (s == "elu") return MethodKind::elu;
    if (s == "etd") return MethodKind::etd;
    return std::nullopt;
}

enum class AnswerFormat { free, choice };

inline std::string to_string(AnswerFormat f) { return f == AnswerFormat::free ? "free" : "choice"; }

/// Which prompting method to run and how: shot count, irrelevant-context
/// instruction, answer format, and whether elaborations are woven into
/// another method's exemplars.
struct MethodSpec {
    MethodKind method = MethodKind::cot;
    int k_shots = 0;  // 0, 1 or 4
    bool irr_inst = false;
    AnswerFormat answer_format = AnswerFormat::free;
    bool pep_integrated = false;

    void validate() const {
        if (k_shots != 0 && k_shots != 1 && k_shots != 4)
            throw std::invalid_argument("k_shots must be 0, 1 or 4");
        if (pep_integrated && method != MethodKind::cot && method != MethodKind::l2m &&
            method != MethodKind::pas && method != MethodKind::self_ask)
            throw std::invalid_argument("pep_integrated requires cot, l2m, pas or self_ask");
        if ((method == MethodKind::pot || method == MethodKind::pot_pep) && k_shots != 0)
            throw std::invalid_argument("pot methods are zero-shot");
    }

    json to_json() const {
        return json{{"method", to_string(method)},
                    {"k_shots", k_shots},
                    {"irr_inst", irr_inst},
                    {"answer_format", to_string(answer_format)},
                    {"pep_integrated", pep_integrated}};
    }
    static MethodSpec from_json(const json& j) {
        MethodSpec s;
        if (auto m = method_from(j.value("method", "cot"))) s.method = *m;
        s.k_shots = j.value("k_shots", 0);
        s.irr_inst = j.value("irr_inst", false);
        s.answer_format = j.value("answer_format", "free") == "choice" ? AnswerFormat::choice
                                                                       : AnswerFormat::free;
        s.pep_integrated = j.value("pep_integrated", false);
        return s;
    }
};

/// Instruction strings; defaults are the reference wording, overridable per
/// run. variant_insts holds the ablation instructions keyed "dec"/"elu"/"etd".
struct InstructionSet {
    std::string cot_inst;
    std::string pep_inst;
    std::string irr_inst;
    std::string format_inst_free;
    std::string format_inst_choice;
    std::map<std::string, std::string> variant_insts;

    static InstructionSet defaults() {
        InstructionSet s;
        s.cot_inst = assets::kCotInst;
        s.pep_inst = assets::kPepInst;
        s.irr_inst = assets::kIrrInst;
        s.format_inst_free = assets::kFormatInstFree;
        s.format_inst_choice = assets::kFormatInstChoice;
        s.variant_insts = {{"dec", assets::kDecInst},
                           {"elu", assets::kEluInst},
                           {"etd", assets::kEtdInst}};
        return s;
    }

    void validate() const {
        if (cot_inst.empty() || pep_inst.empty() || irr_inst.empty() ||
            format_inst_free.empty() || format_inst_choice.empty())
            throw std::invalid_argument("instruction strings must be non-empty");
        for (const auto& [tag, text] : variant_insts)
            if (text.empty()) throw std::invalid_argument("empty variant instruction: " + tag);
    }
};

/// A worked demonstration. `elaboration` is set only on PEP-integrated
/// exemplars; the native elaboration-method exemplars carry the elaboration
/// inside their body.
struct Exemplar {
    std::string question;
    std::string elaboration;
    std::string body;
    MethodKind method = MethodKind::cot;

    std::string render() const {
        std::string out = "Question: " + question + "\n";
        if (!elaboration.empty()) out += "Problem Elaboration:\n" + elaboration + "\n\n";
        out += body;
        return out;
    }
};

/// Appends an elaboration block to a worked exemplar so the demonstration
/// elaborates before any other generation.
inline Exemplar integrate_pep_into_exemplar(const Exemplar& base, const std::string& elaboration) {
    if (elaboration.empty()) throw std::invalid_argument("elaboration must be non-empty");
    if (base.method != MethodKind::cot && base.method != MethodKind::l2m &&
        base.method != MethodKind::pas && base.method != MethodKind::self_ask)
        throw std::invalid_argument("cannot integrate elaboration into method " + to_string(base.method));
    Exemplar out = base;
    out.elaboration = elaboration;
    return out;
}

enum class RoleLayout { single_user_message, completion };

struct PromptText {
    std::string text;
    RoleLayout role_layout = RoleLayout::single_user_message;
    MethodKind method = MethodKind::cot;
    std::string problem_id;
};

/// Resolves template texts: returns the file `<dir>/<name>.txt` when an
/// asset directory is configured and the file exists, the embedded default
/// otherwise.
class TemplateStore {
public:
    TemplateStore() = default;
    explicit TemplateStore(std::filesystem::path asset_dir) : dir_(std::move(asset_dir)) {}

    std::string get(const std::string& name) const {
        if (!dir_.empty()) {
            auto path = dir_ / (name + ".txt");
            if (std::filesystem::exists(path)) return read_file(path);
        }
        for (const auto& t : assets::kNamedTemplates)
            if (name == t.name) return t.text;
        if (name == assets::kPotTemplateName) return assets::kPotTemplate;
        if (name == assets::kExtractTemplateName) return assets::kExtractTemplate;
        throw std::invalid_argument("unknown template: " + name);
    }

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
};

namespace detail {

inline const std::array<assets::ExemplarText, 4>& exemplar_texts(MethodKind m) {
    switch (m) {
        case MethodKind::cot: return assets::kCotExemplars;
        case MethodKind::pep: return assets::kPepExemplars;
        case MethodKind::l2m: return assets::kL2mExemplars;
        case MethodKind::pas: return assets::kPasExemplars;
        case MethodKind::self_ask: return assets::kSelfAskExemplars;
        default: throw std::invalid_argument("no exemplars for method " + to_string(m));
    }
}

inline std::string few_shot_tail_name(MethodKind m) {
    switch (m) {
        case MethodKind::cot: return "few_shot_tail_cot";
        case MethodKind::pep: return "few_shot_tail_pep";
        case MethodKind::l2m: return "few_shot_tail_l2m";
        case MethodKind::pas: return "few_shot_tail_pas";
        case MethodKind::self_ask: return "few_shot_tail_self_ask";
        default: throw std::invalid_argument("no few-shot scaffold for method " + to_string(m));
    }
}

}  // namespace detail

/// Assembles every prompt form. Rendering is pure: the same inputs produce
/// the same bytes.
class PromptEngine {
public:
    PromptEngine() : insts_(InstructionSet::defaults()) {}
    PromptEngine(InstructionSet insts, TemplateStore store)
        : insts_(std::move(insts)), store_(std::move(store)) {
        insts_.validate();
    }

    const InstructionSet& instructions() const { return insts_; }
    const TemplateStore& store() const { return store_; }

    /// Zero-shot scaffold: instruction, optional irrelevant-context line,
    /// format instruction, then the question.
    PromptText build_zero_shot_prompt(const Problem& problem, const MethodSpec& spec,
                                      std::optional<std::string> instruction_override = std::nullopt,
                                      bool include_format_inst = true) const {
        spec.validate();
        if (spec.k_shots != 0) throw std::invalid_argument("zero-shot prompt requires k_shots = 0");
        std::string scaffold;
        std::string inst;
        switch (spec.method) {
            case MethodKind::cot:
                scaffold = store_.get("zero_shot_cot");
                inst = insts_.cot_inst;
                break;
            case MethodKind::pep:
                scaffold = store_.get("zero_shot_pep");
                inst = insts_.pep_inst;
                break;
            case MethodKind::dec:
            case MethodKind::elu:
            case MethodKind::etd: {
                scaffold = store_.get("zero_shot_pep");
                auto it = insts_.variant_insts.find(to_string(spec.method));
                if (it == insts_.variant_insts.end())
                    throw std::invalid_argument("no instruction for variant " + to_string(spec.method));
                inst = it->second;
                break;
            }
            default:
                throw std::invalid_argument("method " + to_string(spec.method) +
                                            " has no zero-shot text prompt");
        }
        if (instruction_override) inst = *instruction_override;
        std::string text = replace_all(scaffold, "{CoT_Inst}", inst);
        text = replace_all(text, "{PEP_Inst}", inst);
        text = replace_all(text, "{IRR_Inst}", spec.irr_inst ? insts_.irr_inst + " " : "");
        const std::string& fmt = spec.answer_format == AnswerFormat::free ? insts_.format_inst_free
                                                                          : insts_.format_inst_choice;
        text = replace_all(text, "{FORMAT_Inst}", include_format_inst ? fmt : "");
        text = replace_all(text, "{qst}", problem.question);
        return PromptText{std::move(text), RoleLayout::single_user_message, spec.method, problem.id};
    }

    /// Few-shot scaffold: header line (plus irrelevant-context instruction
    /// when set), the first k exemplars, then the evaluation question with
    /// the method's continuation cue.
    PromptText build_few_shot_prompt(const Problem& problem, const MethodSpec& spec,
                                     std::span<const Exemplar> exemplars) const {
        spec.validate();
        if (spec.k_shots != 1 && spec.k_shots != 4)
            throw std::invalid_argument("few-shot prompt requires k_shots of 1 or 4");
        if (static_cast<int>(exemplars.size()) < spec.k_shots)
            throw std::invalid_argument("need at least " + std::to_string(spec.k_shots) +
                                        " exemplars, have " + std::to_string(exemplars.size()));
        std::string joined;
        for (int i = 0; i < spec.k_shots; ++i) {
            const Exemplar& e = exemplars[static_cast<size_t>(i)];
            if (e.method != spec.method)
                throw std::invalid_argument("exemplar " + std::to_string(i) + " is for method " +
                                            to_string(e.method) + ", prompt wants " +
                                            to_string(spec.method));
            if (spec.pep_integrated && e.elaboration.empty())
                throw std::invalid_argument("integrated prompt requires elaborated exemplars");
            if (i > 0) joined += "\n\n";
            joined += e.render();
        }
        std::string header = store_.get("few_shot_header");
        if (spec.irr_inst) header += " " + insts_.irr_inst;
        const std::string tail_name = spec.pep_integrated
                                          ? "few_shot_tail_pep"
                                          : detail::few_shot_tail_name(spec.method);
        std::string tail = store_.get(tail_name);
        tail = replace_all(tail, "{exemplars}", joined);
        tail = replace_all(tail, "{qst}", problem.question);
        std::string text = header + "\n" + tail;
        return PromptText{std::move(text), RoleLayout::single_user_message, spec.method, problem.id};
    }

    /// Code-generation prompt; {ela} takes the elaboration text or stays empty.
    PromptText build_pot_prompt(const Problem& problem,
                                const std::optional<std::string>& elaboration) const {
        std::string text = store_.get(assets::kPotTemplateName);
        text = replace_all(text, "{qst}", problem.question);
        text = replace_all(text, "{ela}", elaboration.value_or(""));
        return PromptText{std::move(text), RoleLayout::single_user_message,
                          elaboration ? MethodKind::pot_pep : MethodKind::pot, problem.id};
    }

    /// Elaboration-only request used as the first pass of the two-pass
    /// code-generation pipeline.
    PromptText build_elaboration_prompt(const Problem& problem) const {
        std::string text = store_.get("elaboration_only");
        text = replace_all(text, "{PEP_Inst}", insts_.pep_inst);
        text = replace_all(text, "{qst}", problem.question);
        return PromptText{std::move(text), RoleLayout::single_user_message, MethodKind::pep,
                          problem.id};
    }

    /// One-shot answer-extraction prompt with {qst}/{sol} filled in.
    PromptText build_extraction_prompt(const std::string& question, const std::string& solution,
                                       const std::string& problem_id = "") const {
        if (solution.empty()) throw std::invalid_argument("solution must be non-empty");
        std::string text = store_.get(assets::kExtractTemplateName);
        text = replace_all(text, "{qst}", question);
        text = replace_all(text, "{sol}", solution);
        return PromptText{std::move(text), RoleLayout::single_user_message, MethodKind::cot,
                          problem_id};
    }

    /// The shipped exemplar set for a method, optionally with elaborations
    /// woven in. Asset-directory overrides: exemplars_<method>.json.
    std::vector<Exemplar> default_exemplars(MethodKind method, bool pep_integrated = false) const {
        std::vector<Exemplar> out = load_base_exemplars(method);
        if (!pep_integrated) return out;
        for (size_t i = 0; i < out.size(); ++i) {
            if (method == MethodKind::l2m && i == 0) {
                // shipped in its original printed form: compact elaboration plus a
                // body phrased around the rephrased problem
                out[i].body = assets::kL2mIntegratedBody;
                out[i] = integrate_pep_into_exemplar(out[i], assets::kL2mIntegratedElaboration);
            } else {
                out[i] = integrate_pep_into_exemplar(out[i], assets::kPepElaborations[i]);
            }
        }
        return out;
    }

private:
    std::vector<Exemplar> load_base_exemplars(MethodKind method) const {
        if (!store_.dir().empty()) {
            auto path = store_.dir() / ("exemplars_" + to_string(method) + ".json");
            if (std::filesystem::exists(path)) {
                json j = json::parse(read_file(path));
                std::vector<Exemplar> out;
                for (const json& rec : j.at("exemplars")) {
                    Exemplar e;
                    e.question = rec.at("question").get<std::string>();
                    e.body = rec.at("body").get<std::string>();
                    e.elaboration = rec.value("elaboration", "");
                    e.method = method;
                    out.push_back(std::move(e));
                }
                return out;
            }
        }
        std::vector<Exemplar> out;
        for (const auto& t : detail::exemplar_texts(method))
            out.push_back(Exemplar{t.question, "", t.body, method});
        return out;
    }

    InstructionSet insts_;
    TemplateStore store_;
};

/// Version digest over every embedded template and exemplar, recorded in run
/// headers so result files are traceable to the exact prompt bytes.
inline std::string template_asset_digest() {
    Sha256 h;
    for (const auto& t : assets::kNamedTemplates) {
        h.update(t.name);
        h.update("\x1f");
        h.update(t.text);
        h.update("\x1e");
    }
    h.update(assets::kPotTemplate);
    h.update(assets::kExtractTemplate);
    auto feed = [&h](const std::array<assets::ExemplarText, 4>& arr) {
        for (const auto& e : arr) {
            h.update(e.question);
            h.update("\x1f");
            h.update(e.body);
            h.update("\x1e");
        }
    };
    feed(assets::kCotExemplars);
    feed(assets::kPepExemplars);
    feed(assets::kL2mExemplars);
    feed(assets::kSelfAskExemplars);
    feed(assets::kPasExemplars);
    for (const char* e : assets::kPepElaborations) h.update(e);
    h.update(assets::kL2mIntegratedElaboration);
    h.update(assets::kL2mIntegratedBody);
    return h.hex_digest();
}

}  // namespace pepeval
