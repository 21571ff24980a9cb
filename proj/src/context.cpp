#include "affmem/context.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "affmem/error.hpp"

namespace affmem {

Violations validate(const ContextBudget& b) {
    Violations out;
    if (b.max_chars < 1) out.emplace_back("max_chars must be positive");
    if (b.max_memories < 1) out.emplace_back("max_memories must be positive");
    if (b.max_graph_facts < 1) out.emplace_back("max_graph_facts must be positive");
    return out;
}

void to_json(json& j, const ContextBudget& b) {
    j = json{{"max_chars", b.max_chars}, {"max_memories", b.max_memories}, {"max_graph_facts", b.max_graph_facts}};
}

void from_json(const json& j, ContextBudget& b) {
    b = ContextBudget{};
    b.max_chars = j.value("max_chars", b.max_chars);
    b.max_memories = j.value("max_memories", b.max_memories);
    b.max_graph_facts = j.value("max_graph_facts", b.max_graph_facts);
}

// --- policy -------------------------------------------------------------------------------

const PolicyTable& default_policy_table() {
    static const PolicyTable table = [] {
        PolicyTable t;
        using P = Phase;
        t.base[Intent::listening_first] = {{P::validation, P::reflection}, Depth::reflective, Tone::match, false, 0, 1200, false};
        t.base[Intent::validation_seeking] = {{P::validation, P::question}, Depth::reflective, Tone::match, false, 0, 1200, false};
        t.base[Intent::venting] = {{P::reflection}, Depth::reflective, Tone::match, false, 0, 1200, false};
        t.base[Intent::grief_processing] = {{P::validation, P::reflection}, Depth::reflective, Tone::soften, false, 0, 1200, false};
        t.base[Intent::de_escalation] = {{P::grounding, P::validation}, Depth::reflective, Tone::match, false, 0, 400, false};
        t.base[Intent::practical_planning] = {{P::validation, P::plan}, Depth::action, Tone::match, true, 5, 1200, false};
        return t;
    }();
    return table;
}

Violations validate(const PolicyTable& t) {
    Violations out;
    for (auto intent : kAllIntents) {
        auto it = t.base.find(intent);
        if (it == t.base.end()) {
            out.push_back("missing policy for " + std::string(to_string(intent)));
            continue;
        }
        for (const auto& v : validate(it->second)) out.push_back(std::string(to_string(intent)) + ": " + v);
    }
    auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!unit(t.safety_distress_threshold)) out.emplace_back("safety_distress_threshold out of range");
    if (!unit(t.plan_cap_distress_threshold)) out.emplace_back("plan_cap_distress_threshold out of range");
    if (t.capped_plan_steps < 0) out.emplace_back("capped_plan_steps negative");
    if (t.override_max_density < 1) out.emplace_back("override_max_density not positive");
    return out;
}

void to_json(json& j, const PolicyTable& t) {
    json intents = json::object();
    for (const auto& [intent, p] : t.base) intents[std::string(to_string(intent))] = p;
    j = json{{"intents", std::move(intents)},
             {"overrides",
              {{"safety_distress_threshold", t.safety_distress_threshold},
               {"plan_cap_distress_threshold", t.plan_cap_distress_threshold},
               {"capped_plan_steps", t.capped_plan_steps},
               {"override_max_density", t.override_max_density}}}};
}

void from_json(const json& j, PolicyTable& t) {
    t = PolicyTable{};
    const json& intents = j.at("intents");
    for (auto it = intents.begin(); it != intents.end(); ++it) {
        t.base[parse_intent(it.key())] = it.value().get<ResponsePolicy>();
    }
    if (auto it = j.find("overrides"); it != j.end()) {
        t.safety_distress_threshold = it->value("safety_distress_threshold", t.safety_distress_threshold);
        t.plan_cap_distress_threshold = it->value("plan_cap_distress_threshold", t.plan_cap_distress_threshold);
        t.capped_plan_steps = it->value("capped_plan_steps", t.capped_plan_steps);
        t.override_max_density = it->value("override_max_density", t.override_max_density);
    }
}

PolicyTable load_policy_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::invalid_argument, "cannot open policy table " + path);
    PolicyTable t;
    try {
        t = json::parse(in).get<PolicyTable>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::invalid_argument, path + ": " + e.what());
    }
    if (auto v = validate(t); !v.empty()) throw Error(ErrorCode::invalid_argument, "invalid policy table: " + v.front());
    return t;
}

ResponsePolicy select_policy(const IntentLabel& intent, const UnifiedEmotionState& emotion, const PolicyTable& table) {
    auto it = table.base.find(intent.intent);
    if (it == table.base.end()) throw Error(ErrorCode::invalid_argument, "no policy for intent");
    ResponsePolicy p = it->second;

    if (!p.advice_allowed) {
        std::erase(p.sequencing, Phase::plan);
        p.max_plan_steps = 0;
    } else if (emotion.distress >= table.plan_cap_distress_threshold) {
        p.max_plan_steps = std::min(p.max_plan_steps, table.capped_plan_steps);
    }

    if (emotion.distress >= table.safety_distress_threshold) {
        p.safety_override = true;
        std::erase(p.sequencing, Phase::grounding);
        p.sequencing.insert(p.sequencing.begin(), Phase::grounding);
        if (p.has_phase(Phase::plan) && !p.has_phase(Phase::validation)) {
            auto plan = std::find(p.sequencing.begin(), p.sequencing.end(), Phase::plan);
            p.sequencing.insert(plan, Phase::validation);
        }
        p.tone_register = Tone::soften;
        p.max_density = std::min(p.max_density, table.override_max_density);
    }
    return p;
}

// --- context assembly ------------------------------------------------------------------------------

namespace {

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", x);
    return buf;
}

std::string one_line(const std::string& s) {
    std::string out = s;
    std::replace(out.begin(), out.end(), '\n', ' ');
    std::replace(out.begin(), out.end(), '\r', ' ');
    return out;
}

std::size_t utf8_floor(const std::string& s, std::size_t n) {
    if (n >= s.size()) return s.size();
    while (n > 0 && (static_cast<unsigned char>(s[n]) & 0xC0) == 0x80) --n;
    return n;
}

}  // namespace

std::string render_context(const DynamicContextObject& dco) {
    std::string out;
    out += "EMOTION\n";
    out += "intensity=" + fmt(dco.emotion.intensity) + " trajectory=" + std::string(to_string(dco.emotion.trajectory)) +
           " confidence=" + fmt(dco.emotion.confidence) + " distress=" + fmt(dco.emotion.distress) + "\n";
    for (std::size_t i = 0; i < kEmotionCategoryCount; ++i) {
        if (i) out += ' ';
        out += std::string(to_string(kAllEmotionCategories[i])) + "=" + fmt(dco.emotion.vector.components[i]);
    }
    out += "\n";

    out += "INTENT\n";
    out += std::string(to_string(dco.intent.intent)) + " confidence=" + fmt(dco.intent.confidence) + "\n";

    out += "MEMORIES\n";
    for (std::size_t i = 0; i < dco.memories.size(); ++i) {
        const auto& m = dco.memories[i];
        out += std::to_string(i + 1) + ". (R=" + fmt(m.score) + " sem=" + fmt(m.sim_sem) + " emo=" + fmt(m.sim_emo) + ") [" +
               m.memory_id + "] " + one_line(m.content) + "\n";
    }

    out += "RELATIONS\n";
    for (const auto& f : dco.graph_facts) out += "- " + one_line(f) + "\n";

    out += "POLICY\n";
    out += "sequencing=";
    for (std::size_t i = 0; i < dco.policy.sequencing.size(); ++i) {
        if (i) out += ',';
        out += to_string(dco.policy.sequencing[i]);
    }
    out += "\n";
    out += "depth=" + std::string(to_string(dco.policy.depth)) + "\n";
    out += "tone=" + std::string(to_string(dco.policy.tone_register)) + "\n";
    out += std::string("advice_allowed=") + (dco.policy.advice_allowed ? "true" : "false") + "\n";
    out += "max_plan_steps=" + std::to_string(dco.policy.max_plan_steps) + "\n";
    out += "max_density=" + std::to_string(dco.policy.max_density) + "\n";
    out += std::string("safety_override=") + (dco.policy.safety_override ? "true" : "false") + "\n";

    out += "TURN\n";
    out += one_line(dco.turn.text) + "\n";
    return out;
}

DynamicContextObject build_context(const std::string& user_id, const UserTurn& turn, const UnifiedEmotionState& emotion,
                                   const IntentLabel& intent, std::vector<ContextMemory> memories,
                                   std::vector<std::string> graph_facts, const ResponsePolicy& policy,
                                   const ContextBudget& budget) {
    if (auto v = validate(budget); !v.empty()) throw Error(ErrorCode::invalid_argument, v.front());
    for (std::size_t i = 1; i < memories.size(); ++i) {
        if (memories[i].score > memories[i - 1].score) throw Error(ErrorCode::invalid_argument, "memories are not ranked");
    }

    DynamicContextObject dco;
    dco.user_id = user_id;
    dco.turn = turn;
    dco.emotion = emotion;
    dco.intent = intent;
    dco.policy = policy;
    if (auto v = validate(dco); !v.empty()) throw Error(ErrorCode::invalid_argument, "context: " + v.front());

    const auto max_chars = static_cast<std::size_t>(budget.max_chars);
    const std::size_t mandatory = render_context(dco).size();
    if (mandatory > max_chars) {
        throw Error(ErrorCode::budget_infeasible, "mandatory fields need " + std::to_string(mandatory) + " chars, budget is " +
                                                      std::to_string(max_chars));
    }

    if (graph_facts.size() > static_cast<std::size_t>(budget.max_graph_facts)) graph_facts.resize(budget.max_graph_facts);
    if (memories.size() > static_cast<std::size_t>(budget.max_memories)) memories.resize(budget.max_memories);
    dco.memories = std::move(memories);
    dco.graph_facts = std::move(graph_facts);

    auto size = [&] { return render_context(dco).size(); };
    while (size() > max_chars && !dco.graph_facts.empty()) dco.graph_facts.pop_back();
    while (size() > max_chars && dco.memories.size() > 1) dco.memories.pop_back();
    if (size() > max_chars && !dco.memories.empty()) {
        std::string& content = dco.memories.front().content;
        const std::size_t excess = size() - max_chars;
        if (excess < content.size()) {
            content.resize(utf8_floor(content, content.size() - excess));
        } else {
            dco.memories.clear();
        }
    }
    return dco;
}

}  // namespace affmem
