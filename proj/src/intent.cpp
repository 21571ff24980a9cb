#include "affmem/intent.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "affmem/error.hpp"
#include "affmem/gateway.hpp"

namespace affmem {

const IntentRuleSet& default_intent_rules() {
    static const IntentRuleSet rules = {
        {Intent::listening_first, {"just listen", "don't want advice", "no advice"}, 0},
        {Intent::venting, {"i just need to vent", "let me vent"}, 1},
        {Intent::grief_processing, {"i miss", "passed away", "i can't forgive myself"}, 2},
        {Intent::de_escalation, {"panic", "can't breathe", "freaking out"}, 3},
        {Intent::validation_seeking, {"am i overreacting", "is it okay that"}, 4},
        {Intent::practical_planning, {"plan", "how do i", "what should i do"}, 5},
    };
    return rules;
}

Violations validate(const IntentRuleSet& rules) {
    Violations out;
    std::set<int> seen;
    for (const auto& r : rules) {
        if (!seen.insert(r.priority).second) {
            out.push_back("duplicate priority " + std::to_string(r.priority));
        }
        for (const auto& p : r.patterns) {
            if (p.empty()) out.emplace_back("empty pattern");
            if (std::any_of(p.begin(), p.end(), [](unsigned char c) { return std::isupper(c); })) {
                out.push_back("pattern not lowercase: " + p);
            }
        }
    }
    return out;
}

void to_json(json& j, const IntentRule& r) {
    j = json{{"intent", to_string(r.intent)}, {"patterns", r.patterns}, {"priority", r.priority}};
}

void from_json(const json& j, IntentRule& r) {
    r.intent = parse_intent(j.at("intent").get<std::string>());
    r.patterns = j.at("patterns").get<std::vector<std::string>>();
    r.priority = j.at("priority").get<int>();
}

IntentRuleSet load_intent_rules(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::invalid_argument, "cannot open rule file " + path);
    IntentRuleSet rules;
    try {
        rules = json::parse(in).get<IntentRuleSet>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::invalid_argument, path + ": " + e.what());
    }
    if (auto v = validate(rules); !v.empty()) throw Error(ErrorCode::invalid_argument, "invalid rule set: " + v.front());
    return rules;
}

IntentLabel classify_rules(std::string_view text, std::span<const UserTurn> /*history*/, const IntentRuleSet& rules) {
    std::string lowered(text);
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

    std::vector<const IntentRule*> ordered;
    ordered.reserve(rules.size());
    for (const auto& r : rules) ordered.push_back(&r);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const IntentRule* a, const IntentRule* b) { return a->priority < b->priority; });

    for (const IntentRule* r : ordered) {
        for (const auto& p : r->patterns) {
            if (!p.empty() && lowered.find(p) != std::string::npos) {
                return {r->intent, kRuleMatchConfidence};
            }
        }
    }
    return {Intent::practical_planning, kRuleDefaultConfidence};
}

IntentLabel classify(ModelGateway& gateway, std::string_view text, std::span<const UserTurn> history,
                     const IntentRuleSet& fallback_rules) {
    try {
        return gateway.classify_intent(text, history);
    } catch (const Error&) {
        IntentLabel label = classify_rules(text, history, fallback_rules);
        label.confidence = std::min(label.confidence, kFallbackConfidenceCap);
        return label;
    }
}

}  // namespace affmem
