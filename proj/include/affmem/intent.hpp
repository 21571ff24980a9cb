#pragma once
// Interaction-mode inference. classify_rules is the deterministic reference
// classifier; classify() asks the model gateway and falls back to the rules.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "affmem/domain.hpp"

namespace affmem {

class ModelGateway;

struct IntentRule {
    Intent intent = Intent::practical_planning;
    std::vector<std::string> patterns;  // lowercase substrings
    int priority = 0;                   // lower wins

    friend bool operator==(const IntentRule&, const IntentRule&) = default;
};

using IntentRuleSet = std::vector<IntentRule>;

inline constexpr double kRuleMatchConfidence = 0.9;
inline constexpr double kRuleDefaultConfidence = 0.3;
inline constexpr double kFallbackConfidenceCap = 0.5;

const IntentRuleSet& default_intent_rules();

Violations validate(const IntentRuleSet& rules);

void to_json(json& j, const IntentRule& r);
void from_json(const json& j, IntentRule& r);

// Reads a JSON list of rules; throws Error{invalid_argument} if the set is invalid.
IntentRuleSet load_intent_rules(const std::string& path);

IntentLabel classify_rules(std::string_view text, std::span<const UserTurn> history, const IntentRuleSet& rules);

// Gateway classification. Any gateway error falls back to classify_rules
// with confidence capped at kFallbackConfidenceCap.
IntentLabel classify(ModelGateway& gateway, std::string_view text, std::span<const UserTurn> history,
                     const IntentRuleSet& fallback_rules);

}  // namespace affmem
