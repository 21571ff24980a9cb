#pragma once
// Response-policy selection and Dynamic Context Object assembly.

#include <map>
#include <string>
#include <vector>

#include "affmem/domain.hpp"
#include "affmem/retrieval.hpp"

namespace affmem {

struct ContextBudget {
    int max_chars = 4000;
    int max_memories = 5;
    int max_graph_facts = 10;

    friend bool operator==(const ContextBudget&, const ContextBudget&) = default;
};

Violations validate(const ContextBudget& b);
void to_json(json& j, const ContextBudget& b);
void from_json(const json& j, ContextBudget& b);

// Per-intent base policies plus the distress rules applied on top of them.
struct PolicyTable {
    std::map<Intent, ResponsePolicy> base;
    double safety_distress_threshold = 0.8;
    double plan_cap_distress_threshold = 0.6;
    std::int64_t capped_plan_steps = 3;
    std::int64_t override_max_density = 600;

    friend bool operator==(const PolicyTable&, const PolicyTable&) = default;
};

const PolicyTable& default_policy_table();
Violations validate(const PolicyTable& t);
void to_json(json& j, const PolicyTable& t);
void from_json(const json& j, PolicyTable& t);
PolicyTable load_policy_table(const std::string& path);

// Base policy for the intent, then:
//   distress >= plan_cap threshold  -> plan steps capped
//   distress >= safety threshold    -> safety_override, grounding first, tone soften
ResponsePolicy select_policy(const IntentLabel& intent, const UnifiedEmotionState& emotion,
                             const PolicyTable& table = default_policy_table());

// Truncation when over budget, in order: graph facts beyond max_graph_facts,
// memories beyond max_memories (lowest R first), then trailing graph facts,
// then lowest-R memories down to one, then that memory's content. The turn,
// emotion, intent and policy are never cut; if they alone exceed max_chars
// this throws Error{budget_infeasible}.
DynamicContextObject build_context(const std::string& user_id, const UserTurn& turn, const UnifiedEmotionState& emotion,
                                   const IntentLabel& intent, std::vector<ContextMemory> memories,
                                   std::vector<std::string> graph_facts, const ResponsePolicy& policy,
                                   const ContextBudget& budget);

// Sectioned plain text: EMOTION / INTENT / MEMORIES / RELATIONS / POLICY / TURN.
std::string render_context(const DynamicContextObject& dco);

}  // namespace affmem
