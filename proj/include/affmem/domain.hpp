#pragma once
// Shared value types for the affect-attended memory engine, plus their
// canonical JSON form (lower_snake_case field names) and invariant checks.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace affmem {

using json = nlohmann::json;

// Milliseconds since epoch.
using Timestamp = std::int64_t;

enum class EmotionCategory : std::size_t {
    anxiety,
    frustration,
    resignation,
    hope,
    sadness,
    anger,
    overwhelm,
    calm,
};

inline constexpr std::size_t kEmotionCategoryCount = 8;

inline constexpr std::array<EmotionCategory, kEmotionCategoryCount> kAllEmotionCategories = {
    EmotionCategory::anxiety, EmotionCategory::frustration, EmotionCategory::resignation,
    EmotionCategory::hope,    EmotionCategory::sadness,     EmotionCategory::anger,
    EmotionCategory::overwhelm, EmotionCategory::calm,
};

// Categories that count towards distress.
inline constexpr std::array<EmotionCategory, 5> kDistressCategories = {
    EmotionCategory::anxiety, EmotionCategory::frustration, EmotionCategory::sadness,
    EmotionCategory::anger,   EmotionCategory::overwhelm,
};

enum class Modality { voice, text };
enum class Trajectory { increasing, stable, declining };

enum class Intent {
    listening_first,
    validation_seeking,
    de_escalation,
    practical_planning,
    grief_processing,
    venting,
};

inline constexpr std::array<Intent, 6> kAllIntents = {
    Intent::listening_first,    Intent::validation_seeking, Intent::de_escalation,
    Intent::practical_planning, Intent::grief_processing,   Intent::venting,
};

enum class MemoryStatus { active, deleted };
enum class Phase { grounding, validation, reflection, question, plan };
enum class Depth { reflective, probing, action };
enum class Tone { match, soften };

std::string_view to_string(EmotionCategory c) noexcept;
std::string_view to_string(Modality m) noexcept;
std::string_view to_string(Trajectory t) noexcept;
std::string_view to_string(Intent i) noexcept;
std::string_view to_string(MemoryStatus s) noexcept;
std::string_view to_string(Phase p) noexcept;
std::string_view to_string(Depth d) noexcept;
std::string_view to_string(Tone t) noexcept;

// Parsers throw Error{invalid_argument} on unknown names.
EmotionCategory parse_emotion_category(std::string_view s);
Modality parse_modality(std::string_view s);
Trajectory parse_trajectory(std::string_view s);
Intent parse_intent(std::string_view s);
MemoryStatus parse_memory_status(std::string_view s);
Phase parse_phase(std::string_view s);
Depth parse_depth(std::string_view s);
Tone parse_tone(std::string_view s);

// Fixed 8-category intensity vector. Absent categories are 0.
struct EmotionVector {
    std::array<double, kEmotionCategoryCount> components{};

    double& operator[](EmotionCategory c) noexcept { return components[static_cast<std::size_t>(c)]; }
    double operator[](EmotionCategory c) const noexcept { return components[static_cast<std::size_t>(c)]; }

    double max_component() const noexcept;
    double distress() const noexcept;

    friend bool operator==(const EmotionVector&, const EmotionVector&) = default;
};

struct EmotionSignal {
    EmotionVector vector;
    double confidence = 0.0;
    Modality modality = Modality::text;

    friend bool operator==(const EmotionSignal&, const EmotionSignal&) = default;
};

struct UnifiedEmotionState {
    EmotionVector vector;
    double intensity = 0.0;
    Trajectory trajectory = Trajectory::stable;
    double confidence = 0.0;
    double distress = 0.0;

    friend bool operator==(const UnifiedEmotionState&, const UnifiedEmotionState&) = default;
};

struct IntentLabel {
    Intent intent = Intent::practical_planning;
    double confidence = 0.0;

    friend bool operator==(const IntentLabel&, const IntentLabel&) = default;
};

struct MemoryUnit {
    std::string id;
    std::string user_id;
    std::string content;
    std::vector<double> embedding;
    EmotionVector emotion_context;
    Timestamp created_at = 0;
    Timestamp updated_at = 0;
    std::int64_t version = 1;
    MemoryStatus status = MemoryStatus::active;

    friend bool operator==(const MemoryUnit&, const MemoryUnit&) = default;
};

struct UserTurn {
    std::string session_id;
    std::string text;
    std::optional<EmotionSignal> voice_signal;
    Timestamp timestamp = 0;

    friend bool operator==(const UserTurn&, const UserTurn&) = default;
};

struct ResponsePolicy {
    std::vector<Phase> sequencing;
    Depth depth = Depth::reflective;
    Tone tone_register = Tone::match;
    bool advice_allowed = false;
    std::int64_t max_plan_steps = 0;
    std::int64_t max_density = 1200;
    bool safety_override = false;

    bool has_phase(Phase p) const noexcept;

    friend bool operator==(const ResponsePolicy&, const ResponsePolicy&) = default;
};

// Entry of the ranked memory list inside a context object.
struct ContextMemory {
    std::string memory_id;
    std::string content;
    double score = 0.0;  // R
    double sim_sem = 0.0;
    double sim_emo = 0.0;

    friend bool operator==(const ContextMemory&, const ContextMemory&) = default;
};

struct DynamicContextObject {
    std::string user_id;
    UserTurn turn;
    UnifiedEmotionState emotion;
    IntentLabel intent;
    std::vector<ContextMemory> memories;
    std::vector<std::string> graph_facts;
    ResponsePolicy policy;

    friend bool operator==(const DynamicContextObject&, const DynamicContextObject&) = default;
};

// Invariant checks. An empty result means the value is valid.
using Violations = std::vector<std::string>;

Violations validate(const EmotionVector& v);
Violations validate(const EmotionSignal& s);
Violations validate(const UnifiedEmotionState& s);
Violations validate(const IntentLabel& l);
// expected_dim of 0 skips the dimension check.
Violations validate(const MemoryUnit& m, std::size_t expected_dim = 0);
Violations validate(const UserTurn& t);
Violations validate(const ResponsePolicy& p);
Violations validate(const DynamicContextObject& d);

// UnifiedEmotionState with intensity and distress derived from the vector.
UnifiedEmotionState make_unified_state(const EmotionVector& v, Trajectory trajectory, double confidence);

// JSON (ADL hooks for nlohmann::json).
void to_json(json& j, const EmotionVector& v);
void from_json(const json& j, EmotionVector& v);
void to_json(json& j, const EmotionSignal& s);
void from_json(const json& j, EmotionSignal& s);
void to_json(json& j, const UnifiedEmotionState& s);
void from_json(const json& j, UnifiedEmotionState& s);
void to_json(json& j, const IntentLabel& l);
void from_json(const json& j, IntentLabel& l);
void to_json(json& j, const MemoryUnit& m);
void from_json(const json& j, MemoryUnit& m);
void to_json(json& j, const UserTurn& t);
void from_json(const json& j, UserTurn& t);
void to_json(json& j, const ResponsePolicy& p);
void from_json(const json& j, ResponsePolicy& p);
void to_json(json& j, const ContextMemory& m);
void from_json(const json& j, ContextMemory& m);
void to_json(json& j, const DynamicContextObject& d);
void from_json(const json& j, DynamicContextObject& d);

}  // namespace affmem
