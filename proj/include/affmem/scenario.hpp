#pragma once
// Evaluation inputs: the seeded persona and the conversation scenarios.

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "affmem/domain.hpp"

namespace affmem {

enum class ScenarioCategory {
    meaningful,
    extreme_emotions,
    just_listening,
    contradictory,
    grief_guilt,
    solution_oriented,
};

inline constexpr std::array<ScenarioCategory, 6> kAllScenarioCategories = {
    ScenarioCategory::meaningful,    ScenarioCategory::extreme_emotions, ScenarioCategory::just_listening,
    ScenarioCategory::contradictory, ScenarioCategory::grief_guilt,      ScenarioCategory::solution_oriented,
};

inline constexpr std::size_t kScenariosPerCategory = 5;
inline constexpr std::size_t kPersonaFactCount = 15;

std::string_view to_string(ScenarioCategory c) noexcept;
ScenarioCategory parse_scenario_category(std::string_view s);

struct Scenario {
    std::string id;
    ScenarioCategory category = ScenarioCategory::meaningful;
    std::string objective;
    std::string opening_turn;
    int max_turns = 12;
    std::vector<std::string> fallback_turns;

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

struct Persona {
    std::string profile;
    std::vector<std::string> facts;
    std::vector<EmotionVector> seed_emotions;

    friend bool operator==(const Persona&, const Persona&) = default;
};

enum class Speaker { user, assistant };
std::string_view to_string(Speaker s) noexcept;

struct TranscriptLine {
    Speaker speaker = Speaker::user;
    std::string text;

    friend bool operator==(const TranscriptLine&, const TranscriptLine&) = default;
};

using Transcript = std::vector<TranscriptLine>;

// "user: ...\nassistant: ..." with one line per utterance.
std::string render_transcript(const Transcript& t);

Violations validate(const Scenario& s);
Violations validate(const Persona& p);
// Checks the shipped-set rule: six categories, five scenarios each, unique ids.
Violations validate_scenario_set(const std::vector<Scenario>& scenarios);

void to_json(json& j, const Scenario& s);
void from_json(const json& j, Scenario& s);
void to_json(json& j, const Persona& p);
void from_json(const json& j, Persona& p);
void to_json(json& j, const TranscriptLine& l);
void from_json(const json& j, TranscriptLine& l);

// Loads every *.json in dir, sorted by scenario id.
std::vector<Scenario> load_scenarios(const std::filesystem::path& dir);
Persona load_persona(const std::filesystem::path& file);

}  // namespace affmem
