#include "affmem/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "affmem/error.hpp"

namespace affmem {

std::string_view to_string(ScenarioCategory c) noexcept {
    switch (c) {
        case ScenarioCategory::meaningful: return "meaningful";
        case ScenarioCategory::extreme_emotions: return "extreme_emotions";
        case ScenarioCategory::just_listening: return "just_listening";
        case ScenarioCategory::contradictory: return "contradictory";
        case ScenarioCategory::grief_guilt: return "grief_guilt";
        case ScenarioCategory::solution_oriented: return "solution_oriented";
    }
    return "unknown";
}

ScenarioCategory parse_scenario_category(std::string_view s) {
    for (auto c : kAllScenarioCategories) {
        if (to_string(c) == s) return c;
    }
    throw Error(ErrorCode::invalid_argument, "unknown scenario category '" + std::string(s) + "'");
}

std::string_view to_string(Speaker s) noexcept { return s == Speaker::user ? "user" : "assistant"; }

std::string render_transcript(const Transcript& t) {
    std::string out;
    for (const auto& line : t) {
        out += to_string(line.speaker);
        out += ": ";
        out += line.text;
        out += '\n';
    }
    return out;
}

Violations validate(const Scenario& s) {
    Violations out;
    if (s.id.empty()) out.emplace_back("empty id");
    if (s.opening_turn.empty()) out.emplace_back("empty opening_turn");
    if (s.max_turns < 1) out.emplace_back("max_turns must be positive");
    for (const auto& t : s.fallback_turns) {
        if (t.empty()) {
            out.emplace_back("empty fallback turn");
            break;
        }
    }
    return out;
}

Violations validate(const Persona& p) {
    Violations out;
    if (p.facts.size() != kPersonaFactCount) {
        out.push_back("persona must have exactly " + std::to_string(kPersonaFactCount) + " facts, found " +
                      std::to_string(p.facts.size()));
    }
    if (p.seed_emotions.size() != p.facts.size()) out.emplace_back("seed_emotions not aligned with facts");
    for (const auto& f : p.facts) {
        if (f.empty()) {
            out.emplace_back("empty fact");
            break;
        }
    }
    for (const auto& e : p.seed_emotions) {
        if (!validate(e).empty()) {
            out.emplace_back("seed emotion component out of range");
            break;
        }
    }
    return out;
}

Violations validate_scenario_set(const std::vector<Scenario>& scenarios) {
    Violations out;
    std::map<ScenarioCategory, std::size_t> counts;
    std::set<std::string> ids;
    for (const auto& s : scenarios) {
        for (const auto& v : validate(s)) out.push_back(s.id + ": " + v);
        if (!ids.insert(s.id).second) out.push_back("duplicate scenario id " + s.id);
        ++counts[s.category];
    }
    for (auto c : kAllScenarioCategories) {
        if (counts[c] != kScenariosPerCategory) {
            out.push_back("category " + std::string(to_string(c)) + " has " + std::to_string(counts[c]) +
                          " scenarios, expected " + std::to_string(kScenariosPerCategory));
        }
    }
    return out;
}

void to_json(json& j, const Scenario& s) {
    j = json{{"id", s.id},
             {"category", to_string(s.category)},
             {"objective", s.objective},
             {"opening_turn", s.opening_turn},
             {"max_turns", s.max_turns},
             {"fallback_turns", s.fallback_turns}};
}

void from_json(const json& j, Scenario& s) {
    s.id = j.at("id").get<std::string>();
    s.category = parse_scenario_category(j.at("category").get<std::string>());
    s.objective = j.value("objective", std::string{});
    s.opening_turn = j.at("opening_turn").get<std::string>();
    s.max_turns = j.value("max_turns", 12);
    s.fallback_turns = j.value("fallback_turns", std::vector<std::string>{});
}

void to_json(json& j, const Persona& p) {
    j = json{{"profile", p.profile}, {"facts", p.facts}, {"seed_emotions", p.seed_emotions}};
}

void from_json(const json& j, Persona& p) {
    p.profile = j.value("profile", std::string{});
    p.facts = j.at("facts").get<std::vector<std::string>>();
    p.seed_emotions = j.at("seed_emotions").get<std::vector<EmotionVector>>();
}

void to_json(json& j, const TranscriptLine& l) {
    j = json{{"speaker", to_string(l.speaker)}, {"text", l.text}};
}

void from_json(const json& j, TranscriptLine& l) {
    const auto speaker = j.at("speaker").get<std::string>();
    if (speaker == "user") {
        l.speaker = Speaker::user;
    } else if (speaker == "assistant") {
        l.speaker = Speaker::assistant;
    } else {
        throw Error(ErrorCode::invalid_argument, "unknown speaker '" + speaker + "'");
    }
    l.text = j.at("text").get<std::string>();
}

namespace {

json read_json_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::invalid_argument, "cannot open " + file.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::invalid_argument, file.string() + ": " + e.what());
    }
}

}  // namespace

std::vector<Scenario> load_scenarios(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::invalid_argument, "not a directory: " + dir.string());
    std::vector<Scenario> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        try {
            out.push_back(read_json_file(entry.path()).get<Scenario>());
        } catch (const json::exception& e) {
            throw Error(ErrorCode::invalid_argument, entry.path().string() + ": " + e.what());
        }
    }
    std::sort(out.begin(), out.end(), [](const Scenario& a, const Scenario& b) { return a.id < b.id; });
    return out;
}

Persona load_persona(const std::filesystem::path& file) {
    try {
        return read_json_file(file).get<Persona>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::invalid_argument, file.string() + ": " + e.what());
    }
}

}  // namespace affmem
