#include "affmem/domain.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "affmem/error.hpp"

namespace affmem {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid-argument";
        case ErrorCode::not_found: return "not-found";
        case ErrorCode::deleted: return "deleted";
        case ErrorCode::storage_unavailable: return "storage-unavailable";
        case ErrorCode::dimension_mismatch: return "dimension-mismatch";
        case ErrorCode::budget_infeasible: return "budget-infeasible";
        case ErrorCode::backend_unavailable: return "backend-unavailable";
        case ErrorCode::malformed_judgment: return "malformed-judgment";
        case ErrorCode::zero_baseline: return "zero-baseline";
    }
    return "unknown";
}

namespace {

template <typename E, std::size_t N>
using NameTable = std::array<std::pair<E, std::string_view>, N>;

constexpr NameTable<EmotionCategory, 8> kEmotionNames{{
    {EmotionCategory::anxiety, "anxiety"},
    {EmotionCategory::frustration, "frustration"},
    {EmotionCategory::resignation, "resignation"},
    {EmotionCategory::hope, "hope"},
    {EmotionCategory::sadness, "sadness"},
    {EmotionCategory::anger, "anger"},
    {EmotionCategory::overwhelm, "overwhelm"},
    {EmotionCategory::calm, "calm"},
}};
constexpr NameTable<Modality, 2> kModalityNames{{{Modality::voice, "voice"}, {Modality::text, "text"}}};
constexpr NameTable<Trajectory, 3> kTrajectoryNames{{
    {Trajectory::increasing, "increasing"},
    {Trajectory::stable, "stable"},
    {Trajectory::declining, "declining"},
}};
constexpr NameTable<Intent, 6> kIntentNames{{
    {Intent::listening_first, "listening_first"},
    {Intent::validation_seeking, "validation_seeking"},
    {Intent::de_escalation, "de_escalation"},
    {Intent::practical_planning, "practical_planning"},
    {Intent::grief_processing, "grief_processing"},
    {Intent::venting, "venting"},
}};
constexpr NameTable<MemoryStatus, 2> kStatusNames{{{MemoryStatus::active, "active"}, {MemoryStatus::deleted, "deleted"}}};
constexpr NameTable<Phase, 5> kPhaseNames{{
    {Phase::grounding, "grounding"},
    {Phase::validation, "validation"},
    {Phase::reflection, "reflection"},
    {Phase::question, "question"},
    {Phase::plan, "plan"},
}};
constexpr NameTable<Depth, 3> kDepthNames{{{Depth::reflective, "reflective"}, {Depth::probing, "probing"}, {Depth::action, "action"}}};
constexpr NameTable<Tone, 2> kToneNames{{{Tone::match, "match"}, {Tone::soften, "soften"}}};

template <typename E, std::size_t N>
std::string_view name_of(const NameTable<E, N>& table, E value) noexcept {
    for (const auto& [e, name] : table) {
        if (e == value) return name;
    }
    return "unknown";
}

template <typename E, std::size_t N>
E parse_name(const NameTable<E, N>& table, std::string_view s, std::string_view what) {
    for (const auto& [e, name] : table) {
        if (name == s) return e;
    }
    throw Error(ErrorCode::invalid_argument, "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

bool in_unit(double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; }

void append(Violations& out, const Violations& more, std::string_view prefix) {
    for (const auto& v : more) out.push_back(std::string(prefix) + v);
}

}  // namespace

std::string_view to_string(EmotionCategory c) noexcept { return name_of(kEmotionNames, c); }
std::string_view to_string(Modality m) noexcept { return name_of(kModalityNames, m); }
std::string_view to_string(Trajectory t) noexcept { return name_of(kTrajectoryNames, t); }
std::string_view to_string(Intent i) noexcept { return name_of(kIntentNames, i); }
std::string_view to_string(MemoryStatus s) noexcept { return name_of(kStatusNames, s); }
std::string_view to_string(Phase p) noexcept { return name_of(kPhaseNames, p); }
std::string_view to_string(Depth d) noexcept { return name_of(kDepthNames, d); }
std::string_view to_string(Tone t) noexcept { return name_of(kToneNames, t); }

EmotionCategory parse_emotion_category(std::string_view s) { return parse_name(kEmotionNames, s, "emotion category"); }
Modality parse_modality(std::string_view s) { return parse_name(kModalityNames, s, "modality"); }
Trajectory parse_trajectory(std::string_view s) { return parse_name(kTrajectoryNames, s, "trajectory"); }
Intent parse_intent(std::string_view s) { return parse_name(kIntentNames, s, "intent"); }
MemoryStatus parse_memory_status(std::string_view s) { return parse_name(kStatusNames, s, "status"); }
Phase parse_phase(std::string_view s) { return parse_name(kPhaseNames, s, "phase"); }
Depth parse_depth(std::string_view s) { return parse_name(kDepthNames, s, "depth"); }
Tone parse_tone(std::string_view s) { return parse_name(kToneNames, s, "tone"); }

double EmotionVector::max_component() const noexcept {
    return *std::max_element(components.begin(), components.end());
}

double EmotionVector::distress() const noexcept {
    double d = 0.0;
    for (auto c : kDistressCategories) d = std::max(d, (*this)[c]);
    return d;
}

bool ResponsePolicy::has_phase(Phase p) const noexcept {
    return std::find(sequencing.begin(), sequencing.end(), p) != sequencing.end();
}

UnifiedEmotionState make_unified_state(const EmotionVector& v, Trajectory trajectory, double confidence) {
    UnifiedEmotionState s;
    s.vector = v;
    s.intensity = v.max_component();
    s.trajectory = trajectory;
    s.confidence = confidence;
    s.distress = v.distress();
    return s;
}

// --- validation -------------------------------------------------------------

Violations validate(const EmotionVector& v) {
    Violations out;
    for (double x : v.components) {
        if (!in_unit(x)) {
            out.emplace_back("component out of range");
            break;
        }
    }
    return out;
}

Violations validate(const EmotionSignal& s) {
    Violations out = validate(s.vector);
    if (!in_unit(s.confidence)) out.emplace_back("confidence out of range");
    return out;
}

Violations validate(const UnifiedEmotionState& s) {
    Violations out = validate(s.vector);
    if (!in_unit(s.confidence)) out.emplace_back("confidence out of range");
    if (s.intensity != s.vector.max_component()) out.emplace_back("intensity is not the max component");
    if (s.distress != s.vector.distress()) out.emplace_back("distress is not the max distress component");
    return out;
}

Violations validate(const IntentLabel& l) {
    Violations out;
    if (std::find(kAllIntents.begin(), kAllIntents.end(), l.intent) == kAllIntents.end()) {
        out.emplace_back("intent outside taxonomy");
    }
    if (!in_unit(l.confidence)) out.emplace_back("confidence out of range");
    return out;
}

Violations validate(const MemoryUnit& m, std::size_t expected_dim) {
    Violations out;
    if (m.id.empty()) out.emplace_back("empty id");
    if (m.user_id.empty()) out.emplace_back("empty user_id");
    if (expected_dim != 0 && m.embedding.size() != expected_dim) out.emplace_back("embedding dimension mismatch");
    double norm2 = 0.0;
    for (double x : m.embedding) norm2 += x * x;
    if (norm2 != 0.0 && std::abs(std::sqrt(norm2) - 1.0) > 1e-9) out.emplace_back("embedding not unit norm");
    append(out, validate(m.emotion_context), "emotion_context: ");
    if (m.version < 1) out.emplace_back("version not positive");
    if (m.updated_at < m.created_at) out.emplace_back("updated_at before created_at");
    return out;
}

Violations validate(const UserTurn& t) {
    Violations out;
    if (t.text.empty()) out.emplace_back("empty text");
    if (t.voice_signal) {
        append(out, validate(*t.voice_signal), "voice_signal: ");
        if (t.voice_signal->modality != Modality::voice) out.emplace_back("voice_signal modality is not voice");
    }
    return out;
}

Violations validate(const ResponsePolicy& p) {
    Violations out;
    if (!p.advice_allowed && (p.has_phase(Phase::plan) || p.max_plan_steps != 0)) {
        out.emplace_back("plan steps forbidden");
    }
    if (p.safety_override && (p.sequencing.empty() || p.sequencing.front() != Phase::grounding)) {
        out.emplace_back("safety override must begin with grounding");
    }
    if (p.max_plan_steps < 0) out.emplace_back("negative max_plan_steps");
    if (p.max_density < 1) out.emplace_back("max_density not positive");
    return out;
}

Violations validate(const DynamicContextObject& d) {
    Violations out;
    if (d.user_id.empty()) out.emplace_back("empty user_id");
    append(out, validate(d.turn), "turn: ");
    append(out, validate(d.emotion), "emotion: ");
    append(out, validate(d.intent), "intent: ");
    append(out, validate(d.policy), "policy: ");
    for (std::size_t i = 1; i < d.memories.size(); ++i) {
        if (d.memories[i].score > d.memories[i - 1].score) {
            out.emplace_back("memories not sorted by score");
            break;
        }
    }
    return out;
}

// --- JSON ---------------------------------------------------------------------

void to_json(json& j, const EmotionVector& v) {
    j = json::object();
    for (auto c : kAllEmotionCategories) j[std::string(to_string(c))] = v[c];
}

void from_json(const json& j, EmotionVector& v) {
    v = EmotionVector{};
    for (auto it = j.begin(); it != j.end(); ++it) {
        v[parse_emotion_category(it.key())] = it.value().get<double>();
    }
}

void to_json(json& j, const EmotionSignal& s) {
    j = json{{"vector", s.vector}, {"confidence", s.confidence}, {"modality", to_string(s.modality)}};
}

void from_json(const json& j, EmotionSignal& s) {
    s.vector = j.at("vector").get<EmotionVector>();
    s.confidence = j.at("confidence").get<double>();
    s.modality = parse_modality(j.at("modality").get<std::string>());
}

void to_json(json& j, const UnifiedEmotionState& s) {
    j = json{{"vector", s.vector},
             {"intensity", s.intensity},
             {"trajectory", to_string(s.trajectory)},
             {"confidence", s.confidence},
             {"distress", s.distress}};
}

void from_json(const json& j, UnifiedEmotionState& s) {
    s.vector = j.at("vector").get<EmotionVector>();
    s.intensity = j.at("intensity").get<double>();
    s.trajectory = parse_trajectory(j.at("trajectory").get<std::string>());
    s.confidence = j.at("confidence").get<double>();
    s.distress = j.at("distress").get<double>();
}

void to_json(json& j, const IntentLabel& l) {
    j = json{{"intent", to_string(l.intent)}, {"confidence", l.confidence}};
}

void from_json(const json& j, IntentLabel& l) {
    l.intent = parse_intent(j.at("intent").get<std::string>());
    l.confidence = j.at("confidence").get<double>();
}

void to_json(json& j, const MemoryUnit& m) {
    j = json{{"id", m.id},
             {"user_id", m.user_id},
             {"content", m.content},
             {"embedding", m.embedding},
             {"emotion_context", m.emotion_context},
             {"created_at", m.created_at},
             {"updated_at", m.updated_at},
             {"version", m.version},
             {"status", to_string(m.status)}};
}

void from_json(const json& j, MemoryUnit& m) {
    m.id = j.at("id").get<std::string>();
    m.user_id = j.at("user_id").get<std::string>();
    m.content = j.at("content").get<std::string>();
    m.embedding = j.at("embedding").get<std::vector<double>>();
    m.emotion_context = j.at("emotion_context").get<EmotionVector>();
    m.created_at = j.at("created_at").get<Timestamp>();
    m.updated_at = j.at("updated_at").get<Timestamp>();
    m.version = j.at("version").get<std::int64_t>();
    m.status = parse_memory_status(j.at("status").get<std::string>());
}

void to_json(json& j, const UserTurn& t) {
    j = json{{"session_id", t.session_id}, {"text", t.text}, {"timestamp", t.timestamp}};
    j["voice_signal"] = t.voice_signal ? json(*t.voice_signal) : json(nullptr);
}

void from_json(const json& j, UserTurn& t) {
    t.session_id = j.at("session_id").get<std::string>();
    t.text = j.at("text").get<std::string>();
    t.timestamp = j.at("timestamp").get<Timestamp>();
    t.voice_signal.reset();
    if (auto it = j.find("voice_signal"); it != j.end() && !it->is_null()) {
        t.voice_signal = it->get<EmotionSignal>();
    }
}

void to_json(json& j, const ResponsePolicy& p) {
    json seq = json::array();
    for (auto ph : p.sequencing) seq.push_back(to_string(ph));
    j = json{{"sequencing", std::move(seq)},
             {"depth", to_string(p.depth)},
             {"tone_register", to_string(p.tone_register)},
             {"advice_allowed", p.advice_allowed},
             {"max_plan_steps", p.max_plan_steps},
             {"max_density", p.max_density},
             {"safety_override", p.safety_override}};
}

void from_json(const json& j, ResponsePolicy& p) {
    p.sequencing.clear();
    for (const auto& s : j.at("sequencing")) p.sequencing.push_back(parse_phase(s.get<std::string>()));
    p.depth = parse_depth(j.at("depth").get<std::string>());
    p.tone_register = parse_tone(j.at("tone_register").get<std::string>());
    p.advice_allowed = j.at("advice_allowed").get<bool>();
    p.max_plan_steps = j.at("max_plan_steps").get<std::int64_t>();
    p.max_density = j.at("max_density").get<std::int64_t>();
    p.safety_override = j.at("safety_override").get<bool>();
}

void to_json(json& j, const ContextMemory& m) {
    j = json{{"memory_id", m.memory_id},
             {"content", m.content},
             {"score", m.score},
             {"sim_sem", m.sim_sem},
             {"sim_emo", m.sim_emo}};
}

void from_json(const json& j, ContextMemory& m) {
    m.memory_id = j.at("memory_id").get<std::string>();
    m.content = j.at("content").get<std::string>();
    m.score = j.at("score").get<double>();
    m.sim_sem = j.at("sim_sem").get<double>();
    m.sim_emo = j.at("sim_emo").get<double>();
}

void to_json(json& j, const DynamicContextObject& d) {
    j = json{{"user_id", d.user_id},
             {"turn", d.turn},
             {"emotion", d.emotion},
             {"intent", d.intent},
             {"memories", d.memories},
             {"graph_facts", d.graph_facts},
             {"policy", d.policy}};
}

void from_json(const json& j, DynamicContextObject& d) {
    d.user_id = j.at("user_id").get<std::string>();
    d.turn = j.at("turn").get<UserTurn>();
    d.emotion = j.at("emotion").get<UnifiedEmotionState>();
    d.intent = j.at("intent").get<IntentLabel>();
    d.memories = j.at("memories").get<std::vector<ContextMemory>>();
    d.graph_facts = j.at("graph_facts").get<std::vector<std::string>>();
    d.policy = j.at("policy").get<ResponsePolicy>();
}

}  // namespace affmem
