#pragma once
// ModelGateway is the only place that talks to external models. Every model
// role used by the engine and the evaluation harness (embedding, text emotion,
// intent, generation, user simulation, judging) goes through it.
//
// Two backends:
//   StubGateway  deterministic, seeded, in-process; used by tests and offline runs
//   HttpGateway  JSON-over-HTTP, one endpoint per role, with retry/backoff

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "affmem/domain.hpp"
#include "affmem/intent.hpp"
#include "affmem/scenario.hpp"

namespace affmem {

enum class Criterion {
    emotional_validation,
    plan_clarity,
    tone,
    safety_repetition,
    memory_grounding,
};

inline constexpr std::array<Criterion, 5> kAllCriteria = {
    Criterion::emotional_validation, Criterion::plan_clarity, Criterion::tone,
    Criterion::safety_repetition,    Criterion::memory_grounding,
};

std::string_view to_string(Criterion c) noexcept;
Criterion parse_criterion(std::string_view s);

enum class Slot { one, two };
std::string_view to_string(Slot s) noexcept;
Slot parse_slot(std::string_view s);

using CriterionScores = std::array<double, 5>;  // indexed by Criterion

struct JudgeRecord {
    std::string scenario_id;
    Slot preferred = Slot::one;
    double confidence = 0.0;
    CriterionScores scores_one{};
    CriterionScores scores_two{};
    std::string rationale;
    std::string risk_notes;

    const CriterionScores& scores(Slot s) const noexcept { return s == Slot::one ? scores_one : scores_two; }

    friend bool operator==(const JudgeRecord&, const JudgeRecord&) = default;
};

// Scores must be integers or half-integers in [1,5].
Violations validate(const JudgeRecord& r);
void to_json(json& j, const JudgeRecord& r);
// Throws Error{malformed_judgment} on any schema problem.
JudgeRecord parse_judge_record(const json& j);

struct SimulatedTurn {
    std::string utterance;
    bool done = false;
};

enum class Backend { stub, http };

struct GatewayConfig {
    Backend backend = Backend::stub;
    std::optional<std::string> endpoint;
    int timeout_ms = 30000;
    int max_retries = 2;
    int backoff_base_ms = 200;
    int backoff_cap_ms = 5000;
    std::uint64_t seed = 0;
    std::size_t embedding_dim = 64;
    std::string token_env = "AFFMEM_API_TOKEN";
};

Violations validate(const GatewayConfig& cfg);
void to_json(json& j, const GatewayConfig& cfg);
void from_json(const json& j, GatewayConfig& cfg);

class ModelGateway {
public:
    virtual ~ModelGateway() = default;

    virtual std::size_t embedding_dim() const noexcept = 0;

    virtual std::vector<double> embed(std::string_view text) = 0;
    virtual EmotionSignal detect_text_emotion(std::string_view text) = 0;
    virtual IntentLabel classify_intent(std::string_view text, std::span<const UserTurn> history) = 0;
    virtual std::string generate(std::string_view input) = 0;
    virtual SimulatedTurn simulate_user(const Persona& persona, const Transcript& so_far, const Scenario& scenario) = 0;
    virtual JudgeRecord judge(std::string_view scenario_id, std::string_view transcript_one,
                              std::string_view transcript_two, std::string_view rubric) = 0;
};

// Rubric text handed to the judge, one paragraph per criterion.
const std::string& default_rubric();

using EmotionLexicon = std::map<EmotionCategory, std::vector<std::string>>;
const EmotionLexicon& default_emotion_lexicon();
EmotionLexicon load_emotion_lexicon(const std::string& path);
void to_json(json& j, const EmotionLexicon& lex);

// Markers the stub generator writes into responses. The stub judge keys on them.
namespace stub_markers {
inline constexpr std::string_view grounding = "[grounding]";
inline constexpr std::string_view validation = "[validation]";
inline constexpr std::string_view reflection = "[reflection]";
inline constexpr std::string_view question = "[question]";
inline constexpr std::string_view plan = "[plan]";
inline constexpr std::string_view memory = "[memory]";
inline constexpr std::string_view generic = "[response]";
}  // namespace stub_markers

class StubGateway final : public ModelGateway {
public:
    explicit StubGateway(std::uint64_t seed = 0, std::size_t embedding_dim = 64,
                         EmotionLexicon lexicon = default_emotion_lexicon(),
                         IntentRuleSet rules = default_intent_rules());

    std::size_t embedding_dim() const noexcept override { return dim_; }

    // Hashed bag of tokens, L2-normalised. All-zero if the text has no tokens.
    std::vector<double> embed(std::string_view text) override;
    // Lexicon scoring: 0.5 for one hit in a category, +0.2 per extra hit,
    // +0.1 if an intensifier is present, capped at 1. Confidence 0.8 on any
    // hit, else 0.3.
    EmotionSignal detect_text_emotion(std::string_view text) override;
    IntentLabel classify_intent(std::string_view text, std::span<const UserTurn> history) override;
    // Template response that walks the POLICY sequencing of a rendered
    // context and cites the top memory; bare transcripts get a generic reply.
    std::string generate(std::string_view input) override;
    // Opening turn, then the scripted fallback turns; done on the last
    // scripted turn or at max_turns.
    SimulatedTurn simulate_user(const Persona& persona, const Transcript& so_far, const Scenario& scenario) override;
    // Feature-based scores from the stub markers plus a seeded per-criterion
    // offset shared by both transcripts.
    JudgeRecord judge(std::string_view scenario_id, std::string_view transcript_one,
                      std::string_view transcript_two, std::string_view rubric) override;

private:
    std::uint64_t seed_;
    std::size_t dim_;
    EmotionLexicon lexicon_;
    IntentRuleSet rules_;
};

class HttpGateway final : public ModelGateway {
public:
    explicit HttpGateway(GatewayConfig cfg);
    ~HttpGateway() override;

    std::size_t embedding_dim() const noexcept override { return cfg_.embedding_dim; }

    std::vector<double> embed(std::string_view text) override;
    EmotionSignal detect_text_emotion(std::string_view text) override;
    IntentLabel classify_intent(std::string_view text, std::span<const UserTurn> history) override;
    std::string generate(std::string_view input) override;
    SimulatedTurn simulate_user(const Persona& persona, const Transcript& so_far, const Scenario& scenario) override;
    JudgeRecord judge(std::string_view scenario_id, std::string_view transcript_one,
                      std::string_view transcript_two, std::string_view rubric) override;

    // Number of HTTP requests attempted so far (including retries).
    std::uint64_t attempts() const noexcept { return attempts_.load(); }

private:
    json post(const std::string& op, const json& body);

    GatewayConfig cfg_;
    std::string scheme_host_port_;
    std::string base_path_;
    std::atomic<std::uint64_t> attempts_{0};
};

// Throws Error{invalid_argument} for an invalid config.
std::unique_ptr<ModelGateway> make_gateway(const GatewayConfig& cfg);

}  // namespace affmem
