#pragma once
// Per-turn pipeline:
//   text emotion -> fusion (with session history) -> intent -> retrieval
//   -> policy -> context assembly -> generation
// plus the session bookkeeping the service and the evaluation harness share.

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "affmem/context.hpp"
#include "affmem/domain.hpp"
#include "affmem/fusion.hpp"
#include "affmem/gateway.hpp"
#include "affmem/intent.hpp"
#include "affmem/memory_store.hpp"
#include "affmem/retrieval.hpp"

namespace affmem {

// Service / engine configuration file. Every field is optional in JSON.
struct EngineConfig {
    GatewayConfig gateway;
    RetrievalConfig retrieval;
    ContextBudget budget;
    FusionConfig fusion;
    StoreConfig store;
    bool auto_memorize = false;
    std::string policy_table_path;  // empty = built-in table
    std::string intent_rules_path;  // empty = built-in rules
};

void to_json(json& j, const EngineConfig& c);
void from_json(const json& j, EngineConfig& c);
// Reads the file, then applies AFFMEM_GATEWAY_ENDPOINT / AFFMEM_BACKEND
// environment overrides. Throws Error{invalid_argument}.
EngineConfig load_engine_config(const std::string& path);
void apply_env_overrides(EngineConfig& c);

struct SessionTurn {
    UserTurn turn;
    std::string response;

    friend bool operator==(const SessionTurn&, const SessionTurn&) = default;
};

struct Session {
    std::string id;
    std::string user_id;
    Timestamp created_at = 0;
    std::vector<UnifiedEmotionState> emotion_history;
    std::vector<SessionTurn> turns;

    Transcript transcript() const;

    friend bool operator==(const Session&, const Session&) = default;
};

Violations validate(const Session& s);
void to_json(json& j, const Session& s);
void from_json(const json& j, Session& s);

struct TurnResult {
    DynamicContextObject context;
    std::string response;
    double beta = 0.0;
};

void to_json(json& j, const TurnResult& r);

class Engine {
public:
    Engine(EngineConfig cfg, ModelGateway& gateway, MemoryStore& store);

    const EngineConfig& config() const noexcept { return cfg_; }
    const PolicyTable& policy_table() const noexcept { return policy_; }
    const IntentRuleSet& intent_rules() const noexcept { return rules_; }

    Session create_session(const std::string& user_id, Timestamp now);
    std::optional<Session> get_session(const std::string& session_id) const;

    // Runs the pipeline on a session and appends the turn. Requests on the same
    // session are serialised. Throws Error{not_found} for an unknown session,
    // Error{invalid_argument} for an empty text, and gateway errors as-is.
    TurnResult process_turn(const std::string& session_id, const std::string& text,
                            const std::optional<EmotionSignal>& voice, Timestamp now);

    // Pipeline on a caller-owned session (no registry, no locking).
    TurnResult process_turn(Session& session, const std::string& text, const std::optional<EmotionSignal>& voice,
                            Timestamp now);

private:
    struct SessionSlot {
        std::mutex mu;
        Session session;
    };

    std::shared_ptr<SessionSlot> find_slot(const std::string& session_id) const;

    EngineConfig cfg_;
    ModelGateway& gateway_;
    MemoryStore& store_;
    PolicyTable policy_;
    IntentRuleSet rules_;

    mutable std::mutex sessions_mu_;
    std::map<std::string, std::shared_ptr<SessionSlot>> sessions_;
    std::uint64_t session_seq_ = 0;
};

// Text handed to the generator: rendered context followed by the transcript.
std::string generation_input(const DynamicContextObject& dco, const Transcript& transcript);
// Baseline generation input: the transcript alone.
std::string bare_generation_input(const Transcript& transcript);

}  // namespace affmem
