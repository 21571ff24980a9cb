#include "affmem/engine.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "affmem/error.hpp"

namespace affmem {

void to_json(json& j, const EngineConfig& c) {
    j = json{{"gateway", c.gateway},
             {"retrieval", c.retrieval},
             {"budget", c.budget},
             {"fusion", c.fusion},
             {"store",
              {{"embedding_dim", c.store.embedding_dim},
               {"persistence_path", c.store.persistence_path.string()},
               {"snapshot_interval", c.store.snapshot_interval}}},
             {"auto_memorize", c.auto_memorize},
             {"policy_table_path", c.policy_table_path},
             {"intent_rules_path", c.intent_rules_path}};
}

void from_json(const json& j, EngineConfig& c) {
    c = EngineConfig{};
    if (j.contains("gateway")) c.gateway = j.at("gateway").get<GatewayConfig>();
    if (j.contains("retrieval")) c.retrieval = j.at("retrieval").get<RetrievalConfig>();
    if (j.contains("budget")) c.budget = j.at("budget").get<ContextBudget>();
    if (j.contains("fusion")) c.fusion = j.at("fusion").get<FusionConfig>();
    if (auto it = j.find("store"); it != j.end()) {
        c.store.embedding_dim = it->value("embedding_dim", c.store.embedding_dim);
        c.store.persistence_path = it->value("persistence_path", std::string{});
        c.store.snapshot_interval = it->value("snapshot_interval", c.store.snapshot_interval);
    }
    c.auto_memorize = j.value("auto_memorize", c.auto_memorize);
    c.policy_table_path = j.value("policy_table_path", std::string{});
    c.intent_rules_path = j.value("intent_rules_path", std::string{});
    // The store and the gateway must agree on the embedding dimension.
    if (!j.contains("gateway") || !j.at("gateway").contains("embedding_dim")) c.gateway.embedding_dim = c.store.embedding_dim;
}

void apply_env_overrides(EngineConfig& c) {
    if (const char* ep = std::getenv("AFFMEM_GATEWAY_ENDPOINT"); ep && *ep) c.gateway.endpoint = ep;
    if (const char* be = std::getenv("AFFMEM_BACKEND"); be && *be) {
        const std::string b = be;
        if (b == "stub") {
            c.gateway.backend = Backend::stub;
        } else if (b == "http") {
            c.gateway.backend = Backend::http;
        } else {
            throw Error(ErrorCode::invalid_argument, "AFFMEM_BACKEND must be stub or http");
        }
    }
}

EngineConfig load_engine_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::invalid_argument, "cannot open config " + path);
    EngineConfig c;
    try {
        c = json::parse(in).get<EngineConfig>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::invalid_argument, path + ": " + e.what());
    }
    apply_env_overrides(c);
    return c;
}

// --- Session ---------------------------------------------------------------------------------

Transcript Session::transcript() const {
    Transcript t;
    for (const auto& st : turns) {
        t.push_back({Speaker::user, st.turn.text});
        t.push_back({Speaker::assistant, st.response});
    }
    return t;
}

Violations validate(const Session& s) {
    Violations out;
    if (s.id.empty()) out.emplace_back("empty id");
    if (s.user_id.empty()) out.emplace_back("empty user_id");
    if (s.emotion_history.size() != s.turns.size()) out.emplace_back("emotion_history length differs from turns length");
    return out;
}

void to_json(json& j, const Session& s) {
    json turns = json::array();
    for (const auto& t : s.turns) turns.push_back({{"turn", t.turn}, {"response", t.response}});
    j = json{{"id", s.id},
             {"user_id", s.user_id},
             {"created_at", s.created_at},
             {"emotion_history", s.emotion_history},
             {"turns", std::move(turns)}};
}

void from_json(const json& j, Session& s) {
    s.id = j.at("id").get<std::string>();
    s.user_id = j.at("user_id").get<std::string>();
    s.created_at = j.at("created_at").get<Timestamp>();
    s.emotion_history = j.at("emotion_history").get<std::vector<UnifiedEmotionState>>();
    s.turns.clear();
    for (const auto& t : j.at("turns")) s.turns.push_back({t.at("turn").get<UserTurn>(), t.at("response").get<std::string>()});
}

void to_json(json& j, const TurnResult& r) {
    j = json{{"context_object", r.context}, {"policy", r.context.policy}, {"response", r.response}, {"beta", r.beta}};
}

std::string generation_input(const DynamicContextObject& dco, const Transcript& transcript) {
    return render_context(dco) + "TRANSCRIPT\n" + render_transcript(transcript);
}

std::string bare_generation_input(const Transcript& transcript) { return "TRANSCRIPT\n" + render_transcript(transcript); }

// --- Engine -----------------------------------------------------------------------------------

Engine::Engine(EngineConfig cfg, ModelGateway& gateway, MemoryStore& store)
    : cfg_(std::move(cfg)), gateway_(gateway), store_(store) {
    for (const auto& vs : {validate(cfg_.retrieval), validate(cfg_.budget), validate(cfg_.fusion)}) {
        if (!vs.empty()) throw Error(ErrorCode::invalid_argument, vs.front());
    }
    policy_ = cfg_.policy_table_path.empty() ? default_policy_table() : load_policy_table(cfg_.policy_table_path);
    policy_.safety_distress_threshold = cfg_.fusion.distress_threshold;
    rules_ = cfg_.intent_rules_path.empty() ? default_intent_rules() : load_intent_rules(cfg_.intent_rules_path);
}

Session Engine::create_session(const std::string& user_id, Timestamp now) {
    if (user_id.empty()) throw Error(ErrorCode::invalid_argument, "empty user_id");
    std::lock_guard lock(sessions_mu_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%08llu", static_cast<unsigned long long>(++session_seq_));
    auto slot = std::make_shared<SessionSlot>();
    slot->session.id = buf;
    slot->session.user_id = user_id;
    slot->session.created_at = now;
    sessions_.emplace(slot->session.id, slot);
    return slot->session;
}

std::shared_ptr<Engine::SessionSlot> Engine::find_slot(const std::string& session_id) const {
    std::lock_guard lock(sessions_mu_);
    auto it = sessions_.find(session_id);
    return it == sessions_.end() ? nullptr : it->second;
}

std::optional<Session> Engine::get_session(const std::string& session_id) const {
    auto slot = find_slot(session_id);
    if (!slot) return std::nullopt;
    std::lock_guard lock(slot->mu);
    return slot->session;
}

TurnResult Engine::process_turn(const std::string& session_id, const std::string& text,
                                const std::optional<EmotionSignal>& voice, Timestamp now) {
    auto slot = find_slot(session_id);
    if (!slot) throw Error(ErrorCode::not_found, "session " + session_id);
    std::lock_guard lock(slot->mu);
    // Work on a copy so a failed turn leaves the session untouched.
    Session working = slot->session;
    TurnResult r = process_turn(working, text, voice, now);
    slot->session = std::move(working);
    return r;
}

TurnResult Engine::process_turn(Session& session, const std::string& text, const std::optional<EmotionSignal>& voice,
                                Timestamp now) {
    UserTurn turn{session.id, text, voice, now};
    if (turn.voice_signal) turn.voice_signal->modality = Modality::voice;
    if (auto v = validate(turn); !v.empty()) throw Error(ErrorCode::invalid_argument, "turn: " + v.front());

    std::vector<UserTurn> history;
    history.reserve(session.turns.size());
    for (const auto& st : session.turns) history.push_back(st.turn);

    const EmotionSignal text_signal = gateway_.detect_text_emotion(text);
    TurnResult result;
    result.beta = compute_beta(turn.voice_signal, text_signal);
    const UnifiedEmotionState emotion = unify(turn.voice_signal, text_signal, session.emotion_history, cfg_.fusion);
    const IntentLabel intent = classify(gateway_, text, history, rules_);

    const auto query = gateway_.embed(text);
    const auto scored = retrieve(store_, session.user_id, query, emotion.vector, cfg_.retrieval);
    std::vector<ContextMemory> memories;
    memories.reserve(scored.size());
    for (const auto& s : scored) {
        const auto unit = store_.get(s.memory_id);
        if (!unit) continue;
        memories.push_back({s.memory_id, unit->content, s.score, s.sim_sem, s.sim_emo});
    }

    const ResponsePolicy policy = select_policy(intent, emotion, policy_);
    result.context = build_context(session.user_id, turn, emotion, intent, std::move(memories),
                                   store_.graph_facts(session.user_id), policy, cfg_.budget);

    Transcript transcript = session.transcript();
    transcript.push_back({Speaker::user, text});
    result.response = gateway_.generate(generation_input(result.context, transcript));

    session.emotion_history.push_back(emotion);
    session.turns.push_back({turn, result.response});

    if (cfg_.auto_memorize) store_.add_memory(session.user_id, text, emotion.vector, now);
    return result;
}

}  // namespace affmem
