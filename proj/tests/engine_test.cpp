#include <gtest/gtest.h>

#include <fstream>
#include <thread>

#include "affmem/engine.hpp"
#include "affmem/error.hpp"
#include "support.hpp"

using namespace affmem;
using affmem::testing::emotion_of;
using affmem::testing::kDataDir;
using affmem::testing::ScratchDir;
using affmem::testing::ScriptedGateway;

namespace {

EngineConfig config_for(std::size_t dim) {
    EngineConfig c;
    c.store.embedding_dim = dim;
    c.gateway.embedding_dim = dim;
    return c;
}

}  // namespace

class EngineFixture : public ::testing::Test {
protected:
    ScriptedGateway gateway{64};
    MemoryStore store{StoreConfig{64, {}, 256}, gateway};
    Engine engine{config_for(64), gateway, store};
};

TEST_F(EngineFixture, SessionsGetDistinctIds) {
    const auto a = engine.create_session("u", 1);
    const auto b = engine.create_session("u", 2);
    EXPECT_NE(a.id, b.id);
    EXPECT_EQ(a.id, "s00000001");
    EXPECT_TRUE(engine.get_session(b.id).has_value());
    EXPECT_FALSE(engine.get_session("s99999999").has_value());
    EXPECT_THROW(engine.create_session("", 1), Error);
}

TEST_F(EngineFixture, TurnRunsWholePipeline) {
    store.add_memory("u", "Prefers step-by-step plans for exams", {}, 1);
    store.add_memory("other", "exam plans belong to someone else", {}, 1);
    const auto s = engine.create_session("u", 1);
    const auto r = engine.process_turn(s.id, "what's my plan for the exam?", std::nullopt, 10);
    EXPECT_EQ(r.context.intent.intent, Intent::practical_planning);
    ASSERT_EQ(r.context.memories.size(), 1u);
    EXPECT_EQ(r.context.memories[0].content, "Prefers step-by-step plans for exams");
    EXPECT_NE(r.response.find(stub_markers::plan), std::string::npos);
    EXPECT_TRUE(validate(r.context).empty());

    const auto after = engine.get_session(s.id);
    ASSERT_EQ(after->turns.size(), 1u);
    EXPECT_EQ(after->turns[0].response, r.response);
    EXPECT_EQ(after->emotion_history.size(), 1u);
}

TEST_F(EngineFixture, TextOnlyTurnHasZeroBeta) {
    const auto s = engine.create_session("u", 1);
    EXPECT_EQ(engine.process_turn(s.id, "i'm so anxious", std::nullopt, 2).beta, 0.0);
}

TEST_F(EngineFixture, VoiceSignalShiftsFusion) {
    const auto s = engine.create_session("u", 1);
    const EmotionSignal voice{emotion_of({{EmotionCategory::anger, 1.0}}), 0.8, Modality::voice};
    const auto r = engine.process_turn(s.id, "the train leaves at nine", voice, 2);
    // text confidence 0.3 -> beta = 0.8 / 1.1
    EXPECT_NEAR(r.beta, 0.8 / 1.1, 1e-12);
    EXPECT_NEAR(r.context.emotion.vector[EmotionCategory::anger], 0.8 / 1.1, 1e-12);
}

TEST_F(EngineFixture, JustListenForbidsAdvice) {
    const auto s = engine.create_session("u", 1);
    const auto r = engine.process_turn(s.id, "please just listen, i don't want advice", std::nullopt, 2);
    EXPECT_EQ(r.context.intent.intent, Intent::listening_first);
    EXPECT_FALSE(r.context.policy.advice_allowed);
    EXPECT_EQ(r.response.find(stub_markers::plan), std::string::npos);
}

TEST_F(EngineFixture, UnknownSessionAndEmptyText) {
    try {
        engine.process_turn("s12345678", "hi", std::nullopt, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::not_found);
    }
    const auto s = engine.create_session("u", 1);
    try {
        engine.process_turn(s.id, "", std::nullopt, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_argument);
    }
}

TEST_F(EngineFixture, FailedGenerationLeavesSessionUntouched) {
    const auto s = engine.create_session("u", 1);
    engine.process_turn(s.id, "first", std::nullopt, 2);
    gateway.fail_generate = true;
    EXPECT_THROW(engine.process_turn(s.id, "second", std::nullopt, 3), Error);
    EXPECT_EQ(engine.get_session(s.id)->turns.size(), 1u);
}

TEST_F(EngineFixture, IntentBackendDownStillAnswers) {
    const auto s = engine.create_session("u", 1);
    gateway.fail_intent = true;
    const auto r = engine.process_turn(s.id, "i miss her so much", std::nullopt, 2);
    EXPECT_EQ(r.context.intent.intent, Intent::grief_processing);
    EXPECT_LE(r.context.intent.confidence, 0.5);
}

TEST_F(EngineFixture, ConcurrentTurnsOnOneSessionSerialise) {
    const auto s = engine.create_session("u", 1);
    std::vector<std::jthread> threads;
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&, t] {
            for (int i = 0; i < 10; ++i) engine.process_turn(s.id, "turn " + std::to_string(t * 10 + i), std::nullopt, i + 2);
        });
    }
    threads.clear();
    const auto after = engine.get_session(s.id);
    EXPECT_EQ(after->turns.size(), 40u);
    EXPECT_TRUE(validate(*after).empty());
}

TEST(Engine, DeterministicAcrossInstances) {
    auto run = [] {
        ScriptedGateway g{64, 5};
        MemoryStore st{StoreConfig{64, {}, 256}, g};
        st.add_memory("u", "Bengaluru hostel is noisy at night", {}, 1);
        Engine e{config_for(64), g, st};
        const auto s = e.create_session("u", 1);
        std::vector<std::string> out;
        for (const char* text : {"i can't sleep in the hostel", "i'm panicking about tomorrow", "what should i plan?"}) {
            out.push_back(json(e.process_turn(s.id, text, std::nullopt, 5)).dump());
        }
        return out;
    };
    EXPECT_EQ(run(), run());
}

TEST(Engine, AutoMemorizeAddsTurnText) {
    ScriptedGateway g{64};
    MemoryStore st{StoreConfig{64, {}, 256}, g};
    auto cfg = config_for(64);
    cfg.auto_memorize = true;
    Engine e{cfg, g, st};
    const auto s = e.create_session("u", 1);
    e.process_turn(s.id, "my sister is visiting", std::nullopt, 2);
    const auto units = st.active_units("u");
    ASSERT_EQ(units.size(), 1u);
    EXPECT_EQ(units[0].content, "my sister is visiting");
}

TEST(Engine, DistressThresholdFromConfigWins) {
    ScriptedGateway g{64};
    MemoryStore st{StoreConfig{64, {}, 256}, g};
    auto cfg = config_for(64);
    cfg.fusion.distress_threshold = 0.5;
    Engine e{cfg, g, st};
    EXPECT_EQ(e.policy_table().safety_distress_threshold, 0.5);
    const auto s = e.create_session("u", 1);
    // one lexicon hit -> 0.5
    const auto r = e.process_turn(s.id, "i feel anxious", std::nullopt, 2);
    EXPECT_TRUE(r.context.policy.safety_override);
}

TEST(EngineConfigFile, ShippedConfigLoads) {
    const auto c = load_engine_config((kDataDir / "config.json").string());
    EXPECT_EQ(c.gateway.backend, Backend::stub);
    EXPECT_EQ(c.gateway.embedding_dim, c.store.embedding_dim);
    EXPECT_EQ(c.retrieval, RetrievalConfig{});
}

TEST(EngineConfigFile, EnvOverridesBackend) {
    ScratchDir dir("cfg");
    const auto path = (dir / "c.json").string();
    std::ofstream(path) << "{}";
    ::setenv("AFFMEM_BACKEND", "http", 1);
    ::setenv("AFFMEM_GATEWAY_ENDPOINT", "http://127.0.0.1:9", 1);
    const auto c = load_engine_config(path);
    ::setenv("AFFMEM_BACKEND", "carrier-pigeon", 1);
    EXPECT_THROW(load_engine_config(path), Error);
    ::unsetenv("AFFMEM_BACKEND");
    ::unsetenv("AFFMEM_GATEWAY_ENDPOINT");
    EXPECT_EQ(c.gateway.backend, Backend::http);
    EXPECT_EQ(c.gateway.endpoint, "http://127.0.0.1:9");
    std::ofstream(path) << "{bad";
    EXPECT_THROW(load_engine_config(path), Error);
}

TEST(SessionJson, RoundTrip) {
    ScriptedGateway g{64};
    MemoryStore st{StoreConfig{64, {}, 256}, g};
    Engine e{config_for(64), g, st};
    const auto s = e.create_session("u", 1);
    e.process_turn(s.id, "hello there", std::nullopt, 2);
    const auto got = *e.get_session(s.id);
    EXPECT_EQ(json(got).get<Session>(), got);
}
