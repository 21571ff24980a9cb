#include <gtest/gtest.h>

#include "affmem/domain.hpp"
#include "affmem/error.hpp"
#include "support.hpp"

using namespace affmem;
using affmem::testing::Gen;

TEST(EmotionVectorValidate, ComponentAboveOneIsReported) {
    EmotionVector v;
    v[EmotionCategory::anxiety] = 1.2;
    EXPECT_EQ(validate(v), (Violations{"component out of range"}));
}

TEST(EmotionVectorValidate, ZeroVectorIsValid) { EXPECT_TRUE(validate(EmotionVector{}).empty()); }

TEST(EmotionVectorValidate, NegativeAndNanAreRejected) {
    EmotionVector v;
    v[EmotionCategory::calm] = -0.01;
    EXPECT_FALSE(validate(v).empty());
    v[EmotionCategory::calm] = std::nan("");
    EXPECT_FALSE(validate(v).empty());
}

TEST(ResponsePolicyValidate, PlanStepsWithoutAdviceAreForbidden) {
    ResponsePolicy p;
    p.advice_allowed = false;
    p.max_plan_steps = 3;
    EXPECT_EQ(validate(p), (Violations{"plan steps forbidden"}));
}

TEST(ResponsePolicyValidate, SafetyOverrideNeedsGroundingFirst) {
    ResponsePolicy p;
    p.sequencing = {Phase::validation, Phase::grounding};
    p.safety_override = true;
    EXPECT_FALSE(validate(p).empty());
    p.sequencing = {Phase::grounding, Phase::validation};
    EXPECT_TRUE(validate(p).empty());
}

TEST(EmotionVector, DistressIgnoresHopeResignationAndCalm) {
    EmotionVector v;
    v[EmotionCategory::hope] = 0.9;
    v[EmotionCategory::calm] = 0.95;
    v[EmotionCategory::resignation] = 0.7;
    v[EmotionCategory::anger] = 0.4;
    EXPECT_DOUBLE_EQ(v.distress(), 0.4);
    EXPECT_DOUBLE_EQ(v.max_component(), 0.95);
}

TEST(UnifiedState, MakeUnifiedStateDerivesIntensityAndDistress) {
    EmotionVector v;
    v[EmotionCategory::overwhelm] = 0.6;
    v[EmotionCategory::hope] = 0.7;
    const auto s = make_unified_state(v, Trajectory::stable, 0.8);
    EXPECT_DOUBLE_EQ(s.intensity, 0.7);
    EXPECT_DOUBLE_EQ(s.distress, 0.6);
    EXPECT_TRUE(validate(s).empty());
    auto bad = s;
    bad.intensity = 0.5;
    EXPECT_FALSE(validate(bad).empty());
}

TEST(UserTurnValidate, EmptyTextRejected) {
    UserTurn t;
    t.session_id = "s1";
    EXPECT_FALSE(validate(t).empty());
    t.text = "hi";
    EXPECT_TRUE(validate(t).empty());
}

TEST(MemoryUnitValidate, ChecksDimensionAndNorm) {
    MemoryUnit m{"m1", "u", "x", {0.6, 0.8}, {}, 1, 1, 1, MemoryStatus::active};
    EXPECT_TRUE(validate(m, 2).empty());
    EXPECT_FALSE(validate(m, 3).empty());
    m.embedding = {0.5, 0.5};
    EXPECT_FALSE(validate(m).empty());
    m.embedding = {0.0, 0.0};
    EXPECT_TRUE(validate(m).empty());
}

TEST(Parsing, UnknownNamesThrowInvalidArgument) {
    try {
        parse_intent("shouting");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_argument);
    }
    EXPECT_THROW(parse_emotion_category("joy"), Error);
    EXPECT_EQ(parse_phase("grounding"), Phase::grounding);
    for (auto i : kAllIntents) EXPECT_EQ(parse_intent(to_string(i)), i);
    for (auto c : kAllEmotionCategories) EXPECT_EQ(parse_emotion_category(to_string(c)), c);
}

TEST(Json, EmotionVectorAlwaysCarriesAllEightCategories) {
    const json j = EmotionVector{};
    EXPECT_EQ(j.size(), 8u);
    for (auto c : kAllEmotionCategories) EXPECT_EQ(j.at(std::string(to_string(c))), 0.0);
    // Missing categories read back as zero.
    EXPECT_EQ(json::parse(R"({"anger":0.5})").get<EmotionVector>()[EmotionCategory::anger], 0.5);
}

// Round trip of every domain type over generated values.
TEST(JsonProperty, RoundTripIsIdentity) {
    Gen g(11);
    for (int i = 0; i < 300; ++i) {
        const EmotionVector v = g.emotion();
        EXPECT_EQ(json(v).get<EmotionVector>(), v);

        const EmotionSignal s{g.emotion(), g.unit(), g.coin() ? Modality::voice : Modality::text};
        EXPECT_EQ(json(s).get<EmotionSignal>(), s);

        const auto u = make_unified_state(g.emotion(), static_cast<Trajectory>(g.uniform_int(0, 2)), g.unit());
        EXPECT_EQ(json(u).get<UnifiedEmotionState>(), u);

        const IntentLabel l{kAllIntents[g.uniform_int(0, 5)], g.unit()};
        EXPECT_EQ(json(l).get<IntentLabel>(), l);

        MemoryUnit m{"m" + std::to_string(i), "user", "text " + std::to_string(i), g.unit_vector(8), g.emotion(),
                     i, i + g.uniform_int(0, 10), g.uniform_int(1, 9), g.coin() ? MemoryStatus::active : MemoryStatus::deleted};
        EXPECT_EQ(json(m).get<MemoryUnit>(), m);

        UserTurn t{"s1", "turn text", std::nullopt, 42 + i};
        if (g.coin()) t.voice_signal = EmotionSignal{g.emotion(), g.unit(), Modality::voice};
        EXPECT_EQ(json(t).get<UserTurn>(), t);

        ResponsePolicy p{{Phase::grounding, Phase::validation, Phase::plan}, Depth::action, Tone::soften, true,
                         g.uniform_int(0, 5), g.uniform_int(1, 2000), g.coin()};
        EXPECT_EQ(json(p).get<ResponsePolicy>(), p);

        DynamicContextObject d{"user", t, u, l, {{"m1", "c1", 0.9, 0.8, 1.0}, {"m2", "c2", 0.4, 0.3, 0.5}},
                               {"fact a", "fact b"}, p};
        EXPECT_EQ(json(d).get<DynamicContextObject>(), d);
    }
}

TEST(Json, FieldNamesAreLowerSnakeCase) {
    const json j = MemoryUnit{"m1", "u", "c", {1.0}, {}, 1, 2, 1, MemoryStatus::active};
    for (const char* key : {"id", "user_id", "content", "embedding", "emotion_context", "created_at", "updated_at",
                            "version", "status"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
    EXPECT_EQ(j.at("status"), "active");
}

// validate never throws on structurally well-formed input.
TEST(ValidateProperty, IsTotal) {
    Gen g(3);
    for (int i = 0; i < 500; ++i) {
        EmotionVector v;
        for (auto& c : v.components) c = g.unit() * 3.0 - 1.0;
        EXPECT_NO_THROW(validate(v));
        ResponsePolicy p{{}, Depth::probing, Tone::match, g.coin(), g.uniform_int(-3, 8), g.uniform_int(-5, 5), g.coin()};
        EXPECT_NO_THROW(validate(p));
        DynamicContextObject d;
        d.emotion.vector = v;
        d.policy = p;
        EXPECT_NO_THROW(validate(d));
    }
}
