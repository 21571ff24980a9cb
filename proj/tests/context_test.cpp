#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "affmem/context.hpp"
#include "affmem/error.hpp"
#include "support.hpp"

using namespace affmem;
using affmem::testing::emotion_of;
using affmem::testing::Gen;
using affmem::testing::kTestDir;
using affmem::testing::ScratchDir;

namespace {

UnifiedEmotionState state_with_distress(double d) {
    return make_unified_state(emotion_of({{EmotionCategory::anxiety, d}}), Trajectory::stable, 0.8);
}

ResponsePolicy policy_for(Intent i, double distress) { return select_policy({i, 0.9}, state_with_distress(distress)); }

UserTurn turn_of(std::string text) { return UserTurn{"s1", std::move(text), std::nullopt, 1}; }

std::vector<ContextMemory> ranked(int n, std::size_t content_len = 40) {
    std::vector<ContextMemory> out;
    for (int i = 0; i < n; ++i) {
        const double r = 0.9 - 0.1 * i;
        out.push_back({"m" + std::to_string(i), std::string(content_len, 'a' + static_cast<char>(i % 26)), r, r, r});
    }
    return out;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(SelectPolicy, ListeningForbidsAdvice) {
    const auto p = policy_for(Intent::listening_first, 0.2);
    EXPECT_FALSE(p.advice_allowed);
    EXPECT_EQ(p.max_plan_steps, 0);
    EXPECT_FALSE(p.has_phase(Phase::plan));
}

TEST(SelectPolicy, PlanningAtLowDistressKeepsFiveSteps) {
    const auto p = policy_for(Intent::practical_planning, 0.3);
    EXPECT_TRUE(p.advice_allowed);
    EXPECT_EQ(p.max_plan_steps, 5);
    EXPECT_FALSE(p.safety_override);
}

TEST(SelectPolicy, PlanningAtModerateDistressCapsSteps) {
    EXPECT_EQ(policy_for(Intent::practical_planning, 0.6).max_plan_steps, 3);
    EXPECT_EQ(policy_for(Intent::practical_planning, 0.59).max_plan_steps, 5);
}

TEST(SelectPolicy, HighDistressOverridesAndGroundsFirst) {
    const auto p = policy_for(Intent::practical_planning, 0.85);
    EXPECT_TRUE(p.safety_override);
    ASSERT_FALSE(p.sequencing.empty());
    EXPECT_EQ(p.sequencing.front(), Phase::grounding);
    EXPECT_EQ(p.tone_register, Tone::soften);
    EXPECT_LE(p.max_plan_steps, 3);
    EXPECT_EQ(p.max_density, 600);
    EXPECT_TRUE(validate(p).empty());
}

TEST(SelectPolicy, DeescalationIsDenseLimited) {
    const auto p = policy_for(Intent::de_escalation, 0.5);
    EXPECT_EQ(p.sequencing.front(), Phase::grounding);
    EXPECT_EQ(p.max_density, 400);
    // Override keeps the smaller of the two.
    EXPECT_EQ(policy_for(Intent::de_escalation, 0.9).max_density, 400);
}

TEST(SelectPolicy, GroundingNotDuplicated) {
    const auto p = policy_for(Intent::de_escalation, 0.95);
    EXPECT_EQ(std::count(p.sequencing.begin(), p.sequencing.end(), Phase::grounding), 1);
}

TEST(PolicyTable, DefaultIsValidAndRoundTrips) {
    EXPECT_TRUE(validate(default_policy_table()).empty());
    EXPECT_EQ(json(default_policy_table()).get<PolicyTable>(), default_policy_table());
}

TEST(PolicyTable, LoadRejectsMissingIntent) {
    ScratchDir dir("policy");
    auto t = default_policy_table();
    t.base.erase(Intent::venting);
    const auto path = (dir / "p.json").string();
    std::ofstream(path) << json(t).dump();
    EXPECT_THROW(load_policy_table(path), Error);
    std::ofstream(path) << "{not json";
    EXPECT_THROW(load_policy_table(path), Error);
    EXPECT_THROW(load_policy_table((dir / "missing.json").string()), Error);
}

TEST(BuildContext, KeepsTopFiveMemories) {
    const auto p = policy_for(Intent::venting, 0.2);
    const auto d = build_context("u", turn_of("hi"), state_with_distress(0.2), {Intent::venting, 0.9}, ranked(8), {},
                                 p, ContextBudget{});
    ASSERT_EQ(d.memories.size(), 5u);
    EXPECT_EQ(d.memories.front().memory_id, "m0");
    EXPECT_EQ(d.memories.back().memory_id, "m4");
}

TEST(BuildContext, UnderBudgetPassesThrough) {
    const auto p = policy_for(Intent::venting, 0.2);
    const std::vector<std::string> facts = {"a --likes--> b", "c --knows--> d"};
    const auto d = build_context("u", turn_of("hi"), state_with_distress(0.2), {Intent::venting, 0.9}, ranked(3), facts,
                                 p, ContextBudget{});
    EXPECT_EQ(d.memories, ranked(3));
    EXPECT_EQ(d.graph_facts, facts);
}

TEST(BuildContext, MandatoryOverBudgetIsInfeasible) {
    const auto p = policy_for(Intent::venting, 0.2);
    try {
        build_context("u", turn_of(std::string(500, 'x')), state_with_distress(0.2), {Intent::venting, 0.9}, {}, {}, p,
                      ContextBudget{300, 5, 10});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::budget_infeasible);
    }
}

TEST(BuildContext, DropsFactsBeforeMemories) {
    const auto p = policy_for(Intent::venting, 0.2);
    const auto e = state_with_distress(0.2);
    const IntentLabel l{Intent::venting, 0.9};
    DynamicContextObject bare = build_context("u", turn_of("hi"), e, l, {}, {}, p, ContextBudget{});
    const auto base = render_context(bare).size();
    // Room for the memories but not the facts.
    auto mems = ranked(2, 20);
    bare.memories = mems;
    const auto with_mems = render_context(bare).size();
    const std::vector<std::string> facts(5, std::string(30, 'f'));
    const auto d = build_context("u", turn_of("hi"), e, l, mems, facts, p,
                                 ContextBudget{static_cast<int>(with_mems), 5, 10});
    EXPECT_EQ(d.memories, mems);
    EXPECT_TRUE(d.graph_facts.empty());
    EXPECT_GT(with_mems, base);
}

TEST(BuildContext, UnrankedInputRejected) {
    auto mems = ranked(3);
    std::swap(mems[0], mems[2]);
    EXPECT_THROW(build_context("u", turn_of("hi"), state_with_distress(0.1), {Intent::venting, 0.9}, mems, {},
                               policy_for(Intent::venting, 0.1), ContextBudget{}),
                 Error);
}

TEST(RenderContext, MatchesGolden) {
    DynamicContextObject d;
    d.user_id = "u";
    d.turn = turn_of("what's my plan for the next ten days?");
    d.emotion = make_unified_state(
        emotion_of({{EmotionCategory::anxiety, 0.7}, {EmotionCategory::overwhelm, 0.25}, {EmotionCategory::hope, 0.1}}),
        Trajectory::increasing, 0.8);
    d.intent = {Intent::practical_planning, 0.9};
    d.memories = {{"m00000001", "Prefers step-by-step plans", 0.9, 0.8, 1.0},
                  {"m00000002", "Physics mock score was 38/100", 0.5, 0.5, 0.5}};
    d.graph_facts = {"exam --causes--> anxiety"};
    d.policy = select_policy(d.intent, d.emotion);
    EXPECT_EQ(render_context(d), slurp(kTestDir / "golden" / "context.txt"));
}

TEST(RenderContext, EmptySectionsStillPresent) {
    DynamicContextObject d;
    d.turn = turn_of("hello");
    d.policy = policy_for(Intent::venting, 0.0);
    const auto s = render_context(d);
    EXPECT_NE(s.find("MEMORIES\nRELATIONS\nPOLICY\n"), std::string::npos);
}

TEST(RenderContext, NewlinesInContentAreFlattened) {
    DynamicContextObject d;
    d.turn = turn_of("line one\nline two");
    d.memories = {{"m1", "a\nb", 0.5, 0.5, 0.5}};
    d.policy = policy_for(Intent::venting, 0.0);
    EXPECT_NE(render_context(d).find("TURN\nline one line two\n"), std::string::npos);
}

// Whatever the input, the result fits the budget or the call throws infeasible.
TEST(BuildContextProperty, AlwaysWithinBudget) {
    Gen g(41);
    for (int i = 0; i < 400; ++i) {
        const auto e = make_unified_state(g.emotion(), Trajectory::stable, g.unit());
        const IntentLabel l{kAllIntents[g.uniform_int(0, 5)], g.unit()};
        const auto p = select_policy(l, e);
        std::vector<ContextMemory> mems;
        double r = 1.0;
        for (int k = g.uniform_int(0, 12); k > 0; --k) {
            r -= g.unit() * 0.05;
            mems.push_back({"m" + std::to_string(k), std::string(g.uniform_int(0, 400), 'c'), r, r, r});
        }
        std::vector<std::string> facts(g.uniform_int(0, 15), std::string(g.uniform_int(5, 80), 'f'));
        const ContextBudget b{g.uniform_int(200, 3000), g.uniform_int(1, 6), g.uniform_int(1, 10)};
        try {
            const auto d = build_context("u", turn_of(std::string(g.uniform_int(1, 300), 't')), e, l, mems, facts, p, b);
            ASSERT_LE(render_context(d).size(), static_cast<std::size_t>(b.max_chars));
            ASSERT_LE(d.memories.size(), static_cast<std::size_t>(b.max_memories));
            ASSERT_LE(d.graph_facts.size(), static_cast<std::size_t>(b.max_graph_facts));
            for (std::size_t k = 0; k < d.memories.size(); ++k) ASSERT_EQ(d.memories[k].memory_id, mems[k].memory_id);
        } catch (const Error& err) {
            ASSERT_EQ(err.code(), ErrorCode::budget_infeasible);
        }
    }
}

// Policy invariants over the whole intent x distress grid.
TEST(SelectPolicyProperty, InvariantsHold) {
    Gen g(43);
    for (int i = 0; i < 1000; ++i) {
        const auto e = make_unified_state(g.emotion(), Trajectory::stable, g.unit());
        const IntentLabel l{kAllIntents[g.uniform_int(0, 5)], g.unit()};
        const auto p = select_policy(l, e);
        ASSERT_TRUE(validate(p).empty());
        if (e.distress >= 0.8) ASSERT_EQ(p.sequencing.front(), Phase::grounding);
        if (e.distress >= 0.6) ASSERT_LE(p.max_plan_steps, 3);
        if (!p.advice_allowed) ASSERT_FALSE(p.has_phase(Phase::plan));
    }
}
