#include <gtest/gtest.h>

#include <algorithm>

#include "affmem/fusion.hpp"
#include "support.hpp"

using namespace affmem;
using affmem::testing::emotion_of;
using affmem::testing::Gen;

namespace {

EmotionSignal signal(EmotionVector v, double conf, Modality m) { return {v, conf, m}; }

std::vector<UnifiedEmotionState> history_of(std::initializer_list<double> intensities) {
    std::vector<UnifiedEmotionState> h;
    for (double x : intensities) {
        h.push_back(make_unified_state(emotion_of({{EmotionCategory::anxiety, x}}), Trajectory::stable, 0.5));
    }
    return h;
}

}  // namespace

TEST(Beta, VoiceAbsentIsZero) {
    EXPECT_EQ(compute_beta(std::nullopt, signal({}, 0.9, Modality::text)), 0.0);
}

TEST(Beta, EqualConfidencesGiveHalf) {
    EXPECT_DOUBLE_EQ(compute_beta(signal({}, 0.5, Modality::voice), signal({}, 0.5, Modality::text)), 0.5);
}

TEST(Beta, ProportionalToVoiceConfidence) {
    EXPECT_DOUBLE_EQ(compute_beta(signal({}, 0.6, Modality::voice), signal({}, 0.2, Modality::text)), 0.75);
}

TEST(Beta, BothConfidencesZeroGiveZero) {
    EXPECT_EQ(compute_beta(signal({}, 0.0, Modality::voice), signal({}, 0.0, Modality::text)), 0.0);
}

TEST(Fuse, EndpointsAreBitExact) {
    const auto v = signal(emotion_of({{EmotionCategory::anger, 0.7}, {EmotionCategory::calm, 0.1}}), 0.4, Modality::voice);
    const auto t = signal(emotion_of({{EmotionCategory::anger, 0.2}, {EmotionCategory::hope, 0.3}}), 0.8, Modality::text);
    EXPECT_EQ(fuse(v, t, 0.0), t.vector);
    EXPECT_EQ(fuse(v, t, 1.0), v.vector);
    EXPECT_EQ(fuse(std::nullopt, t, 0.7), t.vector);
}

TEST(Fuse, MidpointOfAnxiety) {
    const auto v = signal(emotion_of({{EmotionCategory::anxiety, 0.2}}), 0.5, Modality::voice);
    const auto t = signal(emotion_of({{EmotionCategory::anxiety, 0.4}}), 0.5, Modality::text);
    EXPECT_NEAR(fuse(v, t, 0.5)[EmotionCategory::anxiety], 0.3, 1e-15);
}

TEST(Trajectory, EmptyHistoryIsStable) {
    Gen g(1);
    for (int i = 0; i < 50; ++i) EXPECT_EQ(classify_trajectory(g.unit(), {}, FusionConfig{}), Trajectory::stable);
}

TEST(Trajectory, RiseAboveWindowMeanIsIncreasing) {
    const auto h = history_of({0.3, 0.3, 0.3});
    EXPECT_EQ(classify_trajectory(0.9, h, FusionConfig{}), Trajectory::increasing);
}

TEST(Trajectory, SmallDipInsideDeadbandIsStable) {
    // |0.75 - 0.8| = 0.05 <= 0.1
    const auto h = history_of({0.8, 0.8});
    EXPECT_EQ(classify_trajectory(0.75, h, FusionConfig{}), Trajectory::stable);
}

TEST(Trajectory, OnlyLastWindowEntriesCount) {
    // Mean of the last three is 0.2; the early 0.9s are outside the window.
    const auto h = history_of({0.9, 0.9, 0.9, 0.2, 0.2, 0.2});
    EXPECT_EQ(classify_trajectory(0.5, h, FusionConfig{}), Trajectory::increasing);
    EXPECT_EQ(classify_trajectory(0.05, h, FusionConfig{}), Trajectory::declining);
}

TEST(Unify, TextOnlyUsesTextVectorAndConfidence) {
    const auto t = signal(emotion_of({{EmotionCategory::sadness, 0.6}, {EmotionCategory::hope, 0.2}}), 0.8, Modality::text);
    const auto u = unify(std::nullopt, t, {}, FusionConfig{});
    EXPECT_EQ(u.vector, t.vector);
    EXPECT_EQ(u.confidence, 0.8);
    EXPECT_EQ(u.intensity, 0.6);
    EXPECT_EQ(u.distress, 0.6);
    EXPECT_EQ(u.trajectory, Trajectory::stable);
    EXPECT_TRUE(validate(u).empty());
}

TEST(Unify, ConfidenceIsTheSameBlend) {
    const auto v = signal({}, 0.6, Modality::voice);
    const auto t = signal({}, 0.2, Modality::text);
    // beta = 0.75 -> 0.75*0.6 + 0.25*0.2
    EXPECT_NEAR(unify(v, t, {}, FusionConfig{}).confidence, 0.5, 1e-15);
}

TEST(FusionConfigValidate, RejectsBadWindowAndEpsilon) {
    EXPECT_TRUE(validate(FusionConfig{}).empty());
    EXPECT_FALSE(validate(FusionConfig{0, 0.1, 0.8}).empty());
    EXPECT_FALSE(validate(FusionConfig{3, 0.0, 0.8}).empty());
    EXPECT_FALSE(validate(FusionConfig{3, 1.0, 0.8}).empty());
    EXPECT_FALSE(validate(FusionConfig{3, 0.1, 1.5}).empty());
}

TEST(FusionProperty, ConvexityForRandomTriples) {
    Gen g(5);
    for (int i = 0; i < 2000; ++i) {
        const auto v = signal(g.emotion(), g.unit(), Modality::voice);
        const auto t = signal(g.emotion(), g.unit(), Modality::text);
        const double beta = g.coin(0.1) ? static_cast<double>(g.uniform_int(0, 1)) : g.unit();
        const auto out = fuse(v, t, beta);
        for (std::size_t c = 0; c < kEmotionCategoryCount; ++c) {
            const double lo = std::min(v.vector.components[c], t.vector.components[c]);
            const double hi = std::max(v.vector.components[c], t.vector.components[c]);
            ASSERT_GE(out.components[c], lo);
            ASSERT_LE(out.components[c], hi);
        }
    }
}

TEST(FusionProperty, TrajectoryMonotoneInCurrentIntensity) {
    Gen g(8);
    for (int i = 0; i < 500; ++i) {
        std::vector<UnifiedEmotionState> h;
        const int n = g.uniform_int(0, 6);
        for (int k = 0; k < n; ++k) h.push_back(make_unified_state(g.emotion(), Trajectory::stable, 0.5));
        const double a = g.unit(), b = g.unit();
        const auto lo = classify_trajectory(std::min(a, b), h, FusionConfig{});
        const auto hi = classify_trajectory(std::max(a, b), h, FusionConfig{});
        // Order declining < stable < increasing never reverses.
        auto rank = [](Trajectory t) { return t == Trajectory::declining ? 0 : t == Trajectory::stable ? 1 : 2; };
        ASSERT_LE(rank(lo), rank(hi));
    }
}
