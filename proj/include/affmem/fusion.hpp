#pragma once
// Voice/text emotion fusion:
//
//   unified = beta * voice + (1 - beta) * text
//
// beta is the voice share of the total modality confidence and is 0 when
// only text is available. Trajectory compares the current intensity with
// the mean intensity of the last `trajectory_window` turns, with a deadband
// of `trajectory_epsilon` on either side.

#include <optional>
#include <span>

#include "affmem/domain.hpp"

namespace affmem {

struct FusionConfig {
    int trajectory_window = 3;
    double trajectory_epsilon = 0.1;
    double distress_threshold = 0.8;

    friend bool operator==(const FusionConfig&, const FusionConfig&) = default;
};

Violations validate(const FusionConfig& cfg);
void to_json(json& j, const FusionConfig& cfg);
void from_json(const json& j, FusionConfig& cfg);

double compute_beta(const std::optional<EmotionSignal>& voice, const EmotionSignal& text) noexcept;

// With no voice signal the text vector is returned unchanged.
EmotionVector fuse(const std::optional<EmotionSignal>& voice, const EmotionSignal& text, double beta) noexcept;

Trajectory classify_trajectory(double current_intensity, std::span<const UnifiedEmotionState> history,
                               const FusionConfig& cfg) noexcept;

// history is ordered oldest to newest.
UnifiedEmotionState unify(const std::optional<EmotionSignal>& voice, const EmotionSignal& text,
                          std::span<const UnifiedEmotionState> history, const FusionConfig& cfg);

}  // namespace affmem
