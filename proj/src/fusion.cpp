#include "affmem/fusion.hpp"

#include <algorithm>
#include <cmath>

namespace affmem {

Violations validate(const FusionConfig& cfg) {
    Violations out;
    if (cfg.trajectory_window < 1) out.emplace_back("trajectory_window must be >= 1");
    if (!(cfg.trajectory_epsilon > 0.0 && cfg.trajectory_epsilon < 1.0)) out.emplace_back("trajectory_epsilon must be in (0,1)");
    if (!(cfg.distress_threshold >= 0.0 && cfg.distress_threshold <= 1.0)) out.emplace_back("distress_threshold must be in [0,1]");
    return out;
}

void to_json(json& j, const FusionConfig& cfg) {
    j = json{{"trajectory_window", cfg.trajectory_window},
             {"trajectory_epsilon", cfg.trajectory_epsilon},
             {"distress_threshold", cfg.distress_threshold}};
}

void from_json(const json& j, FusionConfig& cfg) {
    cfg = FusionConfig{};
    cfg.trajectory_window = j.value("trajectory_window", cfg.trajectory_window);
    cfg.trajectory_epsilon = j.value("trajectory_epsilon", cfg.trajectory_epsilon);
    cfg.distress_threshold = j.value("distress_threshold", cfg.distress_threshold);
}

double compute_beta(const std::optional<EmotionSignal>& voice, const EmotionSignal& text) noexcept {
    if (!voice) return 0.0;
    const double total = voice->confidence + text.confidence;
    if (total <= 0.0) return 0.0;
    return voice->confidence / total;
}

EmotionVector fuse(const std::optional<EmotionSignal>& voice, const EmotionSignal& text, double beta) noexcept {
    if (!voice) return text.vector;
    EmotionVector out;
    for (auto c : kAllEmotionCategories) {
        const double t = text.vector[c];
        const double v = voice->vector[c];
        // std::lerp is exact at 0 and 1 and stays inside [t, v].
        out[c] = std::clamp(std::lerp(t, v, beta), std::min(t, v), std::max(t, v));
    }
    return out;
}

Trajectory classify_trajectory(double current_intensity, std::span<const UnifiedEmotionState> history,
                               const FusionConfig& cfg) noexcept {
    if (history.empty()) return Trajectory::stable;
    const std::size_t window = std::min<std::size_t>(history.size(), static_cast<std::size_t>(std::max(cfg.trajectory_window, 1)));
    double sum = 0.0;
    for (const auto& s : history.last(window)) sum += s.intensity;
    const double mean = sum / static_cast<double>(window);
    if (current_intensity > mean + cfg.trajectory_epsilon) return Trajectory::increasing;
    if (current_intensity < mean - cfg.trajectory_epsilon) return Trajectory::declining;
    return Trajectory::stable;
}

UnifiedEmotionState unify(const std::optional<EmotionSignal>& voice, const EmotionSignal& text,
                          std::span<const UnifiedEmotionState> history, const FusionConfig& cfg) {
    const double beta = compute_beta(voice, text);
    const EmotionVector fused = fuse(voice, text, beta);
    const double confidence = voice ? std::lerp(text.confidence, voice->confidence, beta) : text.confidence;
    const Trajectory trajectory = classify_trajectory(fused.max_component(), history, cfg);
    return make_unified_state(fused, trajectory, std::clamp(confidence, 0.0, 1.0));
}

}  // namespace affmem
