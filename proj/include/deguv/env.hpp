#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "deguv/common.hpp"
#include "deguv/config.hpp"

namespace deguv {

// Visual perturbation regimes. A mode changes RGB rendering only: dynamics,
// reward and the depth channel are identical across modes.
enum class Mode : int { Train = 0, Easy = 1, Medium = 2, Hard = 3 };

Mode mode_from_string(const std::string& s);     // ConfigError on unknown names
const char* mode_name(Mode m);
inline constexpr std::array<Mode, 4> kAllModes = {Mode::Train, Mode::Easy, Mode::Medium,
                                                  Mode::Hard};

struct Distractor {
    float x = 0.0f, y = 0.0f;
    int shape_id = 0;  // 0 square, 1 disc, 2 triangle
    int color_id = 0;
};

struct EnvState {
    std::array<float, 2> gripper{0.5f, 0.25f};
    std::array<float, 2> cube{0.5f, 0.55f};
    bool held = false;
    std::vector<Distractor> distractors;
    int step_count = 0;
};

// Frame-stacked observation: k RGB frames (interleaved HWC, values 0..255)
// plus k depth frames (layer codes: background 0, distractor 0.4,
// gripper 0.8, cube 1.0).
struct Observation {
    int k = 0, h = 0, w = 0;
    std::vector<std::uint8_t> rgb;  // k*h*w*3
    std::vector<float> depth;       // k*h*w

    std::int64_t frame_rgb_size() const { return std::int64_t(h) * w * 3; }
    std::int64_t frame_depth_size() const { return std::int64_t(h) * w; }
};

struct StepResult {
    Observation obs;
    float reward = 0.0f;
    bool done = false;
};

inline const std::uint8_t* newest_rgb(const Observation& o) {
    return o.rgb.data() + std::size_t(o.k - 1) * std::size_t(o.frame_rgb_size());
}
inline const float* newest_depth(const Observation& o) {
    return o.depth.data() + std::size_t(o.k - 1) * std::size_t(o.frame_depth_size());
}

// Per-episode rendering parameters, a deterministic function of
// (mode, episode seed). Geometry never depends on these.
struct Appearance {
    Mode mode = Mode::Train;
    int bg_kind = 0;  // 0 solid, 1 checker, 2 stripes, 3 value-noise
    std::array<std::uint8_t, 3> bg_a{112, 112, 112};
    std::array<std::uint8_t, 3> bg_b{112, 112, 112};
    int cell = 8;
    int stripe_axis = 0;
    float brightness = 1.0f;
    std::vector<std::array<std::uint8_t, 3>> distractor_colors;
    std::vector<std::array<std::uint8_t, 3>> lattice;  // bg_kind 3
    int lattice_n = 0;
};

Appearance make_appearance(Mode mode, std::uint64_t episode_seed, const EnvParams& p);

// Pure renderers. Depth takes no appearance: it cannot depend on the mode.
void render_rgb_frame(const EnvState& s, const EnvParams& p, const Appearance& a,
                      std::uint8_t* out);
void render_depth_frame(const EnvState& s, const EnvParams& p, float* out);

// Scripted expert: proportional control toward the cube, grip when close,
// carry to the target zone, then hold.
std::array<float, 3> oracle_action(const EnvState& s, const EnvParams& p);

// Oracle return statistics on train mode, measured over 2000 episodes with
// default parameters and frozen here as the reference for learning checks.
inline constexpr float kOracleReturnLo = 5.2f;
inline constexpr float kOracleReturnHi = 5.9f;
inline constexpr float kOracleReturnMean = 5.65f;

// Task-relevant silhouette (cube + gripper) recovered from a depth frame.
std::vector<std::uint8_t> relevance_from_depth(const float* depth, int h, int w);

// Desk-scale 2-D reach-grasp-carry environment with RGB-D observations.
// Single-threaded; run several instances for concurrent rollouts.
class MiniManipEnv {
public:
    explicit MiniManipEnv(EnvParams p = {});

    Observation reset(std::uint64_t seed, Mode mode);
    StepResult step(const std::array<float, 3>& action);

    bool done() const { return done_; }
    const EnvState& state() const { return state_; }
    const EnvParams& params() const { return params_; }
    const Appearance& appearance() const { return appearance_; }
    Mode mode() const { return mode_; }

    std::array<float, 3> oracle() const { return oracle_action(state_, params_); }
    std::vector<std::uint8_t> relevance_mask() const;  // for the current state

    // Render the current state into single frames (top of the stack).
    void current_frames(std::vector<std::uint8_t>& rgb, std::vector<float>& depth) const;

private:
    void push_frame();
    Observation make_observation() const;

    EnvParams params_;
    EnvState state_;
    Appearance appearance_;
    Mode mode_ = Mode::Train;
    bool started_ = false;
    bool done_ = true;
    std::vector<std::uint8_t> stack_rgb_;  // k most recent frames, oldest first
    std::vector<float> stack_depth_;
};

}  // namespace deguv
