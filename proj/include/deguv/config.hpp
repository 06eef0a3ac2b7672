#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "deguv/common.hpp"

namespace deguv {

// Environment knobs. Resolution and frame stack are fixed by the network
// shapes; they live here so the values are visible and checkpoint-hashed.
struct EnvParams {
    int resolution = 64;
    int frame_stack = 3;
    int horizon = 100;
    float move_delta = 0.05f;
    float grip_radius = 0.06f;
    int n_distractors = 2;
    float zone_x = 0.5f;
    float zone_y = 0.7f;
    float zone_radius = 0.2f;
    float hard_brightness_lo = 0.6f;
    float hard_brightness_hi = 1.5f;
};

struct AugmentationSpec {
    int shift_pad = 4;
    float overlay_alpha = 0.5f;
    float jitter_contrast = 0.4f;
    float jitter_hue = 0.1f;       // radians of hue rotation
    bool compose_all = true;       // false: sample one operator per call
    std::uint64_t seed = 0;        // derived from the run seed at load time
};

struct TrainingConfig {
    float gamma = 0.99f;
    float ema_rate = 0.01f;
    float alpha = 0.5f;            // raw-branch weight in the critic loss
    float beta = 0.5f;             // augmented-branch weight
    float nce_temperature = 0.1f;
    float actor_lr = 1e-3f;
    float critic_lr = 1e-3f;       // shared by critic, encoder and masker
    float aux_lr = 1e-3f;
    float entropy_lr = 1e-3f;
    float init_entropy_coef = 0.1f;
    float target_entropy = -3.0f;
    int batch_size = 32;
    std::int64_t total_steps = 100000;
    int update_every = 10;
    int aux_every = 1;
    int warmup_steps = 1000;
    std::int64_t replay_capacity = 100000;
    std::uint64_t seed = 0;
    bool encoder_target_ema = true;  // false: freeze the encoder target after init
    bool actor_on_aug = true;        // feed the augmented half through the actor loss too
    // ablations
    bool masker_enabled = true;
    bool auxiliary_enabled = true;
    bool augmented_branch_enabled = true;
};

struct MaskerConfig {
    bool per_frame = false;  // one mask per stacked frame instead of one shared mask
};

struct EvalConfig {
    std::int64_t interval = 10000;
    int episodes = 10;
    int seeds = 3;
};

// Full run configuration: plain-text `key = value` file, dotted keys,
// `#` comments. Unknown keys are rejected. Every field has a default, so an
// empty file is a valid config.
struct RunConfig {
    EnvParams env;
    AugmentationSpec aug;
    TrainingConfig train;
    MaskerConfig masker;
    EvalConfig eval;
    std::string output_dir;  // empty: resolved from DEGUV_RUN_ROOT or ./runs
    std::string tag;

    // Parse file contents (not a path). Throws ConfigError with a line
    // diagnostic on unknown keys or malformed values.
    static RunConfig parse(const std::string& text);
    static RunConfig load(const std::string& path);

    // Apply one `key=value` override (the CLI --set flag).
    void set(const std::string& key, const std::string& value);
    // Like set, but a bare key (no dot) resolves to the unique dotted key
    // with that leaf name, so `--set seed=1` means `train.seed=1`.
    void set_override(const std::string& key, const std::string& value);

    // Range checks; throws ConfigError.
    void validate() const;

    // Canonical serialization: every key, sorted, one per line.
    std::string canonical() const;

    // Hash over the keys that determine checkpoint compatibility
    // (environment geometry and network-shaping options).
    std::uint64_t compat_hash() const;

    // Collected ablation tags, e.g. "ablation:no-masker".
    std::vector<std::string> ablation_tags() const;
};

}  // namespace deguv
