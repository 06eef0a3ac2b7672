#pragma once

#include <cstdint>
#include <vector>

#include "deguv/common.hpp"
#include "deguv/config.hpp"

namespace deguv {

// Procedural overlay images (noise lattices, gradients, checkers, stripes),
// regenerated from a seed. Stands in for an external distractor dataset.
class TextureBank {
public:
    TextureBank(std::uint64_t seed, int n, int h, int w);

    int size() const { return n_; }
    int h() const { return h_; }
    int w() const { return w_; }
    const float* at(int i) const;  // planar 3*h*w, values in [0,255]

private:
    int n_, h_, w_;
    std::vector<float> data_;
};

// Per-sample draws recorded by the forward operators so the augmented branch
// can push gradients back to the mask. All batches are planar float
// [B, C, H, W] with C = 3k (k stacked frames), values in [0,255].
struct AugPlan {
    int B = 0, C = 0, H = 0, W = 0;
    bool shifted = false, overlaid = false, jittered = false;
    int pad = 0;
    std::vector<int> ox, oy;         // shift offset per sample, in [0, 2*pad]
    float alpha = 0.0f;
    std::vector<float> contrast;     // factor per sample
    std::vector<float> cos_h, sin_h; // hue rotation per sample
    std::vector<float> mean;         // pre-contrast per-sample mean
    std::vector<std::uint8_t> gate;  // clip pass-through per element
};

// Replicate-pad by `pad`, then crop each stack at one per-sample offset
// (shared by all channels). pad=0 is an exact identity.
void random_shift(const float* in, float* out, int B, int C, int H, int W, int pad, Rng& rng,
                  AugPlan* plan = nullptr);

// out = (1-alpha)*in + alpha*texture, one texture draw per sample, shared by
// all k frames. alpha=0 is an exact identity.
void random_overlay(const float* in, float* out, int B, int C, int H, int W,
                    const TextureBank& bank, float alpha, Rng& rng, AugPlan* plan = nullptr);

// Per-sample contrast about the sample mean, then per-sample hue rotation
// about the gray axis, then clip to [0,255]. Zero strengths skip the
// corresponding transform exactly.
void random_color_jitter(const float* in, float* out, int B, int C, int H, int W, float contrast,
                         float hue, Rng& rng, AugPlan* plan = nullptr);

// Composition shift -> overlay -> jitter (or one uniformly drawn operator
// when spec.compose_all is false), with draws from the stream
// (spec.seed, "aug", call_index). Deterministic per (input, spec, call).
AugPlan apply_aug(const float* in, float* out, int B, int C, int H, int W,
                  const AugmentationSpec& spec, const TextureBank& bank,
                  std::uint64_t call_index);

// Adjoint of apply_aug with respect to the input batch. Accumulates into din.
void apply_aug_backward(const AugPlan& plan, const float* dout, float* din);

}  // namespace deguv
