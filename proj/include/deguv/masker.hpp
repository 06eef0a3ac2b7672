#pragma once

#include "deguv/config.hpp"
#include "deguv/env.hpp"
#include "deguv/nn.hpp"

namespace deguv {

// Split a stacked observation into planar tensors: rgb [1, 3k, H, W] in
// [0,255] and depth [1, k, H, W] in [0,1].
void split_observation(const Observation& o, Tensor& rgb, Tensor& depth);

// Elementwise clamp to [0,1]; exact 0 and 1 are attainable, which lets the
// mask eliminate pixels outright.
Tensor hardtanh01(const Tensor& x);
// pre is the pre-clamp input; gradient passes only strictly inside (0,1)
void hardtanh01_backward(const Tensor& pre, const Tensor& dy, Tensor* dx);

// Depth-driven relevance masker: three same-size 3x3 convolutions
// (k -> 32 -> 32 -> out) with ReLU between and hardtanh01 on top.
// out = 1 shared mask per stack, or k per-frame masks.
class Masker {
public:
    Masker(int k, bool per_frame, Rng& init);

    struct Ctx {
        ConvCtx c1, c2, c3;
        Tensor a1, a2;  // post-relu activations
        Tensor pre;     // pre-clamp output
    };

    // depth: [B, k, H, W] in [0,1] -> mask: [B, out, H, W] in [0,1]
    Tensor forward(const Tensor& depth, Ctx* ctx = nullptr) const;
    void backward(const Ctx& ctx, const Tensor& dmask, bool param_grads = true);

    std::vector<Param*> params();
    int frame_channels() const { return k_; }
    int mask_channels() const { return per_frame_ ? k_ : 1; }
    bool per_frame() const { return per_frame_; }

private:
    int k_;
    bool per_frame_;
    Conv2d conv1_, conv2_, conv3_;
};

// masked[b, 3f+c] = rgb[b, 3f+c] * mask[b, f or 0]; mask broadcasts over the
// three color channels and, for a shared mask, over the k frames.
Tensor apply_mask(const Tensor& rgb, const Tensor& mask);
void apply_mask_backward(const Tensor& rgb, const Tensor& mask, const Tensor& dout, Tensor* drgb,
                         Tensor* dmask);

// Eq-style split + mask in one call: mask = forward(depth), return the
// masked RGB. mask_out receives the mask when non-null.
Tensor dgmask(const Masker& m, const Tensor& rgb, const Tensor& depth,
              Masker::Ctx* ctx = nullptr, Tensor* mask_out = nullptr);

double reveal_fraction(const Tensor& mask);                               // mean mask value
double reveal_fraction_thresholded(const Tensor& mask, float t = 0.05f);  // share of values > t

}  // namespace deguv
