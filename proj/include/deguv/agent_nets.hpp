#pragma once

#include "deguv/nn.hpp"

namespace deguv {

inline constexpr int kLatentDim = 50;
inline constexpr int kActionDim = 3;
inline constexpr int kMlpWidth = 256;
inline constexpr float kLogStdMin = -10.0f;
inline constexpr float kLogStdMax = 2.0f;

// Pixel encoder: scales [0,255] input to [0,1], runs four 3x3 convolutions
// (stride 2,2,1,1, 32 channels each) with ReLU, then linear -> 50,
// layer norm, tanh. Latent components therefore lie strictly inside (-1,1).
class Encoder {
public:
    struct Ctx {
        ConvCtx c1, c2, c3, c4;
        Tensor a1, a2, a3, a4;
        LinCtx lin;
        LayerNormCtx ln;
        Tensor z;
    };

    Encoder(int k, Rng& init);

    // masked_rgb: [B, 3k, 64, 64] in [0,255] -> latent [B, 50]
    Tensor forward(const Tensor& masked_rgb, Ctx* ctx = nullptr) const;
    // accumulates into param grads and (if given) *dx, which must be
    // pre-shaped [B, 3k, 64, 64]; dx is reported in the input's [0,255] scale
    void backward(const Ctx& ctx, const Tensor& dz, Tensor* dx, bool param_grads = true);

    std::vector<Param*> params();
    int k() const { return k_; }

private:
    int k_;
    Conv2d conv1_, conv2_, conv3_, conv4_;
    Linear fc_;
    LayerNorm ln_;
};

// Squashed-Gaussian policy head: latent -> two 256 ReLU layers -> action mean
// and log-std (clamped to [-10, 2]). Sampling is reparameterized, actions are
// tanh-squashed into (-1,1), and log_prob includes the squash correction.
class Actor {
public:
    struct Ctx {
        LinCtx l1, l2, l3;
        Tensor h1, h2;
        Tensor z;            // saved input
        Tensor mean;
        Tensor raw_log_std;  // pre-clamp, for the clamp gate
        Tensor log_std;
        Tensor eps;          // standard normal draws (zero when deterministic)
        Tensor action;
        Tensor log_prob;     // [B]
    };

    explicit Actor(Rng& init);

    // z: [B, 50] -> action [B, 3]; rng == nullptr takes the mean action
    Tensor sample(const Tensor& z, Rng* rng, Tensor* log_prob = nullptr,
                  Ctx* ctx = nullptr) const;
    // daction: [B,3] and dlogp: [B]; either may be empty to mean zero.
    // Accumulates into dz (pre-shaped [B,50]) if given.
    void backward(const Ctx& ctx, const Tensor& daction, const Tensor& dlogp, Tensor* dz,
                  bool param_grads = true);

    std::vector<Param*> params();

private:
    Linear l1_, l2_, l3_;
};

// Two independent Q heads over the concatenated (latent, action) input,
// each latent+3 -> 256 -> 256 -> 1 with ReLU.
class TwinCritic {
public:
    struct HeadCtx {
        LinCtx l1, l2, l3;
        Tensor h1, h2;
    };
    struct Ctx {
        Tensor in;  // [B, 53]
        HeadCtx q1, q2;
    };

    explicit TwinCritic(Rng& init);

    std::pair<Tensor, Tensor> forward(const Tensor& z, const Tensor& a,
                                      Ctx* ctx = nullptr) const;
    // dq1/dq2: [B,1]; accumulates into dz [B,50] and da [B,3] if given
    void backward(const Ctx& ctx, const Tensor& dq1, const Tensor& dq2, Tensor* dz, Tensor* da,
                  bool param_grads = true);

    std::vector<Param*> params();

private:
    Linear q1l1_, q1l2_, q1l3_;
    Linear q2l1_, q2l2_, q2l3_;
    Tensor head(const Linear& l1, const Linear& l2, const Linear& l3, const Tensor& in,
                HeadCtx* ctx) const;
    void head_backward(Linear& l1, Linear& l2, Linear& l3, const HeadCtx& ctx, const Tensor& dq,
                       Tensor* din, bool param_grads);
};

// theta_tgt <- (1 - rate) * theta_tgt + rate * theta, elementwise.
void ema_update(const std::vector<Param*>& target, const std::vector<Param*>& online, float rate);

// target <- online (used to initialize target networks)
void hard_copy(const std::vector<Param*>& target, const std::vector<Param*>& online);

}  // namespace deguv
