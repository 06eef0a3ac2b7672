#include "deguv/agent_nets.hpp"

#include <cmath>

namespace deguv {

namespace {
constexpr float kTanhEps = 1e-6f;
constexpr float kHalfLog2Pi = 0.91893853320467274f;  // 0.5*log(2*pi)
constexpr float kInvScale = 1.0f / 255.0f;
constexpr int kFlatDim = 32 * 11 * 11;
}  // namespace

Encoder::Encoder(int k, Rng& init)
    : k_(k),
      conv1_("enc.conv1", 3 * k, 32, 3, 2, 0, init),
      conv2_("enc.conv2", 32, 32, 3, 2, 0, init),
      conv3_("enc.conv3", 32, 32, 3, 1, 0, init),
      conv4_("enc.conv4", 32, 32, 3, 1, 0, init),
      fc_("enc.fc", kFlatDim, kLatentDim, init),
      ln_("enc.ln", kLatentDim) {
    if (k < 1) throw ConfigError("encoder frame stack must be >= 1");
}

Tensor Encoder::forward(const Tensor& masked_rgb, Ctx* ctx) const {
    const auto& s = masked_rgb.shape();
    if (s.size() != 4 || s[1] != 3 * k_ || s[2] != 64 || s[3] != 64)
        throw DataError("encoder expects input [B, 3k, 64, 64]");
    const int B = s[0];

    Tensor xs = masked_rgb;
    for (auto& v : xs.vec()) v *= kInvScale;

    Ctx local;
    Ctx* c = ctx ? ctx : &local;
    c->a1 = relu(conv1_.forward(xs, ctx ? &c->c1 : nullptr));
    c->a2 = relu(conv2_.forward(c->a1, ctx ? &c->c2 : nullptr));
    c->a3 = relu(conv3_.forward(c->a2, ctx ? &c->c3 : nullptr));
    c->a4 = relu(conv4_.forward(c->a3, ctx ? &c->c4 : nullptr));

    Tensor flat = c->a4;
    flat.reshape({B, kFlatDim});
    Tensor lin = fc_.forward(flat, ctx ? &c->lin : nullptr);
    Tensor normed = ln_.forward(lin, ctx ? &c->ln : nullptr);
    c->z = tanh_t(normed);
    return c->z;
}

void Encoder::backward(const Ctx& ctx, const Tensor& dz, Tensor* dx, bool param_grads) {
    Tensor dnorm(ctx.z.shape());
    tanh_backward(ctx.z, dz, &dnorm);
    Tensor dlin(ctx.z.shape());
    ln_.backward(ctx.ln, dnorm, &dlin, param_grads);
    Tensor dflat(ctx.lin.x.shape());
    fc_.backward(ctx.lin, dlin, &dflat, param_grads);
    dflat.reshape(ctx.a4.shape());

    Tensor d4(ctx.a4.shape());
    relu_backward(ctx.a4, dflat, &d4);
    Tensor d3(ctx.a3.shape());
    conv4_.backward(ctx.c4, d4, &d3, param_grads);
    Tensor d3p(ctx.a3.shape());
    relu_backward(ctx.a3, d3, &d3p);
    Tensor d2(ctx.a2.shape());
    conv3_.backward(ctx.c3, d3p, &d2, param_grads);
    Tensor d2p(ctx.a2.shape());
    relu_backward(ctx.a2, d2, &d2p);
    Tensor d1(ctx.a1.shape());
    conv2_.backward(ctx.c2, d2p, &d1, param_grads);
    Tensor d1p(ctx.a1.shape());
    relu_backward(ctx.a1, d1, &d1p);
    if (dx) {
        Tensor dxs(ctx.c1.x.shape());
        conv1_.backward(ctx.c1, d1p, &dxs, param_grads);
        for (std::int64_t i = 0; i < dxs.size(); ++i) (*dx)[i] += dxs[i] * kInvScale;
    } else {
        conv1_.backward(ctx.c1, d1p, nullptr, param_grads);
    }
}

std::vector<Param*> Encoder::params() {
    std::vector<Param*> out;
    for (auto* layer : {&conv1_, &conv2_, &conv3_, &conv4_})
        for (Param* p : layer->params()) out.push_back(p);
    for (Param* p : fc_.params()) out.push_back(p);
    for (Param* p : ln_.params()) out.push_back(p);
    return out;
}

Actor::Actor(Rng& init)
    : l1_("actor.l1", kLatentDim, kMlpWidth, init),
      l2_("actor.l2", kMlpWidth, kMlpWidth, init),
      l3_("actor.l3", kMlpWidth, 2 * kActionDim, init) {}

Tensor Actor::sample(const Tensor& z, Rng* rng, Tensor* log_prob, Ctx* ctx) const {
    const auto& s = z.shape();
    if (s.size() != 2 || s[1] != kLatentDim) throw DataError("actor expects latent [B, 50]");
    const int B = s[0];

    Ctx local;
    Ctx* c = ctx ? ctx : &local;
    c->z = z;
    c->h1 = relu(l1_.forward(z, ctx ? &c->l1 : nullptr));
    c->h2 = relu(l2_.forward(c->h1, ctx ? &c->l2 : nullptr));
    Tensor raw = l3_.forward(c->h2, ctx ? &c->l3 : nullptr);

    c->mean = Tensor({B, kActionDim});
    c->raw_log_std = Tensor({B, kActionDim});
    c->log_std = Tensor({B, kActionDim});
    c->eps = Tensor({B, kActionDim});
    c->action = Tensor({B, kActionDim});
    c->log_prob = Tensor({B});

    for (int b = 0; b < B; ++b) {
        double lp = 0.0;
        for (int j = 0; j < kActionDim; ++j) {
            const std::int64_t i = std::int64_t(b) * kActionDim + j;
            const float m = raw[std::int64_t(b) * 2 * kActionDim + j];
            const float rls = raw[std::int64_t(b) * 2 * kActionDim + kActionDim + j];
            const float ls = std::min(kLogStdMax, std::max(kLogStdMin, rls));
            const float e = rng ? rng->normal() : 0.0f;
            const float a = std::tanh(m + std::exp(ls) * e);
            c->mean[i] = m;
            c->raw_log_std[i] = rls;
            c->log_std[i] = ls;
            c->eps[i] = e;
            c->action[i] = a;
            lp += -0.5 * double(e) * double(e) - double(ls) - double(kHalfLog2Pi) -
                  std::log(1.0 - double(a) * double(a) + double(kTanhEps));
        }
        c->log_prob[b] = float(lp);
    }
    if (log_prob) *log_prob = c->log_prob;
    return c->action;
}

void Actor::backward(const Ctx& ctx, const Tensor& daction, const Tensor& dlogp, Tensor* dz,
                     bool param_grads) {
    const int B = ctx.z.shape()[0];
    Tensor draw({B, 2 * kActionDim});
    for (int b = 0; b < B; ++b) {
        const float gl = dlogp.size() ? dlogp[b] : 0.0f;
        for (int j = 0; j < kActionDim; ++j) {
            const std::int64_t i = std::int64_t(b) * kActionDim + j;
            const float a = ctx.action[i];
            const float ga = daction.size() ? daction[i] : 0.0f;
            const float sq = 1.0f - a * a;
            // squash correction: d(-log(1 - a^2 + eps))/du with a = tanh(u)
            const float t = 2.0f * a * sq / (sq + kTanhEps);
            const float gu = ga * sq + gl * t;
            const float sde = std::exp(ctx.log_std[i]) * ctx.eps[i];
            float gls = gu * sde - gl;
            const float rls = ctx.raw_log_std[i];
            if (rls <= kLogStdMin || rls >= kLogStdMax) gls = 0.0f;
            draw[std::int64_t(b) * 2 * kActionDim + j] = gu;
            draw[std::int64_t(b) * 2 * kActionDim + kActionDim + j] = gls;
        }
    }
    Tensor dh2(ctx.h2.shape());
    l3_.backward(ctx.l3, draw, &dh2, param_grads);
    Tensor dh2p(ctx.h2.shape());
    relu_backward(ctx.h2, dh2, &dh2p);
    Tensor dh1(ctx.h1.shape());
    l2_.backward(ctx.l2, dh2p, &dh1, param_grads);
    Tensor dh1p(ctx.h1.shape());
    relu_backward(ctx.h1, dh1, &dh1p);
    l1_.backward(ctx.l1, dh1p, dz, param_grads);
}

std::vector<Param*> Actor::params() {
    std::vector<Param*> out;
    for (auto* layer : {&l1_, &l2_, &l3_})
        for (Param* p : layer->params()) out.push_back(p);
    return out;
}

TwinCritic::TwinCritic(Rng& init)
    : q1l1_("critic.q1.l1", kLatentDim + kActionDim, kMlpWidth, init),
      q1l2_("critic.q1.l2", kMlpWidth, kMlpWidth, init),
      q1l3_("critic.q1.l3", kMlpWidth, 1, init),
      q2l1_("critic.q2.l1", kLatentDim + kActionDim, kMlpWidth, init),
      q2l2_("critic.q2.l2", kMlpWidth, kMlpWidth, init),
      q2l3_("critic.q2.l3", kMlpWidth, 1, init) {}

Tensor TwinCritic::head(const Linear& l1, const Linear& l2, const Linear& l3, const Tensor& in,
                        HeadCtx* ctx) const {
    HeadCtx local;
    HeadCtx* c = ctx ? ctx : &local;
    c->h1 = relu(l1.forward(in, ctx ? &c->l1 : nullptr));
    c->h2 = relu(l2.forward(c->h1, ctx ? &c->l2 : nullptr));
    return l3.forward(c->h2, ctx ? &c->l3 : nullptr);
}

std::pair<Tensor, Tensor> TwinCritic::forward(const Tensor& z, const Tensor& a, Ctx* ctx) const {
    const auto& zs = z.shape();
    const auto& as = a.shape();
    if (zs.size() != 2 || zs[1] != kLatentDim) throw DataError("critic expects latent [B, 50]");
    if (as.size() != 2 || as[0] != zs[0] || as[1] != kActionDim)
        throw DataError("critic expects action [B, 3]");
    const int B = zs[0];

    Ctx local;
    Ctx* c = ctx ? ctx : &local;
    c->in = Tensor({B, kLatentDim + kActionDim});
    for (int b = 0; b < B; ++b) {
        float* row = c->in.data() + std::size_t(b) * (kLatentDim + kActionDim);
        const float* zr = z.data() + std::size_t(b) * kLatentDim;
        const float* ar = a.data() + std::size_t(b) * kActionDim;
        std::copy(zr, zr + kLatentDim, row);
        std::copy(ar, ar + kActionDim, row + kLatentDim);
    }
    Tensor out1 = head(q1l1_, q1l2_, q1l3_, c->in, ctx ? &c->q1 : nullptr);
    Tensor out2 = head(q2l1_, q2l2_, q2l3_, c->in, ctx ? &c->q2 : nullptr);
    return {out1, out2};
}

void TwinCritic::head_backward(Linear& l1, Linear& l2, Linear& l3, const HeadCtx& ctx,
                               const Tensor& dq, Tensor* din, bool param_grads) {
    Tensor dh2(ctx.h2.shape());
    l3.backward(ctx.l3, dq, &dh2, param_grads);
    Tensor dh2p(ctx.h2.shape());
    relu_backward(ctx.h2, dh2, &dh2p);
    Tensor dh1(ctx.h1.shape());
    l2.backward(ctx.l2, dh2p, &dh1, param_grads);
    Tensor dh1p(ctx.h1.shape());
    relu_backward(ctx.h1, dh1, &dh1p);
    l1.backward(ctx.l1, dh1p, din, param_grads);
}

void TwinCritic::backward(const Ctx& ctx, const Tensor& dq1, const Tensor& dq2, Tensor* dz,
                          Tensor* da, bool param_grads) {
    Tensor din(ctx.in.shape());
    head_backward(q1l1_, q1l2_, q1l3_, ctx.q1, dq1, &din, param_grads);
    head_backward(q2l1_, q2l2_, q2l3_, ctx.q2, dq2, &din, param_grads);
    if (!dz && !da) return;
    const int B = ctx.in.shape()[0];
    for (int b = 0; b < B; ++b) {
        const float* row = din.data() + std::size_t(b) * (kLatentDim + kActionDim);
        if (dz)
            for (int j = 0; j < kLatentDim; ++j) (*dz)[std::int64_t(b) * kLatentDim + j] += row[j];
        if (da)
            for (int j = 0; j < kActionDim; ++j)
                (*da)[std::int64_t(b) * kActionDim + j] += row[kLatentDim + j];
    }
}

std::vector<Param*> TwinCritic::params() {
    std::vector<Param*> out;
    for (auto* layer : {&q1l1_, &q1l2_, &q1l3_, &q2l1_, &q2l2_, &q2l3_})
        for (Param* p : layer->params()) out.push_back(p);
    return out;
}

void ema_update(const std::vector<Param*>& target, const std::vector<Param*>& online, float rate) {
    if (target.size() != online.size()) throw DataError("ema_update parameter count mismatch");
    for (std::size_t p = 0; p < target.size(); ++p) {
        Tensor& t = target[p]->value;
        const Tensor& o = online[p]->value;
        if (t.shape() != o.shape())
            throw DataError("ema_update shape mismatch for " + target[p]->name);
        for (std::int64_t i = 0; i < t.size(); ++i) t[i] = (1.0f - rate) * t[i] + rate * o[i];
    }
}

void hard_copy(const std::vector<Param*>& target, const std::vector<Param*>& online) {
    if (target.size() != online.size()) throw DataError("hard_copy parameter count mismatch");
    for (std::size_t p = 0; p < target.size(); ++p) {
        if (target[p]->value.shape() != online[p]->value.shape())
            throw DataError("hard_copy shape mismatch for " + target[p]->name);
        target[p]->value.vec() = online[p]->value.vec();
    }
}

}  // namespace deguv
