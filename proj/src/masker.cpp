#include "deguv/masker.hpp"

namespace deguv {

void split_observation(const Observation& o, Tensor& rgb, Tensor& depth) {
    const int k = o.k, h = o.h, w = o.w;
    rgb = Tensor({1, 3 * k, h, w});
    depth = Tensor({1, k, h, w});
    const std::size_t fr = std::size_t(h) * w;
    for (int f = 0; f < k; ++f) {
        const std::uint8_t* src = o.rgb.data() + std::size_t(f) * fr * 3;
        for (int c = 0; c < 3; ++c) {
            float* dst = rgb.data() + (std::size_t(3 * f + c)) * fr;
            for (std::size_t i = 0; i < fr; ++i) dst[i] = float(src[i * 3 + c]);
        }
        const float* dsrc = o.depth.data() + std::size_t(f) * fr;
        std::copy(dsrc, dsrc + fr, depth.data() + std::size_t(f) * fr);
    }
}

Tensor hardtanh01(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.vec()) v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    return y;
}

void hardtanh01_backward(const Tensor& pre, const Tensor& dy, Tensor* dx) {
    for (std::int64_t i = 0; i < pre.size(); ++i)
        if (pre[i] > 0.0f && pre[i] < 1.0f) (*dx)[i] += dy[i];
}

Masker::Masker(int k, bool per_frame, Rng& init)
    : k_(k),
      per_frame_(per_frame),
      conv1_("masker.conv1", k, 32, 3, 1, 1, init),
      conv2_("masker.conv2", 32, 32, 3, 1, 1, init),
      conv3_("masker.conv3", 32, per_frame ? k : 1, 3, 1, 1, init) {
    // start near mask = 1 so no information is destroyed before learning
    for (auto& v : conv3_.w.value.vec()) v *= 0.1f;
    conv3_.b.value.fill(1.0f);
}

Tensor Masker::forward(const Tensor& depth, Ctx* ctx) const {
    const auto& s = depth.shape();
    if (s.size() != 4 || s[1] != k_) throw DataError("masker depth stack shape mismatch");
    Ctx local;
    Ctx* c = ctx ? ctx : &local;
    c->a1 = relu(conv1_.forward(depth, ctx ? &c->c1 : nullptr));
    c->a2 = relu(conv2_.forward(c->a1, ctx ? &c->c2 : nullptr));
    c->pre = conv3_.forward(c->a2, ctx ? &c->c3 : nullptr);
    return hardtanh01(c->pre);
}

void Masker::backward(const Ctx& ctx, const Tensor& dmask, bool param_grads) {
    Tensor dpre(ctx.pre.shape());
    hardtanh01_backward(ctx.pre, dmask, &dpre);
    Tensor da2(ctx.a2.shape());
    conv3_.backward(ctx.c3, dpre, &da2, param_grads);
    Tensor da2_pre(ctx.a2.shape());
    relu_backward(ctx.a2, da2, &da2_pre);
    Tensor da1(ctx.a1.shape());
    conv2_.backward(ctx.c2, da2_pre, &da1, param_grads);
    Tensor da1_pre(ctx.a1.shape());
    relu_backward(ctx.a1, da1, &da1_pre);
    conv1_.backward(ctx.c1, da1_pre, nullptr, param_grads);
}

std::vector<Param*> Masker::params() {
    std::vector<Param*> out;
    for (auto* layer : {&conv1_, &conv2_, &conv3_})
        for (Param* p : layer->params()) out.push_back(p);
    return out;
}

Tensor apply_mask(const Tensor& rgb, const Tensor& mask) {
    const auto& rs = rgb.shape();
    const auto& ms = mask.shape();
    if (rs.size() != 4 || ms.size() != 4 || rs[0] != ms[0] || rs[2] != ms[2] || rs[3] != ms[3] ||
        rs[1] % 3 != 0)
        throw DataError("apply_mask shape mismatch");
    const int B = rs[0], C = rs[1], H = rs[2], W = rs[3], k = C / 3, mch = ms[1];
    if (mch != 1 && mch != k) throw DataError("mask channels must be 1 or k");
    Tensor out(rs);
    const std::size_t fr = std::size_t(H) * W;
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const float* src = rgb.data() + (std::size_t(b) * C + c) * fr;
            const float* m = mask.data() + (std::size_t(b) * mch + (mch == 1 ? 0 : c / 3)) * fr;
            float* dst = out.data() + (std::size_t(b) * C + c) * fr;
            for (std::size_t i = 0; i < fr; ++i) dst[i] = src[i] * m[i];
        }
    return out;
}

void apply_mask_backward(const Tensor& rgb, const Tensor& mask, const Tensor& dout, Tensor* drgb,
                         Tensor* dmask) {
    const auto& rs = rgb.shape();
    const int B = rs[0], C = rs[1], H = rs[2], W = rs[3], k = C / 3, mch = mask.shape()[1];
    const std::size_t fr = std::size_t(H) * W;
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const std::size_t at = (std::size_t(b) * C + c) * fr;
            const std::size_t mat = (std::size_t(b) * mch + (mch == 1 ? 0 : c / 3)) * fr;
            for (std::size_t i = 0; i < fr; ++i) {
                float g = dout[at + i];
                if (drgb) (*drgb)[at + i] += g * mask[mat + i];
                if (dmask) (*dmask)[mat + i] += g * rgb[at + i];
            }
        }
    (void)k;
}

Tensor dgmask(const Masker& m, const Tensor& rgb, const Tensor& depth, Masker::Ctx* ctx,
              Tensor* mask_out) {
    Tensor mask = m.forward(depth, ctx);
    Tensor out = apply_mask(rgb, mask);
    if (mask_out) *mask_out = std::move(mask);
    return out;
}

double reveal_fraction(const Tensor& mask) {
    if (mask.size() == 0) return 0.0;
    double acc = 0.0;
    for (std::int64_t i = 0; i < mask.size(); ++i) acc += mask[i];
    return acc / double(mask.size());
}

double reveal_fraction_thresholded(const Tensor& mask, float t) {
    if (mask.size() == 0) return 0.0;
    std::int64_t n = 0;
    for (std::int64_t i = 0; i < mask.size(); ++i)
        if (mask[i] > t) ++n;
    return double(n) / double(mask.size());
}

}  // namespace deguv
