#include "deguv/augment.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace deguv {
namespace {

float clampf(float x, float lo, float hi) { return std::min(std::max(x, lo), hi); }

void fill_noise_lattice(float* img, int h, int w, Rng& rng) {
    const int n = 5;
    std::vector<float> lat(std::size_t(n) * n * 3);
    for (auto& v : lat) v = float(rng.uniform(0.0, 255.0));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float fx = float(x) * float(n - 1) / float(w - 1);
            float fy = float(y) * float(n - 1) / float(h - 1);
            int ix = std::min(int(fx), n - 2), iy = std::min(int(fy), n - 2);
            float tx = fx - float(ix), ty = fy - float(iy);
            for (int c = 0; c < 3; ++c) {
                auto at = [&](int gx, int gy) { return lat[(std::size_t(gy) * n + gx) * 3 + c]; };
                img[(std::size_t(c) * h + y) * w + x] =
                    (1 - tx) * (1 - ty) * at(ix, iy) + tx * (1 - ty) * at(ix + 1, iy) +
                    (1 - tx) * ty * at(ix, iy + 1) + tx * ty * at(ix + 1, iy + 1);
            }
        }
}

void fill_gradient(float* img, int h, int w, Rng& rng) {
    float ca[3], cb[3];
    for (int c = 0; c < 3; ++c) ca[c] = float(rng.uniform(0.0, 255.0));
    for (int c = 0; c < 3; ++c) cb[c] = float(rng.uniform(0.0, 255.0));
    float ang = float(rng.uniform(0.0, 6.283185307179586));
    float dx = std::cos(ang), dy = std::sin(ang);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float t = 0.5f + 0.5f * (dx * (float(x) / (w - 1) - 0.5f) +
                                     dy * (float(y) / (h - 1) - 0.5f)) / 0.7071068f;
            t = clampf(t, 0.0f, 1.0f);
            for (int c = 0; c < 3; ++c)
                img[(std::size_t(c) * h + y) * w + x] = (1 - t) * ca[c] + t * cb[c];
        }
}

void fill_checker(float* img, int h, int w, Rng& rng) {
    float ca[3], cb[3];
    for (int c = 0; c < 3; ++c) ca[c] = float(rng.uniform(0.0, 255.0));
    for (int c = 0; c < 3; ++c) cb[c] = float(rng.uniform(0.0, 255.0));
    int cell = 4 << rng.uniform_int(0, 2);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            bool a = ((x / cell) + (y / cell)) % 2 == 0;
            for (int c = 0; c < 3; ++c)
                img[(std::size_t(c) * h + y) * w + x] = a ? ca[c] : cb[c];
        }
}

void fill_stripes(float* img, int h, int w, Rng& rng) {
    float ca[3], cb[3];
    for (int c = 0; c < 3; ++c) ca[c] = float(rng.uniform(0.0, 255.0));
    for (int c = 0; c < 3; ++c) cb[c] = float(rng.uniform(0.0, 255.0));
    float ang = float(rng.uniform(0.0, 3.14159265));
    float freq = float(rng.uniform(0.15, 0.7));
    float phase = float(rng.uniform(0.0, 6.283185307179586));
    float dx = std::cos(ang), dy = std::sin(ang);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float t = 0.5f + 0.5f * std::sin(freq * (dx * x + dy * y) + phase);
            for (int c = 0; c < 3; ++c)
                img[(std::size_t(c) * h + y) * w + x] = (1 - t) * ca[c] + t * cb[c];
        }
}

}  // namespace

TextureBank::TextureBank(std::uint64_t seed, int n, int h, int w) : n_(n), h_(h), w_(w) {
    if (n <= 0 || h <= 0 || w <= 0) throw ConfigError("texture bank needs positive dimensions");
    data_.assign(std::size_t(n) * 3 * h * w, 0.0f);
    for (int i = 0; i < n; ++i) {
        Rng rng = Rng::stream(seed, "texture", std::uint64_t(i));
        float* img = data_.data() + std::size_t(i) * 3 * h * w;
        switch (i % 4) {
            case 0: fill_noise_lattice(img, h, w, rng); break;
            case 1: fill_gradient(img, h, w, rng); break;
            case 2: fill_checker(img, h, w, rng); break;
            default: fill_stripes(img, h, w, rng); break;
        }
    }
}

const float* TextureBank::at(int i) const {
    if (i < 0 || i >= n_) throw DataError("texture index out of range");
    return data_.data() + std::size_t(i) * 3 * h_ * w_;
}

void random_shift(const float* in, float* out, int B, int C, int H, int W, int pad, Rng& rng,
                  AugPlan* plan) {
    if (pad < 0 || pad >= H || pad >= W)
        throw ConfigError("shift pad must satisfy 0 <= pad < image size");
    if (plan) {
        plan->B = B; plan->C = C; plan->H = H; plan->W = W;
        plan->pad = pad;
    }
    if (pad == 0) {
        if (out != in) std::memcpy(out, in, std::size_t(B) * C * H * W * sizeof(float));
        return;
    }
    const int ph = H + 2 * pad, pw = W + 2 * pad;
    std::vector<float> padded(std::size_t(ph) * pw);
    for (int b = 0; b < B; ++b) {
        int ox = rng.uniform_int(0, 2 * pad);
        int oy = rng.uniform_int(0, 2 * pad);
        if (plan) {
            plan->ox.push_back(ox);
            plan->oy.push_back(oy);
            plan->shifted = true;
        }
        for (int c = 0; c < C; ++c) {
            const float* src = in + (std::size_t(b) * C + c) * H * W;
            for (int y = 0; y < ph; ++y) {
                int sy = std::min(std::max(y - pad, 0), H - 1);
                for (int x = 0; x < pw; ++x) {
                    int sx = std::min(std::max(x - pad, 0), W - 1);
                    padded[std::size_t(y) * pw + x] = src[std::size_t(sy) * W + sx];
                }
            }
            float* dst = out + (std::size_t(b) * C + c) * H * W;
            for (int y = 0; y < H; ++y)
                std::memcpy(dst + std::size_t(y) * W, padded.data() + std::size_t(y + oy) * pw + ox,
                            std::size_t(W) * sizeof(float));
        }
    }
}

void random_overlay(const float* in, float* out, int B, int C, int H, int W,
                    const TextureBank& bank, float alpha, Rng& rng, AugPlan* plan) {
    if (alpha < 0.0f || alpha > 1.0f) throw ConfigError("overlay alpha must lie in [0,1]");
    if (bank.h() != H || bank.w() != W) throw DataError("overlay texture shape mismatch");
    if (C % 3 != 0) throw DataError("rgb batch channel count must be a multiple of 3");
    if (plan) {
        plan->B = B; plan->C = C; plan->H = H; plan->W = W;
        plan->alpha = alpha;
    }
    if (alpha == 0.0f) {
        if (out != in) std::memcpy(out, in, std::size_t(B) * C * H * W * sizeof(float));
        return;
    }
    if (plan) plan->overlaid = true;
    const std::size_t fr = std::size_t(H) * W;
    for (int b = 0; b < B; ++b) {
        const float* tex = bank.at(rng.uniform_int(0, bank.size() - 1));
        for (int c = 0; c < C; ++c) {
            const float* src = in + (std::size_t(b) * C + c) * fr;
            const float* ov = tex + std::size_t(c % 3) * fr;
            float* dst = out + (std::size_t(b) * C + c) * fr;
            for (std::size_t i = 0; i < fr; ++i)
                dst[i] = (1.0f - alpha) * src[i] + alpha * ov[i];
        }
    }
}

void random_color_jitter(const float* in, float* out, int B, int C, int H, int W, float contrast,
                         float hue, Rng& rng, AugPlan* plan) {
    if (contrast < 0.0f || hue < 0.0f) throw ConfigError("jitter strengths must be >= 0");
    if (C % 3 != 0) throw DataError("rgb batch channel count must be a multiple of 3");
    if (plan) {
        plan->B = B; plan->C = C; plan->H = H; plan->W = W;
    }
    const std::size_t fr = std::size_t(H) * W;
    const std::size_t per = std::size_t(C) * fr;
    if (contrast == 0.0f && hue == 0.0f) {
        if (out != in) std::memcpy(out, in, std::size_t(B) * per * sizeof(float));
        return;
    }
    if (plan) {
        plan->jittered = true;
        plan->gate.assign(std::size_t(B) * per, 1);
    }
    const int k = C / 3;
    for (int b = 0; b < B; ++b) {
        const float* src = in + std::size_t(b) * per;
        float* dst = out + std::size_t(b) * per;
        float cf = contrast > 0.0f ? float(rng.uniform(1.0 - contrast, 1.0 + contrast)) : 1.0f;
        float ang = hue > 0.0f ? float(rng.uniform(-double(hue), double(hue))) : 0.0f;
        float ch = std::cos(ang), sh = std::sin(ang) / 1.7320508f;
        float mu = 0.0f;
        if (contrast > 0.0f) {
            double acc = 0.0;
            for (std::size_t i = 0; i < per; ++i) acc += src[i];
            mu = float(acc / double(per));
            for (std::size_t i = 0; i < per; ++i) dst[i] = mu + cf * (src[i] - mu);
        } else if (dst != src) {
            std::memcpy(dst, src, per * sizeof(float));
        }
        if (plan) {
            plan->contrast.push_back(cf);
            plan->mean.push_back(mu);
            plan->cos_h.push_back(ch);
            plan->sin_h.push_back(sh);
        }
        if (hue > 0.0f) {
            // rotation about the gray axis; gray pixels are fixed points
            for (int f = 0; f < k; ++f) {
                float* pr = dst + std::size_t(3 * f) * fr;
                float* pg = pr + fr;
                float* pb = pg + fr;
                for (std::size_t i = 0; i < fr; ++i) {
                    float r = pr[i], g = pg[i], bl = pb[i];
                    float m = (r + g + bl) / 3.0f;
                    pr[i] = m + ch * (r - m) + sh * (bl - g);
                    pg[i] = m + ch * (g - m) + sh * (r - bl);
                    pb[i] = m + ch * (bl - m) + sh * (g - r);
                }
            }
        }
        std::uint8_t* gate = plan ? plan->gate.data() + std::size_t(b) * per : nullptr;
        for (std::size_t i = 0; i < per; ++i) {
            float v = dst[i];
            if (v < 0.0f || v > 255.0f) {
                dst[i] = clampf(v, 0.0f, 255.0f);
                if (gate) gate[i] = 0;
            }
        }
    }
}

AugPlan apply_aug(const float* in, float* out, int B, int C, int H, int W,
                  const AugmentationSpec& spec, const TextureBank& bank,
                  std::uint64_t call_index) {
    AugPlan plan;
    plan.B = B; plan.C = C; plan.H = H; plan.W = W;
    Rng rng = Rng::stream(spec.seed, "aug", call_index);

    bool do_shift = spec.shift_pad > 0;
    bool do_overlay = spec.overlay_alpha > 0.0f;
    bool do_jitter = spec.jitter_contrast > 0.0f || spec.jitter_hue > 0.0f;
    if (!spec.compose_all) {
        int n_on = int(do_shift) + int(do_overlay) + int(do_jitter);
        if (n_on > 1) {
            int pick = rng.uniform_int(0, n_on - 1);
            int seen = 0;
            bool keep_shift = do_shift && (seen++ == pick);
            bool keep_overlay = do_overlay && (seen++ == pick);
            bool keep_jitter = do_jitter && (seen++ == pick);
            do_shift = keep_shift;
            do_overlay = keep_overlay;
            do_jitter = keep_jitter;
        }
    }

    const std::size_t n = std::size_t(B) * C * H * W;
    if (do_shift)
        random_shift(in, out, B, C, H, W, spec.shift_pad, rng, &plan);
    else if (out != in)
        std::memcpy(out, in, n * sizeof(float));
    if (do_overlay) random_overlay(out, out, B, C, H, W, bank, spec.overlay_alpha, rng, &plan);
    if (do_jitter)
        random_color_jitter(out, out, B, C, H, W, spec.jitter_contrast, spec.jitter_hue, rng,
                            &plan);
    return plan;
}

void apply_aug_backward(const AugPlan& plan, const float* dout, float* din) {
    const int B = plan.B, C = plan.C, H = plan.H, W = plan.W;
    const std::size_t fr = std::size_t(H) * W;
    const std::size_t per = std::size_t(C) * fr;
    std::vector<float> g(dout, dout + std::size_t(B) * per);

    if (plan.jittered) {
        const int k = C / 3;
        for (int b = 0; b < B; ++b) {
            float* gb = g.data() + std::size_t(b) * per;
            const std::uint8_t* gate = plan.gate.data() + std::size_t(b) * per;
            for (std::size_t i = 0; i < per; ++i)
                if (!gate[i]) gb[i] = 0.0f;
            float ch = plan.cos_h[b], sh = plan.sin_h[b];
            if (ch != 1.0f || sh != 0.0f) {
                for (int f = 0; f < k; ++f) {
                    float* pr = gb + std::size_t(3 * f) * fr;
                    float* pg = pr + fr;
                    float* pb = pg + fr;
                    for (std::size_t i = 0; i < fr; ++i) {
                        float r = pr[i], gg = pg[i], bl = pb[i];
                        float m = (1.0f - ch) * (r + gg + bl) / 3.0f;
                        pr[i] = m + ch * r + sh * (gg - bl);
                        pg[i] = m + ch * gg + sh * (bl - r);
                        pb[i] = m + ch * bl + sh * (r - gg);
                    }
                }
            }
            float cf = plan.contrast[b];
            if (cf != 1.0f) {
                double acc = 0.0;
                for (std::size_t i = 0; i < per; ++i) acc += gb[i];
                float add = (1.0f - cf) * float(acc / double(per));
                for (std::size_t i = 0; i < per; ++i) gb[i] = cf * gb[i] + add;
            }
        }
    }
    if (plan.overlaid) {
        float scale = 1.0f - plan.alpha;
        for (auto& v : g) v *= scale;
    }
    if (plan.shifted) {
        const int pad = plan.pad;
        for (int b = 0; b < B; ++b) {
            int ox = plan.ox[b], oy = plan.oy[b];
            for (int c = 0; c < C; ++c) {
                const float* gc = g.data() + (std::size_t(b) * C + c) * fr;
                float* dst = din + (std::size_t(b) * C + c) * fr;
                for (int y = 0; y < H; ++y) {
                    int sy = std::min(std::max(y + oy - pad, 0), H - 1);
                    for (int x = 0; x < W; ++x) {
                        int sx = std::min(std::max(x + ox - pad, 0), W - 1);
                        dst[std::size_t(sy) * W + sx] += gc[std::size_t(y) * W + x];
                    }
                }
            }
        }
    } else {
        for (std::size_t i = 0; i < g.size(); ++i) din[i] += g[i];
    }
}

}  // namespace deguv
