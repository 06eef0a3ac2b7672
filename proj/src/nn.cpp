#include "deguv/nn.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstring>

namespace deguv {
namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

void uniform_init(Param& p, int fan_in, Rng& rng) {
    float bound = 1.0f / std::sqrt(float(fan_in));
    for (auto& v : p.value.vec()) v = float(rng.uniform(-bound, bound));
}

}  // namespace

Conv2d::Conv2d(std::string name, int cin, int cout, int ksize, int stride, int pad, Rng& init)
    : w(name + ".w", {cout, cin * ksize * ksize}),
      b(name + ".b", {cout}),
      cin_(cin),
      cout_(cout),
      k_(ksize),
      stride_(stride),
      pad_(pad) {
    uniform_init(w, cin * ksize * ksize, init);
    uniform_init(b, cin * ksize * ksize, init);
}

void Conv2d::im2col(const float* x, int h, int w, float* col) const {
    const int ho = out_h(h), wo = out_w(w);
    const int cols = ho * wo;
    for (int c = 0; c < cin_; ++c) {
        const float* plane = x + std::size_t(c) * h * w;
        for (int ky = 0; ky < k_; ++ky)
            for (int kx = 0; kx < k_; ++kx) {
                float* row = col + (std::size_t(c) * k_ * k_ + ky * k_ + kx) * cols;
                for (int oy = 0; oy < ho; ++oy) {
                    int sy = oy * stride_ + ky - pad_;
                    float* out = row + std::size_t(oy) * wo;
                    if (sy < 0 || sy >= h) {
                        std::memset(out, 0, std::size_t(wo) * sizeof(float));
                        continue;
                    }
                    const float* src = plane + std::size_t(sy) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        int sx = ox * stride_ + kx - pad_;
                        out[ox] = (sx >= 0 && sx < w) ? src[sx] : 0.0f;
                    }
                }
            }
    }
}

Tensor Conv2d::forward(const Tensor& x, ConvCtx* ctx) const {
    const auto& s = x.shape();
    if (s.size() != 4 || s[1] != cin_) throw DataError("conv input shape mismatch");
    const int B = s[0], H = s[2], W = s[3];
    const int ho = out_h(H), wo = out_w(W), cols = ho * wo, rows = cin_ * k_ * k_;
    Tensor y({B, cout_, ho, wo});
    std::vector<float> col(std::size_t(rows) * cols);
    CMapMat wm(w.value.data(), cout_, rows);
    for (int bi = 0; bi < B; ++bi) {
        im2col(x.data() + std::size_t(bi) * cin_ * H * W, H, W, col.data());
        MapMat ym(y.data() + std::size_t(bi) * cout_ * cols, cout_, cols);
        ym.noalias() = wm * CMapMat(col.data(), rows, cols);
        for (int c = 0; c < cout_; ++c) ym.row(c).array() += b.value[c];
    }
    if (ctx) {
        ctx->x = x;
        ctx->B = B;
        ctx->H = H;
        ctx->W = W;
    }
    return y;
}

void Conv2d::backward(const ConvCtx& ctx, const Tensor& dy, Tensor* dx, bool param_grads) {
    const int B = ctx.B, H = ctx.H, W = ctx.W;
    const int ho = out_h(H), wo = out_w(W), cols = ho * wo, rows = cin_ * k_ * k_;
    std::vector<float> col(std::size_t(rows) * cols);
    std::vector<float> dcol(std::size_t(rows) * cols);
    MapMat wg(w.grad.data(), cout_, rows);
    CMapMat wm(w.value.data(), cout_, rows);
    for (int bi = 0; bi < B; ++bi) {
        CMapMat dym(dy.data() + std::size_t(bi) * cout_ * cols, cout_, cols);
        if (param_grads) {
            im2col(ctx.x.data() + std::size_t(bi) * cin_ * H * W, H, W, col.data());
            wg.noalias() += dym * CMapMat(col.data(), rows, cols).transpose();
            // fixed-order accumulation; vectorized reductions would make the
            // result depend on the buffer's alignment
            for (int c = 0; c < cout_; ++c) {
                const float* row = dy.data() + (std::size_t(bi) * cout_ + c) * cols;
                double acc = 0.0;
                for (int i = 0; i < cols; ++i) acc += double(row[i]);
                b.grad[c] += float(acc);
            }
        }
        if (dx) {
            MapMat dcm(dcol.data(), rows, cols);
            dcm.noalias() = wm.transpose() * dym;
            // col2im scatter-add
            float* dxp = dx->data() + std::size_t(bi) * cin_ * H * W;
            for (int c = 0; c < cin_; ++c)
                for (int ky = 0; ky < k_; ++ky)
                    for (int kx = 0; kx < k_; ++kx) {
                        const float* row =
                            dcol.data() + (std::size_t(c) * k_ * k_ + ky * k_ + kx) * cols;
                        for (int oy = 0; oy < ho; ++oy) {
                            int sy = oy * stride_ + ky - pad_;
                            if (sy < 0 || sy >= H) continue;
                            float* dst = dxp + (std::size_t(c) * H + sy) * W;
                            const float* srow = row + std::size_t(oy) * wo;
                            for (int ox = 0; ox < wo; ++ox) {
                                int sx = ox * stride_ + kx - pad_;
                                if (sx >= 0 && sx < W) dst[sx] += srow[ox];
                            }
                        }
                    }
        }
    }
}

Linear::Linear(std::string name, int in, int out, Rng& init)
    : w(name + ".w", {out, in}), b(name + ".b", {out}), in_(in), out_(out) {
    uniform_init(w, in, init);
    uniform_init(b, in, init);
}

Tensor Linear::forward(const Tensor& x, LinCtx* ctx) const {
    const auto& s = x.shape();
    if (s.size() != 2 || s[1] != in_) throw DataError("linear input shape mismatch");
    const int B = s[0];
    Tensor y({B, out_});
    MapMat ym(y.data(), B, out_);
    ym.noalias() = CMapMat(x.data(), B, in_) * CMapMat(w.value.data(), out_, in_).transpose();
    ym.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(b.value.data(), out_);
    if (ctx) ctx->x = x;
    return y;
}

void Linear::backward(const LinCtx& ctx, const Tensor& dy, Tensor* dx, bool param_grads) {
    const int B = ctx.x.shape()[0];
    CMapMat dym(dy.data(), B, out_);
    if (param_grads) {
        MapMat(w.grad.data(), out_, in_).noalias() +=
            dym.transpose() * CMapMat(ctx.x.data(), B, in_);
        for (int r = 0; r < B; ++r) {
            const float* row = dy.data() + std::size_t(r) * out_;
            for (int c = 0; c < out_; ++c) b.grad[c] += row[c];
        }
    }
    if (dx)
        MapMat(dx->data(), B, in_).noalias() += dym * CMapMat(w.value.data(), out_, in_);
}

LayerNorm::LayerNorm(std::string name, int n)
    : gamma(name + ".gamma", {n}), beta(name + ".beta", {n}), n_(n) {
    gamma.value.fill(1.0f);
}

Tensor LayerNorm::forward(const Tensor& x, LayerNormCtx* ctx) const {
    const auto& s = x.shape();
    if (s.size() != 2 || s[1] != n_) throw DataError("layernorm input shape mismatch");
    const int B = s[0];
    Tensor y({B, n_});
    if (ctx) {
        ctx->xhat = Tensor({B, n_});
        ctx->istd.assign(std::size_t(B), 0.0f);
    }
    for (int bi = 0; bi < B; ++bi) {
        const float* row = x.data() + std::size_t(bi) * n_;
        float* out = y.data() + std::size_t(bi) * n_;
        float mean = 0.0f;
        for (int i = 0; i < n_; ++i) mean += row[i];
        mean /= float(n_);
        float var = 0.0f;
        for (int i = 0; i < n_; ++i) {
            float d = row[i] - mean;
            var += d * d;
        }
        var /= float(n_);
        float istd = 1.0f / std::sqrt(var + kEps);
        for (int i = 0; i < n_; ++i) {
            float xh = (row[i] - mean) * istd;
            out[i] = gamma.value[i] * xh + beta.value[i];
            if (ctx) ctx->xhat[std::size_t(bi) * n_ + i] = xh;
        }
        if (ctx) ctx->istd[std::size_t(bi)] = istd;
    }
    return y;
}

void LayerNorm::backward(const LayerNormCtx& ctx, const Tensor& dy, Tensor* dx,
                         bool param_grads) {
    const int B = ctx.xhat.shape()[0];
    for (int bi = 0; bi < B; ++bi) {
        const float* dyr = dy.data() + std::size_t(bi) * n_;
        const float* xh = ctx.xhat.data() + std::size_t(bi) * n_;
        float sum_g = 0.0f, sum_gx = 0.0f;
        for (int i = 0; i < n_; ++i) {
            float gi = dyr[i] * gamma.value[i];
            sum_g += gi;
            sum_gx += gi * xh[i];
            if (param_grads) {
                gamma.grad[i] += dyr[i] * xh[i];
                beta.grad[i] += dyr[i];
            }
        }
        if (dx) {
            float* dxr = dx->data() + std::size_t(bi) * n_;
            float inv_n = 1.0f / float(n_);
            for (int i = 0; i < n_; ++i) {
                float gi = dyr[i] * gamma.value[i];
                dxr[i] += ctx.istd[std::size_t(bi)] *
                          (gi - inv_n * sum_g - xh[i] * inv_n * sum_gx);
            }
        }
    }
}

Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.vec())
        if (v < 0.0f) v = 0.0f;
    return y;
}

void relu_backward(const Tensor& y, const Tensor& dy, Tensor* dx) {
    for (std::int64_t i = 0; i < y.size(); ++i)
        if (y[i] > 0.0f) (*dx)[i] += dy[i];
}

Tensor tanh_t(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.vec()) v = std::tanh(v);
    return y;
}

void tanh_backward(const Tensor& y, const Tensor& dy, Tensor* dx) {
    for (std::int64_t i = 0; i < y.size(); ++i) (*dx)[i] += dy[i] * (1.0f - y[i] * y[i]);
}

Adam::Adam(float lr, float beta1, float beta2, float eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(const std::vector<Param*>& params) {
    if (m_.empty()) {
        for (const Param* p : params) {
            m_.emplace_back(std::size_t(p->value.size()), 0.0f);
            v_.emplace_back(std::size_t(p->value.size()), 0.0f);
        }
    }
    if (m_.size() != params.size()) throw ProtocolError("optimizer param list changed");
    t_ += 1;
    const float bc1 = 1.0f - std::pow(beta1_, float(t_));
    const float bc2 = 1.0f - std::pow(beta2_, float(t_));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Param& p = *params[pi];
        auto& m = m_[pi];
        auto& v = v_[pi];
        if (std::int64_t(m.size()) != p.value.size())
            throw ProtocolError("optimizer param shape changed");
        for (std::int64_t i = 0; i < p.value.size(); ++i) {
            float g = p.grad[i];
            m[std::size_t(i)] = beta1_ * m[std::size_t(i)] + (1.0f - beta1_) * g;
            v[std::size_t(i)] = beta2_ * v[std::size_t(i)] + (1.0f - beta2_) * g * g;
            float mhat = m[std::size_t(i)] / bc1;
            float vhat = v[std::size_t(i)] / bc2;
            p.value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::zero_grads(const std::vector<Param*>& params) {
    for (Param* p : params) p->grad.zero();
}

std::vector<std::vector<float>> Adam::export_state() const {
    std::vector<std::vector<float>> out;
    out.reserve(m_.size() * 2);
    for (std::size_t i = 0; i < m_.size(); ++i) {
        out.push_back(m_[i]);
        out.push_back(v_[i]);
    }
    return out;
}

void Adam::import_state(std::int64_t t, const std::vector<std::vector<float>>& state) {
    if (state.size() % 2 != 0) throw DataError("optimizer state must pair m and v arrays");
    t_ = t;
    m_.clear();
    v_.clear();
    for (std::size_t i = 0; i < state.size(); i += 2) {
        m_.push_back(state[i]);
        v_.push_back(state[i + 1]);
    }
}

}  // namespace deguv
