#pragma once

#include <memory>
#include <string>
#include <vector>

#include "deguv/common.hpp"
#include "deguv/tensor.hpp"

namespace deguv {

// Explicit-backprop layer kit. Forward passes fill a context holding what the
// backward pass needs; no autograd graph, gradients accumulate into
// Param::grad. Single-threaded throughout.

struct ConvCtx {
    Tensor x;  // saved input [B, Cin, H, W]
    int B = 0, H = 0, W = 0;
};

class Conv2d {
public:
    Conv2d(std::string name, int cin, int cout, int ksize, int stride, int pad, Rng& init);

    int out_h(int h) const { return (h + 2 * pad_ - k_) / stride_ + 1; }
    int out_w(int w) const { return (w + 2 * pad_ - k_) / stride_ + 1; }

    // x: [B, Cin, H, W] -> y: [B, Cout, Ho, Wo]
    Tensor forward(const Tensor& x, ConvCtx* ctx = nullptr) const;
    // accumulates into w.grad/b.grad (unless param_grads=false) and into *dx
    void backward(const ConvCtx& ctx, const Tensor& dy, Tensor* dx, bool param_grads = true);

    std::vector<Param*> params() { return {&w, &b}; }

    Param w;  // [Cout, Cin*k*k]
    Param b;  // [Cout]
    int cin() const { return cin_; }
    int cout() const { return cout_; }

private:
    void im2col(const float* x, int h, int w, float* col) const;
    int cin_, cout_, k_, stride_, pad_;
};

struct LinCtx {
    Tensor x;  // [B, in]
};

class Linear {
public:
    Linear(std::string name, int in, int out, Rng& init);

    Tensor forward(const Tensor& x, LinCtx* ctx = nullptr) const;  // [B,in] -> [B,out]
    void backward(const LinCtx& ctx, const Tensor& dy, Tensor* dx, bool param_grads = true);

    std::vector<Param*> params() { return {&w, &b}; }

    Param w;  // [out, in]
    Param b;  // [out]

private:
    int in_, out_;
};

struct LayerNormCtx {
    Tensor xhat;             // normalized input [B, n]
    std::vector<float> istd;  // 1/sqrt(var+eps) per row
};

class LayerNorm {
public:
    LayerNorm(std::string name, int n);

    Tensor forward(const Tensor& x, LayerNormCtx* ctx = nullptr) const;
    void backward(const LayerNormCtx& ctx, const Tensor& dy, Tensor* dx, bool param_grads = true);

    std::vector<Param*> params() { return {&gamma, &beta}; }

    Param gamma, beta;

private:
    int n_;
    static constexpr float kEps = 1e-5f;
};

// Elementwise activations; ctx is the forward output (both derivatives are
// expressible from it).
Tensor relu(const Tensor& x);
void relu_backward(const Tensor& y, const Tensor& dy, Tensor* dx);
Tensor tanh_t(const Tensor& x);
void tanh_backward(const Tensor& y, const Tensor& dy, Tensor* dx);

class Adam {
public:
    explicit Adam(float lr, float beta1 = 0.9f, float beta2 = 0.999f, float eps = 1e-8f);

    // params must be the same list, in the same order, every call
    void step(const std::vector<Param*>& params);
    static void zero_grads(const std::vector<Param*>& params);

    float lr() const { return lr_; }
    void set_lr(float lr) { lr_ = lr; }

    // flat state for checkpoints: per param [m..., v...] plus the step count
    std::int64_t t() const { return t_; }
    std::vector<std::vector<float>> export_state() const;
    void import_state(std::int64_t t, const std::vector<std::vector<float>>& state);

private:
    float lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::vector<std::vector<float>> m_, v_;
};

// Central-difference gradient of a scalar function, used by the test oracles.
// Divides by the realized float32 step, not the requested one.
template <typename F>
std::vector<double> numerical_grad(F&& f, float* x, std::int64_t n, double h) {
    std::vector<double> g(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        float keep = x[i];
        float up_x = float(double(keep) + h), dn_x = float(double(keep) - h);
        x[i] = up_x;
        double up = f();
        x[i] = dn_x;
        double dn = f();
        x[i] = keep;
        g[static_cast<std::size_t>(i)] = (up - dn) / (double(up_x) - double(dn_x));
    }
    return g;
}

}  // namespace deguv
