#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "deguv/common.hpp"

namespace deguv {

// Dense float32 array with a shape, row-major. Used for network parameters,
// gradients and anything that crosses a serialization or binding boundary.
// Hot loops work on raw pointers; this type is bookkeeping.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        v_.assign(static_cast<std::size_t>(count(shape_)), 0.0f);
    }

    static std::int64_t count(const std::vector<int>& shape) {
        std::int64_t n = 1;
        for (int d : shape) {
            if (d < 0) throw DataError("tensor shape has negative dim");
            n *= d;
        }
        return n;
    }

    std::int64_t size() const { return static_cast<std::int64_t>(v_.size()); }
    const std::vector<int>& shape() const { return shape_; }

    void reshape(std::vector<int> shape) {
        if (count(shape) != size()) throw DataError("tensor reshape changes element count");
        shape_ = std::move(shape);
    }

    float* data() { return v_.data(); }
    const float* data() const { return v_.data(); }
    float& operator[](std::int64_t i) { return v_[static_cast<std::size_t>(i)]; }
    float operator[](std::int64_t i) const { return v_[static_cast<std::size_t>(i)]; }

    void fill(float x) { std::fill(v_.begin(), v_.end(), x); }
    void zero() { fill(0.0f); }

    std::vector<float>& vec() { return v_; }
    const std::vector<float>& vec() const { return v_; }

private:
    std::vector<float> v_;
    std::vector<int> shape_;
};

// A named parameter with its gradient accumulator.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param() = default;
    Param(std::string n, std::vector<int> shape) : name(std::move(n)), value(shape), grad(shape) {}
};

}  // namespace deguv
