#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "msqg/errors.hpp"

namespace msqg::nn {

// Dense row-major f32 tensor. The gradient buffer exists only for
// parameters (requires_grad) and mirrors the data layout exactly.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;
    bool requires_grad = false;
    std::vector<float> grad;  // empty, or same length as data

    Tensor() = default;
    explicit Tensor(std::vector<int> shp, float fill = 0.0f);

    static Tensor zeros(int rows, int cols) { return Tensor({rows, cols}); }
    static Tensor row(std::vector<float> v);

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int rows() const;
    int cols() const;

    float& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
    float at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }

    void ensure_grad();  // size the grad buffer to data, zero-filled
    void zero_grad();
    void check_finite(const std::string& what) const;  // throws NumericError
};

int64_t shape_size(const std::vector<int>& shape);

// Uniform init in [-range, range], filled in row-major order from rng.
Tensor uniform_init(std::vector<int> shape, float range, std::mt19937& rng);

// Numerically stable softmax (max subtraction, double accumulation).
// Throws NumericError on empty or non-finite input.
std::vector<float> softmax(std::span<const float> logits);

}  // namespace msqg::nn
