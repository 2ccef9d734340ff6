#pragma once

#include <cstdint>
#include <vector>

#include "msqg/tensor.hpp"

namespace msqg::nn {

struct AdamConfig {
    float lr = 2e-5f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    float clip_norm = 5.0f;  // <= 0 disables clipping
};

// Adam with bias correction. Parameters are registered by pointer; their
// grad buffers are read in step() and cleared by zero_grad().
class Adam {
  public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void add_param(Tensor& t);
    void zero_grad();

    // Scales every grad so the global L2 norm is at most cfg.clip_norm.
    // Returns the pre-clip norm.
    float clip_gradients();

    void step();

    int64_t steps() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

  private:
    AdamConfig cfg_;
    std::vector<Tensor*> params_;
    std::vector<std::vector<float>> m_;
    std::vector<std::vector<float>> v_;
    int64_t t_ = 0;
};

}  // namespace msqg::nn
