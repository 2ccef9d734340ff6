#include "msqg/adam.hpp"

#include <cmath>

namespace msqg::nn {

void Adam::add_param(Tensor& t) {
    t.requires_grad = true;
    t.ensure_grad();
    params_.push_back(&t);
    m_.emplace_back(t.data.size(), 0.0f);
    v_.emplace_back(t.data.size(), 0.0f);
}

void Adam::zero_grad() {
    for (Tensor* p : params_) p->zero_grad();
}

float Adam::clip_gradients() {
    double sq = 0.0;
    for (Tensor* p : params_) {
        p->ensure_grad();
        for (float g : p->grad) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    const double norm = std::sqrt(sq);
    if (cfg_.clip_norm > 0.0f && norm > static_cast<double>(cfg_.clip_norm)) {
        const float scale = static_cast<float>(static_cast<double>(cfg_.clip_norm) / norm);
        for (Tensor* p : params_) {
            for (float& g : p->grad) g *= scale;
        }
    }
    return static_cast<float>(norm);
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(static_cast<double>(cfg_.beta1), static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(static_cast<double>(cfg_.beta2), static_cast<double>(t_));
    for (size_t k = 0; k < params_.size(); ++k) {
        Tensor& p = *params_[k];
        p.ensure_grad();
        std::vector<float>& m = m_[k];
        std::vector<float>& v = v_[k];
        for (size_t i = 0; i < p.data.size(); ++i) {
            const double g = p.grad[i];
            m[i] = static_cast<float>(cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g);
            v[i] = static_cast<float>(cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g);
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.data[i] -= static_cast<float>(cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
        }
    }
}

}  // namespace msqg::nn
