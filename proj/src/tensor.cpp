#include "msqg/tensor.hpp"

#include <cmath>

namespace msqg::nn {

int64_t shape_size(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d < 0) throw ConfigError("tensor: negative dimension");
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<int> shp, float fill)
    : shape(std::move(shp)), data(static_cast<size_t>(shape_size(shape)), fill) {}

Tensor Tensor::row(std::vector<float> v) {
    Tensor t;
    t.shape = {1, static_cast<int>(v.size())};
    t.data = std::move(v);
    return t;
}

int Tensor::rows() const {
    if (ndim() == 1) return 1;
    if (ndim() != 2) throw ConfigError("tensor: rows() needs a 1-D or 2-D tensor");
    return shape[0];
}

int Tensor::cols() const {
    if (ndim() == 1) return shape[0];
    if (ndim() != 2) throw ConfigError("tensor: cols() needs a 1-D or 2-D tensor");
    return shape[1];
}

void Tensor::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0f);
}

void Tensor::zero_grad() {
    grad.assign(data.size(), 0.0f);
}

void Tensor::check_finite(const std::string& what) const {
    for (float v : data) {
        if (!std::isfinite(v)) {
            throw NumericError("non-finite value in " + what);
        }
    }
}

Tensor uniform_init(std::vector<int> shape, float range, std::mt19937& rng) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<float> dist(-range, range);
    for (float& v : t.data) v = dist(rng);
    return t;
}

std::vector<float> softmax(std::span<const float> logits) {
    if (logits.empty()) throw NumericError("softmax: empty input");
    float max_v = logits[0];
    for (float v : logits) {
        if (!std::isfinite(v)) throw NumericError("softmax: non-finite input");
        if (v > max_v) max_v = v;
    }
    std::vector<float> out(logits.size());
    double total = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        double e = std::exp(static_cast<double>(logits[i]) - max_v);
        out[i] = static_cast<float>(e);
        total += e;
    }
    for (float& v : out) v = static_cast<float>(v / total);
    return out;
}

}  // namespace msqg::nn
