#pragma once

// Adam with bias correction plus global-norm gradient clipping. Moments are
// kept in double so long runs stay deterministic and well conditioned even
// though parameters are float.

#include <cmath>
#include <cstddef>
#include <vector>

#include "convrank/common.hpp"
#include "convrank/tensor.hpp"

namespace convrank {

// Scales all gradients in place so their joint L2 norm is at most max_norm.
// Returns the pre-clip norm.
template <typename T>
double clip_global_norm(std::vector<TensorT<T>>& grads, double max_norm) {
    if (max_norm <= 0.0) throw ConfigError("clip norm must be positive");
    double sq = 0.0;
    for (const auto& g : grads) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = static_cast<double>(g[i]);
            sq += v * v;
        }
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double s = max_norm / norm;
        for (auto& g : grads) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] = static_cast<T>(static_cast<double>(g[i]) * s);
            }
        }
    }
    return norm;
}

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
class AdamT {
public:
    explicit AdamT(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    std::size_t step_count() const { return t_; }

    // params and grads are parallel lists in a fixed order; the first call
    // pins the shapes.
    void step(std::vector<TensorT<T>*>& params, const std::vector<TensorT<T>>& grads) {
        if (params.size() != grads.size()) {
            throw DimensionError("adam: params/grads length mismatch");
        }
        if (m_.empty()) {
            for (const auto* p : params) {
                m_.emplace_back(p->shape());
                v_.emplace_back(p->shape());
            }
        }
        if (m_.size() != params.size()) throw DimensionError("adam: parameter list changed");
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t k = 0; k < params.size(); ++k) {
            TensorT<T>& p = *params[k];
            const TensorT<T>& g = grads[k];
            if (p.shape() != g.shape() || p.shape() != m_[k].shape()) {
                throw DimensionError("adam: shape mismatch at tensor " + std::to_string(k));
            }
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double gi = static_cast<double>(g[i]);
                m_[k][i] = cfg_.beta1 * m_[k][i] + (1.0 - cfg_.beta1) * gi;
                v_[k][i] = cfg_.beta2 * v_[k][i] + (1.0 - cfg_.beta2) * gi * gi;
                const double mh = m_[k][i] / bc1;
                const double vh = v_[k][i] / bc2;
                const double upd = cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
                p[i] = static_cast<T>(static_cast<double>(p[i]) - upd);
            }
        }
    }

private:
    AdamConfig cfg_;
    std::size_t t_ = 0;
    std::vector<TensorT<double>> m_, v_;
};

using Adam = AdamT<float>;

}  // namespace convrank
