#pragma once

#include <cmath>
#include <vector>

#include "adascale/nn/layers.hpp"

namespace adascale {

// AdamW with decoupled weight decay. Moment buffers are keyed by position in
// the parameter list, which must stay stable across steps.
template <typename T>
struct AdamW {
    double lr = 1e-4;
    double beta1 = 0.9, beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-5;
    long step_count = 0;

    void step(const std::vector<Param<T>*>& params) {
        if (m_.empty()) {
            for (auto* p : params) {
                m_.emplace_back(p->w.size(), 0.0);
                v_.emplace_back(p->w.size(), 0.0);
            }
        }
        require(m_.size() == params.size(), "adamw: parameter list changed size");
        ++step_count;
        double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
        double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
        for (size_t pi = 0; pi < params.size(); ++pi) {
            Param<T>& p = *params[pi];
            auto& m = m_[pi];
            auto& v = v_[pi];
            for (size_t i = 0; i < p.w.size(); ++i) {
                double g = p.g[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                double mh = m[i] / bc1;
                double vh = v[i] / bc2;
                double upd = mh / (std::sqrt(vh) + eps) + weight_decay * p.w[i];
                p.w[i] = static_cast<T>(p.w[i] - lr * upd);
            }
        }
    }

    static void zero_grads(const std::vector<Param<T>*>& params) {
        for (auto* p : params) p->zero_grad();
    }

private:
    // fp64 moments keep the update rule identical between float and double
    // instantiations, which the gradient-check tests rely on.
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace adascale
