#pragma once

#include <cmath>
#include <vector>

#include "adascale/core/rng.hpp"
#include "adascale/core/tensor.hpp"

namespace adascale {

// Variance schedule for the noising process: beta rises linearly, alpha_bar
// is the running product of (1 - beta).
struct NoiseSchedule {
    int steps = 0;
    std::vector<double> beta, alpha_bar;
    std::vector<double> sqrt_ab, sqrt_1mab;  // precomputed per-step factors

    double snr(int t) const { return alpha_bar[t] / (1.0 - alpha_bar[t]); }
};

inline NoiseSchedule make_noise_schedule(int steps, double beta_start = 1e-4,
                                         double beta_end = 0.02) {
    require(steps >= 2, "schedule: need at least 2 steps");
    NoiseSchedule s;
    s.steps = steps;
    s.beta.resize(steps);
    s.alpha_bar.resize(steps);
    s.sqrt_ab.resize(steps);
    s.sqrt_1mab.resize(steps);
    double prod = 1.0;
    for (int t = 0; t < steps; ++t) {
        s.beta[t] = beta_start + (beta_end - beta_start) * t / (steps - 1);
        prod *= 1.0 - s.beta[t];
        s.alpha_bar[t] = prod;
        s.sqrt_ab[t] = std::sqrt(prod);
        s.sqrt_1mab[t] = std::sqrt(1.0 - prod);
    }
    return s;
}

// x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps, shared t per
// sample row. eps_out receives the drawn noise (the regression target).
template <typename T>
inline Tensor<T> forward_diffuse(const NoiseSchedule& s, const Tensor<T>& x0,
                                 const std::vector<int>& t, Rng& rng, Tensor<T>& eps_out) {
    require(static_cast<int>(t.size()) == x0.n, "forward_diffuse: t per sample");
    Tensor<T> xt(x0.n, x0.h, x0.w, x0.c);
    eps_out = Tensor<T>(x0.n, x0.h, x0.w, x0.c);
    size_t per = x0.size() / x0.n;
    for (int in = 0; in < x0.n; ++in) {
        require(t[in] >= 0 && t[in] < s.steps, "forward_diffuse: t out of range");
        T a = static_cast<T>(s.sqrt_ab[t[in]]);
        T b = static_cast<T>(s.sqrt_1mab[t[in]]);
        size_t base = in * per;
        for (size_t i = 0; i < per; ++i) {
            T e = static_cast<T>(rng.normal());
            eps_out[base + i] = e;
            xt[base + i] = a * x0[base + i] + b * e;
        }
    }
    return xt;
}

// Evenly spaced timestep subset for the deterministic sampler, from steps-1
// down to 0 inclusive.
inline std::vector<int> sampler_timesteps(int train_steps, int sample_steps) {
    require(sample_steps >= 2 && sample_steps <= train_steps, "sampler: bad step count");
    std::vector<int> ts(sample_steps);
    for (int i = 0; i < sample_steps; ++i) {
        double f = static_cast<double>(i) / (sample_steps - 1);
        ts[i] = static_cast<int>(std::lround((1.0 - f) * (train_steps - 1)));
    }
    return ts;
}

}  // namespace adascale
