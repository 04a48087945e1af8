#pragma once

#include <algorithm>
#include <vector>

#include "adascale/diffusion/model.hpp"
#include "adascale/diffusion/schedule.hpp"

namespace adascale {

// How the fusion scale is chosen during sampling.
template <typename T>
struct ScaleChoice {
    ScaleMode mode = ScaleMode::one;
    // fixed_maps: per-block maps for batch size 1, broadcast over the batch
    // by the caller providing matching n.
    std::array<Tensor<T>, kNumFusion> maps;

    static ScaleChoice none_attached() { return {ScaleMode::one, {}}; }
    static ScaleChoice detached() { return {ScaleMode::detached, {}}; }
    static ScaleChoice from_predictor() { return {ScaleMode::predictor, {}}; }
};

template <typename T>
struct SampleOptions {
    int steps = 50;          // deterministic sampler steps
    uint64_t seed = 0;       // stream for the initial noise
    int init_stream = -1;    // >= 0: every slot draws this stream (shared x_T)
    bool record_alpha = false;
    int record_block = 2;    // finest block when recording alpha means
};

template <typename T>
struct SampleResult {
    Tensor<T> x;  // final images in [-1,1] (not quantized)
    // Mean alpha per sampler step at the finest fusion block, optional.
    std::vector<double> mean_alpha;
};

// Deterministic reverse process: epsilon prediction, clamped x0 estimate,
// then re-projection to the previous noise level (eta = 0).
template <typename T>
inline SampleResult<T> sample(DiffusionModel<T>& model, const NoiseSchedule& sched,
                              const std::vector<int>& cls, const Tensor<T>* cond,
                              const ScaleChoice<T>& scale, const SampleOptions<T>& opt) {
    int n = static_cast<int>(cls.size());
    const ModelConfig& cfg = model.cfg;
    Tensor<T> x(n, cfg.img, cfg.img, cfg.img_c);
    for (int i = 0; i < n; ++i) {
        uint64_t stream = opt.init_stream >= 0 ? static_cast<uint64_t>(opt.init_stream)
                                               : static_cast<uint64_t>(i);
        Rng rng(substream(opt.seed, "init_noise", stream));
        size_t per = x.size() / n;
        for (size_t j = 0; j < per; ++j) x[per * i + j] = static_cast<T>(rng.normal());
    }

    std::vector<int> ts = sampler_timesteps(sched.steps, opt.steps);
    SampleResult<T> res;
    FusionTrace<T> trace;
    FusionTrace<T>* tr = opt.record_alpha ? &trace : nullptr;

    for (size_t si = 0; si < ts.size(); ++si) {
        int t = ts[si];
        std::vector<int> tvec(n, t);
        Tensor<T> eps = model.fwd(x, tvec, cls, cond, scale.mode,
                                  scale.mode == ScaleMode::fixed_maps ? &scale.maps : nullptr,
                                  CacheMode::none, tr);
        if (opt.record_alpha && scale.mode != ScaleMode::detached) {
            const Tensor<T>& a = trace.alpha[opt.record_block];
            double s = 0;
            for (auto v : a.v) s += v;
            res.mean_alpha.push_back(s / static_cast<double>(a.size()));
        }

        double ab_t = sched.alpha_bar[t];
        double ab_prev = si + 1 < ts.size() ? sched.alpha_bar[ts[si + 1]] : 1.0;
        T inv_sab = static_cast<T>(1.0 / std::sqrt(ab_t));
        T s1m = static_cast<T>(std::sqrt(1.0 - ab_t));
        T sabp = static_cast<T>(std::sqrt(ab_prev));
        T s1mp = static_cast<T>(std::sqrt(1.0 - ab_prev));
        for (size_t j = 0; j < x.size(); ++j) {
            T x0 = (x[j] - s1m * eps[j]) * inv_sab;
            x0 = std::clamp(x0, T(-1), T(1));
            x[j] = sabp * x0 + s1mp * eps[j];
        }
    }
    res.x = std::move(x);
    return res;
}

}  // namespace adascale
