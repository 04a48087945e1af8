// Aligned pretraining: backbone and control branch learn jointly at full
// control strength (alpha == 1), with occasional control-free batches so the
// backbone stays a usable class-conditional denoiser on its own.
#pragma once

#include <cmath>
#include <ostream>
#include <vector>

#include "adascale/data/aligned.hpp"
#include "adascale/diffusion/model.hpp"
#include "adascale/diffusion/schedule.hpp"
#include "adascale/nn/adamw.hpp"
#include "adascale/train/losses.hpp"

namespace adascale {

struct PretrainOptions {
    TrainConfig train;
    double cond_drop = 0.3;  // fraction of batches trained without control
};

// Runs cfg.epochs passes of n/batch_size steps; returns per-epoch mean loss.
template <typename T>
std::vector<double> pretrain_aligned(DiffusionModel<T>& m, const AlignedSet& data,
                                     const PretrainOptions& opt, std::ostream* log) {
    opt.train.validate();
    require(!data.samples.empty(), "pretrain: empty dataset");
    const TrainConfig& tc = opt.train;
    NoiseSchedule sched =
        make_noise_schedule(m.cfg.train_steps, m.cfg.beta_start, m.cfg.beta_end);

    auto params = m.backbone_params();
    auto cp = m.control_params();
    params.insert(params.end(), cp.begin(), cp.end());
    AdamW<T> adamw;
    adamw.lr = tc.learning_rate;
    adamw.weight_decay = tc.weight_decay;

    int n = static_cast<int>(data.samples.size());
    int bs = std::min(tc.batch_size, n);
    int steps_per_epoch = (n + bs - 1) / bs;
    const ModelConfig& mc = m.cfg;

    Tensor<T> x0(bs, mc.img, mc.img, mc.img_c);
    Tensor<T> cond(bs, mc.img, mc.img, 1);
    std::vector<int> ts(bs), cls(bs);
    std::vector<double> epoch_loss;

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        double acc = 0.0;
        for (int step = 0; step < steps_per_epoch; ++step) {
            Rng rng(substream(tc.seed, "pretrain", static_cast<uint64_t>(epoch),
                              static_cast<uint64_t>(step)));
            for (int b = 0; b < bs; ++b) {
                const AlignedSample& s = data.samples[rng.below(n)];
                decode_image_into(x0, b, s.img);
                decode_unit_into(cond, b, s.cond);
                cls[b] = s.spec.class_id;
                ts[b] = static_cast<int>(rng.below(mc.train_steps));
            }
            bool drop = rng.uniform() < opt.cond_drop;

            Tensor<T> eps;
            Tensor<T> xt = forward_diffuse(sched, x0, ts, rng, eps);
            ScaleMode mode = drop ? ScaleMode::detached : ScaleMode::one;
            Tensor<T> eps_hat =
                m.fwd(xt, ts, cls, drop ? nullptr : &cond, mode, nullptr, CacheMode::full);

            T l = loss_ldm(eps, eps_hat);
            require(std::isfinite(static_cast<double>(l)), "pretrain: loss diverged");
            acc += static_cast<double>(l);

            AdamW<T>::zero_grads(params);
            Tensor<T> d = loss_ldm_grad(eps, eps_hat);
            if (drop) m.bwd_detached(d);
            else m.bwd_full(d);
            adamw.step(params);
        }
        epoch_loss.push_back(acc / steps_per_epoch);
        if (log)
            *log << "epoch " << epoch << " loss " << epoch_loss.back() << "\n" << std::flush;
    }
    return epoch_loss;
}

}  // namespace adascale
