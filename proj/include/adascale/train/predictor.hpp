// Stage-B training: the scale predictor learns from unaligned pairs while the
// backbone and control branch stay frozen (verified by checksum every epoch).
#pragma once

#include <cmath>
#include <ostream>
#include <vector>

#include "adascale/data/builder.hpp"
#include "adascale/diffusion/model.hpp"
#include "adascale/diffusion/schedule.hpp"
#include "adascale/nn/adamw.hpp"
#include "adascale/train/losses.hpp"

namespace adascale {

struct PredictorEpochStats {
    double loss_ldm = 0.0;
    double loss_c = 0.0;
    double mean_alpha_conflict = 0.0;  // predicted alpha averaged under m_conflict
    double mean_alpha_bg = 0.0;        // predicted alpha averaged under m_bg
};

namespace detail {

// Running mask-conditioned alpha means across blocks and batches.
struct AlphaMeanAcc {
    double conflict_sum = 0.0, bg_sum = 0.0;
    long conflict_n = 0, bg_n = 0;

    template <typename T>
    void add(const Tensor<T>& a, const std::vector<MaskPair>& masks) {
        for (int n = 0; n < a.n; ++n) {
            MaskU8 mc = resize_mask_nearest(masks[n].m_conflict, a.h, a.w);
            MaskU8 mb = resize_mask_nearest(masks[n].m_bg, a.h, a.w);
            for (int y = 0; y < a.h; ++y)
                for (int x = 0; x < a.w; ++x) {
                    double v = static_cast<double>(a.at(n, y, x, 0));
                    if (mc.at(y, x)) {
                        conflict_sum += v;
                        ++conflict_n;
                    }
                    if (mb.at(y, x)) {
                        bg_sum += v;
                        ++bg_n;
                    }
                }
        }
    }

    double conflict_mean() const { return conflict_n ? conflict_sum / conflict_n : 0.0; }
    double bg_mean() const { return bg_n ? bg_sum / bg_n : 0.0; }
};

}  // namespace detail

// Mask-conditioned mean alpha for a batch of predictor outputs, averaged over
// every fusion block. Shared between the trainer's logs and evaluation.
template <typename T>
inline std::pair<double, double> alpha_means(const std::array<Tensor<T>, kNumFusion>& alpha,
                                             const std::vector<MaskPair>& masks) {
    detail::AlphaMeanAcc acc;
    for (const Tensor<T>& a : alpha) acc.add(a, masks);
    return {acc.conflict_mean(), acc.bg_mean()};
}

// Runs cfg.epochs passes over `data`; only predictor parameters move. Returns
// per-epoch stats. Hard-fails if any frozen parameter changes.
template <typename T>
std::vector<PredictorEpochStats> train_predictor(DiffusionModel<T>& m,
                                                 const std::vector<UnalignedRecord>& data,
                                                 const TrainConfig& tc, std::ostream* log) {
    tc.validate();
    require(!data.empty(), "train_predictor: empty dataset");
    NoiseSchedule sched =
        make_noise_schedule(m.cfg.train_steps, m.cfg.beta_start, m.cfg.beta_end);

    m.bb.set_frozen(true);
    m.ctl.set_frozen(true);
    m.pred.set_frozen(false);
    auto frozen = m.backbone_params();
    auto cp = m.control_params();
    frozen.insert(frozen.end(), cp.begin(), cp.end());
    uint64_t frozen_sum = param_checksum(frozen);

    auto params = m.predictor_params();
    AdamW<T> adamw;
    adamw.lr = tc.learning_rate;
    adamw.weight_decay = tc.weight_decay;

    int n = static_cast<int>(data.size());
    int bs = std::min(tc.batch_size, n);
    int steps_per_epoch = (n + bs - 1) / bs;
    const ModelConfig& mc = m.cfg;

    Tensor<T> x0(bs, mc.img, mc.img, mc.img_c);
    Tensor<T> cond(bs, mc.img, mc.img, 1);
    std::vector<int> ts(bs), cls(bs);
    std::vector<MaskPair> masks(bs);
    std::vector<PredictorEpochStats> stats;

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        double acc_ldm = 0.0, acc_c = 0.0;
        detail::AlphaMeanAcc acc_alpha;
        for (int step = 0; step < steps_per_epoch; ++step) {
            Rng rng(substream(tc.seed, "pred_train", static_cast<uint64_t>(epoch),
                              static_cast<uint64_t>(step)));
            for (int b = 0; b < bs; ++b) {
                const UnalignedRecord& s = data[rng.below(n)];
                decode_image_into(x0, b, s.target);
                decode_unit_into(cond, b, s.condition);
                cls[b] = s.cls_alt;  // the prompt the target was generated for
                ts[b] = static_cast<int>(rng.below(mc.train_steps));
                masks[b] = s.masks;
            }

            Tensor<T> eps;
            Tensor<T> xt = forward_diffuse(sched, x0, ts, rng, eps);
            Tensor<T> eps_hat = m.fwd(xt, ts, cls, &cond, ScaleMode::predictor, nullptr,
                                      CacheMode::pred_train);

            const FusionTrace<T>& tr = m.trace();
            std::vector<Tensor<T>> alpha(tr.alpha.begin(), tr.alpha.end());
            T l_ldm = loss_ldm(eps, eps_hat);
            T l_c = loss_c(alpha, masks, tc);
            require(std::isfinite(static_cast<double>(l_ldm)) &&
                        std::isfinite(static_cast<double>(l_c)),
                    "train_predictor: loss diverged");
            acc_ldm += static_cast<double>(l_ldm);
            acc_c += static_cast<double>(l_c);
            for (const Tensor<T>& a : alpha) acc_alpha.add(a, masks);

            AdamW<T>::zero_grads(params);
            Tensor<T> d_eps = loss_ldm_grad(eps, eps_hat);
            std::array<Tensor<T>, kNumFusion> d_alpha;
            if (tc.lambda_c > 0.0f) {
                std::vector<Tensor<T>> gc = loss_c_grad(alpha, masks, tc);
                for (int i = 0; i < kNumFusion; ++i) {
                    gc[i].scale_(static_cast<T>(tc.lambda_c));
                    d_alpha[i] = std::move(gc[i]);
                }
            }
            m.bwd_pred(d_eps, d_alpha);
            adamw.step(params);
        }

        require(param_checksum(frozen) == frozen_sum,
                "train_predictor: frozen parameters changed");

        PredictorEpochStats st;
        st.loss_ldm = acc_ldm / steps_per_epoch;
        st.loss_c = acc_c / steps_per_epoch;
        st.mean_alpha_conflict = acc_alpha.conflict_mean();
        st.mean_alpha_bg = acc_alpha.bg_mean();
        stats.push_back(st);
        if (log)
            *log << "epoch " << epoch << " loss_ldm " << st.loss_ldm << " loss_c " << st.loss_c
                 << " alpha_conflict " << st.mean_alpha_conflict << " alpha_bg "
                 << st.mean_alpha_bg << "\n"
                 << std::flush;
    }
    return stats;
}

}  // namespace adascale
