// Training objectives: the noise-prediction term, the scale regularizer that
// pushes alpha down over conflict pixels and up over background pixels, and
// their hand-derived gradients.
#pragma once

#include <array>
#include <vector>

#include "adascale/core/tensor.hpp"
#include "adascale/io/pnm.hpp"
#include "adascale/shapes/masks.hpp"

namespace adascale {

struct TrainConfig {
    float lambda_c = 0.01f;
    float alpha_conflict = 0.2f;  // hinge target for alpha over conflict pixels
    float alpha_bg = 0.8f;        // hinge target for alpha over background pixels
    float weight_decay = 1e-5f;
    int epochs = 200;
    float learning_rate = 1e-4f;
    int batch_size = 16;
    uint64_t seed = 0;

    void validate() const {
        require(lambda_c >= 0.0f, "TrainConfig: lambda_c must be >= 0");
        require(alpha_conflict >= 0.0f && alpha_conflict < alpha_bg && alpha_bg <= 1.0f,
                "TrainConfig: need 0 <= alpha_conflict < alpha_bg <= 1");
    }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"lambda_c", c.lambda_c},
                       {"alpha_conflict", c.alpha_conflict},
                       {"alpha_bg", c.alpha_bg},
                       {"weight_decay", c.weight_decay},
                       {"epochs", c.epochs},
                       {"learning_rate", c.learning_rate},
                       {"batch_size", c.batch_size},
                       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    TrainConfig d;
    c.lambda_c = j.value("lambda_c", d.lambda_c);
    c.alpha_conflict = j.value("alpha_conflict", d.alpha_conflict);
    c.alpha_bg = j.value("alpha_bg", d.alpha_bg);
    c.weight_decay = j.value("weight_decay", d.weight_decay);
    c.epochs = j.value("epochs", d.epochs);
    c.learning_rate = j.value("learning_rate", d.learning_rate);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.seed = j.value("seed", d.seed);
}

// mean over all elements of (eps - eps_hat)^2
template <typename T>
T loss_ldm(const Tensor<T>& eps, const Tensor<T>& eps_hat) {
    require(eps.same_shape(eps_hat), "loss_ldm: shape mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < eps.v.size(); ++i) {
        double d = static_cast<double>(eps_hat.v[i]) - static_cast<double>(eps.v[i]);
        acc += d * d;
    }
    return static_cast<T>(acc / static_cast<double>(eps.size()));
}

// d loss_ldm / d eps_hat
template <typename T>
Tensor<T> loss_ldm_grad(const Tensor<T>& eps, const Tensor<T>& eps_hat) {
    require(eps.same_shape(eps_hat), "loss_ldm_grad: shape mismatch");
    Tensor<T> g(eps_hat.n, eps_hat.h, eps_hat.w, eps_hat.c);
    T scale = static_cast<T>(2.0 / static_cast<double>(eps.size()));
    for (size_t i = 0; i < g.v.size(); ++i) g.v[i] = scale * (eps_hat.v[i] - eps.v[i]);
    return g;
}

// nearest-neighbour mask resize with the same centre-of-pixel rule as the
// float resize; binary in, binary out
inline MaskU8 resize_mask_nearest(const MaskU8& m, int oh, int ow) {
    MaskU8 out(oh, ow);
    for (int oy = 0; oy < oh; ++oy) {
        int iy = ((2 * oy + 1) * m.h) / (2 * oh);
        for (int ox = 0; ox < ow; ++ox) {
            int ix = ((2 * ox + 1) * m.w) / (2 * ow);
            out.at(oy, ox) = m.at(iy, ix);
        }
    }
    return out;
}

// Per block: resize both masks to the map resolution, take the mean over
// batch and pixels of m_conflict*max(0, a - a_conflict) + m_bg*max(0, a_bg - a),
// then average the blocks. Maps are (n,h,w,1); masks are per batch sample.
template <typename T>
T loss_c(const std::vector<Tensor<T>>& maps, const std::vector<MaskPair>& masks,
         const TrainConfig& cfg) {
    require(!maps.empty(), "loss_c: no scale maps");
    double total = 0.0;
    for (const Tensor<T>& a : maps) {
        require(a.c == 1, "loss_c: maps must be single-channel");
        require(a.n == static_cast<int>(masks.size()), "loss_c: batch/mask count mismatch");
        double block = 0.0;
        for (int n = 0; n < a.n; ++n) {
            MaskU8 mc = resize_mask_nearest(masks[n].m_conflict, a.h, a.w);
            MaskU8 mb = resize_mask_nearest(masks[n].m_bg, a.h, a.w);
            for (int y = 0; y < a.h; ++y)
                for (int x = 0; x < a.w; ++x) {
                    double v = static_cast<double>(a.at(n, y, x, 0));
                    if (mc.at(y, x)) block += std::max(0.0, v - cfg.alpha_conflict);
                    if (mb.at(y, x)) block += std::max(0.0, cfg.alpha_bg - v);
                }
        }
        total += block / (static_cast<double>(a.n) * a.h * a.w);
    }
    return static_cast<T>(total / static_cast<double>(maps.size()));
}

// Subgradient: +m_conflict where a > a_conflict, -m_bg where a < a_bg,
// 0 elsewhere, scaled by 1/(batch*pixels*blocks).
template <typename T>
std::vector<Tensor<T>> loss_c_grad(const std::vector<Tensor<T>>& maps,
                                   const std::vector<MaskPair>& masks, const TrainConfig& cfg) {
    require(!maps.empty(), "loss_c_grad: no scale maps");
    std::vector<Tensor<T>> grads;
    grads.reserve(maps.size());
    for (const Tensor<T>& a : maps) {
        Tensor<T> g(a.n, a.h, a.w, 1);
        T scale = static_cast<T>(1.0 / (static_cast<double>(a.n) * a.h * a.w * maps.size()));
        for (int n = 0; n < a.n; ++n) {
            MaskU8 mc = resize_mask_nearest(masks[n].m_conflict, a.h, a.w);
            MaskU8 mb = resize_mask_nearest(masks[n].m_bg, a.h, a.w);
            for (int y = 0; y < a.h; ++y)
                for (int x = 0; x < a.w; ++x) {
                    T v = a.at(n, y, x, 0);
                    T d = T(0);
                    if (mc.at(y, x) && v > static_cast<T>(cfg.alpha_conflict)) d += scale;
                    if (mb.at(y, x) && v < static_cast<T>(cfg.alpha_bg)) d -= scale;
                    g.at(n, y, x, 0) = d;
                }
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

template <typename T>
T total_loss(T l_ldm, T l_c, const TrainConfig& cfg) {
    return l_ldm + static_cast<T>(cfg.lambda_c) * l_c;
}

}  // namespace adascale
