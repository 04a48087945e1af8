#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "adascale/core/rng.hpp"
#include "adascale/core/tensor.hpp"
#include "adascale/data/aligned.hpp"
#include "adascale/diffusion/checkpoint.hpp"
#include "adascale/io/pnm.hpp"
#include "adascale/nn/adamw.hpp"
#include "adascale/nn/layers.hpp"
#include "adascale/shapes/world.hpp"
#include "adascale/util/config.hpp"

namespace adascale {

// ---------------------------------------------------------------------------
// Shape classifier used as the automated judge: it filters sweep candidates
// during dataset construction and scores class alignment during evaluation.
// It refuses to serve until its held-out accuracy clears the gate.

struct OracleConfig {
    int img = 64;
    int img_c = 3;
    int num_classes = 9;
    int c1 = 16, c2 = 32, c3 = 64, c4 = 128;  // conv widths, each stride-2
    int groups = 8;
    int train_renders = 5400;
    int holdout_renders = 900;
    int epochs = 24;
    int batch = 32;
    float learning_rate = 1.5e-3f;
    float weight_decay = 1e-5f;
    float noise_frac = 0.08f;    // slots replaced by uniform noise, flat target
    float jitter_sigma = 0.12f;  // additive Gaussian pixel jitter on renders
    double accuracy_gate = 0.99;
    uint64_t seed = 77;       // data + batch sampling
    uint64_t init_seed = 101; // weight init

    void validate() const {
        require(img > 0 && img_c > 0 && num_classes > 1, "oracle: bad dims");
        require(train_renders >= num_classes && holdout_renders >= num_classes,
                "oracle: too few renders");
        require(batch > 0 && epochs > 0, "oracle: bad schedule");
        require(noise_frac >= 0.0f && noise_frac < 1.0f, "oracle: bad noise_frac");
        require(accuracy_gate > 0.0 && accuracy_gate <= 1.0, "oracle: bad gate");
    }
};

inline void to_json(json& j, const OracleConfig& c) {
    j = json{{"img", c.img},
             {"img_c", c.img_c},
             {"num_classes", c.num_classes},
             {"c1", c.c1},
             {"c2", c.c2},
             {"c3", c.c3},
             {"c4", c.c4},
             {"groups", c.groups},
             {"train_renders", c.train_renders},
             {"holdout_renders", c.holdout_renders},
             {"epochs", c.epochs},
             {"batch", c.batch},
             {"learning_rate", c.learning_rate},
             {"weight_decay", c.weight_decay},
             {"noise_frac", c.noise_frac},
             {"jitter_sigma", c.jitter_sigma},
             {"accuracy_gate", c.accuracy_gate},
             {"seed", c.seed},
             {"init_seed", c.init_seed}};
}

inline void from_json(const json& j, OracleConfig& c) {
    OracleConfig d;
    c.img = j.value("img", d.img);
    c.img_c = j.value("img_c", d.img_c);
    c.num_classes = j.value("num_classes", d.num_classes);
    c.c1 = j.value("c1", d.c1);
    c.c2 = j.value("c2", d.c2);
    c.c3 = j.value("c3", d.c3);
    c.c4 = j.value("c4", d.c4);
    c.groups = j.value("groups", d.groups);
    c.train_renders = j.value("train_renders", d.train_renders);
    c.holdout_renders = j.value("holdout_renders", d.holdout_renders);
    c.epochs = j.value("epochs", d.epochs);
    c.batch = j.value("batch", d.batch);
    c.learning_rate = j.value("learning_rate", d.learning_rate);
    c.weight_decay = j.value("weight_decay", d.weight_decay);
    c.noise_frac = j.value("noise_frac", d.noise_frac);
    c.jitter_sigma = j.value("jitter_sigma", d.jitter_sigma);
    c.accuracy_gate = j.value("accuracy_gate", d.accuracy_gate);
    c.seed = j.value("seed", d.seed);
    c.init_seed = j.value("init_seed", d.init_seed);
}

// Row-wise softmax of logits (n,1,1,k).
template <typename T>
inline Tensor<T> softmax_rows(const Tensor<T>& logits) {
    Tensor<T> p(logits.n, 1, 1, logits.c);
    for (int i = 0; i < logits.n; ++i) {
        const T* lp = &logits.at(i, 0, 0, 0);
        T* pp = &p.at(i, 0, 0, 0);
        T mx = lp[0];
        for (int k = 1; k < logits.c; ++k) mx = std::max(mx, lp[k]);
        double z = 0;
        for (int k = 0; k < logits.c; ++k) {
            double e = std::exp(static_cast<double>(lp[k] - mx));
            pp[k] = static_cast<T>(e);
            z += e;
        }
        for (int k = 0; k < logits.c; ++k) pp[k] = static_cast<T>(pp[k] / z);
    }
    return p;
}

namespace detail {

// (n,h,w,c) <-> (n,1,1,h*w*c): NHWC storage makes this a pure relabeling.
template <typename T>
inline Tensor<T> flatten_rows(Tensor<T>&& t) {
    Tensor<T> f;
    f.n = t.n;
    f.h = 1;
    f.w = 1;
    f.c = t.h * t.w * t.c;
    f.v = std::move(t.v);
    return f;
}

template <typename T>
inline Tensor<T> unflatten_rows(Tensor<T>&& f, int h, int w, int c) {
    Tensor<T> t;
    t.n = f.n;
    t.h = h;
    t.w = w;
    t.c = c;
    t.v = std::move(f.v);
    return t;
}

}  // namespace detail

template <typename T>
struct OracleNet {
    OracleConfig cfg;
    Conv2d<T> conv1, conv2, conv3, conv4;
    GroupNorm<T> gn1, gn2, gn3, gn4;
    SiLU<T> a1, a2, a3, a4;
    Linear<T> fc;  // on the flattened final feature map

    OracleNet() = default;
    explicit OracleNet(const OracleConfig& c) : cfg(c) {
        c.validate();
        Rng rng(c.init_seed);
        conv1 = Conv2d<T>("oracle.c1", c.img_c, c.c1, 3, 2, 1, rng);
        conv2 = Conv2d<T>("oracle.c2", c.c1, c.c2, 3, 2, 1, rng);
        conv3 = Conv2d<T>("oracle.c3", c.c2, c.c3, 3, 2, 1, rng);
        conv4 = Conv2d<T>("oracle.c4", c.c3, c.c4, 3, 2, 1, rng);
        gn1 = GroupNorm<T>("oracle.g1", c.c1, c.groups);
        gn2 = GroupNorm<T>("oracle.g2", c.c2, c.groups);
        gn3 = GroupNorm<T>("oracle.g3", c.c3, c.groups);
        gn4 = GroupNorm<T>("oracle.g4", c.c4, c.groups);
        int side = c.img / 16;
        fc = Linear<T>("oracle.fc", side * side * c.c4, c.num_classes, rng);
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> ps;
        for (auto& l : {conv1.params(), gn1.params(), conv2.params(), gn2.params(),
                        conv3.params(), gn3.params(), conv4.params(), gn4.params(),
                        fc.params()})
            ps.insert(ps.end(), l.begin(), l.end());
        return ps;
    }

    // images (n,img,img,img_c) in [-1,1] -> logits (n,1,1,num_classes)
    Tensor<T> fwd(const Tensor<T>& x, bool cache) {
        require(x.h == cfg.img && x.w == cfg.img && x.c == cfg.img_c,
                "oracle: input shape mismatch " + x.shape_str());
        Tensor<T> t = a1.fwd(gn1.fwd(conv1.fwd(x, cache), cache), cache);
        t = a2.fwd(gn2.fwd(conv2.fwd(t, cache), cache), cache);
        t = a3.fwd(gn3.fwd(conv3.fwd(t, cache), cache), cache);
        t = a4.fwd(gn4.fwd(conv4.fwd(t, cache), cache), cache);
        return fc.fwd(detail::flatten_rows(std::move(t)), cache);
    }

    void bwd(const Tensor<T>& dlogits) {
        int side = cfg.img / 16;
        Tensor<T> d = detail::unflatten_rows(fc.bwd(dlogits), side, side, cfg.c4);
        d = conv4.bwd(gn4.bwd(a4.bwd(d)));
        d = conv3.bwd(gn3.bwd(a3.bwd(d)));
        d = conv2.bwd(gn2.bwd(a2.bwd(d)));
        conv1.bwd(gn1.bwd(a1.bwd(d)));
    }
};

struct Oracle {
    OracleConfig cfg;
    OracleNet<float> net;
    double holdout_accuracy = 0.0;
    double noise_max_prob = 1.0;

    bool ready() const { return holdout_accuracy >= cfg.accuracy_gate; }

    // Softmax class probabilities; the serving gate lives here so every
    // consumer (filter, metrics) inherits it.
    Tensor<float> probs(const Tensor<float>& images) {
        require(images.n > 0, "oracle: empty image batch");
        require(ready(), "oracle: held-out accuracy " + std::to_string(holdout_accuracy) +
                             " below gate " + std::to_string(cfg.accuracy_gate) +
                             "; refusing to serve");
        return softmax_rows(net.fwd(images, false));
    }
};

namespace detail {

struct OracleRenderPool {
    std::vector<ImageU8> images;
    std::vector<int> labels;
};

// Round-robin classes; spec sampling already jitters color, position,
// rotation and scale.
inline OracleRenderPool oracle_render_pool(const OracleConfig& cfg, uint64_t seed, int count,
                                           const char* tag) {
    OracleRenderPool pool;
    pool.images.reserve(count);
    pool.labels.reserve(count);
    for (int i = 0; i < count; ++i) {
        int cls = i % cfg.num_classes;
        Rng rng(substream(seed, tag, static_cast<uint64_t>(i)));
        ShapeSpec spec = sample_spec(cls, rng, cfg.img, cfg.img);
        pool.images.push_back(to_u8(render(spec, cfg.img, cfg.img).img));
        pool.labels.push_back(cls);
    }
    return pool;
}

inline double oracle_holdout_accuracy(Oracle& o, const OracleRenderPool& pool, int batch) {
    int correct = 0, total = static_cast<int>(pool.images.size());
    for (int at = 0; at < total; at += batch) {
        int n = std::min(batch, total - at);
        Tensor<float> x(n, o.cfg.img, o.cfg.img, o.cfg.img_c);
        for (int i = 0; i < n; ++i) decode_image_into(x, i, pool.images[at + i]);
        Tensor<float> p = softmax_rows(o.net.fwd(x, false));
        for (int i = 0; i < n; ++i) {
            const float* pp = &p.at(i, 0, 0, 0);
            int arg = 0;
            for (int k = 1; k < o.cfg.num_classes; ++k)
                if (pp[k] > pp[arg]) arg = k;
            if (arg == pool.labels[at + i]) ++correct;
        }
    }
    return static_cast<double>(correct) / total;
}

inline double oracle_noise_max_prob(Oracle& o, uint64_t seed, int count) {
    Rng rng(substream(seed, "oracle_noise"));
    Tensor<float> x(count, o.cfg.img, o.cfg.img, o.cfg.img_c);
    for (size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
    Tensor<float> p = softmax_rows(o.net.fwd(x, false));
    double mx = 0;
    for (size_t i = 0; i < p.size(); ++i) mx = std::max(mx, static_cast<double>(p[i]));
    return mx;
}

}  // namespace detail

// Cross-entropy training on jittered renders. A noise_frac share of each
// batch is uniform noise with a flat target, which calibrates the oracle
// to stay uncertain off-distribution.
inline Oracle train_oracle(const OracleConfig& cfg, std::ostream* log = nullptr) {
    cfg.validate();
    Oracle o;
    o.cfg = cfg;
    o.net = OracleNet<float>(cfg);

    detail::OracleRenderPool train =
        detail::oracle_render_pool(cfg, cfg.seed, cfg.train_renders, "oracle_train_data");
    detail::OracleRenderPool holdout =
        detail::oracle_render_pool(cfg, cfg.seed, cfg.holdout_renders, "oracle_holdout_data");

    AdamW<float> opt;
    opt.lr = cfg.learning_rate;
    opt.weight_decay = cfg.weight_decay;
    std::vector<Param<float>*> params = o.net.params();

    int k = cfg.num_classes;
    int steps = (cfg.train_renders + cfg.batch - 1) / cfg.batch;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // linear decay to 10%: sharpens the late decision boundary
        double progress = cfg.epochs > 1 ? static_cast<double>(epoch) / (cfg.epochs - 1) : 0.0;
        opt.lr = cfg.learning_rate * (1.0 - 0.9 * progress);
        double ep_loss = 0;
        for (int step = 0; step < steps; ++step) {
            Rng rng(substream(cfg.seed, "oracle_step", static_cast<uint64_t>(epoch),
                              static_cast<uint64_t>(step)));
            Tensor<float> x(cfg.batch, cfg.img, cfg.img, cfg.img_c);
            Tensor<float> target(cfg.batch, 1, 1, k);
            for (int i = 0; i < cfg.batch; ++i) {
                if (rng.uniform() < cfg.noise_frac) {
                    float* xp = &x.at(i, 0, 0, 0);
                    size_t m = static_cast<size_t>(cfg.img) * cfg.img * cfg.img_c;
                    for (size_t j = 0; j < m; ++j)
                        xp[j] = static_cast<float>(rng.uniform(-1.0, 1.0));
                    for (int c = 0; c < k; ++c) target.at(i, 0, 0, c) = 1.0f / k;
                    continue;
                }
                size_t idx = rng.below(train.images.size());
                decode_image_into(x, i, train.images[idx]);
                float sigma = static_cast<float>(rng.uniform(0.0, cfg.jitter_sigma));
                float* xp = &x.at(i, 0, 0, 0);
                size_t m = static_cast<size_t>(cfg.img) * cfg.img * cfg.img_c;
                for (size_t j = 0; j < m; ++j) {
                    float v = xp[j] + sigma * static_cast<float>(rng.normal());
                    xp[j] = std::clamp(v, -1.0f, 1.0f);
                }
                target.at(i, 0, 0, train.labels[idx]) = 1.0f;
            }

            Tensor<float> logits = o.net.fwd(x, true);
            Tensor<float> p = softmax_rows(logits);
            double loss = 0;
            Tensor<float> dl(cfg.batch, 1, 1, k);
            for (int i = 0; i < cfg.batch; ++i)
                for (int c = 0; c < k; ++c) {
                    double t = target.at(i, 0, 0, c);
                    double pv = std::max(static_cast<double>(p.at(i, 0, 0, c)), 1e-12);
                    if (t > 0) loss -= t * std::log(pv);
                    dl.at(i, 0, 0, c) =
                        static_cast<float>((p.at(i, 0, 0, c) - t) / cfg.batch);
                }
            loss /= cfg.batch;
            require(std::isfinite(loss), "oracle: loss diverged");
            ep_loss += loss;

            AdamW<float>::zero_grads(params);
            o.net.bwd(dl);
            opt.step(params);
        }
        if (log)
            (*log) << "oracle epoch " << epoch << " loss " << ep_loss / steps << "\n";
    }

    o.holdout_accuracy = detail::oracle_holdout_accuracy(o, holdout, cfg.batch);
    o.noise_max_prob = detail::oracle_noise_max_prob(o, cfg.seed, 64);
    if (log)
        (*log) << "oracle holdout accuracy " << o.holdout_accuracy << " noise max prob "
               << o.noise_max_prob << "\n";
    return o;
}

inline void save_oracle(const std::filesystem::path& path, Oracle& o) {
    json extra = {{"holdout_accuracy", o.holdout_accuracy},
                  {"noise_max_prob", o.noise_max_prob}};
    save_checkpoint(path, "oracle", o.cfg, o.net.params(), extra);
}

inline Oracle load_oracle(const std::filesystem::path& path) {
    json header = read_checkpoint_header(path);
    Oracle o;
    o.cfg = header.at("config").get<OracleConfig>();
    o.net = OracleNet<float>(o.cfg);
    json extra = load_checkpoint(path, "oracle", o.cfg, o.net.params());
    o.holdout_accuracy = extra.at("holdout_accuracy");
    o.noise_max_prob = extra.at("noise_max_prob");
    return o;
}

}  // namespace adascale
