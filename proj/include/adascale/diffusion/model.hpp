#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "adascale/core/hash.hpp"
#include "adascale/core/ops.hpp"
#include "adascale/core/rng.hpp"
#include "adascale/core/tensor.hpp"
#include "adascale/nn/layers.hpp"

namespace adascale {

// ---------------------------------------------------------------------------
// configuration

struct ModelConfig {
    int img = 64;          // square image side
    int img_c = 3;         // image channels
    int c0 = 16;           // width at full resolution
    int c1 = 32;           // width at half resolution
    int c2 = 64;           // width at quarter resolution
    int emb_dim = 128;     // class / timestep embedding width
    int t_sin_dim = 64;    // sinusoidal timestep feature width
    int num_classes = 9;
    int groups = 8;        // GroupNorm groups
    int train_steps = 400;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    // scale predictor capacity (trunk widths are block_channels / div)
    int pred_div1 = 2;
    int pred_div2 = 4;
    int pred_div3 = 8;
    int pred_k = 3;           // kernel of the two trunk convolutions
    bool pred_global = false; // one scalar per block instead of a spatial map
    uint64_t init_seed = 11;
};

inline constexpr int kNumFusion = 3;  // fusion points, deepest first

// Resolutions and channel widths at the three fusion points.
inline std::array<int, kNumFusion> fusion_res(const ModelConfig& c) {
    return {c.img / 4, c.img / 2, c.img};
}
inline std::array<int, kNumFusion> fusion_channels(const ModelConfig& c) {
    return {c.c2, c.c1, c.c0};
}

// ---------------------------------------------------------------------------
// fusion: z = h + alpha (x) h_cond, with alpha one map per spatial position
// broadcast across channels.

template <typename T>
inline Tensor<T> fuse_scaled(const Tensor<T>& h, const Tensor<T>& hc, const Tensor<T>& alpha) {
    require(h.same_shape(hc), "fuse: h/h_cond shape mismatch");
    require(alpha.n == h.n && alpha.h == h.h && alpha.w == h.w && alpha.c == 1,
            "fuse: alpha must be (n,h,w,1)");
    Tensor<T> z(h.n, h.h, h.w, h.c);
    size_t rows = static_cast<size_t>(h.n) * h.h * h.w;
    for (size_t r = 0; r < rows; ++r) {
        T a = alpha.v[r];
        const T* hp = h.data() + r * h.c;
        const T* cp = hc.data() + r * h.c;
        T* zp = z.data() + r * h.c;
        for (int ch = 0; ch < h.c; ++ch) zp[ch] = hp[ch] + a * cp[ch];
    }
    return z;
}

// d alpha(p) = sum_c dz(p,c) * h_cond(p,c)
template <typename T>
inline Tensor<T> fuse_bwd_alpha(const Tensor<T>& dz, const Tensor<T>& hc) {
    Tensor<T> da(dz.n, dz.h, dz.w, 1);
    size_t rows = static_cast<size_t>(dz.n) * dz.h * dz.w;
    for (size_t r = 0; r < rows; ++r) {
        const T* dp = dz.data() + r * dz.c;
        const T* cp = hc.data() + r * dz.c;
        T s = T(0);
        for (int ch = 0; ch < dz.c; ++ch) s += dp[ch] * cp[ch];
        da.v[r] = s;
    }
    return da;
}

// d h_cond = alpha (x) dz
template <typename T>
inline Tensor<T> fuse_bwd_cond(const Tensor<T>& dz, const Tensor<T>& alpha) {
    Tensor<T> dc(dz.n, dz.h, dz.w, dz.c);
    size_t rows = static_cast<size_t>(dz.n) * dz.h * dz.w;
    for (size_t r = 0; r < rows; ++r) {
        T a = alpha.v[r];
        const T* dp = dz.data() + r * dz.c;
        T* cp = dc.data() + r * dz.c;
        for (int ch = 0; ch < dz.c; ++ch) cp[ch] = a * dp[ch];
    }
    return dc;
}

// ---------------------------------------------------------------------------
// residual blocks (depthwise-separable convs, GroupNorm, SiLU, additive
// embedding bias per channel)

template <typename T>
struct EncBlock {
    GroupNorm<T> gn;
    SiLU<T> act;
    DepthwiseConv3<T> dw;
    PointwiseConv<T> pw;
    Linear<T> emb_lin;

    EncBlock() = default;
    EncBlock(const std::string& name, int c, int emb_dim, int groups, Rng& rng)
        : gn(name + ".gn", c, groups), dw(name + ".dw", c, 1, rng),
          pw(name + ".pw", c, c, rng), emb_lin(name + ".emb", emb_dim, c, rng) {
        pw.w.w.fill(T(0));  // start as identity + embedding bias
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> ps;
        for (auto& l : {gn.params(), dw.params(), pw.params(), emb_lin.params()})
            ps.insert(ps.end(), l.begin(), l.end());
        return ps;
    }

    void set_frozen(bool f) {
        gn.frozen = dw.frozen = pw.frozen = emb_lin.frozen = f;
    }

    Tensor<T> fwd(const Tensor<T>& x, const Tensor<T>& e, bool cache) {
        Tensor<T> u = pw.fwd(dw.fwd(act.fwd(gn.fwd(x, cache), cache), cache), cache);
        add_channel_bias(u, emb_lin.fwd(e, cache));
        u.add_(x);
        return u;
    }

    Tensor<T> bwd(const Tensor<T>& dy, Tensor<T>* de_acc) {
        if (de_acc) de_acc->add_(emb_lin.bwd(sum_spatial(dy)));
        Tensor<T> dx = gn.bwd(act.bwd(dw.bwd(pw.bwd(dy))));
        dx.add_(dy);
        return dx;
    }
};

template <typename T>
struct DecBlock {
    GroupNorm<T> gn1, gn2;
    SiLU<T> a1, a2;
    DepthwiseConv3<T> dw1, dw2;
    PointwiseConv<T> pw1, pw2;
    Linear<T> emb_lin;

    DecBlock() = default;
    DecBlock(const std::string& name, int c, int emb_dim, int groups, Rng& rng)
        : gn1(name + ".gn1", c, groups), gn2(name + ".gn2", c, groups),
          dw1(name + ".dw1", c, 1, rng), dw2(name + ".dw2", c, 1, rng),
          pw1(name + ".pw1", c, c, rng), pw2(name + ".pw2", c, c, rng),
          emb_lin(name + ".emb", emb_dim, c, rng) {
        pw2.w.w.fill(T(0));  // residual branch starts at zero
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> ps;
        for (auto& l : {gn1.params(), dw1.params(), pw1.params(), emb_lin.params(),
                        gn2.params(), dw2.params(), pw2.params()})
            ps.insert(ps.end(), l.begin(), l.end());
        return ps;
    }

    void set_frozen(bool f) {
        gn1.frozen = gn2.frozen = dw1.frozen = dw2.frozen = f;
        pw1.frozen = pw2.frozen = emb_lin.frozen = f;
    }

    Tensor<T> fwd(const Tensor<T>& x, const Tensor<T>& e, bool cache) {
        Tensor<T> u = pw1.fwd(dw1.fwd(a1.fwd(gn1.fwd(x, cache), cache), cache), cache);
        add_channel_bias(u, emb_lin.fwd(e, cache));
        Tensor<T> u2 = pw2.fwd(dw2.fwd(a2.fwd(gn2.fwd(std::move(u), cache), cache), cache), cache);
        u2.add_(x);
        return u2;
    }

    Tensor<T> bwd(const Tensor<T>& dy, Tensor<T>* de_acc) {
        Tensor<T> du = gn2.bwd(a2.bwd(dw2.bwd(pw2.bwd(dy))));
        if (de_acc) de_acc->add_(emb_lin.bwd(sum_spatial(du)));
        Tensor<T> dx = gn1.bwd(a1.bwd(dw1.bwd(pw1.bwd(du))));
        dx.add_(dy);
        return dx;
    }
};

// ---------------------------------------------------------------------------
// denoising backbone: 3-level UNet over NHWC, additive encoder skips,
// epsilon-prediction head

template <typename T>
struct Backbone {
    Conv2d<T> stem;
    EncBlock<T> e0, e1, e2;
    DepthwiseConv3<T> down0_dw, down1_dw;
    PointwiseConv<T> down0_pw, down1_pw;
    DecBlock<T> mid, d0, d1, d2;
    PointwiseConv<T> up0_pw, up1_pw;
    GroupNorm<T> head_gn;
    SiLU<T> head_act;
    PointwiseConv<T> head_pw;
    Linear<T> t_mlp1, t_mlp2;
    SiLU<T> t_act;
    Embedding<T> cls_emb;

    Backbone() = default;
    Backbone(const ModelConfig& c, Rng& rng)
        : stem("bb.stem", c.img_c, c.c0, 3, 1, 1, rng),
          e0("bb.e0", c.c0, c.emb_dim, c.groups, rng),
          e1("bb.e1", c.c1, c.emb_dim, c.groups, rng),
          e2("bb.e2", c.c2, c.emb_dim, c.groups, rng),
          down0_dw("bb.down0.dw", c.c0, 2, rng), down1_dw("bb.down1.dw", c.c1, 2, rng),
          down0_pw("bb.down0.pw", c.c0, c.c1, rng), down1_pw("bb.down1.pw", c.c1, c.c2, rng),
          mid("bb.mid", c.c2, c.emb_dim, c.groups, rng),
          d0("bb.d0", c.c2, c.emb_dim, c.groups, rng),
          d1("bb.d1", c.c1, c.emb_dim, c.groups, rng),
          d2("bb.d2", c.c0, c.emb_dim, c.groups, rng),
          up0_pw("bb.up0.pw", c.c2, c.c1, rng), up1_pw("bb.up1.pw", c.c1, c.c0, rng),
          head_gn("bb.head.gn", c.c0, c.groups),
          head_pw("bb.head.pw", c.c0, c.img_c, rng),
          t_mlp1("bb.temb.l1", c.t_sin_dim, c.emb_dim, rng),
          t_mlp2("bb.temb.l2", c.emb_dim, c.emb_dim, rng),
          cls_emb("bb.cls", c.num_classes, c.emb_dim, rng) {
        head_pw.w.w.fill(T(0));  // predicted noise starts at zero
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> ps;
        auto app = [&ps](std::vector<Param<T>*> l) { ps.insert(ps.end(), l.begin(), l.end()); };
        app(stem.params());
        app(e0.params());
        app(down0_dw.params());
        app(down0_pw.params());
        app(e1.params());
        app(down1_dw.params());
        app(down1_pw.params());
        app(e2.params());
        app(mid.params());
        app(d0.params());
        app(up0_pw.params());
        app(d1.params());
        app(up1_pw.params());
        app(d2.params());
        app(head_gn.params());
        app(head_pw.params());
        app(t_mlp1.params());
        app(t_mlp2.params());
        app(cls_emb.params());
        return ps;
    }

    void set_frozen(bool f) {
        stem.frozen = f;
        e0.set_frozen(f);
        e1.set_frozen(f);
        e2.set_frozen(f);
        down0_dw.frozen = down1_dw.frozen = down0_pw.frozen = down1_pw.frozen = f;
        mid.set_frozen(f);
        d0.set_frozen(f);
        d1.set_frozen(f);
        d2.set_frozen(f);
        up0_pw.frozen = up1_pw.frozen = f;
        head_gn.frozen = head_pw.frozen = f;
        t_mlp1.frozen = t_mlp2.frozen = cls_emb.frozen = f;
    }
};

// ---------------------------------------------------------------------------
// control branch: mirrors the encoder, reads (noisy image, condition map),
// emits one feature map per fusion point through zero-initialized taps

template <typename T>
struct ControlBranch {
    Conv2d<T> stem;
    EncBlock<T> e0, e1, e2, mid;
    DepthwiseConv3<T> down0_dw, down1_dw;
    PointwiseConv<T> down0_pw, down1_pw;
    PointwiseConv<T> tap16, tap32, tap64;

    ControlBranch() = default;
    ControlBranch(const ModelConfig& c, Rng& rng)
        : stem("ctl.stem", c.img_c + 1, c.c0, 3, 1, 1, rng),
          e0("ctl.e0", c.c0, c.emb_dim, c.groups, rng),
          e1("ctl.e1", c.c1, c.emb_dim, c.groups, rng),
          e2("ctl.e2", c.c2, c.emb_dim, c.groups, rng),
          mid("ctl.mid", c.c2, c.emb_dim, c.groups, rng),
          down0_dw("ctl.down0.dw", c.c0, 2, rng), down1_dw("ctl.down1.dw", c.c1, 2, rng),
          down0_pw("ctl.down0.pw", c.c0, c.c1, rng), down1_pw("ctl.down1.pw", c.c1, c.c2, rng),
          tap16("ctl.tap16", c.c2, c.c2, rng), tap32("ctl.tap32", c.c1, c.c1, rng),
          tap64("ctl.tap64", c.c0, c.c0, rng) {
        // Zero taps: an untrained branch leaves the backbone untouched.
        tap16.w.w.fill(T(0));
        tap32.w.w.fill(T(0));
        tap64.w.w.fill(T(0));
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> ps;
        auto app = [&ps](std::vector<Param<T>*> l) { ps.insert(ps.end(), l.begin(), l.end()); };
        app(stem.params());
        app(e0.params());
        app(tap64.params());
        app(down0_dw.params());
        app(down0_pw.params());
        app(e1.params());
        app(tap32.params());
        app(down1_dw.params());
        app(down1_pw.params());
        app(e2.params());
        app(mid.params());
        app(tap16.params());
        return ps;
    }

    void set_frozen(bool f) {
        stem.frozen = f;
        e0.set_frozen(f);
        e1.set_frozen(f);
        e2.set_frozen(f);
        mid.set_frozen(f);
        down0_dw.frozen = down1_dw.frozen = down0_pw.frozen = down1_pw.frozen = f;
        tap16.frozen = tap32.frozen = tap64.frozen = f;
    }

    // Returns feature maps at the fusion points, deepest first.
    std::array<Tensor<T>, kNumFusion> fwd(const Tensor<T>& xt, const Tensor<T>& cond,
                                          const Tensor<T>& e, bool cache) {
        Tensor<T> a0 = e0.fwd(stem.fwd(concat_c(xt, cond), cache), e, cache);
        Tensor<T> c64 = tap64.fwd(a0, cache);
        Tensor<T> a1 = e1.fwd(down0_pw.fwd(down0_dw.fwd(a0, cache), cache), e, cache);
        Tensor<T> c32 = tap32.fwd(a1, cache);
        Tensor<T> a2 = mid.fwd(e2.fwd(down1_pw.fwd(down1_dw.fwd(a1, cache), cache), e, cache),
                               e, cache);
        Tensor<T> c16 = tap16.fwd(a2, cache);
        return {std::move(c16), std::move(c32), std::move(c64)};
    }

    void bwd(const Tensor<T>& dc16, const Tensor<T>& dc32, const Tensor<T>& dc64,
             Tensor<T>* de_acc) {
        Tensor<T> da2 = mid.bwd(tap16.bwd(dc16), de_acc);
        Tensor<T> da1 = down1_dw.bwd(down1_pw.bwd(e2.bwd(da2, de_acc)));
        da1.add_(tap32.bwd(dc32));
        Tensor<T> da0 = down0_dw.bwd(down0_pw.bwd(e1.bwd(da1, de_acc)));
        da0.add_(tap64.bwd(dc64));
        stem.bwd(e0.bwd(da0, de_acc));
    }
};

// ---------------------------------------------------------------------------
// scale predictor: per fusion block, a small conv stack mapping
// (h, h + h_cond) to a sigmoid scale in (0, 1) per pixel (or per block when
// pooled)

template <typename T>
struct PredHead {
    int c = 0;  // backbone channels at this block
    bool global_pool = false;
    PointwiseConv<T> pw_in;
    Conv2d<T> conv_a, conv_b;
    ReLU<T> r1, r2, r3;
    GlobalAvgPool<T> gap;
    PointwiseConv<T> pw_out;
    Sigmoid<T> sig;

    PredHead() = default;
    PredHead(const std::string& name, int c_, const ModelConfig& cfg, Rng& rng)
        : c(c_), global_pool(cfg.pred_global),
          pw_in(name + ".in", 2 * c_, c_ / cfg.pred_div1, rng),
          conv_a(name + ".ca", c_ / cfg.pred_div1, c_ / cfg.pred_div2, cfg.pred_k, 1,
                 cfg.pred_k / 2, rng),
          conv_b(name + ".cb", c_ / cfg.pred_div2, c_ / cfg.pred_div3, cfg.pred_k, 1,
                 cfg.pred_k / 2, rng),
          pw_out(name + ".out", c_ / cfg.pred_div3, 1, rng) {
        require(c_ % cfg.pred_div1 == 0 && c_ % cfg.pred_div2 == 0 && c_ % cfg.pred_div3 == 0,
                "predictor: widths must divide block channels");
        // Bias the sigmoid head positive so training starts near "keep the
        // condition" instead of suppressing it everywhere.
        pw_out.b.w.fill(T(2));
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> ps;
        for (auto& l : {pw_in.params(), conv_a.params(), conv_b.params(), pw_out.params()})
            ps.insert(ps.end(), l.begin(), l.end());
        return ps;
    }

    void set_frozen(bool f) {
        pw_in.frozen = conv_a.frozen = conv_b.frozen = pw_out.frozen = f;
    }

    Tensor<T> fwd(const Tensor<T>& h, const Tensor<T>& u, bool cache) {
        Tensor<T> t = r1.fwd(pw_in.fwd(concat_c(h, u), cache), cache);
        t = r2.fwd(conv_a.fwd(t, cache), cache);
        t = r3.fwd(conv_b.fwd(t, cache), cache);
        if (global_pool) {
            Tensor<T> s = sig.fwd(pw_out.fwd(gap.fwd(t, cache), cache), cache);
            Tensor<T> a(t.n, t.h, t.w, 1);
            for (int in = 0; in < t.n; ++in) {
                T v = s.at(in, 0, 0, 0);
                for (int yy = 0; yy < t.h; ++yy)
                    for (int xx = 0; xx < t.w; ++xx) a.at(in, yy, xx, 0) = v;
            }
            return a;
        }
        return sig.fwd(pw_out.fwd(t, cache), cache);
    }

    // Returns (dh, du) for the two inputs.
    std::pair<Tensor<T>, Tensor<T>> bwd(const Tensor<T>& da) {
        Tensor<T> d;
        if (global_pool) {
            Tensor<T> ds(da.n, 1, 1, 1);
            for (int in = 0; in < da.n; ++in) {
                T s = T(0);
                for (int yy = 0; yy < da.h; ++yy)
                    for (int xx = 0; xx < da.w; ++xx) s += da.at(in, yy, xx, 0);
                ds.at(in, 0, 0, 0) = s;
            }
            d = gap.bwd(pw_out.bwd(sig.bwd(ds)));
        } else {
            d = pw_out.bwd(sig.bwd(da));
        }
        d = pw_in.bwd(r1.bwd(conv_a.bwd(r2.bwd(conv_b.bwd(r3.bwd(d))))));
        Tensor<T> dh, du;
        split_c(d, c, dh, du);
        return {std::move(dh), std::move(du)};
    }
};

template <typename T>
struct ScalePredictor {
    std::array<PredHead<T>, kNumFusion> heads;

    ScalePredictor() = default;
    ScalePredictor(const ModelConfig& c, Rng& rng) {
        auto ch = fusion_channels(c);
        heads[0] = PredHead<T>("pred.b0", ch[0], c, rng);
        heads[1] = PredHead<T>("pred.b1", ch[1], c, rng);
        heads[2] = PredHead<T>("pred.b2", ch[2], c, rng);
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> ps;
        for (auto& head : heads) {
            auto l = head.params();
            ps.insert(ps.end(), l.begin(), l.end());
        }
        return ps;
    }

    void set_frozen(bool f) {
        for (auto& head : heads) head.set_frozen(f);
    }
};

// ---------------------------------------------------------------------------
// full model

enum class ScaleMode {
    detached,   // control branch not evaluated at all
    one,        // alpha = 1 everywhere (training-time and faithful sampling)
    fixed_maps, // caller-provided alpha map per fusion block
    predictor,  // alpha from the scale predictor
};

enum class CacheMode { none, full, pred_train };

template <typename T>
struct FusionTrace {
    std::array<Tensor<T>, kNumFusion> h, hc, u, alpha;
};

template <typename T>
struct DiffusionModel {
    ModelConfig cfg;
    Backbone<T> bb;
    ControlBranch<T> ctl;
    ScalePredictor<T> pred;
    Upsample2x<T> up2x;

    explicit DiffusionModel(const ModelConfig& c) : cfg(c) {
        Rng rng(c.init_seed);
        bb = Backbone<T>(c, rng);
        ctl = ControlBranch<T>(c, rng);
        pred = ScalePredictor<T>(c, rng);
    }

    std::vector<Param<T>*> backbone_params() { return bb.params(); }
    std::vector<Param<T>*> control_params() { return ctl.params(); }
    std::vector<Param<T>*> predictor_params() { return pred.params(); }

    // The pooled head reuses the spatial head's parameters, so a checkpoint
    // from either predictor variant can seed the other.
    void set_pred_global(bool g) {
        cfg.pred_global = g;
        for (auto& head : pred.heads) head.global_pool = g;
    }

    // Sinusoidal timestep features.
    Tensor<T> time_features(const std::vector<int>& ts) const {
        int half = cfg.t_sin_dim / 2;
        Tensor<T> f(static_cast<int>(ts.size()), 1, 1, cfg.t_sin_dim);
        for (size_t i = 0; i < ts.size(); ++i)
            for (int j = 0; j < half; ++j) {
                double w = std::exp(-std::log(10000.0) * j / (half - 1));
                f.at(static_cast<int>(i), 0, 0, 2 * j) = static_cast<T>(std::sin(ts[i] * w));
                f.at(static_cast<int>(i), 0, 0, 2 * j + 1) = static_cast<T>(std::cos(ts[i] * w));
            }
        return f;
    }

    Tensor<T> embed(const std::vector<int>& ts, const std::vector<int>& cls, bool cache) {
        Tensor<T> e = bb.t_mlp2.fwd(bb.t_act.fwd(bb.t_mlp1.fwd(time_features(ts), cache), cache),
                                    cache);
        e.add_(bb.cls_emb.fwd(cls, cache));
        return e;
    }

    void embed_bwd(const Tensor<T>& de) {
        bb.cls_emb.bwd(de);
        bb.t_mlp1.bwd(bb.t_act.bwd(bb.t_mlp2.bwd(de)));
    }

    // Downsample an image-resolution scale map to the three block resolutions.
    std::array<Tensor<T>, kNumFusion> scale_maps_from_image(const Tensor<T>& img_map) const {
        require(img_map.c == 1, "scale map must be single channel");
        auto res = fusion_res(cfg);
        std::array<Tensor<T>, kNumFusion> maps;
        for (int i = 0; i < kNumFusion; ++i) maps[i] = resize_nearest(img_map, res[i], res[i]);
        return maps;
    }

    std::array<Tensor<T>, kNumFusion> uniform_scale_maps(T value, int n) const {
        auto res = fusion_res(cfg);
        std::array<Tensor<T>, kNumFusion> maps;
        for (int i = 0; i < kNumFusion; ++i) maps[i] = Tensor<T>::full(n, res[i], res[i], 1, value);
        return maps;
    }

    // Predict noise for a batch. `cond` may be null only in detached mode;
    // `fixed_alpha` is read only in fixed_maps mode. The fusion trace (h,
    // h_cond, predictor input, alpha per block) is stored internally for the
    // backward passes and optionally copied out.
    Tensor<T> fwd(const Tensor<T>& xt, const std::vector<int>& ts, const std::vector<int>& cls,
                  const Tensor<T>* cond, ScaleMode mode,
                  const std::array<Tensor<T>, kNumFusion>* fixed_alpha, CacheMode cache,
                  FusionTrace<T>* trace_out = nullptr) {
        require(static_cast<int>(ts.size()) == xt.n && static_cast<int>(cls.size()) == xt.n,
                "model: ts/cls must match batch");
        bool cf = cache == CacheMode::full;          // cache everything trainable in stage A
        bool cd = cf || cache == CacheMode::pred_train;  // cache the decoder path
        bool cp = cd;                                 // cache predictor layers
        mode_ = mode;

        Tensor<T> e = embed(ts, cls, cf);

        // encoder
        Tensor<T> s = bb.stem.fwd(xt, cf);
        Tensor<T> b0 = bb.e0.fwd(s, e, cf);
        Tensor<T> b1 = bb.e1.fwd(bb.down0_pw.fwd(bb.down0_dw.fwd(b0, cf), cf), e, cf);
        Tensor<T> b2 = bb.e2.fwd(bb.down1_pw.fwd(bb.down1_dw.fwd(b1, cf), cf), e, cf);
        Tensor<T> h = bb.mid.fwd(b2, e, cd);

        // control features
        std::array<Tensor<T>, kNumFusion> hc;
        if (mode != ScaleMode::detached) {
            require(cond != nullptr, "model: condition map required unless detached");
            hc = ctl.fwd(xt, *cond, e, cf);
        }

        bool keep_trace = cache != CacheMode::none || trace_out != nullptr;
        if (keep_trace) trace_ = FusionTrace<T>();

        DecBlock<T>* dec[kNumFusion] = {&bb.d0, &bb.d1, &bb.d2};
        PointwiseConv<T>* ups[2] = {&bb.up0_pw, &bb.up1_pw};
        Tensor<T>* skips[2] = {&b1, &b0};

        for (int i = 0; i < kNumFusion; ++i) {
            Tensor<T> z;
            if (mode == ScaleMode::detached) {
                z = h;
            } else {
                Tensor<T> alpha;
                if (mode == ScaleMode::one) {
                    alpha = Tensor<T>::full(h.n, h.h, h.w, 1, T(1));
                } else if (mode == ScaleMode::fixed_maps) {
                    require(fixed_alpha != nullptr, "model: fixed_maps needs maps");
                    alpha = (*fixed_alpha)[i];
                    require(alpha.n == h.n && alpha.h == h.h && alpha.w == h.w && alpha.c == 1,
                            "model: fixed alpha map shape mismatch at block " + std::to_string(i));
                } else {
                    Tensor<T> u = h;
                    u.add_(hc[i]);
                    alpha = pred.heads[i].fwd(h, u, cp);
                    if (keep_trace) trace_.u[i] = std::move(u);
                }
                z = fuse_scaled(h, hc[i], alpha);
                if (keep_trace) {
                    trace_.h[i] = h;
                    trace_.hc[i] = hc[i];
                    trace_.alpha[i] = std::move(alpha);
                }
            }
            Tensor<T> dout = dec[i]->fwd(z, e, cd);
            if (i < 2) {
                h = up2x.fwd(ups[i]->fwd(dout, cd));
                h.add_(*skips[i]);
            } else {
                h = std::move(dout);
            }
        }

        Tensor<T> eps = bb.head_pw.fwd(bb.head_act.fwd(bb.head_gn.fwd(h, cd), cd), cd);
        if (trace_out) *trace_out = trace_;
        return eps;
    }

    const FusionTrace<T>& trace() const { return trace_; }

    // Stage-A backward: gradients for backbone, control branch and
    // embeddings. Requires a prior fwd with CacheMode::full and mode `one`.
    void bwd_full(const Tensor<T>& d_eps) {
        require(mode_ == ScaleMode::one, "bwd_full: expected alpha == 1 training forward");
        Tensor<T> de(d_eps.n, 1, 1, cfg.emb_dim);

        Tensor<T> dh = bb.head_gn.bwd(bb.head_act.bwd(bb.head_pw.bwd(d_eps)));

        DecBlock<T>* dec[kNumFusion] = {&bb.d0, &bb.d1, &bb.d2};
        PointwiseConv<T>* ups[2] = {&bb.up0_pw, &bb.up1_pw};
        std::array<Tensor<T>, kNumFusion> dhc;
        Tensor<T> dskip[2];

        for (int i = kNumFusion - 1; i >= 0; --i) {
            if (i < 2) {
                dskip[i] = dh;  // skip connection shares the upsampled grad
                dh = ups[i]->bwd(up2x.bwd(dh));
            }
            Tensor<T> dz = dec[i]->bwd(dh, &de);
            dhc[i] = dz;  // alpha == 1: d h_cond = dz
            dh = std::move(dz);
        }

        ctl.bwd(dhc[0], dhc[1], dhc[2], &de);

        // encoder: dh now holds the gradient at the mid-block output
        Tensor<T> db2 = bb.mid.bwd(dh, &de);
        Tensor<T> db1 = bb.down1_dw.bwd(bb.down1_pw.bwd(bb.e2.bwd(db2, &de)));
        db1.add_(dskip[0]);
        Tensor<T> db0 = bb.down0_dw.bwd(bb.down0_pw.bwd(bb.e1.bwd(db1, &de)));
        db0.add_(dskip[1]);
        bb.stem.bwd(bb.e0.bwd(db0, &de));

        embed_bwd(de);
    }

    // Backbone-only backward for forwards that ran without the control
    // branch. Requires a prior fwd with CacheMode::full and mode `detached`.
    void bwd_detached(const Tensor<T>& d_eps) {
        require(mode_ == ScaleMode::detached, "bwd_detached: expected detached forward");
        Tensor<T> de(d_eps.n, 1, 1, cfg.emb_dim);
        Tensor<T> dh = bb.head_gn.bwd(bb.head_act.bwd(bb.head_pw.bwd(d_eps)));

        DecBlock<T>* dec[kNumFusion] = {&bb.d0, &bb.d1, &bb.d2};
        PointwiseConv<T>* ups[2] = {&bb.up0_pw, &bb.up1_pw};
        Tensor<T> dskip[2];

        for (int i = kNumFusion - 1; i >= 0; --i) {
            if (i < 2) {
                dskip[i] = dh;
                dh = ups[i]->bwd(up2x.bwd(dh));
            }
            dh = dec[i]->bwd(dh, &de);
        }

        Tensor<T> db2 = bb.mid.bwd(dh, &de);
        Tensor<T> db1 = bb.down1_dw.bwd(bb.down1_pw.bwd(bb.e2.bwd(db2, &de)));
        db1.add_(dskip[0]);
        Tensor<T> db0 = bb.down0_dw.bwd(bb.down0_pw.bwd(bb.e1.bwd(db1, &de)));
        db0.add_(dskip[1]);
        bb.stem.bwd(bb.e0.bwd(db0, &de));

        embed_bwd(de);
    }

    // Stage-B backward: only predictor weights receive gradients; the
    // decoder is traversed for activation gradients alone. `d_alpha_extra`
    // adds the direct loss-on-alpha term per block (may hold empty tensors).
    void bwd_pred(const Tensor<T>& d_eps, const std::array<Tensor<T>, kNumFusion>& d_alpha_extra) {
        require(mode_ == ScaleMode::predictor, "bwd_pred: expected predictor forward");
        Tensor<T> dh = bb.head_gn.bwd(bb.head_act.bwd(bb.head_pw.bwd(d_eps)));

        DecBlock<T>* dec[kNumFusion] = {&bb.d0, &bb.d1, &bb.d2};
        PointwiseConv<T>* ups[2] = {&bb.up0_pw, &bb.up1_pw};

        for (int i = kNumFusion - 1; i >= 0; --i) {
            if (i < 2) dh = ups[i]->bwd(up2x.bwd(dh));
            Tensor<T> dz = dec[i]->bwd(dh, nullptr);
            Tensor<T> da = fuse_bwd_alpha(dz, trace_.hc[i]);
            if (!d_alpha_extra[i].empty()) {
                require(da.same_shape(d_alpha_extra[i]), "bwd_pred: alpha grad shape mismatch");
                da.add_(d_alpha_extra[i]);
            }
            auto [dph, dpu] = pred.heads[i].bwd(da);
            if (i > 0) {
                dh = std::move(dz);
                dh.add_(dph);
                dh.add_(dpu);  // predictor input u = h + h_cond, d u / d h = 1
            }
        }
    }

    // Predictor-only backward when the noise loss is not in play (alpha
    // supervision alone). Requires a predictor-mode forward with caching.
    void bwd_pred_alpha_only(const std::array<Tensor<T>, kNumFusion>& d_alpha) {
        require(mode_ == ScaleMode::predictor, "bwd_pred_alpha_only: expected predictor forward");
        for (int i = 0; i < kNumFusion; ++i)
            if (!d_alpha[i].empty()) pred.heads[i].bwd(d_alpha[i]);
    }

private:
    FusionTrace<T> trace_;
    ScaleMode mode_ = ScaleMode::one;
};

// FNV-1a over raw parameter bytes, order-sensitive; verifies frozen weights.
template <typename T>
inline uint64_t param_checksum(const std::vector<Param<T>*>& ps) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto* p : ps) h = fnv1a64(p->w.data(), p->w.size() * sizeof(T), h);
    return h;
}

}  // namespace adascale
