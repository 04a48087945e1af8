#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "adascale/core/gemm.hpp"
#include "adascale/core/rng.hpp"
#include "adascale/core/tensor.hpp"

namespace adascale {

// ---------------------------------------------------------------------------
// parameters

template <typename T>
struct Param {
    std::string name;
    Tensor<T> w;  // value
    Tensor<T> g;  // accumulated gradient, same shape

    Param() = default;
    Param(std::string name_, int n, int h, int w_, int c)
        : name(std::move(name_)), w(n, h, w_, c), g(n, h, w_, c) {}

    void zero_grad() { g.fill(T(0)); }
};

template <typename T>
inline void init_normal(Param<T>& p, Rng& rng, double stdev) {
    for (auto& x : p.w.v) x = static_cast<T>(rng.normal() * stdev);
}

// Fan-in scaled init for layers feeding ReLU/SiLU.
template <typename T>
inline void init_he(Param<T>& p, Rng& rng, int fan_in) {
    init_normal(p, rng, std::sqrt(2.0 / fan_in));
}

namespace detail {

// y (m, co) += bias row-broadcast
template <typename T>
inline void add_bias_rows(T* y, const T* b, size_t m, int co) {
    for (size_t i = 0; i < m; ++i)
        for (int j = 0; j < co; ++j) y[i * co + j] += b[j];
}

// gb (co) += column sums of dy (m, co)
template <typename T>
inline void colsum_acc(const T* dy, T* gb, size_t m, int co) {
    for (size_t i = 0; i < m; ++i)
        for (int j = 0; j < co; ++j) gb[j] += dy[i * co + j];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// 1x1 convolution over NHWC == row-wise linear map. Doubles as the dense
// layer when h == w == 1.

template <typename T>
struct PointwiseConv {
    int ci = 0, co = 0;
    Param<T> w;  // (1,1,ci,co)
    Param<T> b;  // (1,1,1,co)
    bool frozen = false;

    PointwiseConv() = default;
    PointwiseConv(std::string name, int ci_, int co_, Rng& rng)
        : ci(ci_), co(co_), w(name + ".w", 1, 1, ci_, co_), b(name + ".b", 1, 1, 1, co_) {
        init_he(w, rng, ci_);
    }

    std::vector<Param<T>*> params() { return {&w, &b}; }

    Tensor<T> fwd(const Tensor<T>& x, bool cache) {
        Tensor<T> y = apply(x);
        if (cache) xc_ = x;
        else xc_ = Tensor<T>();
        return y;
    }

    Tensor<T> fwd(Tensor<T>&& x, bool cache) {
        Tensor<T> y = apply(x);
        if (cache) xc_ = std::move(x);
        else xc_ = Tensor<T>();
        return y;
    }

    Tensor<T> bwd(const Tensor<T>& dy) {
        size_t m = dy.size() / co;
        if (!frozen) {
            gemm(true, false, ci, co, static_cast<int>(m), T(1), xc_.data(), ci, dy.data(), co,
                 T(1), w.g.data(), co);
            detail::colsum_acc(dy.data(), b.g.data(), m, co);
        }
        Tensor<T> dx(dy.n, dy.h, dy.w, ci);
        gemm(false, true, static_cast<int>(m), ci, co, T(1), dy.data(), co, w.w.data(), co,
             T(0), dx.data(), ci);
        return dx;
    }

private:
    Tensor<T> apply(const Tensor<T>& x) const {
        require(x.c == ci, "pointwise: channel mismatch " + x.shape_str());
        size_t m = x.size() / ci;
        Tensor<T> y(x.n, x.h, x.w, co);
        gemm(false, false, static_cast<int>(m), co, ci, T(1), x.data(), ci, w.w.data(), co,
             T(0), y.data(), co);
        detail::add_bias_rows(y.data(), b.w.data(), m, co);
        return y;
    }

    Tensor<T> xc_;
};

template <typename T>
using Linear = PointwiseConv<T>;

// ---------------------------------------------------------------------------
// 3x3 depthwise convolution, pad 1, stride 1 or 2.

template <typename T>
struct DepthwiseConv3 {
    int c = 0, stride = 1;
    Param<T> w;  // (3,3,1,c)
    Param<T> b;  // (1,1,1,c)
    bool frozen = false;

    DepthwiseConv3() = default;
    DepthwiseConv3(std::string name, int c_, int stride_, Rng& rng)
        : c(c_), stride(stride_), w(name + ".w", 3, 3, 1, c_), b(name + ".b", 1, 1, 1, c_) {
        init_he(w, rng, 9);
    }

    std::vector<Param<T>*> params() { return {&w, &b}; }

    Tensor<T> fwd(const Tensor<T>& x, bool cache) {
        Tensor<T> y = apply(x);
        if (cache) xc_ = x;
        else xc_ = Tensor<T>();
        return y;
    }

    Tensor<T> fwd(Tensor<T>&& x, bool cache) {
        Tensor<T> y = apply(x);
        if (cache) xc_ = std::move(x);
        else xc_ = Tensor<T>();
        return y;
    }

    Tensor<T> bwd(const Tensor<T>& dy) {
        const Tensor<T>& x = xc_;
        Tensor<T> dx(x.n, x.h, x.w, c);
        T* wg = w.g.data();
        const T* wd = w.w.data();
        for (int in = 0; in < dy.n; ++in)
            for (int oy = 0; oy < dy.h; ++oy)
                for (int ox = 0; ox < dy.w; ++ox) {
                    const T* dp = &dy.at(in, oy, ox, 0);
                    if (!frozen)
                        for (int ch = 0; ch < c; ++ch) b.g[ch] += dp[ch];
                    for (int ky = 0; ky < 3; ++ky) {
                        int iy = oy * stride + ky - 1;
                        if (iy < 0 || iy >= x.h) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            int ix = ox * stride + kx - 1;
                            if (ix < 0 || ix >= x.w) continue;
                            const T* xp = &x.at(in, iy, ix, 0);
                            T* dxp = &dx.at(in, iy, ix, 0);
                            const T* wp = wd + (ky * 3 + kx) * c;
                            T* wgp = wg + (ky * 3 + kx) * c;
                            if (!frozen)
                                for (int ch = 0; ch < c; ++ch) wgp[ch] += dp[ch] * xp[ch];
                            for (int ch = 0; ch < c; ++ch) dxp[ch] += dp[ch] * wp[ch];
                        }
                    }
                }
        return dx;
    }

private:
    Tensor<T> apply(const Tensor<T>& x) const {
        require(x.c == c, "depthwise: channel mismatch " + x.shape_str());
        int oh = x.h / stride, ow = x.w / stride;
        Tensor<T> y(x.n, oh, ow, c);
        const T* wd = w.w.data();
        for (int in = 0; in < x.n; ++in)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    T* yp = &y.at(in, oy, ox, 0);
                    for (int ch = 0; ch < c; ++ch) yp[ch] = b.w[ch];
                    for (int ky = 0; ky < 3; ++ky) {
                        int iy = oy * stride + ky - 1;
                        if (iy < 0 || iy >= x.h) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            int ix = ox * stride + kx - 1;
                            if (ix < 0 || ix >= x.w) continue;
                            const T* xp = &x.at(in, iy, ix, 0);
                            const T* wp = wd + (ky * 3 + kx) * c;
                            for (int ch = 0; ch < c; ++ch) yp[ch] += wp[ch] * xp[ch];
                        }
                    }
                }
        return y;
    }

    Tensor<T> xc_;
};

// ---------------------------------------------------------------------------
// Full KxK convolution via batched im2col + GEMM. Used where cross-channel
// KxK mixing is wanted (scale predictor trunk, oracle classifier).

template <typename T>
struct Conv2d {
    int ci = 0, co = 0, k = 3, stride = 1, pad = 1;
    Param<T> w;  // (k,k,ci,co)
    Param<T> b;  // (1,1,1,co)
    bool frozen = false;

    Conv2d() = default;
    Conv2d(std::string name, int ci_, int co_, int k_, int stride_, int pad_, Rng& rng)
        : ci(ci_), co(co_), k(k_), stride(stride_), pad(pad_),
          w(name + ".w", k_, k_, ci_, co_), b(name + ".b", 1, 1, 1, co_) {
        init_he(w, rng, k_ * k_ * ci_);
    }

    std::vector<Param<T>*> params() { return {&w, &b}; }

    Tensor<T> fwd(const Tensor<T>& x, bool cache) {
        require(x.c == ci, "conv: channel mismatch " + x.shape_str());
        int oh = (x.h + 2 * pad - k) / stride + 1;
        int ow = (x.w + 2 * pad - k) / stride + 1;
        size_t m = static_cast<size_t>(x.n) * oh * ow;
        int kk = k * k * ci;
        col_.resize(m * kk);  // persistent scratch; im2col writes every slot
        im2col(x, oh, ow, col_.data());
        Tensor<T> y(x.n, oh, ow, co);
        gemm(false, false, static_cast<int>(m), co, kk, T(1), col_.data(), kk, w.w.data(), co,
             T(0), y.data(), co);
        detail::add_bias_rows(y.data(), b.w.data(), m, co);
        in_h_ = x.h;
        in_w_ = x.w;
        return y;
    }

    Tensor<T> bwd(const Tensor<T>& dy) {
        size_t m = static_cast<size_t>(dy.n) * dy.h * dy.w;
        int kk = k * k * ci;
        if (!frozen) {
            gemm(true, false, kk, co, static_cast<int>(m), T(1), col_.data(), kk, dy.data(), co,
                 T(1), w.g.data(), co);
            detail::colsum_acc(dy.data(), b.g.data(), m, co);
        }
        dcol_.resize(m * kk);
        gemm(false, true, static_cast<int>(m), kk, co, T(1), dy.data(), co, w.w.data(), co,
             T(0), dcol_.data(), kk);
        Tensor<T> dx(dy.n, in_h_, in_w_, ci);
        col2im(dcol_.data(), dy.n, dy.h, dy.w, dx);
        return dx;
    }

private:
    void im2col(const Tensor<T>& x, int oh, int ow, T* col) const {
        int kk = k * k * ci;
        size_t row = 0;
        for (int in = 0; in < x.n; ++in)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox, ++row) {
                    T* cp = col + row * kk;
                    for (int ky = 0; ky < k; ++ky) {
                        int iy = oy * stride + ky - pad;
                        for (int kx = 0; kx < k; ++kx) {
                            int ix = ox * stride + kx - pad;
                            T* dst = cp + (ky * k + kx) * ci;
                            if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) {
                                for (int ic = 0; ic < ci; ++ic) dst[ic] = T(0);
                                continue;
                            }
                            const T* xp = &x.at(in, iy, ix, 0);
                            for (int ic = 0; ic < ci; ++ic) dst[ic] = xp[ic];
                        }
                    }
                }
    }

    void col2im(const T* dcol, int n, int oh, int ow, Tensor<T>& dx) const {
        int kk = k * k * ci;
        size_t row = 0;
        for (int in = 0; in < n; ++in)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox, ++row) {
                    const T* cp = dcol + row * kk;
                    for (int ky = 0; ky < k; ++ky) {
                        int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= dx.h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            int ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= dx.w) continue;
                            T* dst = &dx.at(in, iy, ix, 0);
                            const T* src = cp + (ky * k + kx) * ci;
                            for (int ic = 0; ic < ci; ++ic) dst[ic] += src[ic];
                        }
                    }
                }
    }

    std::vector<T> col_, dcol_;
    int in_h_ = 0, in_w_ = 0;
};

// ---------------------------------------------------------------------------
// GroupNorm with affine gain/bias, normalizing over (h, w, channels-in-group).

template <typename T>
struct GroupNorm {
    int c = 0, groups = 8;
    T eps = T(1e-5);
    Param<T> gamma;  // (1,1,1,c)
    Param<T> beta;   // (1,1,1,c)
    bool frozen = false;

    GroupNorm() = default;
    GroupNorm(std::string name, int c_, int groups_)
        : c(c_), groups(groups_), gamma(name + ".gamma", 1, 1, 1, c_),
          beta(name + ".beta", 1, 1, 1, c_) {
        require(c_ % groups_ == 0, "groupnorm: channels not divisible by groups");
        gamma.w.fill(T(1));
    }

    std::vector<Param<T>*> params() { return {&gamma, &beta}; }

    // In-place variant: without a cache the output can overwrite the input.
    Tensor<T> fwd(Tensor<T>&& x, bool cache) {
        if (cache) return fwd(static_cast<const Tensor<T>&>(x), true);
        require(x.c == c, "groupnorm: channel mismatch " + x.shape_str());
        int cg = c / groups;
        size_t rows = static_cast<size_t>(x.h) * x.w;
        double nel = static_cast<double>(rows) * cg;
        xhat_ = Tensor<T>();
        istd_.clear();
        std::vector<double> csum(c), csq(c);
        std::vector<T> sa(c), sb(c);
        for (int in = 0; in < x.n; ++in) {
            T* xp = &x.v[static_cast<size_t>(in) * rows * c];
            std::fill(csum.begin(), csum.end(), 0.0);
            std::fill(csq.begin(), csq.end(), 0.0);
            for (size_t r = 0; r < rows; ++r) {
                const T* row = xp + r * c;
                for (int ch = 0; ch < c; ++ch) {
                    double v = row[ch];
                    csum[ch] += v;
                    csq[ch] += v * v;
                }
            }
            for (int g = 0; g < groups; ++g) {
                double sum = 0, sq = 0;
                for (int ch = g * cg; ch < (g + 1) * cg; ++ch) {
                    sum += csum[ch];
                    sq += csq[ch];
                }
                double mean = sum / nel;
                double var = sq / nel - mean * mean;
                if (var < 0) var = 0;
                double is = 1.0 / std::sqrt(var + static_cast<double>(eps));
                for (int ch = g * cg; ch < (g + 1) * cg; ++ch) {
                    sa[ch] = static_cast<T>(is) * gamma.w[ch];
                    sb[ch] = beta.w[ch] - static_cast<T>(mean * is) * gamma.w[ch];
                }
            }
            for (size_t r = 0; r < rows; ++r)
                for (int ch = 0; ch < c; ++ch) {
                    size_t i = r * c + ch;
                    xp[i] = sa[ch] * xp[i] + sb[ch];
                }
        }
        return std::move(x);
    }

    Tensor<T> fwd(const Tensor<T>& x, bool cache) {
        require(x.c == c, "groupnorm: channel mismatch " + x.shape_str());
        int cg = c / groups;
        size_t rows = static_cast<size_t>(x.h) * x.w;
        double nel = static_cast<double>(rows) * cg;
        Tensor<T> y(x.n, x.h, x.w, c);
        if (cache) {
            xhat_ = Tensor<T>(x.n, x.h, x.w, c);
            istd_.assign(static_cast<size_t>(x.n) * groups, T(0));
        } else {
            xhat_ = Tensor<T>();
            istd_.clear();
        }
        // per-channel accumulation keeps the inner loops contiguous; group
        // statistics are combined from the channel partials afterwards
        std::vector<double> csum(c), csq(c);
        std::vector<T> sa(c), sb(c);      // y = sa*x + sb per channel
        std::vector<T> cm(c), ci(c);      // group mean/istd expanded per channel
        for (int in = 0; in < x.n; ++in) {
            const T* xp = &x.v[static_cast<size_t>(in) * rows * c];
            std::fill(csum.begin(), csum.end(), 0.0);
            std::fill(csq.begin(), csq.end(), 0.0);
            for (size_t r = 0; r < rows; ++r) {
                const T* row = xp + r * c;
                for (int ch = 0; ch < c; ++ch) {
                    double v = row[ch];
                    csum[ch] += v;
                    csq[ch] += v * v;
                }
            }
            for (int g = 0; g < groups; ++g) {
                double sum = 0, sq = 0;
                for (int ch = g * cg; ch < (g + 1) * cg; ++ch) {
                    sum += csum[ch];
                    sq += csq[ch];
                }
                double mean = sum / nel;
                double var = sq / nel - mean * mean;
                if (var < 0) var = 0;
                double is = 1.0 / std::sqrt(var + static_cast<double>(eps));
                if (cache) istd_[in * groups + g] = static_cast<T>(is);
                for (int ch = g * cg; ch < (g + 1) * cg; ++ch) {
                    cm[ch] = static_cast<T>(mean);
                    ci[ch] = static_cast<T>(is);
                    sa[ch] = static_cast<T>(is) * gamma.w[ch];
                    sb[ch] = beta.w[ch] - static_cast<T>(mean * is) * gamma.w[ch];
                }
            }
            T* yp = &y.v[static_cast<size_t>(in) * rows * c];
            if (cache) {
                T* hp = &xhat_.v[static_cast<size_t>(in) * rows * c];
                for (size_t r = 0; r < rows; ++r)
                    for (int ch = 0; ch < c; ++ch) {
                        size_t i = r * c + ch;
                        T h = (xp[i] - cm[ch]) * ci[ch];
                        hp[i] = h;
                        yp[i] = gamma.w[ch] * h + beta.w[ch];
                    }
            } else {
                for (size_t r = 0; r < rows; ++r)
                    for (int ch = 0; ch < c; ++ch) {
                        size_t i = r * c + ch;
                        yp[i] = sa[ch] * xp[i] + sb[ch];
                    }
            }
        }
        return y;
    }

    Tensor<T> bwd(const Tensor<T>& dy) {
        int cg = c / groups;
        size_t rows = static_cast<size_t>(dy.h) * dy.w;
        double nel = static_cast<double>(rows) * cg;
        Tensor<T> dx(dy.n, dy.h, dy.w, c);
        std::vector<double> ds1(c), ds2(c);  // per-channel sums of dy, dy*xhat
        std::vector<T> A(c), B(c), C(c);     // dx = A*dy + B + C*xhat per channel
        for (int in = 0; in < dy.n; ++in) {
            const T* dp = &dy.v[static_cast<size_t>(in) * rows * c];
            const T* hp = &xhat_.v[static_cast<size_t>(in) * rows * c];
            std::fill(ds1.begin(), ds1.end(), 0.0);
            std::fill(ds2.begin(), ds2.end(), 0.0);
            for (size_t r = 0; r < rows; ++r) {
                const T* drow = dp + r * c;
                const T* hrow = hp + r * c;
                for (int ch = 0; ch < c; ++ch) {
                    double d = drow[ch];
                    ds1[ch] += d;
                    ds2[ch] += d * hrow[ch];
                }
            }
            for (int g = 0; g < groups; ++g) {
                double s1 = 0, s2 = 0;  // sums of dxhat and dxhat*xhat
                for (int ch = g * cg; ch < (g + 1) * cg; ++ch) {
                    s1 += ds1[ch] * gamma.w[ch];
                    s2 += ds2[ch] * gamma.w[ch];
                    if (!frozen) {
                        gamma.g[ch] += static_cast<T>(ds2[ch]);
                        beta.g[ch] += static_cast<T>(ds1[ch]);
                    }
                }
                double is = istd_[in * groups + g];
                for (int ch = g * cg; ch < (g + 1) * cg; ++ch) {
                    A[ch] = static_cast<T>(is) * gamma.w[ch];
                    B[ch] = static_cast<T>(-is * s1 / nel);
                    C[ch] = static_cast<T>(-is * s2 / nel);
                }
            }
            T* dxp = &dx.v[static_cast<size_t>(in) * rows * c];
            for (size_t r = 0; r < rows; ++r)
                for (int ch = 0; ch < c; ++ch) {
                    size_t i = r * c + ch;
                    dxp[i] = A[ch] * dp[i] + B[ch] + C[ch] * hp[i];
                }
        }
        return dx;
    }

private:
    Tensor<T> xhat_;
    std::vector<T> istd_;
};

// ---------------------------------------------------------------------------
// activations

// Plain form on purpose: the compiler turns the exp call into its vector math
// library under -fno-math-errno, which a branchy "stable" variant would block.
// Overflow is benign here: exp(-x) -> inf gives sigmoid -> 0 exactly.
template <typename T>
inline T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
struct SiLU {
    Tensor<T> fwd(const Tensor<T>& x, bool cache) {
        Tensor<T> y(x.n, x.h, x.w, x.c);
        for (size_t i = 0; i < x.size(); ++i) y[i] = x[i] * sigmoid(x[i]);
        if (cache) xc_ = x;
        else xc_ = Tensor<T>();
        return y;
    }
    Tensor<T> fwd(Tensor<T>&& x, bool cache) {
        if (cache) xc_ = x;  // keep the pre-activation copy for bwd
        else xc_ = Tensor<T>();
        for (size_t i = 0; i < x.size(); ++i) x[i] = x[i] * sigmoid(x[i]);
        return std::move(x);
    }
    Tensor<T> bwd(const Tensor<T>& dy) {
        Tensor<T> dx(dy.n, dy.h, dy.w, dy.c);
        for (size_t i = 0; i < dy.size(); ++i) {
            T s = sigmoid(xc_[i]);
            dx[i] = dy[i] * s * (T(1) + xc_[i] * (T(1) - s));
        }
        return dx;
    }

private:
    Tensor<T> xc_;
};

template <typename T>
struct ReLU {
    Tensor<T> fwd(const Tensor<T>& x, bool cache) {
        Tensor<T> y(x.n, x.h, x.w, x.c);
        for (size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
        if (cache) xc_ = x;
        else xc_ = Tensor<T>();
        return y;
    }
    Tensor<T> fwd(Tensor<T>&& x, bool cache) {
        if (cache) xc_ = x;
        else xc_ = Tensor<T>();
        for (size_t i = 0; i < x.size(); ++i) x[i] = x[i] > T(0) ? x[i] : T(0);
        return std::move(x);
    }
    Tensor<T> bwd(const Tensor<T>& dy) {
        Tensor<T> dx(dy.n, dy.h, dy.w, dy.c);
        for (size_t i = 0; i < dy.size(); ++i) dx[i] = xc_[i] > T(0) ? dy[i] : T(0);
        return dx;
    }

private:
    Tensor<T> xc_;
};

template <typename T>
struct Sigmoid {
    Tensor<T> fwd(const Tensor<T>& x, bool cache) {
        Tensor<T> y(x.n, x.h, x.w, x.c);
        for (size_t i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
        if (cache) yc_ = y;
        else yc_ = Tensor<T>();
        return y;
    }
    Tensor<T> fwd(Tensor<T>&& x, bool cache) {
        for (size_t i = 0; i < x.size(); ++i) x[i] = sigmoid(x[i]);
        if (cache) yc_ = x;
        else yc_ = Tensor<T>();
        return std::move(x);
    }
    Tensor<T> bwd(const Tensor<T>& dy) {
        Tensor<T> dx(dy.n, dy.h, dy.w, dy.c);
        for (size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * yc_[i] * (T(1) - yc_[i]);
        return dx;
    }

private:
    Tensor<T> yc_;
};

// ---------------------------------------------------------------------------
// shape ops (no parameters)

template <typename T>
struct Upsample2x {
    Tensor<T> fwd(const Tensor<T>& x) {
        Tensor<T> y(x.n, x.h * 2, x.w * 2, x.c);
        for (int in = 0; in < x.n; ++in)
            for (int yy = 0; yy < y.h; ++yy)
                for (int xx = 0; xx < y.w; ++xx) {
                    const T* xp = &x.at(in, yy / 2, xx / 2, 0);
                    T* yp = &y.at(in, yy, xx, 0);
                    for (int ch = 0; ch < x.c; ++ch) yp[ch] = xp[ch];
                }
        return y;
    }
    Tensor<T> bwd(const Tensor<T>& dy) {
        Tensor<T> dx(dy.n, dy.h / 2, dy.w / 2, dy.c);
        for (int in = 0; in < dy.n; ++in)
            for (int yy = 0; yy < dy.h; ++yy)
                for (int xx = 0; xx < dy.w; ++xx) {
                    const T* dp = &dy.at(in, yy, xx, 0);
                    T* dxp = &dx.at(in, yy / 2, xx / 2, 0);
                    for (int ch = 0; ch < dy.c; ++ch) dxp[ch] += dp[ch];
                }
        return dx;
    }
};

template <typename T>
struct GlobalAvgPool {
    Tensor<T> fwd(const Tensor<T>& x, bool cache) {
        Tensor<T> y(x.n, 1, 1, x.c);
        T inv = T(1) / static_cast<T>(x.h * x.w);
        for (int in = 0; in < x.n; ++in)
            for (int yy = 0; yy < x.h; ++yy)
                for (int xx = 0; xx < x.w; ++xx) {
                    const T* xp = &x.at(in, yy, xx, 0);
                    T* yp = &y.at(in, 0, 0, 0);
                    for (int ch = 0; ch < x.c; ++ch) yp[ch] += xp[ch] * inv;
                }
        if (cache) {
            in_h_ = x.h;
            in_w_ = x.w;
        }
        return y;
    }
    Tensor<T> bwd(const Tensor<T>& dy) {
        Tensor<T> dx(dy.n, in_h_, in_w_, dy.c);
        T inv = T(1) / static_cast<T>(in_h_ * in_w_);
        for (int in = 0; in < dy.n; ++in)
            for (int yy = 0; yy < in_h_; ++yy)
                for (int xx = 0; xx < in_w_; ++xx) {
                    T* dxp = &dx.at(in, yy, xx, 0);
                    const T* dp = &dy.at(in, 0, 0, 0);
                    for (int ch = 0; ch < dy.c; ++ch) dxp[ch] = dp[ch] * inv;
                }
        return dx;
    }

private:
    int in_h_ = 0, in_w_ = 0;
};

// ---------------------------------------------------------------------------
// class-id embedding table

template <typename T>
struct Embedding {
    int num = 0, dim = 0;
    Param<T> table;  // (num,1,1,dim)
    bool frozen = false;

    Embedding() = default;
    Embedding(std::string name, int num_, int dim_, Rng& rng)
        : num(num_), dim(dim_), table(name + ".table", num_, 1, 1, dim_) {
        init_normal(table, rng, 0.02);
    }

    std::vector<Param<T>*> params() { return {&table}; }

    Tensor<T> fwd(const std::vector<int>& ids, bool cache) {
        Tensor<T> y(static_cast<int>(ids.size()), 1, 1, dim);
        for (size_t i = 0; i < ids.size(); ++i) {
            require(ids[i] >= 0 && ids[i] < num, "embedding: id out of range");
            std::copy_n(&table.w.at(ids[i], 0, 0, 0), dim, &y.at(static_cast<int>(i), 0, 0, 0));
        }
        if (cache) ids_ = ids;
        else ids_.clear();
        return y;
    }

    void bwd(const Tensor<T>& dy) {
        if (frozen) return;
        for (size_t i = 0; i < ids_.size(); ++i) {
            const T* dp = &dy.at(static_cast<int>(i), 0, 0, 0);
            T* gp = &table.g.at(ids_[i], 0, 0, 0);
            for (int j = 0; j < dim; ++j) gp[j] += dp[j];
        }
    }

private:
    std::vector<int> ids_;
};

}  // namespace adascale
