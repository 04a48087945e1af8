#pragma once

#include <cmath>

#include "adascale/core/tensor.hpp"

namespace adascale {

template <typename T>
inline Tensor<T> concat_c(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.n == b.n && a.h == b.h && a.w == b.w, "concat_c: spatial mismatch");
    Tensor<T> out(a.n, a.h, a.w, a.c + b.c);
    size_t rows = static_cast<size_t>(a.n) * a.h * a.w;
    for (size_t r = 0; r < rows; ++r) {
        const T* ap = a.data() + r * a.c;
        const T* bp = b.data() + r * b.c;
        T* op = out.data() + r * (a.c + b.c);
        for (int ch = 0; ch < a.c; ++ch) op[ch] = ap[ch];
        for (int ch = 0; ch < b.c; ++ch) op[a.c + ch] = bp[ch];
    }
    return out;
}

template <typename T>
inline void split_c(const Tensor<T>& x, int ca, Tensor<T>& a, Tensor<T>& b) {
    a = Tensor<T>(x.n, x.h, x.w, ca);
    b = Tensor<T>(x.n, x.h, x.w, x.c - ca);
    size_t rows = static_cast<size_t>(x.n) * x.h * x.w;
    for (size_t r = 0; r < rows; ++r) {
        const T* xp = x.data() + r * x.c;
        T* ap = a.data() + r * ca;
        T* bp = b.data() + r * (x.c - ca);
        for (int ch = 0; ch < ca; ++ch) ap[ch] = xp[ch];
        for (int ch = ca; ch < x.c; ++ch) bp[ch - ca] = xp[ch];
    }
    return;
}

// Nearest-neighbour resize (center-of-pixel sampling). Used for scale maps
// and masks, where interpolation must not invent intermediate values.
template <typename T>
inline Tensor<T> resize_nearest(const Tensor<T>& x, int oh, int ow) {
    Tensor<T> out(x.n, oh, ow, x.c);
    for (int in = 0; in < x.n; ++in)
        for (int oy = 0; oy < oh; ++oy) {
            int iy = static_cast<int>((static_cast<long long>(oy) * 2 + 1) * x.h / (2 * oh));
            if (iy >= x.h) iy = x.h - 1;
            for (int ox = 0; ox < ow; ++ox) {
                int ix = static_cast<int>((static_cast<long long>(ox) * 2 + 1) * x.w / (2 * ow));
                if (ix >= x.w) ix = x.w - 1;
                const T* xp = &x.at(in, iy, ix, 0);
                T* op = &out.at(in, oy, ox, 0);
                for (int ch = 0; ch < x.c; ++ch) op[ch] = xp[ch];
            }
        }
    return out;
}

// y(n,h,w,c) += bias(n,1,1,c), broadcast over space.
template <typename T>
inline void add_channel_bias(Tensor<T>& y, const Tensor<T>& bias) {
    require(y.n == bias.n && y.c == bias.c, "add_channel_bias: shape mismatch");
    for (int in = 0; in < y.n; ++in) {
        const T* bp = &bias.at(in, 0, 0, 0);
        for (int yy = 0; yy < y.h; ++yy)
            for (int xx = 0; xx < y.w; ++xx) {
                T* yp = &y.at(in, yy, xx, 0);
                for (int ch = 0; ch < y.c; ++ch) yp[ch] += bp[ch];
            }
    }
}

// Spatial sum of dy per (sample, channel): the gradient of add_channel_bias.
template <typename T>
inline Tensor<T> sum_spatial(const Tensor<T>& dy) {
    Tensor<T> out(dy.n, 1, 1, dy.c);
    for (int in = 0; in < dy.n; ++in)
        for (int yy = 0; yy < dy.h; ++yy)
            for (int xx = 0; xx < dy.w; ++xx) {
                const T* dp = &dy.at(in, yy, xx, 0);
                T* op = &out.at(in, 0, 0, 0);
                for (int ch = 0; ch < dy.c; ++ch) op[ch] += dp[ch];
            }
    return out;
}

}  // namespace adascale
