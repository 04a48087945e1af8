#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace adascale {

// Dense NHWC tensor. All feature maps in the library use this layout; conv
// weights are stored HWIO (kh, kw, cin, cout) so that im2col GEMMs consume
// them without transposition. Vectors/matrices reuse the same type with
// singleton dims.
template <typename T>
struct Tensor {
    int n = 0, h = 0, w = 0, c = 0;
    std::vector<T> v;

    Tensor() = default;
    Tensor(int n_, int h_, int w_, int c_)
        : n(n_), h(h_), w(w_), c(c_), v(static_cast<size_t>(n_) * h_ * w_ * c_) {}

    static Tensor zeros(int n, int h, int w, int c) { return Tensor(n, h, w, c); }

    static Tensor full(int n, int h, int w, int c, T value) {
        Tensor t(n, h, w, c);
        std::fill(t.v.begin(), t.v.end(), value);
        return t;
    }

    size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }

    size_t idx(int in, int iy, int ix, int ic) const {
        return ((static_cast<size_t>(in) * h + iy) * w + ix) * c + ic;
    }
    T& at(int in, int iy, int ix, int ic) { return v[idx(in, iy, ix, ic)]; }
    const T& at(int in, int iy, int ix, int ic) const { return v[idx(in, iy, ix, ic)]; }

    T& operator[](size_t i) { return v[i]; }
    const T& operator[](size_t i) const { return v[i]; }

    bool same_shape(const Tensor& o) const {
        return n == o.n && h == o.h && w == o.w && c == o.c;
    }

    std::string shape_str() const {
        return "[" + std::to_string(n) + "," + std::to_string(h) + "," +
               std::to_string(w) + "," + std::to_string(c) + "]";
    }

    void fill(T value) { std::fill(v.begin(), v.end(), value); }

    void add_(const Tensor& o) {
        assert(same_shape(o));
        for (size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
    }

    void scale_(T s) {
        for (auto& x : v) x *= s;
    }

    // Rows of the batch dim, e.g. one sample of a batched map.
    Tensor slice_n(int i0, int count) const {
        Tensor out(count, h, w, c);
        size_t stride = static_cast<size_t>(h) * w * c;
        std::copy(v.begin() + i0 * stride, v.begin() + (i0 + count) * stride, out.v.begin());
        return out;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(n, h, w, c);
        for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
        return out;
    }
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace adascale
