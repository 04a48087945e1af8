// Binary-mask machinery for the shapes world: exact Euclidean distance
// transforms, morphology, connected components, the rough visual conditions
// derived from a silhouette, and the conflict/background mask algebra.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "adascale/core/tensor.hpp"
#include "adascale/io/pnm.hpp"

namespace adascale {

namespace detail {

inline constexpr float kEdtInf = 1e20f;

// Felzenszwalb-Huttenlocher 1D squared-distance transform over sampled
// parabolas. f: input costs (stride-able), d: output, v/z: scratch.
inline void edt_1d(const float* f, int n, int stride, float* d, int* v, float* z) {
    int k = 0;
    v[0] = 0;
    z[0] = -kEdtInf;
    z[1] = kEdtInf;
    for (int q = 1; q < n; ++q) {
        float fq = f[q * stride] + static_cast<float>(q) * q;
        float s = (fq - (f[v[k] * stride] + static_cast<float>(v[k]) * v[k])) / (2.0f * (q - v[k]));
        while (s <= z[k]) {
            --k;
            s = (fq - (f[v[k] * stride] + static_cast<float>(v[k]) * v[k])) / (2.0f * (q - v[k]));
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kEdtInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < static_cast<float>(q)) ++k;
        float dq = static_cast<float>(q - v[k]);
        d[q] = dq * dq + f[v[k] * stride];
    }
}

}  // namespace detail

// Squared Euclidean distance from every pixel to the nearest zero pixel of m.
// The ring just outside the image counts as zero when border_is_zero is set,
// so a mask touching the border still gets finite interior distances.
inline std::vector<float> edt_sq(const MaskU8& m, bool border_is_zero) {
    int ph = m.h + 2, pw = m.w + 2;
    std::vector<float> g(static_cast<size_t>(ph) * pw, border_is_zero ? 0.0f : detail::kEdtInf);
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x)
            g[static_cast<size_t>(y + 1) * pw + (x + 1)] = m.at(y, x) ? detail::kEdtInf : 0.0f;

    int nmax = std::max(ph, pw);
    std::vector<float> d(nmax), z(nmax + 1);
    std::vector<int> v(nmax);
    // columns, then rows
    for (int x = 0; x < pw; ++x) {
        detail::edt_1d(&g[x], ph, pw, d.data(), v.data(), z.data());
        for (int y = 0; y < ph; ++y) g[static_cast<size_t>(y) * pw + x] = d[y];
    }
    std::vector<float> out(static_cast<size_t>(m.h) * m.w);
    std::vector<float> row(pw);
    for (int y = 0; y < ph; ++y) {
        detail::edt_1d(&g[static_cast<size_t>(y) * pw], pw, 1, row.data(), v.data(), z.data());
        if (y >= 1 && y <= m.h)
            for (int x = 0; x < m.w; ++x) out[static_cast<size_t>(y - 1) * m.w + x] = row[x + 1];
    }
    return out;
}

// Pixels within Euclidean distance `radius` of m's support.
inline MaskU8 dilate(const MaskU8& m, float radius) {
    MaskU8 inv(m.h, m.w);
    for (size_t i = 0; i < m.v.size(); ++i) inv.v[i] = m.v[i] ? 0 : 1;
    // distance to the nearest set pixel; the virtual border is not a source
    std::vector<float> dsq = edt_sq(inv, false);
    MaskU8 out(m.h, m.w);
    float r2 = radius * radius;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = dsq[i] <= r2 ? 1 : 0;
    return out;
}

inline MaskU8 mask_or(const MaskU8& a, const MaskU8& b) {
    require(a.h == b.h && a.w == b.w, "mask_or: shape mismatch");
    MaskU8 out(a.h, a.w);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = (a.v[i] | b.v[i]) ? 1 : 0;
    return out;
}

inline MaskU8 mask_and(const MaskU8& a, const MaskU8& b) {
    require(a.h == b.h && a.w == b.w, "mask_and: shape mismatch");
    MaskU8 out(a.h, a.w);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = (a.v[i] & b.v[i]) ? 1 : 0;
    return out;
}

inline MaskU8 mask_not(const MaskU8& a) {
    MaskU8 out(a.h, a.w);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = a.v[i] ? 0 : 1;
    return out;
}

// 1px inner boundary: set pixels with an 8-neighbour outside the mask.
// Out-of-image neighbours count as outside.
inline MaskU8 inner_boundary(const MaskU8& m) {
    MaskU8 out(m.h, m.w);
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) {
            if (!m.at(y, x)) continue;
            bool edge = false;
            for (int dy = -1; dy <= 1 && !edge; ++dy)
                for (int dx = -1; dx <= 1 && !edge; ++dx) {
                    int ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= m.h || nx < 0 || nx >= m.w || !m.at(ny, nx)) edge = true;
                }
            out.at(y, x) = edge ? 1 : 0;
        }
    return out;
}

// 8-connected component labels, 0 = background, components numbered from 1
// in scan order. Returns the number of components.
inline int connected_components(const MaskU8& m, std::vector<int>& labels) {
    labels.assign(m.v.size(), 0);
    int next = 0;
    std::vector<int> stack;
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) {
            size_t i = static_cast<size_t>(y) * m.w + x;
            if (!m.v[i] || labels[i]) continue;
            ++next;
            labels[i] = next;
            stack.assign(1, static_cast<int>(i));
            while (!stack.empty()) {
                int p = stack.back();
                stack.pop_back();
                int py = p / m.w, px = p % m.w;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        int ny = py + dy, nx = px + dx;
                        if (ny < 0 || ny >= m.h || nx < 0 || nx >= m.w) continue;
                        size_t j = static_cast<size_t>(ny) * m.w + nx;
                        if (m.v[j] && !labels[j]) {
                            labels[j] = next;
                            stack.push_back(static_cast<int>(j));
                        }
                    }
            }
        }
    return next;
}

inline int count_components(const MaskU8& m) {
    std::vector<int> labels;
    return connected_components(m, labels);
}

// Keeps only the largest 8-connected component (first in scan order on ties).
inline MaskU8 largest_component(const MaskU8& m) {
    std::vector<int> labels;
    int n = connected_components(m, labels);
    if (n <= 1) return m;
    std::vector<size_t> sizes(n + 1, 0);
    for (int l : labels) ++sizes[l];
    int best = 1;
    for (int l = 2; l <= n; ++l)
        if (sizes[l] > sizes[best]) best = l;
    MaskU8 out(m.h, m.w);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = labels[i] == best ? 1 : 0;
    return out;
}

// ---------------------------------------------------------------------------
// Rough visual conditions

enum class ConditionKind { silhouette, edge, depthlike };

inline const char* condition_name(ConditionKind k) {
    switch (k) {
        case ConditionKind::silhouette: return "silhouette";
        case ConditionKind::edge: return "edge";
        case ConditionKind::depthlike: return "depthlike";
    }
    return "?";
}

inline ConditionKind condition_from_name(const std::string& s) {
    if (s == "silhouette") return ConditionKind::silhouette;
    if (s == "edge") return ConditionKind::edge;
    if (s == "depthlike") return ConditionKind::depthlike;
    require(false, "unknown condition kind: " + s);
    return ConditionKind::silhouette;
}

// Single-channel condition map in [0,1] derived from a silhouette. The image
// argument is part of the interface (a real estimator would look at it); the
// toy estimators are functions of the mask alone.
template <typename T>
Tensor<T> extract_condition(const Tensor<T>& /*image*/, const MaskU8& m, ConditionKind kind) {
    Tensor<T> out(1, m.h, m.w, 1);
    switch (kind) {
        case ConditionKind::silhouette: {
            for (size_t i = 0; i < m.v.size(); ++i) out.v[i] = m.v[i] ? T(1) : T(0);
            break;
        }
        case ConditionKind::edge: {
            MaskU8 e = inner_boundary(m);
            for (size_t i = 0; i < e.v.size(); ++i) out.v[i] = e.v[i] ? T(1) : T(0);
            break;
        }
        case ConditionKind::depthlike: {
            std::vector<float> dsq = edt_sq(m, true);
            float peak = 0.0f;
            for (size_t i = 0; i < dsq.size(); ++i)
                if (m.v[i]) peak = std::max(peak, dsq[i]);
            float inv = peak > 0.0f ? 1.0f / std::sqrt(peak) : 0.0f;
            for (size_t i = 0; i < dsq.size(); ++i)
                out.v[i] = m.v[i] ? static_cast<T>(std::sqrt(dsq[i]) * inv) : T(0);
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Conflict / background mask algebra

struct MaskPair {
    MaskU8 m_init;
    MaskU8 m_alt;
    MaskU8 m_conflict;  // where exactly one of the two silhouettes claims a pixel
    MaskU8 m_bg;        // claimed by neither
};

inline MaskPair compute_masks(const MaskU8& m_init, const MaskU8& m_alt) {
    require(m_init.h == m_alt.h && m_init.w == m_alt.w, "compute_masks: shape mismatch");
    for (auto b : m_init.v) require(b <= 1, "compute_masks: m_init not binary");
    for (auto b : m_alt.v) require(b <= 1, "compute_masks: m_alt not binary");
    MaskPair p;
    p.m_init = m_init;
    p.m_alt = m_alt;
    p.m_conflict = MaskU8(m_init.h, m_init.w);
    p.m_bg = MaskU8(m_init.h, m_init.w);
    for (size_t i = 0; i < m_init.v.size(); ++i) {
        p.m_conflict.v[i] = m_init.v[i] ^ m_alt.v[i];
        p.m_bg.v[i] = (m_init.v[i] | m_alt.v[i]) ? 0 : 1;
    }
    return p;
}

// Foreground = pixels whose max-channel deviation from the reference
// background colour exceeds thresh. Values in [-1,1] space.
template <typename T>
MaskU8 segment_foreground(const Tensor<T>& img, const std::array<float, 3>& bg, float thresh,
                          int sample = 0) {
    require(img.c == 3, "segment_foreground: rgb expected");
    MaskU8 out(img.h, img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            float dev = 0.0f;
            for (int ch = 0; ch < 3; ++ch)
                dev = std::max(dev,
                               std::abs(static_cast<float>(img.at(sample, y, x, ch)) - bg[ch]));
            out.at(y, x) = dev > thresh ? 1 : 0;
        }
    return out;
}

}  // namespace adascale
