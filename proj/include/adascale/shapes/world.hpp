// Synthetic shape world: nine classes in three families, signed-distance
// rendering with 4x4 supersampling, and the class hierarchy used to pick a
// sibling class whose silhouette disagrees with the conditioning one.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "adascale/core/rng.hpp"
#include "adascale/core/tensor.hpp"
#include "adascale/io/pnm.hpp"

namespace adascale {

// class ids, grouped by family: 0-2 rounded, 3-5 angular, 6-8 spiky
inline constexpr int kNumShapeClasses = 9;

inline const char* shape_class_name(int cls) {
    static const char* names[kNumShapeClasses] = {"circle", "ellipse",   "capsule",
                                                  "square", "rectangle", "hexagon",
                                                  "star4",  "star5",     "cross"};
    require(cls >= 0 && cls < kNumShapeClasses, "shape_class_name: bad class");
    return names[cls];
}

inline int shape_class_from_name(const std::string& s) {
    for (int c = 0; c < kNumShapeClasses; ++c)
        if (s == shape_class_name(c)) return c;
    require(false, "unknown shape class: " + s);
    return -1;
}

// Every image uses the same dark background so foregrounds can be segmented
// against a known colour.
inline constexpr std::array<float, 3> kBackgroundColor = {-0.85f, -0.85f, -0.85f};

struct ShapeSpec {
    int class_id = 0;
    float cx = 32.0f, cy = 32.0f;  // centre, pixels
    float scale = 24.0f;           // size parameter, pixels (per-class meaning)
    float rot = 0.0f;              // radians
    std::array<float, 3> fill = {1.0f, 1.0f, 1.0f};
    std::array<float, 3> bg = kBackgroundColor;
};

struct ClassHierarchy {
    // children[p] lists the class ids under parent p
    std::vector<std::vector<int>> children;

    int parent_of(int cls) const {
        for (size_t p = 0; p < children.size(); ++p)
            for (int c : children[p])
                if (c == cls) return static_cast<int>(p);
        return -1;
    }
};

inline ClassHierarchy default_hierarchy() {
    return ClassHierarchy{{{0, 1, 2}, {3, 4, 5}, {6, 7, 8}}};
}

// Uniform draw among same-parent siblings of cls, excluding cls itself.
inline int sample_alternate_class(int cls, const ClassHierarchy& hier, Rng& rng) {
    int p = hier.parent_of(cls);
    require(p >= 0, "sample_alternate_class: class not in hierarchy");
    std::vector<int> sibs;
    for (int c : hier.children[p])
        if (c != cls) sibs.push_back(c);
    require(!sibs.empty(), "sample_alternate_class: class has no siblings");
    return sibs[rng.below(sibs.size())];
}

namespace detail {

// shape proportions, fixed relative to the scale parameter r
inline constexpr float kEllipseAspect = 0.65f;   // minor = aspect * r
inline constexpr float kCapsuleHalf = 0.6f;      // segment half-length and cap radius
inline constexpr float kRectAx = 0.8f, kRectAy = 0.6f;
inline constexpr float kStarInner = 0.65f;       // inner vertex radius factor
inline constexpr float kCrossArm = 0.42f;        // arm half-width factor

inline float sd_circle(float px, float py, float r) { return std::hypot(px, py) - r; }

inline float sd_ellipse(float px, float py, float r) {
    float a = r, b = kEllipseAspect * r;
    float k0 = std::hypot(px / a, py / b);
    if (k0 == 0.0f) return -b;
    float k1 = std::hypot(px / (a * a), py / (b * b));
    return k0 * (k0 - 1.0f) / k1;
}

inline float sd_capsule(float px, float py, float r) {
    float l = kCapsuleHalf * r, rad = kCapsuleHalf * r;
    float qx = std::clamp(px, -l, l);
    return std::hypot(px - qx, py) - rad;
}

// signed distance to a simple polygon, negative inside (even-odd winding)
inline float sd_polygon(const float* vx, const float* vy, int n, float px, float py) {
    float d = (px - vx[0]) * (px - vx[0]) + (py - vy[0]) * (py - vy[0]);
    float s = 1.0f;
    for (int i = 0, j = n - 1; i < n; j = i, ++i) {
        float ex = vx[j] - vx[i], ey = vy[j] - vy[i];
        float wx = px - vx[i], wy = py - vy[i];
        float t = std::clamp((wx * ex + wy * ey) / (ex * ex + ey * ey), 0.0f, 1.0f);
        float bx = wx - ex * t, by = wy - ey * t;
        d = std::min(d, bx * bx + by * by);
        bool c0 = py >= vy[i], c1 = py < vy[j], c2 = ex * wy > ey * wx;
        if ((c0 && c1 && c2) || (!c0 && !c1 && !c2)) s = -s;
    }
    return s * std::sqrt(d);
}

// canonical (unrotated, centred) vertex list; returns vertex count
inline int polygon_vertices(int cls, float r, float* vx, float* vy) {
    switch (cls) {
        case 3: {  // square
            float a = r * 0.70710678f;
            float x[4] = {a, -a, -a, a}, y[4] = {a, a, -a, -a};
            std::copy(x, x + 4, vx);
            std::copy(y, y + 4, vy);
            return 4;
        }
        case 4: {  // rectangle
            float a = kRectAx * r, b = kRectAy * r;
            float x[4] = {a, -a, -a, a}, y[4] = {b, b, -b, -b};
            std::copy(x, x + 4, vx);
            std::copy(y, y + 4, vy);
            return 4;
        }
        case 5: {  // hexagon
            for (int k = 0; k < 6; ++k) {
                float ang = static_cast<float>(k) * 1.04719755f;  // 60 deg
                vx[k] = r * std::cos(ang);
                vy[k] = r * std::sin(ang);
            }
            return 6;
        }
        case 6:    // star4
        case 7: {  // star5
            int spikes = cls == 6 ? 4 : 5;
            float step = 3.14159265f / static_cast<float>(spikes);
            for (int k = 0; k < 2 * spikes; ++k) {
                float rad = (k % 2 == 0) ? r : kStarInner * r;
                float ang = 1.57079633f + static_cast<float>(k) * step;
                vx[k] = rad * std::cos(ang);
                vy[k] = rad * std::sin(ang);
            }
            return 2 * spikes;
        }
        case 8: {  // cross
            float w = kCrossArm * r;
            float x[12] = {r, w, w, -w, -w, -r, -r, -w, -w, w, w, r};
            float y[12] = {w, w, r, r, w, w, -w, -w, -r, -r, -w, -w};
            std::copy(x, x + 12, vx);
            std::copy(y, y + 12, vy);
            return 12;
        }
        default: require(false, "polygon_vertices: not a polygon class"); return 0;
    }
}

}  // namespace detail

// signed distance in the shape's canonical frame (centred, unrotated)
inline float shape_sdf(int cls, float px, float py, float r) {
    switch (cls) {
        case 0: return detail::sd_circle(px, py, r);
        case 1: return detail::sd_ellipse(px, py, r);
        case 2: return detail::sd_capsule(px, py, r);
        default: {
            float vx[12], vy[12];
            int n = detail::polygon_vertices(cls, r, vx, vy);
            return detail::sd_polygon(vx, vy, n, px, py);
        }
    }
}

// half-extents of the rotated shape's bounding box, for canvas-fit checks
inline std::pair<float, float> shape_bbox(int cls, float r, float rot) {
    float cr = std::cos(rot), sr = std::sin(rot);
    switch (cls) {
        case 0: return {r, r};
        case 1: {
            float a = r, b = detail::kEllipseAspect * r;
            return {std::hypot(a * cr, b * sr), std::hypot(a * sr, b * cr)};
        }
        case 2: {
            float l = detail::kCapsuleHalf * r, rad = detail::kCapsuleHalf * r;
            return {std::abs(l * cr) + rad, std::abs(l * sr) + rad};
        }
        default: {
            float vx[12], vy[12];
            int n = detail::polygon_vertices(cls, r, vx, vy);
            float ex = 0.0f, ey = 0.0f;
            for (int i = 0; i < n; ++i) {
                ex = std::max(ex, std::abs(cr * vx[i] - sr * vy[i]));
                ey = std::max(ey, std::abs(sr * vx[i] + cr * vy[i]));
            }
            return {ex, ey};
        }
    }
}

// per-class scale range keeping area >= 30% of a 64x64 canvas and the shape
// inside it with a couple of pixels of centre jitter
inline std::pair<float, float> shape_scale_range(int cls) {
    switch (cls) {
        case 0: return {20.0f, 29.0f};  // circle
        case 1: return {25.0f, 29.0f};  // ellipse
        case 2: return {22.0f, 24.0f};  // capsule
        case 3: return {25.0f, 29.0f};  // square
        case 4: return {26.0f, 29.0f};  // rectangle
        case 5: return {22.0f, 29.0f};  // hexagon
        case 6: return {26.0f, 29.0f};  // star4
        case 7: return {26.0f, 29.0f};  // star5
        case 8: return {22.0f, 26.0f};  // cross
        default: require(false, "shape_scale_range: bad class"); return {0, 0};
    }
}

struct Render {
    Tensor<float> img;  // (1,h,w,3) in [-1,1]
    MaskU8 sil;         // coverage >= 1/2
};

// Deterministic anti-aliased raster: 4x4 subsamples per pixel, coverage
// blends fill over background, silhouette thresholds the integer subsample
// count so ties are exact.
inline Render render(const ShapeSpec& spec, int h = 64, int w = 64) {
    auto [ex, ey] = shape_bbox(spec.class_id, spec.scale, spec.rot);
    require(spec.cx - ex >= 0.0f && spec.cx + ex <= static_cast<float>(w) &&
                spec.cy - ey >= 0.0f && spec.cy + ey <= static_cast<float>(h),
            "render: shape leaves the canvas");

    Render out{Tensor<float>(1, h, w, 3), MaskU8(h, w)};
    float cr = std::cos(spec.rot), sr = std::sin(spec.rot);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int hits = 0;
            for (int sy = 0; sy < 4; ++sy)
                for (int sx = 0; sx < 4; ++sx) {
                    float fx = static_cast<float>(x) + (static_cast<float>(sx) + 0.5f) * 0.25f;
                    float fy = static_cast<float>(y) + (static_cast<float>(sy) + 0.5f) * 0.25f;
                    float dx = fx - spec.cx, dy = fy - spec.cy;
                    float px = cr * dx + sr * dy;
                    float py = -sr * dx + cr * dy;
                    if (shape_sdf(spec.class_id, px, py, spec.scale) <= 0.0f) ++hits;
                }
            float cov = static_cast<float>(hits) * (1.0f / 16.0f);
            for (int ch = 0; ch < 3; ++ch)
                out.img.at(0, y, x, ch) = spec.bg[ch] + cov * (spec.fill[ch] - spec.bg[ch]);
            out.sil.at(y, x) = hits >= 8 ? 1 : 0;
        }
    return out;
}

// Random spec for a class: scale from the class range, free rotation, centre
// jittered +/-2px, bright fill over the shared dark background.
inline ShapeSpec sample_spec(int cls, Rng& rng, int h = 64, int w = 64) {
    auto [lo, hi] = shape_scale_range(cls);
    ShapeSpec s;
    s.class_id = cls;
    s.scale = static_cast<float>(rng.uniform(lo, hi));
    s.rot = static_cast<float>(rng.uniform(0.0, 6.283185307179586));
    s.cx = static_cast<float>(w) * 0.5f + static_cast<float>(rng.uniform(-2.0, 2.0));
    s.cy = static_cast<float>(h) * 0.5f + static_cast<float>(rng.uniform(-2.0, 2.0));
    for (int ch = 0; ch < 3; ++ch) s.fill[ch] = static_cast<float>(rng.uniform(-0.3, 1.0));
    s.bg = kBackgroundColor;
    return s;
}

// --- serialization (schema: flat json object per spec, class by name) ------

inline void to_json(nlohmann::json& j, const ShapeSpec& s) {
    j = nlohmann::json{{"class", shape_class_name(s.class_id)},
                       {"cx", s.cx},
                       {"cy", s.cy},
                       {"scale", s.scale},
                       {"rot", s.rot},
                       {"fill", s.fill},
                       {"bg", s.bg}};
}

inline void from_json(const nlohmann::json& j, ShapeSpec& s) {
    s.class_id = shape_class_from_name(j.at("class").get<std::string>());
    s.cx = j.at("cx").get<float>();
    s.cy = j.at("cy").get<float>();
    s.scale = j.at("scale").get<float>();
    s.rot = j.at("rot").get<float>();
    s.fill = j.at("fill").get<std::array<float, 3>>();
    s.bg = j.at("bg").get<std::array<float, 3>>();
}

inline void to_json(nlohmann::json& j, const ClassHierarchy& h) {
    nlohmann::json fams = nlohmann::json::object();
    for (size_t p = 0; p < h.children.size(); ++p) {
        nlohmann::json kids = nlohmann::json::array();
        for (int c : h.children[p]) kids.push_back(shape_class_name(c));
        fams["family" + std::to_string(p)] = kids;
    }
    j = nlohmann::json{{"families", fams}};
}

inline void from_json(const nlohmann::json& j, ClassHierarchy& h) {
    h.children.clear();
    const auto& fams = j.at("families");
    for (auto it = fams.begin(); it != fams.end(); ++it) {
        std::vector<int> kids;
        for (const auto& name : it.value()) kids.push_back(shape_class_from_name(name));
        h.children.push_back(std::move(kids));
    }
}

}  // namespace adascale
