#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "adascale/shapes/masks.hpp"
#include "adascale/shapes/world.hpp"

using namespace adascale;

namespace {

// independent quadratic-time oracle for the squared distance transform,
// mirroring the virtual background ring outside the image
std::vector<float> edt_sq_brute(const MaskU8& m, bool border_is_zero) {
    std::vector<float> out(m.v.size(), detail::kEdtInf);
    auto relax = [&](int by, int bx) {
        for (int y = 0; y < m.h; ++y)
            for (int x = 0; x < m.w; ++x) {
                float d = static_cast<float>((y - by) * (y - by) + (x - bx) * (x - bx));
                float& o = out[static_cast<size_t>(y) * m.w + x];
                o = std::min(o, d);
            }
    };
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x)
            if (!m.at(y, x)) relax(y, x);
    if (border_is_zero) {
        for (int x = -1; x <= m.w; ++x) {
            relax(-1, x);
            relax(m.h, x);
        }
        for (int y = 0; y < m.h; ++y) {
            relax(y, -1);
            relax(y, m.w);
        }
    }
    return out;
}

MaskU8 random_mask(int h, int w, Rng& rng, double p) {
    MaskU8 m(h, w);
    for (auto& v : m.v) v = rng.uniform() < p ? 1 : 0;
    return m;
}

}  // namespace

TEST_CASE("render matches analytic area and is deterministic") {
    ShapeSpec c;
    c.class_id = 0;
    c.cx = 31.0f;
    c.cy = 33.0f;
    c.scale = 24.0f;
    c.rot = 0.37f;
    c.fill = {0.9f, 0.2f, -0.1f};
    Render r1 = render(c);
    double area = static_cast<double>(r1.sil.count());
    double want = 3.14159265358979 * 24.0 * 24.0;
    REQUIRE(std::abs(area - want) <= 0.02 * want);

    Render r2 = render(c);
    REQUIRE(r1.img.v == r2.img.v);
    REQUIRE(r1.sil.v == r2.sil.v);
    ImageU8 u1 = to_u8(r1.img), u2 = to_u8(r2.img);
    REQUIRE(u1.v == u2.v);
}

TEST_CASE("full-canvas square silhouette is all ones") {
    ShapeSpec s;
    s.class_id = 3;
    s.cx = 32.0f;
    s.cy = 32.0f;
    s.scale = 45.2548f;  // half-side 32
    s.rot = 0.0f;
    Render r = render(s);
    REQUIRE(r.sil.count() == static_cast<size_t>(64 * 64));
}

TEST_CASE("every class meets the 30% area floor at its minimum scale") {
    Rng rng(7);
    for (int cls = 0; cls < kNumShapeClasses; ++cls) {
        auto [lo, hi] = shape_scale_range(cls);
        for (double rot : {0.0, 0.61, 1.1}) {
            ShapeSpec s;
            s.class_id = cls;
            s.scale = lo;
            s.rot = static_cast<float>(rot);
            s.cx = 32.0f + static_cast<float>(rng.uniform(-2.0, 2.0));
            s.cy = 32.0f + static_cast<float>(rng.uniform(-2.0, 2.0));
            Render r = render(s);
            INFO(shape_class_name(cls) << " rot " << rot);
            REQUIRE(r.sil.count() >= static_cast<size_t>(0.30 * 64 * 64));
        }
        // the sampled maximum must stay in-canvas under any rotation
        for (int k = 0; k < 8; ++k) {
            ShapeSpec s;
            s.class_id = cls;
            s.scale = hi;
            s.rot = static_cast<float>(rng.uniform(0.0, 6.2831853));
            s.cx = 34.0f;
            s.cy = 30.0f;
            REQUIRE_NOTHROW(render(s));
        }
    }
}

TEST_CASE("out-of-canvas specs are rejected") {
    ShapeSpec s;
    s.class_id = 0;
    s.cx = 10.0f;  // circle of radius 20 at x=10 leaves the canvas
    s.cy = 32.0f;
    s.scale = 20.0f;
    REQUIRE_THROWS(render(s));
}

TEST_CASE("conditions: empty mask gives all-zero maps") {
    MaskU8 m(16, 16);
    Tensor<float> img(1, 16, 16, 3);
    for (auto kind : {ConditionKind::silhouette, ConditionKind::edge, ConditionKind::depthlike}) {
        Tensor<float> c = extract_condition(img, m, kind);
        for (float v : c.v) REQUIRE(v == 0.0f);
    }
}

TEST_CASE("conditions: block edge has the exact perimeter pixel count") {
    // 12x20 block: the 1px inner ring has 2*(20+12)-4 pixels
    MaskU8 m(32, 32);
    for (int y = 10; y < 22; ++y)
        for (int x = 6; x < 26; ++x) m.at(y, x) = 1;
    Tensor<float> img(1, 32, 32, 3);
    Tensor<float> e = extract_condition(img, m, ConditionKind::edge);
    size_t on = 0;
    for (float v : e.v) {
        REQUIRE((v == 0.0f || v == 1.0f));
        on += v == 1.0f;
    }
    REQUIRE(on == static_cast<size_t>(2 * (20 + 12) - 4));
    REQUIRE(e.at(0, 15, 15, 0) == 0.0f);  // interior is empty
    REQUIRE(e.at(0, 10, 6, 0) == 1.0f);   // corner is boundary
}

TEST_CASE("conditions: depthlike of a disk peaks at the centre") {
    ShapeSpec s;
    s.class_id = 0;
    s.cx = 32.0f;
    s.cy = 32.0f;
    s.scale = 20.0f;
    Render r = render(s);
    Tensor<float> d = extract_condition(r.img, r.sil, ConditionKind::depthlike);
    REQUIRE(d.at(0, 32, 32, 0) == 1.0f);
    float peak = 0.0f;
    for (float v : d.v) peak = std::max(peak, v);
    REQUIRE(peak == 1.0f);
    // zero at the silhouette's outside, positive on its inner ring
    MaskU8 ring = inner_boundary(r.sil);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            if (!r.sil.at(y, x)) REQUIRE(d.at(0, y, x, 0) == 0.0f);
            if (ring.at(y, x)) {
                REQUIRE(d.at(0, y, x, 0) > 0.0f);
                REQUIRE(d.at(0, y, x, 0) < 0.2f);
            }
        }
}

TEST_CASE("condition faithfulness: silhouette kind returns the mask itself") {
    Rng rng(11);
    ShapeSpec s = sample_spec(7, rng);
    Render r = render(s);
    Tensor<float> c = extract_condition(r.img, r.sil, ConditionKind::silhouette);
    for (size_t i = 0; i < r.sil.v.size(); ++i)
        REQUIRE(c.v[i] == (r.sil.v[i] ? 1.0f : 0.0f));
}

TEST_CASE("distance transform matches the quadratic-time oracle exactly") {
    Rng rng(23);
    for (int trial = 0; trial < 3; ++trial) {
        MaskU8 m = trial == 0 ? render(sample_spec(6, rng)).sil : random_mask(40, 28, rng, 0.6);
        for (bool border : {true, false}) {
            std::vector<float> fast = edt_sq(m, border);
            std::vector<float> slow = edt_sq_brute(m, border);
            for (size_t i = 0; i < fast.size(); ++i) {
                // squared pixel distances are exact small integers in float,
                // except "unreachable" which both sides saturate large
                if (slow[i] >= detail::kEdtInf) {
                    REQUIRE(fast[i] >= 1e9f);
                } else {
                    REQUIRE(fast[i] == slow[i]);
                }
            }
        }
    }
}

TEST_CASE("dilation adds exactly the pixels within the radius") {
    Rng rng(31);
    MaskU8 m = random_mask(24, 24, rng, 0.1);
    MaskU8 d = dilate(m, 4.0f);
    MaskU8 inv = mask_not(m);
    std::vector<float> dist = edt_sq_brute(inv, false);
    for (size_t i = 0; i < d.v.size(); ++i) REQUIRE(d.v[i] == (dist[i] <= 16.0f ? 1 : 0));
}

TEST_CASE("alternate class sampling stays within the family") {
    ClassHierarchy h = default_hierarchy();
    Rng rng(5);
    std::array<int, kNumShapeClasses> freq{};
    for (int i = 0; i < 10000; ++i) {
        int alt = sample_alternate_class(4, h, rng);
        REQUIRE(alt != 4);
        REQUIRE(h.parent_of(alt) == 1);
        ++freq[alt];
    }
    REQUIRE(std::abs(freq[3] - 5000) <= 500);
    REQUIRE(std::abs(freq[5] - 5000) <= 500);

    ClassHierarchy forced{{{0, 1}}};
    for (int i = 0; i < 16; ++i) REQUIRE(sample_alternate_class(0, forced, rng) == 1);

    REQUIRE_THROWS(sample_alternate_class(7, forced, rng));
    ClassHierarchy lonely{{{2}}};
    REQUIRE_THROWS(sample_alternate_class(2, lonely, rng));
}

TEST_CASE("mask algebra identities hold on random pairs") {
    Rng rng(43);
    for (int trial = 0; trial < 1000; ++trial) {
        MaskU8 a = random_mask(12, 9, rng, rng.uniform(0.1, 0.9));
        MaskU8 b = random_mask(12, 9, rng, rng.uniform(0.1, 0.9));
        MaskPair p = compute_masks(a, b);
        for (size_t i = 0; i < a.v.size(); ++i) {
            REQUIRE(p.m_conflict.v[i] == (a.v[i] != b.v[i] ? 1 : 0));
            REQUIRE(p.m_bg.v[i] == (a.v[i] || b.v[i] ? 0 : 1));
            int inter = (a.v[i] && b.v[i]) ? 1 : 0;
            REQUIRE(p.m_conflict.v[i] + p.m_bg.v[i] + inter == 1);
            REQUIRE((p.m_conflict.v[i] & p.m_bg.v[i]) == 0);
        }
    }
}

TEST_CASE("mask algebra special cases") {
    Rng rng(47);
    MaskU8 a = random_mask(16, 16, rng, 0.5);
    MaskPair same = compute_masks(a, a);
    REQUIRE(same.m_conflict.count() == 0);
    for (size_t i = 0; i < a.v.size(); ++i) REQUIRE(same.m_bg.v[i] == (a.v[i] ? 0 : 1));

    // subset: conflict is the set difference
    MaskU8 sub = mask_and(a, random_mask(16, 16, rng, 0.5));
    MaskPair p = compute_masks(a, sub);
    for (size_t i = 0; i < a.v.size(); ++i)
        REQUIRE(p.m_conflict.v[i] == ((a.v[i] && !sub.v[i]) ? 1 : 0));

    // disjoint: conflict is the union
    MaskU8 left(8, 8), right(8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 4; ++x) {
            left.at(y, x) = 1;
            right.at(y, x + 4) = 1;
        }
    MaskPair q = compute_masks(left, right);
    MaskU8 uni = mask_or(left, right);
    REQUIRE(q.m_conflict.v == uni.v);

    MaskU8 bad(4, 4);
    bad.at(1, 1) = 2;
    REQUIRE_THROWS(compute_masks(bad, MaskU8(4, 4)));
}

TEST_CASE("connected components and largest component") {
    MaskU8 m(10, 10);
    m.at(1, 1) = 1;  // lone pixel
    for (int y = 4; y < 8; ++y)
        for (int x = 4; x < 8; ++x) m.at(y, x) = 1;  // 4x4 block
    m.at(0, 9) = 1;
    m.at(1, 8) = 1;  // diagonal pair joins under 8-connectivity
    REQUIRE(count_components(m) == 3);
    MaskU8 big = largest_component(m);
    REQUIRE(big.count() == 16);
    REQUIRE(big.at(5, 5) == 1);
    REQUIRE(big.at(1, 1) == 0);
}

TEST_CASE("foreground segmentation recovers the silhouette") {
    Rng rng(59);
    for (int cls : {0, 3, 8}) {
        ShapeSpec s = sample_spec(cls, rng);
        Render r = render(s);
        MaskU8 seg = segment_foreground(r.img, kBackgroundColor, 0.25f);
        size_t inter = 0, uni = 0;
        for (size_t i = 0; i < seg.v.size(); ++i) {
            inter += seg.v[i] & r.sil.v[i];
            uni += (seg.v[i] | r.sil.v[i]);
        }
        REQUIRE(static_cast<double>(inter) / static_cast<double>(uni) > 0.95);
    }
}

TEST_CASE("spec and hierarchy serialization round-trips") {
    Rng rng(61);
    ShapeSpec s = sample_spec(5, rng);
    nlohmann::json j = s;
    ShapeSpec t = j.get<ShapeSpec>();
    REQUIRE(t.class_id == s.class_id);
    REQUIRE(t.cx == s.cx);
    REQUIRE(t.cy == s.cy);
    REQUIRE(t.scale == s.scale);
    REQUIRE(t.rot == s.rot);
    REQUIRE(t.fill == s.fill);
    REQUIRE(t.bg == s.bg);

    ClassHierarchy h = default_hierarchy();
    nlohmann::json hj = h;
    ClassHierarchy h2 = hj.get<ClassHierarchy>();
    REQUIRE(h2.children == h.children);
    for (int c = 0; c < kNumShapeClasses; ++c) REQUIRE(h2.parent_of(c) == c / 3);
}
