#include <catch2/catch_amalgamated.hpp>

#include "adascale/train/losses.hpp"
#include "fd_check.hpp"

using namespace adascale;
using namespace adascale::fd;

namespace {

MaskU8 const_mask(int h, int w, uint8_t v) {
    MaskU8 m(h, w);
    for (auto& b : m.v) b = v;
    return m;
}

MaskPair pair_from(const MaskU8& conflict, const MaskU8& bg) {
    MaskPair p;
    p.m_conflict = conflict;
    p.m_bg = bg;
    p.m_init = MaskU8(conflict.h, conflict.w);
    p.m_alt = MaskU8(conflict.h, conflict.w);
    return p;
}

}  // namespace

TEST_CASE("noise loss matches hand arithmetic") {
    Tensor<double> a(1, 1, 2, 1), b(1, 1, 2, 1);
    a.v = {1.0, 2.0};
    b.v = {0.0, 0.0};
    REQUIRE(loss_ldm(a, b) == Catch::Approx(2.5).margin(1e-12));  // (1+4)/2

    REQUIRE(loss_ldm(a, a) == 0.0);

    Tensor<double> z(2, 3, 3, 1), o(2, 3, 3, 1);
    o.fill(1.0);
    REQUIRE(loss_ldm(z, o) == Catch::Approx(1.0).margin(1e-12));

    Tensor<double> g = loss_ldm_grad(a, b);
    REQUIRE(g.v[0] == Catch::Approx(-1.0).margin(1e-12));  // 2*(0-1)/2
    REQUIRE(g.v[1] == Catch::Approx(-2.0).margin(1e-12));

    Tensor<double> bad(1, 2, 1, 1);
    REQUIRE_THROWS(loss_ldm(a, bad));
}

TEST_CASE("scale regularizer matches its frozen examples") {
    TrainConfig cfg;
    int h = 8, w = 8;

    // alpha == 0.2 under an all-conflict mask sits exactly on the hinge
    std::vector<Tensor<double>> maps(1, Tensor<double>(1, h, w, 1));
    maps[0].fill(static_cast<double>(cfg.alpha_conflict));
    std::vector<MaskPair> masks{pair_from(const_mask(h, w, 1), const_mask(h, w, 0))};
    REQUIRE(loss_c(maps, masks, cfg) == 0.0);

    // alpha == 0.5, all conflict -> max(0, 0.5-0.2)
    maps[0].fill(0.5);
    REQUIRE(loss_c(maps, masks, cfg) == Catch::Approx(0.3).margin(1e-6));

    // alpha == 0.5, all background -> max(0, 0.8-0.5)
    masks[0] = pair_from(const_mask(h, w, 0), const_mask(h, w, 1));
    REQUIRE(loss_c(maps, masks, cfg) == Catch::Approx(0.3).margin(1e-6));

    REQUIRE_THROWS(loss_c(std::vector<Tensor<double>>{}, masks, cfg));
}

TEST_CASE("scale regularizer dead zone holds on 1000 random draws") {
    TrainConfig cfg;
    Rng rng(71);
    int h = 6, w = 6;
    for (int trial = 0; trial < 1000; ++trial) {
        MaskU8 mc(h, w), mb(h, w);
        for (int i = 0; i < h * w; ++i) {
            int r = static_cast<int>(rng.below(3));
            mc.v[i] = r == 0 ? 1 : 0;
            mb.v[i] = r == 1 ? 1 : 0;
        }
        Tensor<double> a(1, h, w, 1);
        for (int i = 0; i < h * w; ++i) {
            if (mc.v[i]) a.v[i] = rng.uniform(0.0, cfg.alpha_conflict);
            else if (mb.v[i]) a.v[i] = rng.uniform(cfg.alpha_bg, 1.0);
            else a.v[i] = rng.uniform();
        }
        std::vector<Tensor<double>> maps{a};
        std::vector<MaskPair> masks{pair_from(mc, mb)};
        REQUIRE(loss_c(maps, masks, cfg) == 0.0);
    }
}

TEST_CASE("scale regularizer subgradient matches finite differences off the kinks") {
    TrainConfig cfg;
    Rng rng(73);
    // two blocks at different resolutions, batch of 2
    std::vector<Tensor<double>> maps{Tensor<double>(2, 4, 4, 1), Tensor<double>(2, 8, 8, 1)};
    std::vector<MaskPair> masks;
    for (int n = 0; n < 2; ++n) {
        MaskU8 mc(16, 16), mb(16, 16);
        for (int i = 0; i < 256; ++i) {
            int r = static_cast<int>(rng.below(3));
            mc.v[i] = r == 0 ? 1 : 0;
            mb.v[i] = r == 1 ? 1 : 0;
        }
        masks.push_back(pair_from(mc, mb));
    }
    for (auto& a : maps)
        for (auto& v : a.v) {
            // stay >= 0.05 away from both hinge corners
            do v = rng.uniform();
            while (std::abs(v - cfg.alpha_conflict) < 0.05 || std::abs(v - cfg.alpha_bg) < 0.05);
        }

    std::vector<Tensor<double>> g = loss_c_grad(maps, masks, cfg);
    auto loss = [&] { return static_cast<double>(loss_c(maps, masks, cfg)); };
    for (size_t b = 0; b < maps.size(); ++b)
        for (size_t i = 0; i < maps[b].v.size(); i += 3) {
            double fd = fd_slot(&maps[b].v[i], loss, 1e-6);
            REQUIRE(rel_err(g[b].v[i], fd) < 1e-5);
        }
}

TEST_CASE("total loss combines the terms linearly") {
    TrainConfig cfg;
    REQUIRE(total_loss(1.0, 0.3, cfg) == Catch::Approx(1.003).margin(1e-9));
    cfg.lambda_c = 0.0f;
    REQUIRE(total_loss(1.0, 123.0, cfg) == 1.0);
    cfg.lambda_c = 0.01f;
    REQUIRE(total_loss(0.7, 0.0, cfg) == 0.7);
    REQUIRE(total_loss(1.0, 0.6, cfg) > total_loss(1.0, 0.3, cfg));
}

TEST_CASE("mask resize uses pixel centres and stays binary") {
    MaskU8 m(4, 4);
    // set pixels so the 2x2 nearest picks (1,1),(1,3),(3,1),(3,3)
    m.at(1, 1) = 1;
    m.at(1, 3) = 0;
    m.at(3, 1) = 0;
    m.at(3, 3) = 1;
    MaskU8 r = resize_mask_nearest(m, 2, 2);
    REQUIRE(r.at(0, 0) == 1);
    REQUIRE(r.at(0, 1) == 0);
    REQUIRE(r.at(1, 0) == 0);
    REQUIRE(r.at(1, 1) == 1);

    // upsample keeps binarity and support
    MaskU8 u = resize_mask_nearest(m, 8, 8);
    for (auto b : u.v) REQUIRE(b <= 1);
    REQUIRE(u.count() == 4 * m.count());

    TrainConfig bad;
    bad.alpha_conflict = 0.9f;
    REQUIRE_THROWS(bad.validate());
}
