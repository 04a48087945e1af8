#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "adascale/train/predictor.hpp"
#include "adascale/train/pretrain.hpp"

using namespace adascale;

namespace {

ModelConfig overfit_config() {
    ModelConfig c;
    c.img = 16;
    c.c0 = 8;
    c.c1 = 16;
    c.c2 = 32;
    c.emb_dim = 16;
    c.t_sin_dim = 8;
    c.num_classes = 3;
    c.groups = 4;
    c.train_steps = 40;
    c.pred_div1 = 2;
    c.pred_div2 = 4;
    c.pred_div3 = 8;
    c.init_seed = 77;
    return c;
}

// synthetic aligned samples; the training-loop tests need content, not realism
AlignedSet synthetic_aligned(int n, int img, uint64_t seed) {
    AlignedSet set;
    for (int i = 0; i < n; ++i) {
        Rng rng(substream(seed, "synth_aligned", static_cast<uint64_t>(i)));
        AlignedSample s;
        s.spec.class_id = i % 3;
        s.img = ImageU8(img, img, 3);
        for (auto& v : s.img.v) v = static_cast<uint8_t>(rng.below(256));
        s.cond = ImageU8(img, img, 1);
        for (auto& v : s.cond.v) v = static_cast<uint8_t>(rng.below(2) * 255);
        set.samples.push_back(std::move(s));
    }
    return set;
}

// one flat-colour image: the easiest possible memorization target
AlignedSet constant_aligned(int img) {
    AlignedSet set;
    AlignedSample s;
    s.spec.class_id = 1;
    s.img = ImageU8(img, img, 3);
    for (int y = 0; y < img; ++y)
        for (int x = 0; x < img; ++x) {
            s.img.at(y, x, 0) = 200;
            s.img.at(y, x, 1) = 80;
            s.img.at(y, x, 2) = 140;
        }
    s.cond = ImageU8(img, img, 1);
    for (int y = img / 4; y < 3 * img / 4; ++y)
        for (int x = img / 4; x < 3 * img / 4; ++x) s.cond.at(y, x, 0) = 255;
    set.samples.push_back(std::move(s));
    return set;
}

std::vector<UnalignedRecord> synthetic_unaligned(int n, int img, uint64_t seed) {
    std::vector<UnalignedRecord> data(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng rng(substream(seed, "synth_unaligned", static_cast<uint64_t>(i)));
        UnalignedRecord& r = data[static_cast<size_t>(i)];
        r.cls_alt = i % 3;
        r.target = ImageU8(img, img, 3);
        for (auto& v : r.target.v) v = static_cast<uint8_t>(rng.below(256));
        r.condition = ImageU8(img, img, 1);
        for (auto& v : r.condition.v) v = static_cast<uint8_t>(rng.below(2) * 255);
        MaskU8 mi(img, img), ma(img, img);
        for (int y = 2; y < img - 6; ++y)
            for (int x = 2; x < img - 6; ++x) mi.at(y, x) = 1;
        for (int y = 6; y < img - 2; ++y)
            for (int x = 6; x < img - 2; ++x) ma.at(y, x) = 1;
        r.masks = compute_masks(mi, ma);
    }
    return data;
}

}  // namespace

TEST_CASE("one-batch pretraining drives the step loss below 0.05 within 500 steps") {
    ModelConfig mc = overfit_config();
    DiffusionModel<float> model(mc);
    AlignedSet data = constant_aligned(mc.img);

    TrainConfig tc;
    tc.batch_size = 4;  // four noisings of the single sample per step
    tc.epochs = 500;    // one step per epoch
    tc.learning_rate = 4e-3f;
    tc.seed = 9;
    PretrainOptions opt;
    opt.train = tc;
    opt.cond_drop = 0.0;

    std::vector<double> losses = pretrain_aligned(model, data, opt, nullptr);
    REQUIRE(losses.size() == 500);
    // the per-step loss cannot stay near zero -- at tiny timesteps exact
    // noise recovery amplifies model error by 1/sqrt(1-ab) -- so the
    // memorization oracle is the dip: some step within the budget reaches
    // the threshold (measured 0.022-0.031 by step ~320 across seeds)
    double best = losses[0];
    for (double l : losses) best = std::min(best, l);
    REQUIRE(best < 0.05);
    // and the loss actually trends down over the run
    REQUIRE(losses.back() < losses.front());
}

TEST_CASE("identical seeds reproduce the pretraining checksum, zero epochs change nothing") {
    ModelConfig mc = overfit_config();
    AlignedSet data = synthetic_aligned(6, mc.img, 22);

    TrainConfig tc;
    tc.batch_size = 3;
    tc.epochs = 2;
    tc.learning_rate = 1e-3f;
    tc.seed = 40;
    PretrainOptions opt;
    opt.train = tc;
    opt.cond_drop = 0.5;  // exercise the control-free branch too

    auto run = [&](int epochs) {
        DiffusionModel<float> m(mc);
        PretrainOptions o = opt;
        o.train.epochs = epochs;
        if (epochs > 0) pretrain_aligned(m, data, o, nullptr);
        auto ps = m.backbone_params();
        auto cp = m.control_params();
        ps.insert(ps.end(), cp.begin(), cp.end());
        return param_checksum(ps);
    };

    uint64_t a = run(2);
    uint64_t b = run(2);
    REQUIRE(a == b);

    uint64_t init1 = run(0);
    DiffusionModel<float> fresh(mc);
    auto ps = fresh.backbone_params();
    auto cp = fresh.control_params();
    ps.insert(ps.end(), cp.begin(), cp.end());
    REQUIRE(init1 == param_checksum(ps));
    REQUIRE(a != init1);  // training moved something
}

TEST_CASE("predictor training moves only predictor parameters") {
    ModelConfig mc = overfit_config();
    DiffusionModel<float> model(mc);
    auto data = synthetic_unaligned(4, mc.img, 23);

    auto frozen = model.backbone_params();
    auto cp = model.control_params();
    frozen.insert(frozen.end(), cp.begin(), cp.end());
    uint64_t before = param_checksum(frozen);
    uint64_t pred_before = param_checksum(model.predictor_params());

    TrainConfig tc;
    tc.batch_size = 4;
    tc.epochs = 3;
    tc.seed = 11;
    std::ostringstream log;
    auto stats = train_predictor(model, data, tc, &log);

    REQUIRE(param_checksum(frozen) == before);
    REQUIRE(param_checksum(model.predictor_params()) != pred_before);
    REQUIRE(stats.size() == 3);
    for (const auto& st : stats) {
        REQUIRE(std::isfinite(st.loss_ldm));
        REQUIRE(std::isfinite(st.loss_c));
    }
    // every logged line carries the four metrics
    REQUIRE(log.str().find("alpha_conflict") != std::string::npos);
    REQUIRE(log.str().find("alpha_bg") != std::string::npos);
}

TEST_CASE("the scale regularizer alone drives alpha toward its hinge band") {
    // isolate the regularizer: repeated forwards on one batch, backward only
    // through the alpha outputs, so the hinge is the sole training signal
    ModelConfig mc = overfit_config();
    DiffusionModel<float> model(mc);
    auto data = synthetic_unaligned(2, mc.img, 29);

    Tensor<float> xt(2, mc.img, mc.img, mc.img_c);
    Tensor<float> cond(2, mc.img, mc.img, 1);
    Rng rng(7);
    for (auto& v : xt.v) v = static_cast<float>(rng.normal());
    for (int b = 0; b < 2; ++b) decode_unit_into(cond, b, data[b].condition);
    std::vector<int> ts{5, 31}, cls{0, 2};
    std::vector<MaskPair> masks{data[0].masks, data[1].masks};

    TrainConfig tc;
    auto params = model.predictor_params();
    AdamW<float> adamw;
    adamw.lr = 1e-3f;

    double first_conflict = 0, first_bg = 0, last_conflict = 0, last_bg = 0;
    for (int step = 0; step < 40; ++step) {
        model.fwd(xt, ts, cls, &cond, ScaleMode::predictor, nullptr, CacheMode::pred_train);
        std::vector<Tensor<float>> alpha(model.trace().alpha.begin(),
                                         model.trace().alpha.end());
        auto [a_c, a_bg] = alpha_means(model.trace().alpha, masks);
        if (step == 0) {
            first_conflict = a_c;
            first_bg = a_bg;
        }
        last_conflict = a_c;
        last_bg = a_bg;

        std::vector<Tensor<float>> gc = loss_c_grad(alpha, masks, tc);
        std::array<Tensor<float>, kNumFusion> d_alpha;
        for (int i = 0; i < kNumFusion; ++i) d_alpha[i] = std::move(gc[i]);
        AdamW<float>::zero_grads(params);
        model.bwd_pred_alpha_only(d_alpha);
        adamw.step(params);
    }

    // conflict alpha falls toward alpha_conflict, background alpha rises
    // toward alpha_bg, and the two separate
    REQUIRE(last_conflict < first_conflict - 0.02);
    REQUIRE(last_bg > first_bg + 0.02);
    REQUIRE(last_bg > last_conflict + 0.1);
}

TEST_CASE("predictor gradients vanish without any loss signal") {
    // lambda_c = 0 and eps gradient of zero leave the predictor untouched
    ModelConfig mc = overfit_config();
    DiffusionModel<float> model(mc);

    Tensor<float> x(1, mc.img, mc.img, mc.img_c);
    Tensor<float> cond(1, mc.img, mc.img, 1);
    Rng rng(5);
    for (auto& v : x.v) v = static_cast<float>(rng.normal());
    for (int y = 4; y < 12; ++y)
        for (int xx = 4; xx < 12; ++xx) cond.at(0, y, xx, 0) = 1.0f;
    std::vector<int> ts{7}, cls{1};

    model.fwd(x, ts, cls, &cond, ScaleMode::predictor, nullptr, CacheMode::pred_train);
    auto params = model.predictor_params();
    AdamW<float>::zero_grads(params);
    Tensor<float> d_eps(1, mc.img, mc.img, mc.img_c);  // zeros
    std::array<Tensor<float>, kNumFusion> d_alpha;     // empty
    model.bwd_pred(d_eps, d_alpha);
    for (const auto* p : params)
        for (float g : p->g.v) REQUIRE(g == 0.0f);
}
