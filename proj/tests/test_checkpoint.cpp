#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "adascale/diffusion/checkpoint.hpp"
#include "adascale/diffusion/model.hpp"
#include "adascale/eval/oracle.hpp"

using namespace adascale;

namespace {

ModelConfig tiny_config() {
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

std::filesystem::path tmp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("checkpoint round trip restores every weight bit") {
    ModelConfig mc = tiny_config();
    DiffusionModel<float> a(mc);
    // make the state distinctive
    Rng rng(13);
    for (auto* p : a.backbone_params())
        for (auto& v : p->w.v) v += 0.01f * static_cast<float>(rng.normal());

    auto path = tmp_file("adascale_ckpt_roundtrip.adsc");
    json extra = {{"note", 42}};
    save_checkpoint(path, "backbone", mc, a.backbone_params(), extra);

    DiffusionModel<float> b(mc);
    REQUIRE(param_checksum(b.backbone_params()) != param_checksum(a.backbone_params()));
    json got = load_checkpoint(path, "backbone", mc, b.backbone_params());
    REQUIRE(param_checksum(b.backbone_params()) == param_checksum(a.backbone_params()));
    REQUIRE(got.at("note") == 42);
}

TEST_CASE("checkpoint header carries version, kind, and a verifiable config") {
    ModelConfig mc = tiny_config();
    DiffusionModel<float> m(mc);
    auto path = tmp_file("adascale_ckpt_header.adsc");
    save_checkpoint(path, "predictor", mc, m.predictor_params());

    json h = read_checkpoint_header(path);
    REQUIRE(h.at("format_version") == 1);
    REQUIRE(h.at("kind") == "predictor");
    REQUIRE(h.at("config_hash") == config_hash(mc));
    ModelConfig back = h.at("config").get<ModelConfig>();
    REQUIRE(config_hash(back) == config_hash(mc));
    REQUIRE(h.at("tensors").size() == m.predictor_params().size());
}

TEST_CASE("checkpoint loading rejects wrong kind, config, magic, and version") {
    ModelConfig mc = tiny_config();
    DiffusionModel<float> m(mc);
    auto path = tmp_file("adascale_ckpt_reject.adsc");
    save_checkpoint(path, "backbone", mc, m.backbone_params());

    REQUIRE_THROWS(load_checkpoint(path, "predictor", mc, m.backbone_params()));

    ModelConfig other = mc;
    other.c0 = 16;
    REQUIRE_THROWS(load_checkpoint(path, "backbone", other, m.backbone_params()));

    // parameter list mismatch (different count)
    REQUIRE_THROWS(load_checkpoint(path, "backbone", mc, m.predictor_params()));

    auto corrupt = tmp_file("adascale_ckpt_magic.adsc");
    std::filesystem::copy_file(path, corrupt,
                               std::filesystem::copy_options::overwrite_existing);
    {
        std::fstream f(corrupt, std::ios::in | std::ios::out | std::ios::binary);
        f.write("NOPE", 4);
    }
    REQUIRE_THROWS(read_checkpoint_header(corrupt));

    auto badver = tmp_file("adascale_ckpt_ver.adsc");
    std::filesystem::copy_file(path, badver,
                               std::filesystem::copy_options::overwrite_existing);
    {
        std::fstream f(badver, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(4);
        char v[4] = {9, 0, 0, 0};
        f.write(v, 4);
    }
    REQUIRE_THROWS(read_checkpoint_header(badver));
}

TEST_CASE("truncated checkpoint payloads are rejected") {
    ModelConfig mc = tiny_config();
    DiffusionModel<float> m(mc);
    auto path = tmp_file("adascale_ckpt_trunc.adsc");
    save_checkpoint(path, "backbone", mc, m.backbone_params());

    auto cut = tmp_file("adascale_ckpt_cut.adsc");
    std::filesystem::copy_file(path, cut, std::filesystem::copy_options::overwrite_existing);
    std::filesystem::resize_file(cut, std::filesystem::file_size(cut) - 64);
    REQUIRE_THROWS(load_checkpoint(cut, "backbone", mc, m.backbone_params()));
}

TEST_CASE("oracle checkpoints restore accuracy stamps and serve identically") {
    OracleConfig oc;
    oc.img = 16;
    oc.c1 = 4;
    oc.c2 = 4;
    oc.c3 = 8;
    oc.c4 = 8;
    oc.groups = 2;
    Oracle a;
    a.cfg = oc;
    a.net = OracleNet<float>(oc);
    Rng rng(3);
    for (auto* p : a.net.params())
        for (auto& v : p->w.v) v += 0.05f * static_cast<float>(rng.normal());
    a.holdout_accuracy = 0.97;  // below the 0.99 serving gate
    a.noise_max_prob = 0.21;

    auto path = tmp_file("adascale_ckpt_oracle.adsc");
    save_oracle(path, a);
    Oracle b = load_oracle(path);
    REQUIRE(b.holdout_accuracy == a.holdout_accuracy);
    REQUIRE(b.noise_max_prob == a.noise_max_prob);
    REQUIRE(param_checksum(b.net.params()) == param_checksum(a.net.params()));

    // below the gate the oracle refuses to serve
    REQUIRE(!b.ready());
    Tensor<float> img(1, oc.img, oc.img, 3);
    REQUIRE_THROWS(b.probs(img));
}
