#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "adascale/core/hash.hpp"
#include "adascale/diffusion/model.hpp"

namespace adascale {

using json = nlohmann::json;

inline void to_json(json& j, const ModelConfig& c) {
    j = json{{"img", c.img},
             {"img_c", c.img_c},
             {"c0", c.c0},
             {"c1", c.c1},
             {"c2", c.c2},
             {"emb_dim", c.emb_dim},
             {"t_sin_dim", c.t_sin_dim},
             {"num_classes", c.num_classes},
             {"groups", c.groups},
             {"train_steps", c.train_steps},
             {"beta_start", c.beta_start},
             {"beta_end", c.beta_end},
             {"pred_div1", c.pred_div1},
             {"pred_div2", c.pred_div2},
             {"pred_div3", c.pred_div3},
             {"pred_k", c.pred_k},
             {"pred_global", c.pred_global},
             {"init_seed", c.init_seed}};
}

inline void from_json(const json& j, ModelConfig& c) {
    ModelConfig d;
    c.img = j.value("img", d.img);
    c.img_c = j.value("img_c", d.img_c);
    c.c0 = j.value("c0", d.c0);
    c.c1 = j.value("c1", d.c1);
    c.c2 = j.value("c2", d.c2);
    c.emb_dim = j.value("emb_dim", d.emb_dim);
    c.t_sin_dim = j.value("t_sin_dim", d.t_sin_dim);
    c.num_classes = j.value("num_classes", d.num_classes);
    c.groups = j.value("groups", d.groups);
    c.train_steps = j.value("train_steps", d.train_steps);
    c.beta_start = j.value("beta_start", d.beta_start);
    c.beta_end = j.value("beta_end", d.beta_end);
    c.pred_div1 = j.value("pred_div1", d.pred_div1);
    c.pred_div2 = j.value("pred_div2", d.pred_div2);
    c.pred_div3 = j.value("pred_div3", d.pred_div3);
    c.pred_k = j.value("pred_k", d.pred_k);
    c.pred_global = j.value("pred_global", d.pred_global);
    c.init_seed = j.value("init_seed", d.init_seed);
}

// Canonical text form (nlohmann keeps keys sorted), hashed for checkpoint
// compatibility checks. Works for any config type with a to_json.
template <typename Cfg>
inline std::string config_hash(const Cfg& c) {
    std::string s = json(c).dump();
    return hex64(fnv1a64(s.data(), s.size()));
}

inline json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "cannot open " + path.string());
    json j;
    in >> j;
    return j;
}

// Indented dump with sorted keys and a trailing newline; reruns produce
// byte-identical files.
inline void save_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), "cannot open " + path.string());
    out << j.dump(2) << "\n";
}

// Environment overrides: output root and BLAS thread cap only.
inline std::filesystem::path output_root() {
    if (const char* p = std::getenv("ADASCALE_OUT_ROOT")) return p;
    return "out";
}

inline int env_threads() {
    if (const char* p = std::getenv("ADASCALE_THREADS")) return std::max(1, std::atoi(p));
    return 1;
}

}  // namespace adascale
