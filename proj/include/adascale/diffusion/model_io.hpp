// One checkpoint for the whole model: backbone, control branch and scale
// predictor in a fixed parameter order, keyed by the model configuration.
#pragma once

#include <filesystem>

#include "adascale/diffusion/checkpoint.hpp"
#include "adascale/diffusion/model.hpp"
#include "adascale/util/config.hpp"

namespace adascale {

template <typename T>
inline std::vector<Param<T>*> all_params(DiffusionModel<T>& m) {
    std::vector<Param<T>*> ps = m.backbone_params();
    for (auto* p : m.control_params()) ps.push_back(p);
    for (auto* p : m.predictor_params()) ps.push_back(p);
    return ps;
}

inline void save_model(const std::filesystem::path& path, DiffusionModel<float>& m,
                       const json& extra = json::object()) {
    save_checkpoint(path, "model", m.cfg, all_params(m), extra);
}

// Rebuilds the model from the stored configuration, then loads every weight.
inline DiffusionModel<float> load_model(const std::filesystem::path& path,
                                        json* extra_out = nullptr) {
    json header = read_checkpoint_header(path);
    ModelConfig cfg = header.at("config").get<ModelConfig>();
    DiffusionModel<float> m(cfg);
    json extra = load_checkpoint(path, "model", cfg, all_params(m));
    if (extra_out) *extra_out = extra;
    return m;
}

}  // namespace adascale
