// Aligned corpus for pretraining and for the oracle classifier: renders with
// their own condition maps and class labels, persisted as portable images
// plus a json manifest. Quantized u8 is the canonical storage form.
#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "adascale/core/rng.hpp"
#include "adascale/io/pnm.hpp"
#include "adascale/shapes/masks.hpp"
#include "adascale/shapes/world.hpp"
#include "adascale/util/config.hpp"

namespace adascale {

struct AlignedSample {
    ShapeSpec spec;
    ImageU8 img;   // rgb render
    ImageU8 cond;  // condition map, gray
    MaskU8 sil;    // silhouette
};

struct AlignedSet {
    ConditionKind kind = ConditionKind::silhouette;
    std::vector<AlignedSample> samples;
};

// Classes round-robin for exact balance; everything else drawn from a
// per-sample substream so any prefix of the set is reproducible.
inline AlignedSet generate_aligned(int n, ConditionKind kind, uint64_t seed) {
    AlignedSet set;
    set.kind = kind;
    set.samples.reserve(n);
    for (int i = 0; i < n; ++i) {
        Rng rng(substream(seed, "aligned", static_cast<uint64_t>(i)));
        AlignedSample s;
        s.spec = sample_spec(i % kNumShapeClasses, rng);
        Render r = render(s.spec);
        s.img = to_u8(r.img);
        s.cond = unit_to_u8(extract_condition(r.img, r.sil, kind));
        s.sil = r.sil;
        set.samples.push_back(std::move(s));
    }
    return set;
}

namespace detail {

inline std::string sample_id(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05d", i);
    return buf;
}

}  // namespace detail

inline void save_aligned(const AlignedSet& set, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json manifest;
    manifest["schema"] = "aligned-v1";
    manifest["kind"] = condition_name(set.kind);
    manifest["count"] = set.samples.size();
    json items = json::array();
    for (size_t i = 0; i < set.samples.size(); ++i) {
        const AlignedSample& s = set.samples[i];
        std::string id = detail::sample_id(static_cast<int>(i));
        write_pnm(dir / (id + ".img.ppm"), s.img);
        write_pnm(dir / (id + ".cond.pgm"), s.cond);
        write_pbm(dir / (id + ".sil.pbm"), s.sil);
        items.push_back(json{{"id", id}, {"spec", s.spec}});
    }
    manifest["samples"] = std::move(items);
    save_json(dir / "manifest.json", manifest);
}

inline AlignedSet load_aligned(const std::filesystem::path& dir) {
    json manifest = load_json(dir / "manifest.json");
    require(manifest.at("schema") == "aligned-v1", "load_aligned: unknown schema");
    AlignedSet set;
    set.kind = condition_from_name(manifest.at("kind").get<std::string>());
    for (const json& item : manifest.at("samples")) {
        std::string id = item.at("id").get<std::string>();
        AlignedSample s;
        s.spec = item.at("spec").get<ShapeSpec>();
        s.img = read_pnm(dir / (id + ".img.ppm"));
        s.cond = read_pnm(dir / (id + ".cond.pgm"));
        s.sil = read_pbm(dir / (id + ".sil.pbm"));
        set.samples.push_back(std::move(s));
    }
    require(set.samples.size() == manifest.at("count").get<size_t>(),
            "load_aligned: manifest count mismatch");
    return set;
}

// batch-assembly decodes, inverse of to_u8 / unit_to_u8
template <typename T>
void decode_image_into(Tensor<T>& x, int n, const ImageU8& img) {
    require(x.h == img.h && x.w == img.w && x.c == img.c, "decode_image_into: shape mismatch");
    size_t per = img.v.size();
    for (size_t i = 0; i < per; ++i)
        x.v[n * per + i] = static_cast<T>(img.v[i]) / T(127.5) - T(1);
}

template <typename T>
void decode_unit_into(Tensor<T>& x, int n, const ImageU8& img) {
    require(x.h == img.h && x.w == img.w && x.c == 1 && img.c == 1,
            "decode_unit_into: shape mismatch");
    size_t per = img.v.size();
    for (size_t i = 0; i < per; ++i) x.v[n * per + i] = static_cast<T>(img.v[i]) / T(255);
}

}  // namespace adascale
