#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "adascale/data/aligned.hpp"
#include "adascale/diffusion/sampler.hpp"
#include "adascale/eval/oracle.hpp"
#include "adascale/shapes/masks.hpp"
#include "adascale/shapes/world.hpp"
#include "adascale/util/config.hpp"

namespace adascale {

// ---------------------------------------------------------------------------
// Unaligned dataset construction: sweep the scale grid inside a dilation of
// the source silhouette, keep the best candidate that an automated judge
// accepts, persist with masks for predictor training.

struct SweepConfig {
    std::vector<float> alpha_grid = {1.0f, 0.8f, 0.6f, 0.4f, 0.2f, 0.0f};
    int dilation_radius = 4;
    float tau_cls = 0.9f;     // minimum judge confidence in the alternate class
    float tau_bg = 0.08f;     // maximum mean |change| outside the dilated union
    float seg_thresh = 0.25f; // color threshold for segmenting generated output
    int sample_steps = 12;    // deterministic sampler steps during the sweep
    int max_attempt_factor = 6;  // attempt cap = factor * n_target

    void validate() const {
        require(!alpha_grid.empty(), "sweep: empty grid");
        for (size_t i = 1; i < alpha_grid.size(); ++i)
            require(alpha_grid[i] < alpha_grid[i - 1], "sweep: grid must descend");
        for (float a : alpha_grid)
            require(a >= 0.0f && a <= 1.0f, "sweep: grid values must be in [0,1]");
        require(dilation_radius >= 0, "sweep: negative dilation radius");
        require(sample_steps > 0, "sweep: sample_steps must be positive");
        require(max_attempt_factor >= 1, "sweep: max_attempt_factor must be >= 1");
    }
};

inline void to_json(json& j, const SweepConfig& c) {
    j = json{{"alpha_grid", c.alpha_grid},
             {"dilation_radius", c.dilation_radius},
             {"tau_cls", c.tau_cls},
             {"tau_bg", c.tau_bg},
             {"seg_thresh", c.seg_thresh},
             {"sample_steps", c.sample_steps},
             {"max_attempt_factor", c.max_attempt_factor}};
}

inline void from_json(const json& j, SweepConfig& c) {
    SweepConfig d;
    c.alpha_grid = j.value("alpha_grid", d.alpha_grid);
    c.dilation_radius = j.value("dilation_radius", d.dilation_radius);
    c.tau_cls = j.value("tau_cls", d.tau_cls);
    c.tau_bg = j.value("tau_bg", d.tau_bg);
    c.seg_thresh = j.value("seg_thresh", d.seg_thresh);
    c.sample_steps = j.value("sample_steps", d.sample_steps);
    c.max_attempt_factor = j.value("max_attempt_factor", d.max_attempt_factor);
}

// Effective per-pixel scale map: `alpha` inside dilate(m_init, radius),
// exactly 1.0 everywhere else.
template <typename T>
inline Tensor<T> relaxation_map(const MaskU8& m_init, int radius, T alpha) {
    MaskU8 region = dilate(m_init, radius);
    Tensor<T> map(1, m_init.h, m_init.w, 1);
    for (int y = 0; y < m_init.h; ++y)
        for (int x = 0; x < m_init.w; ++x)
            map.at(0, y, x, 0) = region.at(y, x) ? alpha : T(1);
    return map;
}

template <typename T>
struct SweepCandidate {
    float alpha = 1.0f;
    Tensor<T> image;  // (1,h,w,3) in [-1,1]
};

// One generation per grid value, all slots sharing the initial noise so that
// differences are attributable to the scale alone.
template <typename T>
inline std::vector<SweepCandidate<T>> sweep_generate(DiffusionModel<T>& model,
                                                     const NoiseSchedule& sched,
                                                     const Tensor<T>& c_rough,
                                                     const MaskU8& m_init, int cls_alt,
                                                     const SweepConfig& cfg, uint64_t seed) {
    cfg.validate();
    const ModelConfig& mc = model.cfg;
    require(c_rough.n == 1 && c_rough.h == mc.img && c_rough.w == mc.img && c_rough.c == 1,
            "sweep: condition map must be (1,img,img,1)");
    require(m_init.h == mc.img && m_init.w == mc.img, "sweep: mask size mismatch");
    int n = static_cast<int>(cfg.alpha_grid.size());

    // batched condition and per-slot relaxation maps at every fusion scale
    Tensor<T> cond(n, mc.img, mc.img, 1);
    for (int i = 0; i < n; ++i)
        std::copy(c_rough.v.begin(), c_rough.v.end(), cond.v.begin() + i * c_rough.size());

    auto res = fusion_res(mc);
    std::array<Tensor<T>, kNumFusion> maps;
    for (int b = 0; b < kNumFusion; ++b) maps[b] = Tensor<T>(n, res[b], res[b], 1);
    for (int i = 0; i < n; ++i) {
        Tensor<T> img_map = relaxation_map(m_init, cfg.dilation_radius, cfg.alpha_grid[i]);
        for (int b = 0; b < kNumFusion; ++b) {
            Tensor<T> r = resize_nearest(img_map, res[b], res[b]);
            std::copy(r.v.begin(), r.v.end(), maps[b].v.begin() + i * r.size());
        }
    }

    ScaleChoice<T> scale;
    scale.mode = ScaleMode::fixed_maps;
    scale.maps = std::move(maps);

    SampleOptions<T> opt;
    opt.steps = cfg.sample_steps;
    opt.seed = seed;
    opt.init_stream = 0;  // shared x_T across the grid

    std::vector<int> cls(n, cls_alt);
    SampleResult<T> out = sample(model, sched, cls, &cond, scale, opt);

    std::vector<SweepCandidate<T>> cands(n);
    size_t per = out.x.size() / n;
    for (int i = 0; i < n; ++i) {
        cands[i].alpha = cfg.alpha_grid[i];
        cands[i].image = Tensor<T>(1, mc.img, mc.img, mc.img_c);
        std::copy_n(out.x.v.begin() + i * per, per, cands[i].image.v.begin());
    }
    return cands;
}

template <typename T>
struct UnalignedSample {
    int source_cls = 0;
    int cls_alt = 0;
    ConditionKind kind = ConditionKind::silhouette;
    float chosen_alpha = 1.0f;
    Tensor<T> c_rough;  // (1,h,w,1)
    Tensor<T> target;   // (1,h,w,3)
    MaskPair masks;
    double cls_confidence = 0.0;
    double bg_change = 0.0;
};

// Mean absolute change between candidate and source layout outside the
// dilated union of both object masks; 0 when that region is empty.
template <typename T>
inline double background_change(const Tensor<T>& candidate, const Tensor<T>& source,
                                const MaskU8& m_init, const MaskU8& m_alt, int radius) {
    MaskU8 region = dilate(mask_or(m_init, m_alt), radius);
    double sum = 0;
    long count = 0;
    for (int y = 0; y < candidate.h; ++y)
        for (int x = 0; x < candidate.w; ++x) {
            if (region.at(y, x)) continue;
            for (int ch = 0; ch < candidate.c; ++ch)
                sum += std::abs(static_cast<double>(candidate.at(0, y, x, ch)) -
                                static_cast<double>(source.at(0, y, x, ch)));
            count += candidate.c;
        }
    return count ? sum / count : 0.0;
}

// Highest-alpha candidate that the judge accepts on both class alignment and
// background preservation; absence means the sample is discarded.
template <typename T>
inline std::optional<UnalignedSample<T>> auto_filter(
    const std::vector<SweepCandidate<T>>& candidates, Oracle& oracle,
    const Tensor<T>& source_img, const MaskU8& m_init, int cls_alt, const SweepConfig& cfg) {
    require(!candidates.empty(), "auto_filter: no candidates");
    int n = static_cast<int>(candidates.size());
    int img = candidates[0].image.h;

    Tensor<float> batch(n, img, img, 3);
    for (int i = 0; i < n; ++i)
        std::copy(candidates[i].image.v.begin(), candidates[i].image.v.end(),
                  batch.v.begin() + static_cast<size_t>(i) * candidates[i].image.size());
    Tensor<float> p = oracle.probs(batch);

    for (int i = 0; i < n; ++i) {  // grid descends: first pass is highest alpha
        double conf = p.at(i, 0, 0, cls_alt);
        if (conf < cfg.tau_cls) continue;
        MaskU8 seg = segment_foreground(candidates[i].image, kBackgroundColor, cfg.seg_thresh);
        MaskU8 m_alt = largest_component(seg);
        double bg = background_change(candidates[i].image, source_img, m_init, m_alt,
                                      cfg.dilation_radius);
        if (bg > cfg.tau_bg) continue;

        UnalignedSample<T> s;
        s.cls_alt = cls_alt;
        s.chosen_alpha = candidates[i].alpha;
        s.target = candidates[i].image;
        s.masks = compute_masks(m_init, m_alt);
        s.cls_confidence = conf;
        s.bg_change = bg;
        return s;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// dataset persistence

struct BuilderStats {
    long attempts = 0;
    long accepted = 0;
    long rejected = 0;
    std::vector<long> accepted_per_alpha;  // aligned with the grid
    bool reached_target = true;
};

struct BuildOptions {
    int n_target = 0;
    std::vector<ConditionKind> kinds = {ConditionKind::silhouette};
    SweepConfig sweep;
    uint64_t seed = 0;
    std::filesystem::path dir;
    bool resume = false;  // extend an existing dataset deterministically
};

namespace detail {

inline std::string builder_sample_id(long i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%05ld", i);
    return buf;
}

}  // namespace detail

template <typename T>
inline void save_unaligned_sample(const std::filesystem::path& dir,
                                  const UnalignedSample<T>& s) {
    std::filesystem::create_directories(dir);
    write_pnm(dir / "condition.pgm", unit_to_u8(s.c_rough));
    write_pnm(dir / "target.ppm", to_u8(s.target));
    write_pbm(dir / "m_init.pbm", s.masks.m_init);
    write_pbm(dir / "m_alt.pbm", s.masks.m_alt);
    write_pbm(dir / "m_conflict.pbm", s.masks.m_conflict);
    write_pbm(dir / "m_bg.pbm", s.masks.m_bg);
}

template <typename T>
inline BuilderStats build_dataset(DiffusionModel<T>& model, const NoiseSchedule& sched,
                                  Oracle& oracle, const ClassHierarchy& hier,
                                  const BuildOptions& opt, std::ostream* log = nullptr) {
    opt.sweep.validate();
    require(opt.n_target >= 0, "builder: negative target");
    require(!opt.kinds.empty(), "builder: no condition kinds");
    std::filesystem::create_directories(opt.dir);

    BuilderStats st;
    st.accepted_per_alpha.assign(opt.sweep.alpha_grid.size(), 0);
    json entries = json::array();
    long start_attempt = 0;

    std::filesystem::path manifest_path = opt.dir / "manifest.json";
    if (opt.resume && std::filesystem::exists(manifest_path)) {
        json m = load_json(manifest_path);
        require(m.at("schema") == "unaligned-v1", "builder: unknown manifest schema");
        require(m.at("seed") == opt.seed, "builder: resume with a different seed");
        require(m.at("sweep") == json(opt.sweep), "builder: resume with a different sweep config");
        entries = m.at("samples");
        st.attempts = m.at("attempts").get<long>();
        st.accepted = static_cast<long>(entries.size());
        st.rejected = st.attempts - st.accepted;
        st.accepted_per_alpha = m.at("accepted_per_alpha").get<std::vector<long>>();
        start_attempt = st.attempts;
    }

    const int h = model.cfg.img, w = model.cfg.img;
    long max_attempts =
        static_cast<long>(opt.sweep.max_attempt_factor) * std::max(opt.n_target, 1);

    for (long i = start_attempt; st.accepted < opt.n_target && i < max_attempts; ++i) {
        Rng rng(substream(opt.seed, "builder", static_cast<uint64_t>(i)));
        int cls_src = static_cast<int>(rng.below(static_cast<uint64_t>(kNumShapeClasses)));
        ShapeSpec spec = sample_spec(cls_src, rng, h, w);
        Render r = render(spec, h, w);
        int cls_alt = sample_alternate_class(cls_src, hier, rng);
        ConditionKind kind = opt.kinds[static_cast<size_t>(i) % opt.kinds.size()];
        Tensor<T> cond = extract_condition<T>(r.img, r.sil, kind);

        auto cands = sweep_generate(model, sched, cond, r.sil, cls_alt, opt.sweep,
                                    substream(opt.seed, "sweep", static_cast<uint64_t>(i)));
        auto picked = auto_filter(cands, oracle, r.img, r.sil, cls_alt, opt.sweep);
        ++st.attempts;
        if (!picked) {
            ++st.rejected;
            continue;
        }

        picked->source_cls = cls_src;
        picked->kind = kind;
        picked->c_rough = std::move(cond);
        std::string id = detail::builder_sample_id(st.accepted);
        save_unaligned_sample(opt.dir / id, *picked);
        for (size_t gi = 0; gi < opt.sweep.alpha_grid.size(); ++gi)
            if (opt.sweep.alpha_grid[gi] == picked->chosen_alpha) ++st.accepted_per_alpha[gi];
        entries.push_back({{"id", id},
                           {"candidate_index", i},
                           {"source_class", shape_class_name(cls_src)},
                           {"alt_class", shape_class_name(cls_alt)},
                           {"kind", condition_name(kind)},
                           {"alpha", picked->chosen_alpha},
                           {"cls_confidence", picked->cls_confidence},
                           {"bg_change", picked->bg_change}});
        ++st.accepted;
        if (log && st.accepted % 50 == 0)
            (*log) << "builder: " << st.accepted << "/" << opt.n_target << " accepted after "
                   << st.attempts << " attempts\n";
    }

    st.reached_target = st.accepted >= opt.n_target;
    if (!st.reached_target && log)
        (*log) << "builder: WARNING target " << opt.n_target << " unreachable, stopped at "
               << st.accepted << " after " << st.attempts << " attempts\n";

    json manifest = {{"schema", "unaligned-v1"},
                     {"status", st.reached_target ? "complete" : "partial"},
                     {"count", st.accepted},
                     {"attempts", st.attempts},
                     {"rejected", st.rejected},
                     {"accepted_per_alpha", st.accepted_per_alpha},
                     {"seed", opt.seed},
                     {"sweep", opt.sweep},
                     {"samples", entries}};
    save_json(manifest_path, manifest);
    return st;
}

// ---------------------------------------------------------------------------
// loading for predictor training

struct UnalignedRecord {
    std::string id;
    int source_cls = 0;
    int cls_alt = 0;
    ConditionKind kind = ConditionKind::silhouette;
    float alpha = 1.0f;
    double cls_confidence = 0.0;
    double bg_change = 0.0;
    ImageU8 condition;  // single channel
    ImageU8 target;     // rgb
    MaskPair masks;
};

struct UnalignedSet {
    json manifest;
    std::vector<UnalignedRecord> samples;
};

inline UnalignedSet load_unaligned(const std::filesystem::path& dir, long limit = -1) {
    UnalignedSet set;
    set.manifest = load_json(dir / "manifest.json");
    require(set.manifest.at("schema") == "unaligned-v1", "load_unaligned: unknown schema");
    const json& entries = set.manifest.at("samples");
    long n = static_cast<long>(entries.size());
    if (limit >= 0) n = std::min(n, limit);
    set.samples.reserve(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) {
        const json& e = entries[static_cast<size_t>(i)];
        UnalignedRecord rec;
        rec.id = e.at("id");
        rec.source_cls = shape_class_from_name(e.at("source_class"));
        rec.cls_alt = shape_class_from_name(e.at("alt_class"));
        rec.kind = condition_from_name(e.at("kind"));
        rec.alpha = e.at("alpha");
        rec.cls_confidence = e.at("cls_confidence");
        rec.bg_change = e.at("bg_change");
        std::filesystem::path sd = dir / rec.id;
        rec.condition = read_pnm(sd / "condition.pgm");
        rec.target = read_pnm(sd / "target.ppm");
        rec.masks.m_init = read_pbm(sd / "m_init.pbm");
        rec.masks.m_alt = read_pbm(sd / "m_alt.pbm");
        rec.masks.m_conflict = read_pbm(sd / "m_conflict.pbm");
        rec.masks.m_bg = read_pbm(sd / "m_bg.pbm");
        set.samples.push_back(std::move(rec));
    }
    return set;
}

}  // namespace adascale
