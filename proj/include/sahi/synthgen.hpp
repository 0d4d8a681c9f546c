#ifndef SAHI_SYNTHGEN_HPP
#define SAHI_SYNTHGEN_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "sahi/datasets.hpp"
#include "sahi/raster.hpp"
#include "sahi/rng.hpp"
#include "sahi/tiling.hpp"

namespace sahi {

enum class ScenePattern { line_space, hex_array };

// How a defect perturbs the underlying pattern inside its box.
enum class DefectStyle {
    erase,  // pattern removed entirely (gap / missing hole analog)
    faint,  // pattern weakened (pgap / partially closed analog)
    fill,   // box filled dark (bridge / collapse / closed patch analog)
};

// Where a defect may land relative to the slice grid used at inference.
enum class Placement {
    unconstrained,
    avoid_slice_edges,       // fully inside exactly one slice
    straddle_vertical_edge,  // crosses an interior right slice edge at a
                             // controlled visible fraction
};

struct DefectClassSpec {
    int class_id = 0;
    int count = 0;
    int min_width = 4, max_width = 8;
    int min_height = 4, max_height = 8;
    DefectStyle style = DefectStyle::erase;
    Placement placement = Placement::unconstrained;
    double straddle_fraction = 0.4;  // visible fraction on the left slice
};

struct SceneSpec {
    ScenePattern pattern = ScenePattern::line_space;
    int width = 1024;
    int height = 1024;
    int pitch = 16;
    int feature_width = 6;
    std::vector<DefectClassSpec> defects;
    int noise_amplitude = 0;  // additive uniform, seeded
    std::uint64_t seed = 0;
    int min_separation = 8;
    // Slice grid the placement policies are computed against.
    int slice_size = 128;
    double overlap_ratio = 0.1;
};

struct AnnotatedImage {
    GrayImage raster;
    std::vector<Annotation> annotations;
};

namespace detail {

constexpr std::uint8_t kBackground = 200;
constexpr std::uint8_t kFeature = 60;
constexpr std::uint8_t kFaint = 150;

struct IntBox {
    int x0, y0, x1, y1;
};

inline bool separated(IntBox const& a, IntBox const& b, int sep) {
    return a.x1 + sep <= b.x0 || b.x1 + sep <= a.x0 || a.y1 + sep <= b.y0 ||
           b.y1 + sep <= a.y0;
}

// Interval of valid origin coordinates that keeps a box of `size` strictly
// inside slice `k` of the axis and outside every neighbor's overlap band.
inline bool axis_safe_interval(std::vector<int> const& starts, int slice, int dim,
                               int k, int size, int& lo, int& hi) {
    int start = starts[k];
    int ov_left = 0, ov_right = 0;
    if (k > 0) ov_left = starts[k - 1] + std::min(slice, dim) - start;
    if (k + 1 < static_cast<int>(starts.size()))
        ov_right = start + std::min(slice, dim) - starts[k + 1];
    lo = start + std::max(0, ov_left) + 1;
    hi = start + std::min(slice, dim) - std::max(0, ov_right) - 1 - size;
    return lo <= hi;
}

inline int place_axis(SplitMix64& rng, std::vector<int> const& starts, int slice,
                      int dim, int size) {
    for (int attempt = 0; attempt < 32; ++attempt) {
        int k = static_cast<int>(rng.next() % starts.size());
        int lo, hi;
        if (axis_safe_interval(starts, slice, dim, k, size, lo, hi))
            return static_cast<int>(rng.uniform_int(lo, hi));
    }
    return -1;
}

}  // namespace detail

inline void render_defect(GrayImage& img, detail::IntBox const& b,
                          DefectStyle style, ScenePattern pattern, int pitch,
                          int feature_width) {
    for (int y = b.y0; y < b.y1; ++y) {
        for (int x = b.x0; x < b.x1; ++x) {
            bool on_feature;
            if (pattern == ScenePattern::line_space) {
                on_feature = (x % pitch) < feature_width;
            } else {
                int row = y / pitch;
                int cx = (row % 2) ? pitch / 2 : 0;
                int dx = (x + cx) % pitch - pitch / 2;
                int dy = y % pitch - pitch / 2;
                on_feature = dx * dx + dy * dy <= (feature_width / 2) * (feature_width / 2);
            }
            switch (style) {
                case DefectStyle::erase:
                    if (on_feature) img.set(x, y, detail::kBackground);
                    break;
                case DefectStyle::faint:
                    if (on_feature) img.set(x, y, detail::kFaint);
                    break;
                case DefectStyle::fill:
                    img.set(x, y, detail::kFeature);
                    break;
            }
        }
    }
}

// Deterministic per (spec, seed): periodic base pattern, class-specific
// perturbations with tight ground-truth boxes, optional seeded noise.
inline AnnotatedImage generate_scene(SceneSpec const& spec) {
    if (spec.width < 1 || spec.height < 1)
        throw std::invalid_argument("generate_scene: bad dimensions");
    if (spec.pitch < 2 || spec.feature_width < 1 || spec.feature_width >= spec.pitch)
        throw std::invalid_argument("generate_scene: bad pitch/feature_width");

    GrayImage img(spec.width, spec.height, detail::kBackground);
    if (spec.pattern == ScenePattern::line_space) {
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x)
                if ((x % spec.pitch) < spec.feature_width) img.set(x, y, detail::kFeature);
    } else {
        for (int y = 0; y < spec.height; ++y) {
            int row = y / spec.pitch;
            int cx = (row % 2) ? spec.pitch / 2 : 0;
            int dy = y % spec.pitch - spec.pitch / 2;
            for (int x = 0; x < spec.width; ++x) {
                int dx = (x + cx) % spec.pitch - spec.pitch / 2;
                if (dx * dx + dy * dy <=
                    (spec.feature_width / 2) * (spec.feature_width / 2))
                    img.set(x, y, detail::kFeature);
            }
        }
    }

    auto xs = detail::axis_starts(spec.width, spec.slice_size, spec.overlap_ratio);
    auto ys = detail::axis_starts(spec.height, spec.slice_size, spec.overlap_ratio);

    SplitMix64 rng(spec.seed * 0x9e3779b97f4a7c15ULL + 1);
    std::vector<detail::IntBox> placed;
    std::vector<Annotation> annotations;

    for (auto const& cls : spec.defects) {
        for (int n = 0; n < cls.count; ++n) {
            bool ok = false;
            for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
                int w = static_cast<int>(rng.uniform_int(cls.min_width, cls.max_width));
                int h = static_cast<int>(rng.uniform_int(cls.min_height, cls.max_height));
                int x0 = -1, y0 = -1;
                switch (cls.placement) {
                    case Placement::unconstrained:
                        x0 = static_cast<int>(rng.uniform_int(1, spec.width - w - 1));
                        y0 = static_cast<int>(rng.uniform_int(1, spec.height - h - 1));
                        break;
                    case Placement::avoid_slice_edges:
                        x0 = detail::place_axis(rng, xs, spec.slice_size, spec.width, w);
                        y0 = detail::place_axis(rng, ys, spec.slice_size, spec.height, h);
                        break;
                    case Placement::straddle_vertical_edge: {
                        // x spans the right edge of slice k so that exactly
                        // straddle_fraction of the width is visible in k while
                        // the whole box is contained in slice k+1.
                        if (xs.size() < 2) break;
                        int k = static_cast<int>(rng.next() % (xs.size() - 1));
                        int edge = xs[k] + spec.slice_size;
                        if (edge >= spec.width) break;
                        int cut = static_cast<int>(std::lround(w * cls.straddle_fraction));
                        x0 = edge - cut;
                        if (x0 < xs[k + 1] + 2 || x0 + w > xs[k + 1] + spec.slice_size - 2)
                            break;
                        y0 = detail::place_axis(rng, ys, spec.slice_size, spec.height, h);
                        break;
                    }
                }
                if (x0 < 0 || y0 < 0) continue;
                detail::IntBox box{x0, y0, x0 + w, y0 + h};
                bool clear = true;
                for (auto const& p : placed)
                    if (!detail::separated(box, p, spec.min_separation)) {
                        clear = false;
                        break;
                    }
                if (!clear) continue;
                placed.push_back(box);
                render_defect(img, box, cls.style, spec.pattern, spec.pitch,
                              spec.feature_width);
                annotations.push_back(
                    {cls.class_id, BBox(box.x0, box.y0, box.x1, box.y1)});
                ok = true;
            }
            if (!ok)
                throw std::runtime_error(
                    "generate_scene: infeasible packing for class " +
                    std::to_string(cls.class_id));
        }
    }

    if (spec.noise_amplitude > 0) {
        SplitMix64 noise(spec.seed ^ 0xda3e39cb94b95bdbULL);
        for (auto& px : img.pixels) {
            int v = px + static_cast<int>(noise.uniform_int(-spec.noise_amplitude,
                                                            spec.noise_amplitude));
            px = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
        }
    }
    return {std::move(img), std::move(annotations)};
}

struct SuiteSpec {
    int num_scenes = 1;
    std::uint64_t base_seed = 0;
    SceneSpec scene;
    std::vector<ClassInfo> classes;
};

// N scenes with per-scene derived seeds; rasters plus manifest written to
// out_dir.
inline DatasetManifest generate_suite(SuiteSpec const& suite,
                                      std::string const& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    DatasetManifest manifest;
    manifest.classes = suite.classes;
    for (int i = 0; i < suite.num_scenes; ++i) {
        SceneSpec spec = suite.scene;
        spec.seed = suite.base_seed + static_cast<std::uint64_t>(i);
        AnnotatedImage scene = generate_scene(spec);
        char name[32];
        std::snprintf(name, sizeof name, "scene_%04d", i);
        ImageEntry entry;
        entry.image_id = name;
        entry.path = std::string(name) + ".pgm";
        entry.width = scene.raster.width;
        entry.height = scene.raster.height;
        entry.annotations = std::move(scene.annotations);
        write_image(scene.raster, (fs::path(out_dir) / entry.path).string());
        manifest.images.push_back(std::move(entry));
    }
    save_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
    return manifest;
}

}  // namespace sahi

#endif  // SAHI_SYNTHGEN_HPP
