#ifndef SAHI_DETECTOR_HPP
#define SAHI_DETECTOR_HPP

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sahi/geometry.hpp"
#include "sahi/raster.hpp"
#include "sahi/tiling.hpp"

namespace sahi {

enum class InferenceMode { full, sliced, refinement };

struct Annotation {
    int class_id = 0;
    BBox bbox;
};

struct Provenance {
    InferenceMode mode = InferenceMode::full;
    int slice_index = -1;  // -1 = whole image
    bool refined = false;
    EdgeSet edge_flags = 0;
};

struct Detection {
    BBox bbox;  // global px once remapped; patch-local straight out of a backend
    int class_id = 0;
    double score = 0.0;
    Provenance provenance;
};

// Ground-truth context handed to oracle backends; adapters ignore it.
struct DetectContext {
    std::vector<Annotation> const* truths = nullptr;
    int num_classes = 1;
    std::string image_id;
};

// Stateless, deterministic per (patch, transform, config). Returns
// patch-local detections.
class DetectorBackend {
public:
    virtual ~DetectorBackend() = default;
    virtual std::vector<Detection> detect(GrayImage const& patch,
                                          FrameTransform const& transform,
                                          DetectContext const& ctx) = 0;
};

// Applies the slice transform to each detection, clamps to image bounds and
// attaches provenance plus interior-edge contact flags.
inline std::vector<Detection> remap_to_global(std::vector<Detection> local,
                                              SliceRegion const& region,
                                              int image_w, int image_h,
                                              double edge_epsilon = 1.0) {
    FrameTransform t = region.transform();
    std::vector<Detection> out;
    out.reserve(local.size());
    for (auto& d : local) {
        BBox g = to_global(t, d.bbox);
        double x0 = std::max(0.0, g.x_min);
        double y0 = std::max(0.0, g.y_min);
        double x1 = std::min(static_cast<double>(image_w), g.x_max);
        double y1 = std::min(static_cast<double>(image_h), g.y_max);
        if (x0 >= x1 || y0 >= y1) continue;  // clamped away entirely
        d.bbox = BBox(x0, y0, x1, y1);
        d.provenance.mode = InferenceMode::sliced;
        d.provenance.slice_index = region.index;
        d.provenance.edge_flags = edge_contact(region, d.bbox, edge_epsilon);
        out.push_back(d);
    }
    return out;
}

}  // namespace sahi

#endif  // SAHI_DETECTOR_HPP
