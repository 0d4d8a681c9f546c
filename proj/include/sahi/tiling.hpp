#ifndef SAHI_TILING_HPP
#define SAHI_TILING_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sahi/geometry.hpp"
#include "sahi/raster.hpp"

namespace sahi {

enum Edge : unsigned {
    kEdgeLeft = 1u,
    kEdgeRight = 2u,
    kEdgeTop = 4u,
    kEdgeBottom = 8u,
};
using EdgeSet = unsigned;

// One tile of the slice grid. interior_edges marks the edges that do NOT
// coincide with the image border.
struct SliceRegion {
    int index = 0;
    int origin_x = 0;
    int origin_y = 0;
    int width = 0;
    int height = 0;
    EdgeSet interior_edges = 0;
    double scale = 1.0;

    BBox global_bounds() const {
        return BBox(origin_x, origin_y, origin_x + width, origin_y + height);
    }
    FrameTransform transform() const {
        return FrameTransform(origin_x, origin_y, scale);
    }
    bool operator==(SliceRegion const& o) const {
        return index == o.index && origin_x == o.origin_x && origin_y == o.origin_y &&
               width == o.width && height == o.height &&
               interior_edges == o.interior_edges && scale == o.scale;
    }
};

struct SlicePlan {
    int image_width = 0;
    int image_height = 0;
    int slice_size = 0;
    double overlap_ratio = 0.0;
    std::vector<SliceRegion> regions;
};

namespace detail {
// Start positions along one axis: advance by step from 0, clamp the last
// start to (dim - size), dedupe. Single full span when dim <= size.
inline std::vector<int> axis_starts(int dim, int size, double overlap_ratio) {
    std::vector<int> starts;
    if (dim <= size) {
        starts.push_back(0);
        return starts;
    }
    int step = static_cast<int>(std::floor(size * (1.0 - overlap_ratio)));
    if (step < 1) step = 1;
    for (int s = 0;; s += step) {
        if (s + size >= dim) {
            int last = dim - size;
            if (starts.empty() || starts.back() != last) starts.push_back(last);
            break;
        }
        starts.push_back(s);
    }
    return starts;
}
}  // namespace detail

inline SlicePlan plan_slices(int image_w, int image_h, int slice_size,
                             double overlap_ratio, double scale = 1.0) {
    if (image_w < 1 || image_h < 1)
        throw std::invalid_argument("plan_slices: non-positive image dimensions");
    if (slice_size < 1)
        throw std::invalid_argument("plan_slices: slice_size must be >= 1");
    if (!(overlap_ratio >= 0.0 && overlap_ratio < 1.0))
        throw std::invalid_argument("plan_slices: overlap_ratio must be in [0,1)");

    SlicePlan plan;
    plan.image_width = image_w;
    plan.image_height = image_h;
    plan.slice_size = slice_size;
    plan.overlap_ratio = overlap_ratio;

    auto xs = detail::axis_starts(image_w, slice_size, overlap_ratio);
    auto ys = detail::axis_starts(image_h, slice_size, overlap_ratio);
    int w = std::min(slice_size, image_w);
    int h = std::min(slice_size, image_h);
    int index = 0;
    for (int y : ys) {
        for (int x : xs) {
            SliceRegion r;
            r.index = index++;
            r.origin_x = x;
            r.origin_y = y;
            r.width = w;
            r.height = h;
            r.scale = scale;
            if (x != 0) r.interior_edges |= kEdgeLeft;
            if (x + w != image_w) r.interior_edges |= kEdgeRight;
            if (y != 0) r.interior_edges |= kEdgeTop;
            if (y + h != image_h) r.interior_edges |= kEdgeBottom;
            plan.regions.push_back(r);
        }
    }
    return plan;
}

// Which interior slice edges the box starts or ends at, within epsilon
// (global px). Image-border edges never count.
inline EdgeSet edge_contact(SliceRegion const& region, BBox const& global_box,
                            double epsilon = 1.0) {
    EdgeSet flags = 0;
    auto near = [epsilon](double a, double b) { return std::abs(a - b) <= epsilon; };
    if ((region.interior_edges & kEdgeLeft) &&
        near(global_box.x_min, region.origin_x))
        flags |= kEdgeLeft;
    if ((region.interior_edges & kEdgeRight) &&
        near(global_box.x_max, region.origin_x + region.width))
        flags |= kEdgeRight;
    if ((region.interior_edges & kEdgeTop) &&
        near(global_box.y_min, region.origin_y))
        flags |= kEdgeTop;
    if ((region.interior_edges & kEdgeBottom) &&
        near(global_box.y_max, region.origin_y + region.height))
        flags |= kEdgeBottom;
    return flags;
}

inline GrayImage extract_patch(GrayImage const& img, SliceRegion const& r) {
    return extract_patch(img, r.origin_x, r.origin_y, r.width, r.height);
}

}  // namespace sahi

#endif  // SAHI_TILING_HPP
