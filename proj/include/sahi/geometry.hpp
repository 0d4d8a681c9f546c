#ifndef SAHI_GEOMETRY_HPP
#define SAHI_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace sahi {

// Axis-aligned box, closed for containment/IoU math, continuous area.
// Degenerate (zero width/height) boxes are rejected at construction.
struct BBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    BBox() = default;
    BBox(double x0, double y0, double x1, double y1)
        : x_min(x0), y_min(y0), x_max(x1), y_max(y1) {
        if (!std::isfinite(x_min) || !std::isfinite(y_min) ||
            !std::isfinite(x_max) || !std::isfinite(y_max))
            throw std::invalid_argument("BBox: non-finite coordinate");
        if (x_min >= x_max || y_min >= y_max)
            throw std::invalid_argument("BBox: degenerate extent");
    }

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double center_x() const { return 0.5 * (x_min + x_max); }
    double center_y() const { return 0.5 * (y_min + y_max); }

    bool operator==(BBox const& o) const {
        return x_min == o.x_min && y_min == o.y_min &&
               x_max == o.x_max && y_max == o.y_max;
    }
};

inline double area(BBox const& b) { return b.width() * b.height(); }

inline double intersection_area(BBox const& a, BBox const& b) {
    double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (w <= 0.0 || h <= 0.0) return 0.0;
    return w * h;
}

inline std::optional<BBox> intersect(BBox const& a, BBox const& b) {
    double x0 = std::max(a.x_min, b.x_min);
    double y0 = std::max(a.y_min, b.y_min);
    double x1 = std::min(a.x_max, b.x_max);
    double y1 = std::min(a.y_max, b.y_max);
    if (x0 >= x1 || y0 >= y1) return std::nullopt;
    return BBox(x0, y0, x1, y1);
}

inline double iou(BBox const& a, BBox const& b) {
    double inter = intersection_area(a, b);
    if (inter <= 0.0) return 0.0;
    return inter / (area(a) + area(b) - inter);
}

// Intersection over the smaller box's area. Always >= iou.
inline double ios(BBox const& a, BBox const& b) {
    double inter = intersection_area(a, b);
    if (inter <= 0.0) return 0.0;
    return inter / std::min(area(a), area(b));
}

// Boundary-inclusive containment.
inline bool contains(BBox const& outer, BBox const& inner) {
    return inner.x_min >= outer.x_min && inner.y_min >= outer.y_min &&
           inner.x_max <= outer.x_max && inner.y_max <= outer.y_max;
}

// Maps slice-local coordinates to global and back.
// scale = local px per global px.
struct FrameTransform {
    double origin_x = 0.0;
    double origin_y = 0.0;
    double scale = 1.0;

    FrameTransform() = default;
    FrameTransform(double ox, double oy, double s)
        : origin_x(ox), origin_y(oy), scale(s) {
        if (!(scale > 0.0) || !std::isfinite(scale))
            throw std::invalid_argument("FrameTransform: scale must be > 0");
    }
};

inline BBox to_global(FrameTransform const& t, BBox const& local) {
    return BBox(t.origin_x + local.x_min / t.scale,
                t.origin_y + local.y_min / t.scale,
                t.origin_x + local.x_max / t.scale,
                t.origin_y + local.y_max / t.scale);
}

inline BBox to_local(FrameTransform const& t, BBox const& global) {
    return BBox((global.x_min - t.origin_x) * t.scale,
                (global.y_min - t.origin_y) * t.scale,
                (global.x_max - t.origin_x) * t.scale,
                (global.y_max - t.origin_y) * t.scale);
}

}  // namespace sahi

#endif  // SAHI_GEOMETRY_HPP
