#ifndef SAHI_REFINEMENT_HPP
#define SAHI_REFINEMENT_HPP

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sahi/detector.hpp"
#include "sahi/fusion.hpp"

namespace sahi {

enum class VotingMode { affirmative, consensus, unanimous };

struct RefinementConfig {
    double iou_accept = 0.5;
    VotingMode voting = VotingMode::affirmative;
    int slice_size = 128;
    double scale = 1.0;
    double margin_ratio = 0.25;  // growth for boxes wider than slice_size

    void validate() const {
        if (!(iou_accept > 0.0 && iou_accept <= 1.0))
            throw std::invalid_argument("RefinementConfig: iou_accept not in (0,1]");
        if (slice_size < 1)
            throw std::invalid_argument("RefinementConfig: slice_size must be >= 1");
        if (!(scale >= 1.0))
            throw std::invalid_argument("RefinementConfig: scale must be >= 1");
        if (margin_ratio < 0.0)
            throw std::invalid_argument("RefinementConfig: margin_ratio < 0");
    }
};

enum class RefineVerdict { kept, discarded, skipped_not_edge, kept_unverifiable };

inline char const* to_string(RefineVerdict v) {
    switch (v) {
        case RefineVerdict::kept: return "kept";
        case RefineVerdict::discarded: return "discarded";
        case RefineVerdict::skipped_not_edge: return "skipped_not_edge";
        case RefineVerdict::kept_unverifiable: return "kept_unverifiable";
    }
    return "?";
}

struct RefinementOutcome {
    Detection original;
    RefineVerdict verdict = RefineVerdict::skipped_not_edge;
    std::vector<bool> confirmations;  // one per detector, empty when skipped
    double best_iou = 0.0;
};

namespace detail {
inline void center_axis(double box_lo, double box_hi, int slice_size,
                        double margin_ratio, int image_dim, int& origin,
                        int& extent) {
    double box_extent = box_hi - box_lo;
    extent = slice_size;
    if (box_extent > slice_size)
        extent = static_cast<int>(std::ceil(box_extent * (1.0 + 2.0 * margin_ratio)));
    // smallest integer-aligned window that can hold the box
    int lo = static_cast<int>(std::floor(box_lo));
    int hi = static_cast<int>(std::ceil(box_hi));
    if (extent < hi - lo) extent = hi - lo;
    if (extent > image_dim) extent = image_dim;
    double center = 0.5 * (box_lo + box_hi);
    origin = static_cast<int>(std::floor(center - extent / 2.0));
    if (origin > lo) origin = lo;
    if (origin + extent < hi) origin = hi - extent;
    if (origin < 0) origin = 0;
    if (origin + extent > image_dim) origin = image_dim - extent;
    // The clamps stay compatible because the box is inside the image.
}
}  // namespace detail

// New slice centered on the prediction, clamped into the image; grows past
// slice_size when the box itself is larger. Always contains the box.
inline SliceRegion build_refinement_slice(BBox const& box,
                                          RefinementConfig const& cfg,
                                          int image_w, int image_h) {
    SliceRegion r;
    r.index = -1;
    r.scale = cfg.scale;
    detail::center_axis(box.x_min, box.x_max, cfg.slice_size, cfg.margin_ratio,
                        image_w, r.origin_x, r.width);
    detail::center_axis(box.y_min, box.y_max, cfg.slice_size, cfg.margin_ratio,
                        image_h, r.origin_y, r.height);
    return r;
}

// Runs every detector on a fresh patch centered on the prediction. A detector
// confirms when some same-class re-detection reaches iou_accept against the
// original box. Backend failures keep the prediction (fail-open).
inline RefinementOutcome verify(
    Detection const& prediction, SliceRegion const& region, GrayImage const& image,
    std::vector<std::shared_ptr<DetectorBackend>> const& detectors,
    RefinementConfig const& cfg, DetectContext const& ctx) {
    RefinementOutcome outcome;
    outcome.original = prediction;

    GrayImage patch = extract_patch(image, region.origin_x, region.origin_y,
                                    region.width, region.height);
    if (cfg.scale != 1.0) patch = upscale(patch, cfg.scale);
    FrameTransform t = region.transform();

    int confirmed = 0;
    for (auto const& det : detectors) {
        bool ok = false;
        try {
            auto local = det->detect(patch, t, ctx);
            for (auto const& d : local) {
                if (d.class_id != prediction.class_id) continue;
                double v = iou(to_global(t, d.bbox), prediction.bbox);
                outcome.best_iou = std::max(outcome.best_iou, v);
                if (v >= cfg.iou_accept) ok = true;
            }
        } catch (std::exception const&) {
            outcome.verdict = RefineVerdict::kept_unverifiable;
            outcome.confirmations.clear();
            return outcome;
        }
        outcome.confirmations.push_back(ok);
        if (ok) ++confirmed;
    }

    int n = static_cast<int>(detectors.size());
    bool keep = false;
    switch (cfg.voting) {
        case VotingMode::affirmative: keep = confirmed >= 1; break;
        case VotingMode::consensus: keep = 2 * confirmed > n; break;
        case VotingMode::unanimous: keep = confirmed == n; break;
    }
    outcome.verdict = keep ? RefineVerdict::kept : RefineVerdict::discarded;
    return outcome;
}

// Single refinement round over merged detections: interior predictions pass
// through, edge-touching ones are re-verified. Output is a subset of input;
// re-detections are evidence only and never emitted.
inline std::pair<std::vector<Detection>, std::vector<RefinementOutcome>> refine(
    std::vector<Detection> const& merged, GrayImage const& image,
    std::vector<std::shared_ptr<DetectorBackend>> const& detectors,
    RefinementConfig const& cfg, DetectContext const& ctx) {
    cfg.validate();
    if (detectors.empty())
        throw std::invalid_argument("refine: need at least one detector");

    std::vector<Detection> out;
    std::vector<RefinementOutcome> outcomes;
    outcomes.reserve(merged.size());
    for (auto const& d : merged) {
        if (d.provenance.edge_flags == 0) {
            RefinementOutcome o;
            o.original = d;
            o.verdict = RefineVerdict::skipped_not_edge;
            outcomes.push_back(o);
            out.push_back(d);
            continue;
        }
        SliceRegion region =
            build_refinement_slice(d.bbox, cfg, image.width, image.height);
        RefinementOutcome o = verify(d, region, image, detectors, cfg, ctx);
        if (o.verdict == RefineVerdict::kept ||
            o.verdict == RefineVerdict::kept_unverifiable) {
            Detection kept = d;
            kept.provenance.refined = true;
            out.push_back(kept);
        }
        outcomes.push_back(std::move(o));
    }
    return {std::move(out), std::move(outcomes)};
}

}  // namespace sahi

#endif  // SAHI_REFINEMENT_HPP
