#ifndef SAHI_FUSION_HPP
#define SAHI_FUSION_HPP

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "sahi/detector.hpp"

namespace sahi {

enum class MatchMetric { iou, ios };

struct MergeConfig {
    double confidence_threshold = 0.25;
    MatchMetric match_metric = MatchMetric::iou;
    double match_threshold = 0.5;
    bool class_agnostic = false;

    void validate() const {
        if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0))
            throw std::invalid_argument("MergeConfig: confidence_threshold out of [0,1]");
        if (!(match_threshold >= 0.0 && match_threshold <= 1.0))
            throw std::invalid_argument("MergeConfig: match_threshold out of [0,1]");
    }
};

inline std::vector<Detection> threshold(std::vector<Detection> const& dets,
                                        double confidence_threshold) {
    std::vector<Detection> out;
    out.reserve(dets.size());
    for (auto const& d : dets)
        if (d.score >= confidence_threshold) out.push_back(d);
    return out;
}

// Canonical order used everywhere a detection list must be reproducible:
// score desc, then x_min, y_min, class_id asc.
inline bool canonical_less(Detection const& a, Detection const& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.bbox.x_min != b.bbox.x_min) return a.bbox.x_min < b.bbox.x_min;
    if (a.bbox.y_min != b.bbox.y_min) return a.bbox.y_min < b.bbox.y_min;
    return a.class_id < b.class_id;
}

inline void canonical_sort(std::vector<Detection>& dets) {
    std::stable_sort(dets.begin(), dets.end(), canonical_less);
}

// Greedy NMS. Survivors are actual inputs (no averaging); a kept box absorbs
// the edge flags of everything it suppresses.
inline std::vector<Detection> merge(std::vector<Detection> dets,
                                    MergeConfig const& cfg) {
    cfg.validate();
    canonical_sort(dets);
    std::vector<Detection> kept;
    for (auto const& d : dets) {
        Detection* suppressor = nullptr;
        for (auto& k : kept) {
            if (!cfg.class_agnostic && k.class_id != d.class_id) continue;
            double m = cfg.match_metric == MatchMetric::iou ? iou(k.bbox, d.bbox)
                                                            : ios(k.bbox, d.bbox);
            if (m > cfg.match_threshold) {
                suppressor = &k;
                break;
            }
        }
        if (suppressor)
            suppressor->provenance.edge_flags |= d.provenance.edge_flags;
        else
            kept.push_back(d);
    }
    return kept;
}

}  // namespace sahi

#endif  // SAHI_FUSION_HPP
