#ifndef SAHI_METRICS_HPP
#define SAHI_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sahi/datasets.hpp"
#include "sahi/detector.hpp"
#include "sahi/fusion.hpp"

namespace sahi {

struct MatchPair {
    int pred_index = -1;
    int truth_index = -1;
    double iou = 0.0;
};

// One-to-one per-image assignment at a fixed IoU threshold.
struct MatchSet {
    std::vector<MatchPair> matches;
    std::vector<int> unmatched_predictions;  // FP
    std::vector<int> unmatched_truths;       // FN
};

// Greedy by descending score (canonical tie-break); each prediction takes the
// highest-IoU unmatched same-class truth at or above the threshold, truth
// ties broken by (x_min, y_min).
inline MatchSet match(std::vector<Detection> const& preds,
                      std::vector<Annotation> const& truths,
                      double iou_threshold = 0.5) {
    std::vector<int> order(preds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return canonical_less(preds[a], preds[b]);
    });

    MatchSet out;
    std::vector<bool> truth_used(truths.size(), false);
    for (int pi : order) {
        int best = -1;
        double best_iou = 0.0;
        for (std::size_t ti = 0; ti < truths.size(); ++ti) {
            if (truth_used[ti] || truths[ti].class_id != preds[pi].class_id) continue;
            double v = iou(preds[pi].bbox, truths[ti].bbox);
            if (v < iou_threshold) continue;
            bool better = v > best_iou;
            if (v == best_iou && best >= 0) {
                auto const& cur = truths[best].bbox;
                auto const& cand = truths[ti].bbox;
                better = cand.x_min < cur.x_min ||
                         (cand.x_min == cur.x_min && cand.y_min < cur.y_min);
            }
            if (best < 0 || better) {
                best = static_cast<int>(ti);
                best_iou = v;
            }
        }
        if (best >= 0) {
            truth_used[best] = true;
            out.matches.push_back({pi, best, best_iou});
        } else {
            out.unmatched_predictions.push_back(pi);
        }
    }
    for (std::size_t ti = 0; ti < truths.size(); ++ti)
        if (!truth_used[ti]) out.unmatched_truths.push_back(static_cast<int>(ti));
    return out;
}

// Eq. semantics: P = TP/(TP+FP), defined 1 when both are zero;
// R = TP/total_gt, defined 1 when total_gt = 0 and TP = 0.
inline std::pair<double, double> precision_recall(long cum_tp, long cum_fp,
                                                  long total_gt) {
    double p = (cum_tp + cum_fp == 0)
                   ? 1.0
                   : static_cast<double>(cum_tp) / static_cast<double>(cum_tp + cum_fp);
    double r = (total_gt == 0) ? (cum_tp == 0 ? 1.0 : 0.0)
                               : static_cast<double>(cum_tp) / static_cast<double>(total_gt);
    return {p, r};
}

struct PRPoint {
    double recall = 0.0;
    double precision = 0.0;
};

// All-point-interpolated area under the PR curve from an ordered TP/FP
// verdict sequence (descending score already applied).
inline double ap_from_verdicts(std::vector<bool> const& is_tp, long total_gt,
                               std::vector<PRPoint>* curve = nullptr) {
    if (total_gt == 0) return is_tp.empty() ? 1.0 : 0.0;
    long tp = 0, fp = 0;
    std::vector<PRPoint> pts;
    pts.reserve(is_tp.size());
    for (bool v : is_tp) {
        if (v) ++tp; else ++fp;
        auto [p, r] = precision_recall(tp, fp, total_gt);
        pts.push_back({r, p});
    }
    if (curve) *curve = pts;
    // Interpolated precision at recall r = max precision over points with
    // recall >= r; integrate over recall steps.
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double max_p = 0.0;
        for (std::size_t k = i; k < pts.size(); ++k) max_p = std::max(max_p, pts[k].precision);
        if (pts[i].recall > prev_recall) {
            ap += (pts[i].recall - prev_recall) * max_p;
            prev_recall = pts[i].recall;
        }
    }
    return ap;
}

struct ClassReport {
    int class_id = 0;
    std::string class_name;
    long tp = 0;
    long fp = 0;
    long uncertain = 0;
    long total_gt = 0;
    double precision = 1.0;
    double recall = 1.0;
    std::optional<double> ap50;
    std::optional<double> ar50;
    std::optional<double> fp_reduction;  // filled by refinement comparison
    bool gt_undercount = false;
    std::vector<PRPoint> curve;
};

struct EvalReport {
    std::string gt_source;
    double iou_threshold = 0.5;
    double confidence_threshold = 0.25;
    std::vector<ClassReport> per_class;

    double map50() const {
        double sum = 0.0;
        int n = 0;
        for (auto const& c : per_class)
            if (c.ap50) { sum += *c.ap50; ++n; }
        return n ? sum / n : 0.0;
    }
    double mar50() const {
        double sum = 0.0;
        int n = 0;
        for (auto const& c : per_class)
            if (c.ar50) { sum += *c.ar50; ++n; }
        return n ? sum / n : 0.0;
    }
};

using TruthMap = std::map<std::string, std::vector<Annotation>>;

inline TruthMap truths_from_manifest(DatasetManifest const& m) {
    TruthMap t;
    for (auto const& im : m.images) t[im.image_id] = im.annotations;
    return t;
}

// A prediction file reinterpreted as ground truth (scores dropped).
inline TruthMap truths_from_predictions(PredictionFile const& p) {
    TruthMap t;
    for (auto const& im : p.images) {
        auto& anns = t[im.image_id];
        for (auto const& d : im.detections) anns.push_back({d.class_id, d.bbox});
    }
    return t;
}

// Per-class TP/FP report with AP50/AR50 against an annotation source.
inline EvalReport evaluate(PredictionFile const& predictions, TruthMap const& truths,
                           std::vector<ClassInfo> const& classes,
                           std::string const& gt_source, double conf = 0.25,
                           double iou_threshold = 0.5) {
    EvalReport report;
    report.gt_source = gt_source;
    report.iou_threshold = iou_threshold;
    report.confidence_threshold = conf;

    struct SweepItem {
        double score;
        bool is_tp;
        BBox bbox;
        int class_id;
        std::string image_id;
    };
    std::map<int, std::vector<SweepItem>> sweep;
    std::map<int, long> gt_count;
    std::map<int, long> tp_count, fp_count;

    for (auto const& [image_id, anns] : truths)
        for (auto const& a : anns) ++gt_count[a.class_id];

    for (auto const& im : predictions.images) {
        auto it = truths.find(im.image_id);
        static const std::vector<Annotation> kEmpty;
        auto const& anns = it == truths.end() ? kEmpty : it->second;

        // Threshold-free matching feeds the AP sweep.
        MatchSet full = match(im.detections, anns, iou_threshold);
        std::vector<bool> matched(im.detections.size(), false);
        for (auto const& mp : full.matches) matched[mp.pred_index] = true;
        for (std::size_t i = 0; i < im.detections.size(); ++i) {
            auto const& d = im.detections[i];
            sweep[d.class_id].push_back(
                {d.score, matched[i], d.bbox, d.class_id, im.image_id});
        }

        // Counts use thresholded predictions.
        auto kept = threshold(im.detections, conf);
        MatchSet ms = match(kept, anns, iou_threshold);
        std::vector<bool> tpflag(kept.size(), false);
        for (auto const& mp : ms.matches) tpflag[mp.pred_index] = true;
        for (std::size_t i = 0; i < kept.size(); ++i) {
            if (tpflag[i]) ++tp_count[kept[i].class_id];
            else ++fp_count[kept[i].class_id];
        }
    }

    for (auto const& ci : classes) {
        ClassReport cr;
        cr.class_id = ci.class_id;
        cr.class_name = ci.name;
        cr.total_gt = gt_count.count(ci.class_id) ? gt_count[ci.class_id] : 0;
        cr.tp = tp_count.count(ci.class_id) ? tp_count[ci.class_id] : 0;
        cr.fp = fp_count.count(ci.class_id) ? fp_count[ci.class_id] : 0;
        auto [p, r] = precision_recall(cr.tp, cr.fp, cr.total_gt);
        cr.precision = p;
        cr.recall = r;

        auto& items = sweep[ci.class_id];
        std::stable_sort(items.begin(), items.end(), [](auto const& a, auto const& b) {
            if (a.score != b.score) return a.score > b.score;
            if (a.bbox.x_min != b.bbox.x_min) return a.bbox.x_min < b.bbox.x_min;
            if (a.bbox.y_min != b.bbox.y_min) return a.bbox.y_min < b.bbox.y_min;
            return a.image_id < b.image_id;
        });
        std::vector<bool> verdicts;
        verdicts.reserve(items.size());
        for (auto const& s : items) verdicts.push_back(s.is_tp);
        cr.ap50 = ap_from_verdicts(verdicts, cr.total_gt, &cr.curve);
        cr.ar50 = cr.recall;  // recall at the confidence threshold
        report.per_class.push_back(std::move(cr));
    }
    return report;
}

inline EvalReport evaluate(PredictionFile const& predictions,
                           DatasetManifest const& manifest,
                           std::string const& gt_source = "human",
                           double conf = 0.25, double iou_threshold = 0.5) {
    return evaluate(predictions, truths_from_manifest(manifest), manifest.classes,
                    gt_source, conf, iou_threshold);
}

// Counts come straight from human verdicts; IoU matching is bypassed.
// When adjudicated TP exceeds the annotated total the report flags a ground
// truth undercount instead of emitting recall > 1.
inline EvalReport evaluate_adjudicated(PredictionFile const& predictions,
                                       AdjudicationFile const& adjudication,
                                       DatasetManifest const& manifest,
                                       double conf = 0.25) {
    EvalReport report;
    report.gt_source = "adjudication";
    report.confidence_threshold = conf;
    std::map<int, long> tp_count, fp_count, uncertain_count, gt_count;
    for (auto const& im : manifest.images)
        for (auto const& a : im.annotations) ++gt_count[a.class_id];
    for (auto const& row : adjudication.rows) {
        ImagePredictions const* im = nullptr;
        for (auto const& p : predictions.images)
            if (p.image_id == row.image_id) im = &p;
        if (!im || row.prediction_index >= static_cast<int>(im->detections.size()))
            throw std::runtime_error("adjudication references unknown prediction " +
                                     row.image_id);
        int cls = im->detections[row.prediction_index].class_id;
        switch (row.verdict) {
            case AdjVerdict::tp: ++tp_count[cls]; break;
            case AdjVerdict::fp: ++fp_count[cls]; break;
            case AdjVerdict::uncertain: ++uncertain_count[cls]; break;
        }
    }
    for (auto const& ci : manifest.classes) {
        ClassReport cr;
        cr.class_id = ci.class_id;
        cr.class_name = ci.name;
        cr.tp = tp_count[ci.class_id];
        cr.fp = fp_count[ci.class_id];
        cr.uncertain = uncertain_count[ci.class_id];
        cr.total_gt = gt_count[ci.class_id];
        auto [p, r] = precision_recall(cr.tp, cr.fp, cr.total_gt);
        cr.precision = p;
        if (cr.tp > cr.total_gt) {
            cr.gt_undercount = true;
            cr.recall = 1.0;
        } else {
            cr.recall = r;
        }
        report.per_class.push_back(std::move(cr));
    }
    return report;
}

// Per-class FP reduction percentage between two reports over the same data,
// absent when the baseline FP count is already zero.
inline void attach_fp_reduction(EvalReport const& before, EvalReport& after) {
    for (auto& ca : after.per_class)
        for (auto const& cb : before.per_class)
            if (cb.class_id == ca.class_id && cb.fp > 0)
                ca.fp_reduction = static_cast<double>(cb.fp - ca.fp) /
                                  static_cast<double>(cb.fp);
}

struct GtSwapCell {
    int class_id = 0;
    double ap50 = 0.0;
    double ar50 = 0.0;
};

struct GtSwapRow {
    std::string mode;
    std::string source;
    std::vector<GtSwapCell> per_class;
};

// One row per (inference mode, ground-truth source) with per-class AP50/AR50.
inline std::vector<GtSwapRow> gt_swap_comparison(
    std::vector<std::pair<std::string, PredictionFile const*>> const& modes,
    std::vector<std::pair<std::string, TruthMap>> const& sources,
    std::vector<ClassInfo> const& classes, double conf = 0.25,
    double iou_threshold = 0.5) {
    std::vector<GtSwapRow> rows;
    for (auto const& [mode_name, preds] : modes) {
        for (auto const& [source_name, truths] : sources) {
            GtSwapRow row;
            row.mode = mode_name;
            row.source = source_name;
            EvalReport rep =
                evaluate(*preds, truths, classes, source_name, conf, iou_threshold);
            for (auto const& c : rep.per_class)
                row.per_class.push_back({c.class_id, c.ap50.value_or(0.0),
                                         c.ar50.value_or(0.0)});
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Flat CSV: class,gt_source,tp,fp,precision,recall,ap50,ar50

namespace detail {
inline std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}
}  // namespace detail

inline std::string report_csv(EvalReport const& r) {
    std::ostringstream out;
    out << "class,gt_source,tp,fp,precision,recall,ap50,ar50\n";
    for (auto const& c : r.per_class) {
        out << c.class_name << "," << r.gt_source << "," << c.tp << "," << c.fp << ","
            << detail::fmt6(c.precision) << "," << detail::fmt6(c.recall) << ","
            << (c.ap50 ? detail::fmt6(*c.ap50) : std::string()) << ","
            << (c.ar50 ? detail::fmt6(*c.ar50) : std::string()) << "\n";
    }
    return out.str();
}

// Structured report carrying everything the flat CSV cannot: uncertain
// counts, the refinement FP-reduction percentage, and GT-undercount flags.
inline json report_to_json(EvalReport const& r) {
    json j;
    j["gt_source"] = r.gt_source;
    j["iou_threshold"] = detail::round6(r.iou_threshold);
    j["confidence_threshold"] = detail::round6(r.confidence_threshold);
    j["per_class"] = json::array();
    for (auto const& c : r.per_class) {
        json jc;
        jc["class_id"] = c.class_id;
        jc["class_name"] = c.class_name;
        jc["tp"] = c.tp;
        jc["fp"] = c.fp;
        jc["uncertain"] = c.uncertain;
        jc["total_gt"] = c.total_gt;
        jc["precision"] = detail::round6(c.precision);
        jc["recall"] = detail::round6(c.recall);
        if (c.ap50) jc["ap50"] = detail::round6(*c.ap50);
        if (c.ar50) jc["ar50"] = detail::round6(*c.ar50);
        if (c.fp_reduction) jc["fp_reduction"] = detail::round6(*c.fp_reduction);
        jc["gt_undercount"] = c.gt_undercount;
        j["per_class"].push_back(std::move(jc));
    }
    j["map50"] = detail::round6(r.map50());
    j["mar50"] = detail::round6(r.mar50());
    return j;
}

inline std::string curve_csv(EvalReport const& r) {
    std::ostringstream out;
    out << "class,recall,precision\n";
    for (auto const& c : r.per_class)
        for (auto const& p : c.curve)
            out << c.class_name << "," << detail::fmt6(p.recall) << ","
                << detail::fmt6(p.precision) << "\n";
    return out.str();
}

inline std::string gt_swap_csv(std::vector<GtSwapRow> const& rows,
                               std::vector<ClassInfo> const& classes) {
    std::ostringstream out;
    out << "mode,gt_source";
    for (auto const& c : classes) out << "," << c.abbreviation << "_ap50"
                                      << "," << c.abbreviation << "_ar50";
    out << "\n";
    for (auto const& row : rows) {
        out << row.mode << "," << row.source;
        for (auto const& c : row.per_class)
            out << "," << detail::fmt6(c.ap50) << "," << detail::fmt6(c.ar50);
        out << "\n";
    }
    return out.str();
}

}  // namespace sahi

#endif  // SAHI_METRICS_HPP
