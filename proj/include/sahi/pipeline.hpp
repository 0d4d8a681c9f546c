#ifndef SAHI_PIPELINE_HPP
#define SAHI_PIPELINE_HPP

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "sahi/datasets.hpp"
#include "sahi/fusion.hpp"
#include "sahi/oracle.hpp"
#include "sahi/refinement.hpp"
#include "sahi/subprocess.hpp"
#include "sahi/tiling.hpp"

namespace sahi {

enum class RunMode { full, sahi };
enum class DetectorKind { oracle, adapter };

struct RunConfig {
    std::string manifest;
    DetectorKind detector = DetectorKind::oracle;
    OracleConfig oracle;
    std::string adapter_cmd;
    RunMode mode = RunMode::sahi;
    int slice_size = 128;
    double overlap_ratio = 0.1;
    double scale = 1.0;
    double confidence_threshold = 0.25;
    MergeConfig merge;
    bool refine = false;
    RefinementConfig refinement;
    std::string out_dir;
    std::uint64_t seed = 0;
    int workers = 1;
};

inline json to_json(RunConfig const& c) {
    json j;
    j["manifest"] = c.manifest;
    j["detector"] = c.detector == DetectorKind::oracle ? "oracle" : "adapter";
    j["oracle"] = {{"min_apparent_area", c.oracle.min_apparent_area},
                   {"visibility_threshold", c.oracle.visibility_threshold},
                   {"hallucination_lo", c.oracle.hallucination_lo},
                   {"hallucination_hi", c.oracle.hallucination_hi},
                   {"rng_seed", c.oracle.rng_seed},
                   {"fp_rate", c.oracle.fp_rate}};
    j["adapter_cmd"] = c.adapter_cmd;
    j["mode"] = c.mode == RunMode::full ? "full" : "sahi";
    j["slice_size"] = c.slice_size;
    j["overlap_ratio"] = c.overlap_ratio;
    j["scale"] = c.scale;
    j["confidence_threshold"] = c.confidence_threshold;
    j["merge"] = {{"match_metric", c.merge.match_metric == MatchMetric::iou ? "iou" : "ios"},
                  {"match_threshold", c.merge.match_threshold},
                  {"class_agnostic", c.merge.class_agnostic}};
    j["refine"] = c.refine;
    std::string voting = "affirmative";
    if (c.refinement.voting == VotingMode::consensus) voting = "consensus";
    if (c.refinement.voting == VotingMode::unanimous) voting = "unanimous";
    j["refinement"] = {{"iou_accept", c.refinement.iou_accept},
                       {"voting_mode", voting},
                       {"slice_size", c.refinement.slice_size},
                       {"scale", c.refinement.scale},
                       {"margin_ratio", c.refinement.margin_ratio}};
    j["out_dir"] = c.out_dir;
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    return j;
}

inline RunConfig run_config_from_json(json const& j) {
    RunConfig c;
    auto get = [&](char const* key, auto& dst) {
        if (j.contains(key)) dst = j[key].template get<std::decay_t<decltype(dst)>>();
    };
    get("manifest", c.manifest);
    if (j.contains("detector")) {
        std::string d = j["detector"].get<std::string>();
        if (d == "oracle") c.detector = DetectorKind::oracle;
        else if (d == "adapter") c.detector = DetectorKind::adapter;
        else throw std::invalid_argument("config: unknown detector '" + d + "'");
    }
    if (j.contains("oracle")) {
        auto const& o = j["oracle"];
        if (o.contains("min_apparent_area")) c.oracle.min_apparent_area = o["min_apparent_area"].get<double>();
        if (o.contains("visibility_threshold")) c.oracle.visibility_threshold = o["visibility_threshold"].get<double>();
        if (o.contains("hallucination_lo")) c.oracle.hallucination_lo = o["hallucination_lo"].get<double>();
        if (o.contains("hallucination_hi")) c.oracle.hallucination_hi = o["hallucination_hi"].get<double>();
        if (o.contains("rng_seed")) c.oracle.rng_seed = o["rng_seed"].get<std::uint64_t>();
        if (o.contains("fp_rate")) c.oracle.fp_rate = o["fp_rate"].get<double>();
    }
    get("adapter_cmd", c.adapter_cmd);
    if (j.contains("mode")) {
        std::string m = j["mode"].get<std::string>();
        if (m == "full") c.mode = RunMode::full;
        else if (m == "sahi") c.mode = RunMode::sahi;
        else throw std::invalid_argument("config: unknown mode '" + m + "'");
    }
    get("slice_size", c.slice_size);
    get("overlap_ratio", c.overlap_ratio);
    get("scale", c.scale);
    get("confidence_threshold", c.confidence_threshold);
    if (j.contains("merge")) {
        auto const& m = j["merge"];
        if (m.contains("match_metric")) {
            std::string mm = m["match_metric"].get<std::string>();
            if (mm == "iou") c.merge.match_metric = MatchMetric::iou;
            else if (mm == "ios") c.merge.match_metric = MatchMetric::ios;
            else throw std::invalid_argument("config: unknown match_metric '" + mm + "'");
        }
        if (m.contains("match_threshold")) c.merge.match_threshold = m["match_threshold"].get<double>();
        if (m.contains("class_agnostic")) c.merge.class_agnostic = m["class_agnostic"].get<bool>();
    }
    get("refine", c.refine);
    if (j.contains("refinement")) {
        auto const& r = j["refinement"];
        if (r.contains("iou_accept")) c.refinement.iou_accept = r["iou_accept"].get<double>();
        if (r.contains("voting_mode")) {
            std::string v = r["voting_mode"].get<std::string>();
            if (v == "affirmative") c.refinement.voting = VotingMode::affirmative;
            else if (v == "consensus") c.refinement.voting = VotingMode::consensus;
            else if (v == "unanimous") c.refinement.voting = VotingMode::unanimous;
            else throw std::invalid_argument("config: unknown voting_mode '" + v + "'");
        }
        if (r.contains("slice_size")) c.refinement.slice_size = r["slice_size"].get<int>();
        if (r.contains("scale")) c.refinement.scale = r["scale"].get<double>();
        if (r.contains("margin_ratio")) c.refinement.margin_ratio = r["margin_ratio"].get<double>();
    }
    get("out_dir", c.out_dir);
    get("seed", c.seed);
    get("workers", c.workers);
    c.merge.confidence_threshold = c.confidence_threshold;
    return c;
}

namespace detail {
inline void parallel_for(std::size_t count, int workers,
                         std::function<void(std::size_t)> const& body) {
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    int n = std::min<int>(workers, static_cast<int>(count));
    for (int t = 0; t < n; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                if (failed.load()) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    failed.store(true);
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}
}  // namespace detail

struct RunResult {
    PredictionFile predictions;
    std::vector<std::pair<std::string, std::string>> failures;  // image_id, error
    std::vector<RefinementOutcome> outcomes;  // concatenated in image order
};

inline std::shared_ptr<DetectorBackend> make_detector(RunConfig const& cfg) {
    if (cfg.detector == DetectorKind::oracle) {
        OracleConfig oc = cfg.oracle;
        if (oc.rng_seed == 0) oc.rng_seed = cfg.seed;
        return std::make_shared<OracleDetector>(oc);
    }
    AdapterConfig ac;
    ac.command = cfg.adapter_cmd;
    ac.pool_size = std::max(1, cfg.workers);
    return std::make_shared<SubprocessDetector>(ac);
}

// One image through the configured pipeline: full pass or
// plan -> extract/upscale -> detect -> remap -> threshold -> merge ->
// optional refinement.
inline std::pair<std::vector<Detection>, std::vector<RefinementOutcome>> infer_image(
    GrayImage const& image, std::vector<Annotation> const& truths,
    std::string const& image_id, int num_classes, DetectorBackend& detector,
    RunConfig const& cfg,
    std::vector<std::shared_ptr<DetectorBackend>> const& refinement_detectors = {}) {
    DetectContext ctx{&truths, num_classes, image_id};
    std::vector<Detection> all;

    if (cfg.mode == RunMode::full) {
        FrameTransform identity(0, 0, 1.0);
        auto local = detector.detect(image, identity, ctx);
        for (auto& d : local) {
            double x0 = std::max(0.0, d.bbox.x_min);
            double y0 = std::max(0.0, d.bbox.y_min);
            double x1 = std::min<double>(image.width, d.bbox.x_max);
            double y1 = std::min<double>(image.height, d.bbox.y_max);
            if (x0 >= x1 || y0 >= y1) continue;
            d.bbox = BBox(x0, y0, x1, y1);
            d.provenance.mode = InferenceMode::full;
            all.push_back(d);
        }
    } else {
        SlicePlan plan = plan_slices(image.width, image.height, cfg.slice_size,
                                     cfg.overlap_ratio, cfg.scale);
        for (auto const& region : plan.regions) {
            GrayImage patch = extract_patch(image, region);
            if (cfg.scale != 1.0) patch = upscale(patch, cfg.scale);
            auto local = detector.detect(patch, region.transform(), ctx);
            auto global = remap_to_global(std::move(local), region, image.width,
                                          image.height);
            all.insert(all.end(), global.begin(), global.end());
        }
    }

    MergeConfig mc = cfg.merge;
    mc.confidence_threshold = cfg.confidence_threshold;
    auto merged = merge(threshold(all, cfg.confidence_threshold), mc);

    std::vector<RefinementOutcome> outcomes;
    if (cfg.refine && cfg.mode == RunMode::sahi) {
        auto detectors = refinement_detectors;
        if (detectors.empty()) detectors.push_back(make_detector(cfg));
        auto [kept, outs] = refine(merged, image, detectors, cfg.refinement, ctx);
        merged = std::move(kept);
        outcomes = std::move(outs);
    }
    return {std::move(merged), std::move(outcomes)};
}

// Full batch run. Per-image failures are collected, not fatal; outputs are
// ordered by manifest order regardless of worker count.
inline RunResult run_inference(RunConfig const& cfg, DatasetManifest const& manifest,
                               std::string const& image_root) {
    RunResult result;
    result.predictions.config_snapshot = to_json(cfg);
    // execution details; outputs must not depend on them
    result.predictions.config_snapshot.erase("workers");
    result.predictions.config_snapshot.erase("out_dir");
    result.predictions.images.resize(manifest.images.size());

    auto detector = make_detector(cfg);
    std::vector<std::shared_ptr<DetectorBackend>> refiners;
    if (cfg.refine) refiners.push_back(detector);
    int num_classes = static_cast<int>(manifest.classes.size());

    std::vector<std::vector<RefinementOutcome>> per_image_outcomes(
        manifest.images.size());
    std::vector<std::pair<std::string, std::string>> failures;
    std::mutex failures_mutex;

    detail::parallel_for(manifest.images.size(), cfg.workers, [&](std::size_t i) {
        auto const& entry = manifest.images[i];
        result.predictions.images[i].image_id = entry.image_id;
        try {
            GrayImage image = read_image(
                (std::filesystem::path(image_root) / entry.path).string());
            auto [dets, outs] = infer_image(image, entry.annotations, entry.image_id,
                                            num_classes, *detector, cfg, refiners);
            result.predictions.images[i].detections = std::move(dets);
            per_image_outcomes[i] = std::move(outs);
        } catch (std::exception const& e) {
            std::lock_guard<std::mutex> lock(failures_mutex);
            failures.emplace_back(entry.image_id, e.what());
        }
    });

    std::sort(failures.begin(), failures.end());
    result.failures = std::move(failures);
    for (auto& outs : per_image_outcomes)
        result.outcomes.insert(result.outcomes.end(), outs.begin(), outs.end());
    return result;
}

}  // namespace sahi

#endif  // SAHI_PIPELINE_HPP
