// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Each criterion is self-contained and carries its own runtime
// budget; exceeding the budget fails the criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "oracle_helpers.hpp"
#include "sahi/sahi.hpp"

namespace fs = std::filesystem;
using namespace sahi;
using namespace sahi_test;

namespace {

int g_failures = 0;

struct Check {
    bool ok = true;
    std::string detail;
    void require(bool cond, std::string const& what) {
        if (!cond && ok) {
            ok = false;
            detail = what;
        }
    }
};

template <typename Fn>
void criterion(int number, std::string const& name, double budget_seconds, Fn&& fn) {
    Check c;
    auto t0 = std::chrono::steady_clock::now();
    try {
        fn(c);
    } catch (std::exception const& e) {
        c.require(false, std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                      .count();
    if (secs >= budget_seconds)
        c.require(false, "runtime budget exceeded");
    std::printf("%s  criterion %2d: %s (%.2fs)%s%s\n", c.ok ? "PASS" : "FAIL",
                number, name.c_str(), secs, c.ok ? "" : " -- ",
                c.ok ? "" : c.detail.c_str());
    std::fflush(stdout);
    if (!c.ok) ++g_failures;
}

fs::path scratch(std::string const& name) {
    auto p = fs::temp_directory_path() / "sahi_acceptance" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Detection det(BBox const& b, int cls, double score) {
    Detection d;
    d.bbox = b;
    d.class_id = cls;
    d.score = score;
    return d;
}

// ---------------------------------------------------------------------------

void c1_tiling(Check& c) {
    SplitMix64 rng(11);
    for (int iter = 0; iter < 1000 && c.ok; ++iter) {
        int w = static_cast<int>(rng.uniform_int(1, 2048));
        int h = static_cast<int>(rng.uniform_int(1, 2048));
        int slice = static_cast<int>(rng.uniform_int(1, 700));
        double ov = rng.uniform() * 0.9;

        SlicePlan a = plan_slices(w, h, slice, ov);
        SlicePlan b = plan_slices(w, h, slice, ov);
        c.require(a.regions.size() == b.regions.size(), "plan size nondeterministic");
        for (std::size_t i = 0; i < a.regions.size() && c.ok; ++i) {
            auto const& ra = a.regions[i];
            auto const& rb = b.regions[i];
            c.require(ra.origin_x == rb.origin_x && ra.origin_y == rb.origin_y &&
                          ra.width == rb.width && ra.height == rb.height,
                      "plan nondeterministic");
        }

        std::vector<char> cov_x(w, 0), cov_y(h, 0);
        std::set<std::pair<int, int>> origins;
        std::set<int> xs, ys;
        for (auto const& r : a.regions) {
            c.require(r.origin_x >= 0 && r.origin_y >= 0 &&
                          r.origin_x + r.width <= w && r.origin_y + r.height <= h,
                      "region out of bounds");
            if (!c.ok) return;
            for (int x = r.origin_x; x < r.origin_x + r.width; ++x) cov_x[x] = 1;
            for (int y = r.origin_y; y < r.origin_y + r.height; ++y) cov_y[y] = 1;
            origins.insert({r.origin_x, r.origin_y});
            xs.insert(r.origin_x);
            ys.insert(r.origin_y);
        }
        // full cross product of axis origins, so per-axis coverage implies
        // every pixel is inside some region
        c.require(origins.size() == xs.size() * ys.size(), "grid not a cross product");
        c.require(origins.size() == a.regions.size(), "duplicate regions");
        for (int x = 0; x < w && c.ok; ++x) c.require(cov_x[x], "uncovered column");
        for (int y = 0; y < h && c.ok; ++y) c.require(cov_y[y], "uncovered row");
    }
}

void c2_geometry(Check& c) {
    SplitMix64 rng(22);
    for (int iter = 0; iter < 10000 && c.ok; ++iter) {
        auto make = [&] {
            int x0 = static_cast<int>(rng.uniform_int(0, 511));
            int y0 = static_cast<int>(rng.uniform_int(0, 511));
            int x1 = static_cast<int>(rng.uniform_int(x0 + 1, 512));
            int y1 = static_cast<int>(rng.uniform_int(y0 + 1, 512));
            return IBox{x0, y0, x1, y1};
        };
        IBox ia = make(), ib = make();
        BBox a(ia.x0, ia.y0, ia.x1, ia.y1), b(ib.x0, ib.y0, ib.x1, ib.y1);
        c.require(std::abs(iou(a, b) - raster_iou(ia, ib)) < 1e-6, "IoU mismatch");
        c.require(std::abs(ios(a, b) - raster_ios(ia, ib)) < 1e-6, "IoS mismatch");
        c.require(contains(a, b) == raster_contains(ia, ib), "containment mismatch");
    }
}

DatasetManifest gain_suite(std::string const& dir, int scenes, int size) {
    SuiteSpec suite;
    suite.num_scenes = scenes;
    suite.base_seed = 31;
    suite.scene.width = size;
    suite.scene.height = size;
    suite.scene.slice_size = 128;
    suite.scene.overlap_ratio = 0.1;
    DefectClassSpec small;
    small.class_id = 1;
    small.count = 10;
    small.min_width = small.min_height = 6;
    small.max_width = small.max_height = 6;
    small.placement = Placement::avoid_slice_edges;
    DefectClassSpec large;
    large.class_id = 0;
    large.count = 10;
    large.min_width = large.min_height = 20;
    large.max_width = large.max_height = 20;
    large.placement = Placement::avoid_slice_edges;
    suite.scene.defects = {small, large};
    suite.classes = {{0, "gap", "gap"}, {1, "probable gap", "pgap"}};
    return generate_suite(suite, dir);
}

RunConfig gain_config(std::string const& dir, RunMode mode) {
    RunConfig cfg;
    cfg.manifest = dir + "/manifest.json";
    cfg.mode = mode;
    cfg.slice_size = 128;
    cfg.overlap_ratio = 0.1;
    cfg.scale = 2.0;
    cfg.oracle.min_apparent_area = 100.0;  // 6x6=36 < 100 <= 144 at scale 2
    cfg.oracle.visibility_threshold = 1.0;
    cfg.seed = 3;
    cfg.workers = 4;
    return cfg;
}

void c3_small_defect_gain(Check& c) {
    auto dir = scratch("gain");
    auto manifest = gain_suite(dir.string(), 20, 1024);
    long small_gt = 0, large_gt = 0;
    for (auto const& im : manifest.images)
        for (auto const& a : im.annotations)
            (a.class_id == 1 ? small_gt : large_gt)++;
    c.require(small_gt >= 200 && large_gt >= 200, "suite too small");

    auto full = run_inference(gain_config(dir.string(), RunMode::full), manifest,
                              dir.string());
    auto sliced = run_inference(gain_config(dir.string(), RunMode::sahi), manifest,
                                dir.string());
    c.require(full.failures.empty() && sliced.failures.empty(), "run failures");

    EvalReport fr = evaluate(full.predictions, manifest);
    EvalReport sr = evaluate(sliced.predictions, manifest);
    auto& f_large = fr.per_class[0];
    auto& f_small = fr.per_class[1];
    auto& s_large = sr.per_class[0];
    auto& s_small = sr.per_class[1];
    c.require(f_small.tp == 0, "full mode detected small-class truths");
    c.require(f_large.tp >= 0.95 * large_gt, "full mode missed large-class truths");
    c.require(s_small.tp >= 0.95 * small_gt, "SAHI missed small-class truths");
    c.require(s_large.tp >= 0.95 * large_gt, "SAHI missed large-class truths");
    c.require(s_small.tp + s_large.tp >= 2 * (f_small.tp + f_large.tp),
              "TP gain below 2x");
}

DatasetManifest straddle_suite(std::string const& dir, int scenes) {
    SuiteSpec suite;
    suite.num_scenes = scenes;
    suite.base_seed = 77;
    suite.scene.width = 512;
    suite.scene.height = 512;
    suite.scene.slice_size = 128;
    suite.scene.overlap_ratio = 0.1;
    DefectClassSpec straddler;
    straddler.class_id = 0;
    straddler.count = 6;
    straddler.min_width = straddler.max_width = 20;
    straddler.min_height = straddler.max_height = 20;
    straddler.placement = Placement::straddle_vertical_edge;
    straddler.straddle_fraction = 0.4;
    suite.scene.defects = {straddler};
    suite.classes = {{0, "gap", "gap"}};
    return generate_suite(suite, dir);
}

RunConfig straddle_config(std::string const& dir) {
    RunConfig cfg;
    cfg.manifest = dir + "/manifest.json";
    cfg.mode = RunMode::sahi;
    cfg.slice_size = 128;
    cfg.overlap_ratio = 0.1;
    cfg.scale = 1.0;
    // fragments at visible fraction 0.4 fall in the hallucination band
    cfg.oracle.visibility_threshold = 0.9;
    cfg.oracle.hallucination_lo = 0.2;
    cfg.oracle.hallucination_hi = 0.45;
    cfg.seed = 4;
    cfg.workers = 4;
    return cfg;
}

void c4_edge_fp_refinement(Check& c) {
    auto dir = scratch("edge_fp");
    auto manifest = straddle_suite(dir.string(), 8);  // 48 straddlers
    RunConfig cfg = straddle_config(dir.string());

    auto without = run_inference(cfg, manifest, dir.string());
    cfg.refine = true;
    cfg.refinement.slice_size = 128;
    auto with = run_inference(cfg, manifest, dir.string());
    c.require(without.failures.empty() && with.failures.empty(), "run failures");

    EvalReport before = evaluate(without.predictions, manifest);
    EvalReport after = evaluate(with.predictions, manifest);
    c.require(before.per_class[0].fp >= 40, "fewer than 40 edge FPs before refinement");
    c.require(after.per_class[0].fp == 0, "hallucinated FPs survived refinement");
    c.require(after.per_class[0].tp == before.per_class[0].tp,
              "refinement dropped truth-backed predictions");
}

void c5_voting_containment(Check& c) {
    auto dir = scratch("voting");
    // criterion-4 suite plus straddlers at visible fraction 0.95: above the
    // visibility threshold, so they yield edge-touching truth-backed
    // predictions that the seeing oracles confirm and the blinded one cannot
    SuiteSpec suite;
    suite.num_scenes = 8;
    suite.base_seed = 77;
    suite.scene.width = 512;
    suite.scene.height = 512;
    suite.scene.slice_size = 128;
    suite.scene.overlap_ratio = 0.1;
    DefectClassSpec frag;
    frag.class_id = 0;
    frag.count = 3;
    frag.min_width = frag.max_width = 20;
    frag.min_height = frag.max_height = 20;
    frag.placement = Placement::straddle_vertical_edge;
    frag.straddle_fraction = 0.4;
    DefectClassSpec nearly = frag;
    nearly.count = 3;
    nearly.straddle_fraction = 0.95;
    suite.scene.defects = {frag, nearly};
    suite.classes = {{0, "gap", "gap"}};
    auto manifest = generate_suite(suite, dir.string());
    RunConfig cfg = straddle_config(dir.string());
    auto merged_run = run_inference(cfg, manifest, dir.string());
    c.require(merged_run.failures.empty(), "run failures");

    OracleConfig seeing;
    seeing.visibility_threshold = 0.9;
    seeing.rng_seed = 4;
    OracleConfig blind = seeing;
    blind.min_apparent_area = 1e18;  // confirms nothing
    std::vector<std::shared_ptr<DetectorBackend>> detectors = {
        std::make_shared<OracleDetector>(seeing),
        std::make_shared<OracleDetector>(seeing),
        std::make_shared<OracleDetector>(blind)};

    auto key = [](Detection const& d) {
        return std::tuple(d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max,
                          d.class_id, d.score);
    };
    bool strict_somewhere = false;
    for (std::size_t i = 0; i < manifest.images.size() && c.ok; ++i) {
        auto const& entry = manifest.images[i];
        GrayImage image = read_image((fs::path(dir) / entry.path).string());
        DetectContext ctx{&entry.annotations, 1, entry.image_id};
        auto const& merged = merged_run.predictions.images[i].detections;

        std::map<VotingMode, std::set<decltype(key(Detection{}))>> kept;
        for (VotingMode mode : {VotingMode::affirmative, VotingMode::consensus,
                                VotingMode::unanimous}) {
            RefinementConfig rc;
            rc.voting = mode;
            rc.slice_size = 128;
            auto [keep, outs] = refine(merged, image, detectors, rc, ctx);
            for (auto const& d : keep) kept[mode].insert(key(d));
        }
        auto subset = [](auto const& a, auto const& b) {
            for (auto const& k : a)
                if (!b.count(k)) return false;
            return true;
        };
        c.require(subset(kept[VotingMode::unanimous], kept[VotingMode::consensus]),
                  "unanimous not within consensus");
        c.require(subset(kept[VotingMode::consensus], kept[VotingMode::affirmative]),
                  "consensus not within affirmative");
        if (kept[VotingMode::unanimous].size() < kept[VotingMode::affirmative].size())
            strict_somewhere = true;
    }
    c.require(strict_somewhere, "blinded detector never changed a verdict");
}

void c6_metrics_oracles(Check& c) {
    // fixed micro-cases
    auto [p1, r1] = precision_recall(2, 1, 2);
    c.require(p1 == 2.0 / 3.0 && r1 == 1.0, "precision_recall(2,1,2)");
    auto [p2, r2] = precision_recall(173, 1, 173);
    c.require(p2 == 173.0 / 174.0 && r2 == 1.0, "precision_recall(173,1,173)");
    auto [p3, r3] = precision_recall(0, 0, 0);
    c.require(p3 == 1.0 && r3 == 1.0, "precision_recall(0,0,0)");
    // hand enumeration: 1.0 over the first recall half, 2/3 over the second
    c.require(ap_from_verdicts({true, false, true}, 2) == 0.5 + 0.5 * (2.0 / 3.0),
              "AP [TP,FP,TP] with 2 GT");
    c.require(ap_from_verdicts({true, true}, 2) == 1.0, "AP [TP,TP] with 2 GT");
    c.require(ap_from_verdicts({false, true}, 1) == 0.5, "AP [FP,TP] with 1 GT");
    c.require(ap_from_verdicts({}, 0) == 1.0, "AP empty, no GT");
    c.require(ap_from_verdicts({false}, 0) == 0.0, "AP [FP], no GT");

    // random micro-instances vs the exhaustive assignment search
    SplitMix64 rng(66);
    for (int iter = 0; iter < 200 && c.ok; ++iter) {
        int np = static_cast<int>(rng.uniform_int(0, 6));
        int nt = static_cast<int>(rng.uniform_int(0, 6));
        std::vector<Detection> preds;
        std::vector<Annotation> truths;
        auto box = [&] {
            double x = rng.uniform() * 20.0;
            double y = rng.uniform() * 20.0;
            double w = 2.0 + rng.uniform() * 8.0;
            double h = 2.0 + rng.uniform() * 8.0;
            return BBox(x, y, x + w, y + h);
        };
        for (int i = 0; i < np; ++i)
            preds.push_back(det(box(), static_cast<int>(rng.uniform_int(0, 1)),
                                rng.uniform()));
        for (int i = 0; i < nt; ++i)
            truths.push_back({static_cast<int>(rng.uniform_int(0, 1)), box()});

        auto order = preds;
        canonical_sort(order);
        auto expected = exhaustive_match(order, truths, 0.5);
        MatchSet got = match(preds, truths, 0.5);

        std::map<std::tuple<double, double, double>, int> got_by_pred;
        for (auto const& m : got.matches) {
            auto const& b = preds[m.pred_index].bbox;
            got_by_pred[{preds[m.pred_index].score, b.x_min, b.y_min}] = m.truth_index;
        }
        for (std::size_t i = 0; i < order.size() && c.ok; ++i) {
            auto const& b = order[i].bbox;
            auto it = got_by_pred.find({order[i].score, b.x_min, b.y_min});
            int got_truth = it == got_by_pred.end() ? -1 : it->second;
            c.require(got_truth == expected[i], "greedy vs exhaustive mismatch");
        }
    }
}

void c7_gt_swap(Check& c) {
    auto dir = scratch("gt_swap");
    auto manifest = gain_suite(dir.string(), 6, 512);

    auto full = run_inference(gain_config(dir.string(), RunMode::full), manifest,
                              dir.string());
    auto sliced = run_inference(gain_config(dir.string(), RunMode::sahi), manifest,
                                dir.string());
    c.require(full.failures.empty() && sliced.failures.empty(), "run failures");

    // degraded human manifest: drop 30% of small-class (class 1) truths
    DatasetManifest degraded = manifest;
    for (auto& im : degraded.images) {
        std::vector<Annotation> kept;
        int small_seen = 0;
        for (auto const& a : im.annotations) {
            if (a.class_id == 1 && (small_seen++ % 10) < 3) continue;
            kept.push_back(a);
        }
        im.annotations = std::move(kept);
    }

    EvalReport vs_full = evaluate(sliced.predictions, manifest);
    EvalReport vs_degraded = evaluate(sliced.predictions, degraded);
    c.require(vs_full.per_class[1].ap50 && vs_degraded.per_class[1].ap50,
              "missing AP50");
    c.require(*vs_degraded.per_class[1].ap50 < *vs_full.per_class[1].ap50,
              "AP50 not strictly lower against degraded GT");

    std::vector<std::pair<std::string, PredictionFile const*>> modes = {
        {"full", &full.predictions}, {"sahi", &sliced.predictions}};
    std::vector<std::pair<std::string, TruthMap>> sources;
    sources.emplace_back("human", truths_from_manifest(degraded));
    sources.emplace_back("model_full", truths_from_predictions(full.predictions));
    sources.emplace_back("model_sahi", truths_from_predictions(sliced.predictions));
    auto rows = gt_swap_comparison(modes, sources, manifest.classes);
    c.require(rows.size() == modes.size() * sources.size(),
              "comparison table row count");
}

void c8_sliced_dataset(Check& c) {
    auto dir = scratch("sliced");
    auto manifest = gain_suite(dir.string(), 4, 512);
    auto out = (dir / "slices").string();
    auto sliced = slice_dataset(manifest, dir.string(), 128, 0.5, out);

    c.require(!sliced.images.empty(), "no slices emitted");
    for (auto const& im : sliced.images) {
        c.require(!im.annotations.empty(), "annotation-free slice emitted");

        auto pos = im.image_id.rfind("_s");
        c.require(pos != std::string::npos, "slice id shape");
        if (!c.ok) return;
        std::string parent_id = im.image_id.substr(0, pos);
        int index = std::stoi(im.image_id.substr(pos + 2));
        auto const* parent = manifest.find_image(parent_id);
        c.require(parent != nullptr, "unknown parent image");
        if (!c.ok) return;

        SlicePlan plan = plan_slices(parent->width, parent->height, 128, 0.5);
        c.require(index >= 0 && index < static_cast<int>(plan.regions.size()),
                  "slice index out of range");
        if (!c.ok) return;
        auto const& region = plan.regions[index];
        BBox bounds(0, 0, im.width, im.height);
        for (auto const& a : im.annotations) {
            c.require(contains(bounds, a.bbox), "annotation escapes its slice");
            // exact round trip back to a parent annotation
            BBox global(a.bbox.x_min + region.origin_x, a.bbox.y_min + region.origin_y,
                        a.bbox.x_max + region.origin_x, a.bbox.y_max + region.origin_y);
            bool found = false;
            for (auto const& pa : parent->annotations)
                if (pa.class_id == a.class_id && pa.bbox == global) found = true;
            c.require(found, "round-trip coordinates inexact");
            c.require(contains(region.global_bounds(), global),
                      "kept annotation not fully contained");
        }
    }
}

void c9_end_to_end_determinism(Check& c) {
    auto run_once = [&](std::string const& name, int workers) {
        auto dir = scratch("e2e_" + name);
        auto manifest = straddle_suite(dir.string(), 6);
        slice_dataset(manifest, dir.string(), 128, 0.5, (dir / "slices").string());
        RunConfig cfg = straddle_config(dir.string());
        cfg.manifest = "manifest.json";  // snapshot must not embed the scratch dir
        cfg.refine = true;
        cfg.refinement.slice_size = 128;
        cfg.workers = workers;
        auto result = run_inference(cfg, manifest, dir.string());
        save_predictions(result.predictions, (dir / "predictions.json").string());
        EvalReport report = evaluate(result.predictions, manifest);
        detail::write_text_file((dir / "report.csv").string(), report_csv(report));
        return dir;
    };
    auto a = run_once("a", 1);
    auto b = run_once("b", 4);
    for (std::string f : {"manifest.json", "slices/manifest.json",
                          "predictions.json", "report.csv"}) {
        c.require(detail::read_text_file((a / f).string()) ==
                      detail::read_text_file((b / f).string()),
                  f + " differs between runs");
        if (!c.ok) return;
    }
}

void c10_invariants(Check& c) {
    auto dir = scratch("invariants");
    auto manifest = straddle_suite(dir.string(), 4);
    RunConfig cfg = straddle_config(dir.string());
    auto without = run_inference(cfg, manifest, dir.string());
    cfg.refine = true;
    cfg.refinement.slice_size = 128;
    auto with = run_inference(cfg, manifest, dir.string());
    for (std::size_t i = 0; i < manifest.images.size() && c.ok; ++i) {
        for (auto const& d : with.predictions.images[i].detections) {
            bool found = false;
            for (auto const& u : without.predictions.images[i].detections)
                if (u.bbox == d.bbox && u.class_id == d.class_id &&
                    u.score == d.score)
                    found = true;
            c.require(found, "refined output not a subset");
        }
    }

    SplitMix64 rng(101);
    MergeConfig mc;
    for (int iter = 0; iter < 1000 && c.ok; ++iter) {
        std::vector<Detection> dets;
        int n = static_cast<int>(rng.uniform_int(0, 12));
        for (int i = 0; i < n; ++i) {
            double x = rng.uniform() * 50.0;
            double y = rng.uniform() * 50.0;
            double w = 1.0 + rng.uniform() * 20.0;
            double h = 1.0 + rng.uniform() * 20.0;
            dets.push_back(det(BBox(x, y, x + w, y + h),
                               static_cast<int>(rng.uniform_int(0, 1)),
                               rng.uniform()));
        }
        auto merged = merge(threshold(dets, mc.confidence_threshold), mc);
        auto again = merge(merged, mc);
        c.require(again.size() == merged.size(), "merge not idempotent (size)");
        for (std::size_t i = 0; i < merged.size() && c.ok; ++i)
            c.require(again[i].bbox == merged[i].bbox &&
                          again[i].score == merged[i].score &&
                          again[i].class_id == merged[i].class_id,
                      "merge not idempotent (content)");
    }
}

}  // namespace

int main() {
    criterion(1, "tiling coverage & determinism", 5.0, c1_tiling);
    criterion(2, "geometry vs rasterized oracle", 30.0, c2_geometry);
    criterion(3, "small-defect gain", 60.0, c3_small_defect_gain);
    criterion(4, "edge-FP refinement", 60.0, c4_edge_fp_refinement);
    criterion(5, "voting containment", 30.0, c5_voting_containment);
    criterion(6, "metrics oracle equivalence", 10.0, c6_metrics_oracles);
    criterion(7, "ground-truth-swap structure", 30.0, c7_gt_swap);
    criterion(8, "sliced-dataset soundness", 30.0, c8_sliced_dataset);
    criterion(9, "end-to-end determinism", 120.0, c9_end_to_end_determinism);
    criterion(10, "refinement subset & merge idempotence", 10.0, c10_invariants);

    if (g_failures) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
