// Command-line front end for the slicing-aided inspection pipeline.
//
// Subcommands: synth, slice-dataset, infer, eval, compare-gt,
// review-export, review-import. Each one is driven by a JSON config file;
// infer additionally accepts flag overrides (flags win over the config).
//
// Exit codes: 0 success, 1 usage/config error, 2 runtime failure.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sahi/sahi.hpp"

namespace fs = std::filesystem;
using sahi::json;

namespace {

json load_config(std::string const& path) {
    try {
        return json::parse(sahi::detail::read_text_file(path));
    } catch (std::exception const& e) {
        throw CLI::ValidationError("config", std::string("cannot load config: ") +
                                                 e.what());
    }
}

std::string image_root_of(std::string const& manifest_path) {
    auto parent = fs::path(manifest_path).parent_path();
    return parent.empty() ? std::string(".") : parent.string();
}

sahi::SceneSpec scene_from_json(json const& j) {
    sahi::SceneSpec s;
    if (j.contains("pattern")) {
        std::string p = j["pattern"].get<std::string>();
        if (p == "line_space") s.pattern = sahi::ScenePattern::line_space;
        else if (p == "hex_array") s.pattern = sahi::ScenePattern::hex_array;
        else throw std::invalid_argument("config: unknown pattern '" + p + "'");
    }
    auto get = [&](char const* key, auto& dst) {
        if (j.contains(key)) dst = j[key].template get<std::decay_t<decltype(dst)>>();
    };
    get("width", s.width);
    get("height", s.height);
    get("pitch", s.pitch);
    get("feature_width", s.feature_width);
    get("noise_amplitude", s.noise_amplitude);
    get("min_separation", s.min_separation);
    get("slice_size", s.slice_size);
    get("overlap_ratio", s.overlap_ratio);
    if (j.contains("defects")) {
        for (auto const& jd : j["defects"]) {
            sahi::DefectClassSpec d;
            d.class_id = jd.at("class_id").get<int>();
            d.count = jd.at("count").get<int>();
            auto dget = [&](char const* key, auto& dst) {
                if (jd.contains(key))
                    dst = jd[key].template get<std::decay_t<decltype(dst)>>();
            };
            dget("min_width", d.min_width);
            dget("max_width", d.max_width);
            dget("min_height", d.min_height);
            dget("max_height", d.max_height);
            dget("straddle_fraction", d.straddle_fraction);
            if (jd.contains("style")) {
                std::string st = jd["style"].get<std::string>();
                if (st == "erase") d.style = sahi::DefectStyle::erase;
                else if (st == "faint") d.style = sahi::DefectStyle::faint;
                else if (st == "fill") d.style = sahi::DefectStyle::fill;
                else throw std::invalid_argument("config: unknown style '" + st + "'");
            }
            if (jd.contains("placement")) {
                std::string pl = jd["placement"].get<std::string>();
                if (pl == "unconstrained") d.placement = sahi::Placement::unconstrained;
                else if (pl == "avoid_slice_edges")
                    d.placement = sahi::Placement::avoid_slice_edges;
                else if (pl == "straddle_vertical_edge")
                    d.placement = sahi::Placement::straddle_vertical_edge;
                else throw std::invalid_argument("config: unknown placement '" + pl + "'");
            }
            s.defects.push_back(d);
        }
    }
    return s;
}

std::vector<sahi::ClassInfo> classes_from_json(json const& j) {
    std::vector<sahi::ClassInfo> out;
    for (auto const& jc : j)
        out.push_back({jc.at("class_id").get<int>(), jc.at("name").get<std::string>(),
                       jc.at("abbreviation").get<std::string>()});
    return out;
}

sahi::TruthMap load_truth_source(std::string const& type, std::string const& path) {
    if (type == "manifest") return sahi::truths_from_manifest(sahi::load_manifest(path));
    if (type == "predictions")
        return sahi::truths_from_predictions(sahi::load_predictions(path));
    throw std::invalid_argument("config: unknown gt source type '" + type + "'");
}

int cmd_synth(json const& config, std::string const& out_dir,
              std::optional<std::uint64_t> seed) {
    sahi::SuiteSpec suite;
    suite.num_scenes = config.value("num_scenes", 1);
    suite.base_seed = config.value("base_seed", std::uint64_t{0});
    if (seed) suite.base_seed = *seed;
    if (config.contains("scene")) suite.scene = scene_from_json(config["scene"]);
    if (config.contains("classes")) suite.classes = classes_from_json(config["classes"]);
    auto manifest = sahi::generate_suite(suite, out_dir);
    std::cout << "wrote " << manifest.images.size() << " scenes to " << out_dir << "\n";
    return 0;
}

int cmd_slice_dataset(json const& config, std::string const& out_dir) {
    std::string manifest_path = config.at("manifest").get<std::string>();
    auto manifest = sahi::load_manifest(manifest_path);
    double overlap = config.value("overlap_ratio", 0.5);
    std::vector<int> sizes;
    if (config.contains("slice_sizes"))
        sizes = config["slice_sizes"].get<std::vector<int>>();
    else
        sizes = {config.value("slice_size", 128)};
    for (int size : sizes) {
        auto dir = (fs::path(out_dir) / ("sliced_" + std::to_string(size))).string();
        auto sliced = sahi::slice_dataset(manifest, image_root_of(manifest_path), size,
                                          overlap, dir);
        std::cout << "slice " << size << ": " << sliced.images.size()
                  << " patches -> " << dir << "\n";
    }
    return 0;
}

int cmd_infer(sahi::RunConfig cfg, std::string const& out_dir) {
    auto manifest = sahi::load_manifest(cfg.manifest);
    auto result = sahi::run_inference(cfg, manifest, image_root_of(cfg.manifest));

    fs::create_directories(out_dir);
    sahi::save_predictions(result.predictions,
                           (fs::path(out_dir) / "predictions.json").string());
    json snapshot = sahi::to_json(cfg);
    snapshot.erase("workers");
    snapshot.erase("out_dir");
    sahi::detail::write_text_file((fs::path(out_dir) / "config_snapshot.json").string(),
                                  snapshot.dump(2) + "\n");
    for (auto const& [image_id, error] : result.failures)
        std::cerr << "FAIL " << image_id << ": " << error << "\n";
    std::cout << "predictions written to " << out_dir << "/predictions.json";
    if (!result.failures.empty())
        std::cout << " (partial: " << result.failures.size() << " image failures)";
    std::cout << "\n";
    return result.failures.empty() ? 0 : 2;
}

int cmd_eval(json const& config, std::string const& out_dir) {
    auto predictions = sahi::load_predictions(config.at("predictions").get<std::string>());
    double conf = config.value("confidence_threshold", 0.25);
    double iou_thr = config.value("iou_threshold", 0.5);

    auto const& gt = config.at("gt");
    std::string type = gt.at("type").get<std::string>();
    sahi::EvalReport report;
    if (type == "adjudication") {
        auto manifest = sahi::load_manifest(gt.at("manifest").get<std::string>());
        auto adj = sahi::import_adjudication(gt.at("path").get<std::string>(), predictions);
        report = sahi::evaluate_adjudicated(predictions, adj, manifest, conf);
    } else {
        auto manifest = sahi::load_manifest(
            type == "manifest" ? gt.at("path").get<std::string>()
                               : gt.at("manifest").get<std::string>());
        auto truths = load_truth_source(type, gt.at("path").get<std::string>());
        report = sahi::evaluate(predictions, truths, manifest.classes, type, conf, iou_thr);
    }

    if (config.contains("baseline_predictions")) {
        auto baseline =
            sahi::load_predictions(config["baseline_predictions"].get<std::string>());
        auto manifest = sahi::load_manifest(gt.contains("manifest")
                                                ? gt["manifest"].get<std::string>()
                                                : gt.at("path").get<std::string>());
        auto before = sahi::evaluate(baseline, manifest, "baseline", conf, iou_thr);
        sahi::attach_fp_reduction(before, report);
    }

    fs::create_directories(out_dir);
    sahi::detail::write_text_file((fs::path(out_dir) / "report.csv").string(),
                                  sahi::report_csv(report));
    sahi::detail::write_text_file((fs::path(out_dir) / "report.json").string(),
                                  sahi::report_to_json(report).dump(2) + "\n");
    sahi::detail::write_text_file((fs::path(out_dir) / "pr_curves.csv").string(),
                                  sahi::curve_csv(report));
    std::cout << sahi::report_csv(report);
    return 0;
}

int cmd_compare_gt(json const& config, std::string const& out_dir) {
    auto manifest = sahi::load_manifest(config.at("manifest").get<std::string>());
    double conf = config.value("confidence_threshold", 0.25);
    double iou_thr = config.value("iou_threshold", 0.5);

    std::vector<sahi::PredictionFile> storage;
    std::vector<std::pair<std::string, sahi::PredictionFile const*>> modes;
    storage.reserve(config.at("modes").size());
    for (auto const& jm : config.at("modes")) {
        storage.push_back(sahi::load_predictions(jm.at("predictions").get<std::string>()));
        modes.emplace_back(jm.at("name").get<std::string>(), &storage.back());
    }
    std::vector<std::pair<std::string, sahi::TruthMap>> sources;
    for (auto const& js : config.at("sources"))
        sources.emplace_back(js.at("name").get<std::string>(),
                             load_truth_source(js.at("type").get<std::string>(),
                                               js.at("path").get<std::string>()));

    auto rows = sahi::gt_swap_comparison(modes, sources, manifest.classes, conf, iou_thr);
    auto csv = sahi::gt_swap_csv(rows, manifest.classes);
    fs::create_directories(out_dir);
    sahi::detail::write_text_file((fs::path(out_dir) / "compare_gt.csv").string(), csv);
    std::cout << csv;
    return 0;
}

int cmd_review_export(json const& config, std::string const& out_dir) {
    auto predictions = sahi::load_predictions(config.at("predictions").get<std::string>());
    std::string manifest_path = config.at("manifest").get<std::string>();
    auto manifest = sahi::load_manifest(manifest_path);
    sahi::export_review(predictions, manifest, image_root_of(manifest_path), out_dir);
    std::cout << "review bundle written to " << out_dir << "\n";
    return 0;
}

int cmd_review_import(json const& config, std::string const& out_dir) {
    auto predictions = sahi::load_predictions(config.at("predictions").get<std::string>());
    auto manifest = sahi::load_manifest(config.at("manifest").get<std::string>());
    auto adj = sahi::import_adjudication(config.at("verdicts").get<std::string>(),
                                         predictions);
    double conf = config.value("confidence_threshold", 0.25);
    auto report = sahi::evaluate_adjudicated(predictions, adj, manifest, conf);
    fs::create_directories(out_dir);
    sahi::detail::write_text_file((fs::path(out_dir) / "adjudicated_report.csv").string(),
                                  sahi::report_csv(report));
    sahi::detail::write_text_file((fs::path(out_dir) / "adjudicated_report.json").string(),
                                  sahi::report_to_json(report).dump(2) + "\n");
    std::cout << sahi::report_csv(report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Slicing-aided defect detection pipeline"};
    app.require_subcommand(1);
    app.fallthrough();  // common flags may follow the subcommand name

    std::string config_path, out_dir = "out";
    std::optional<int> workers;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "JSON config file")->required();
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--workers", workers, "worker threads");
    app.add_option("--seed", seed, "RNG seed override");

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    auto* slice_ds = app.add_subcommand("slice-dataset",
                                        "build fine-tuning slices from a dataset");
    auto* infer = app.add_subcommand("infer", "run full or sliced inference");
    auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
    auto* compare = app.add_subcommand("compare-gt",
                                       "AP/AR under swapped ground-truth sources");
    auto* rev_export = app.add_subcommand("review-export", "export manual-review bundle");
    auto* rev_import = app.add_subcommand("review-import", "import adjudicated verdicts");

    // infer flag overrides (flags win over the config file)
    std::optional<std::string> f_mode, f_detector, f_adapter_cmd, f_voting;
    std::optional<int> f_slice_size;
    std::optional<double> f_overlap, f_scale, f_conf, f_iou_accept;
    bool f_refine = false;
    infer->add_option("--mode", f_mode, "full|sahi");
    infer->add_option("--slice-size", f_slice_size, "slice size in px");
    infer->add_option("--overlap", f_overlap, "overlap ratio in [0,1)");
    infer->add_option("--scale", f_scale, "slice upscale factor");
    infer->add_option("--conf", f_conf, "confidence threshold");
    infer->add_flag("--refine", f_refine, "enable edge refinement");
    infer->add_option("--voting", f_voting, "affirmative|consensus|unanimous");
    infer->add_option("--iou-accept", f_iou_accept, "refinement IoU acceptance");
    infer->add_option("--detector", f_detector, "oracle|adapter");
    infer->add_option("--adapter-cmd", f_adapter_cmd, "adapter command line");

    try {
        app.parse(argc, argv);
    } catch (CLI::ParseError const& e) {
        return app.exit(e) ? 1 : 0;
    }

    try {
        json config = load_config(config_path);
        if (synth->parsed()) return cmd_synth(config, out_dir, seed);
        if (slice_ds->parsed()) return cmd_slice_dataset(config, out_dir);
        if (infer->parsed()) {
            sahi::RunConfig cfg = sahi::run_config_from_json(config);
            if (f_mode) {
                if (*f_mode == "full") cfg.mode = sahi::RunMode::full;
                else if (*f_mode == "sahi") cfg.mode = sahi::RunMode::sahi;
                else throw std::invalid_argument("--mode must be full or sahi");
            }
            if (f_slice_size) cfg.slice_size = *f_slice_size;
            if (f_overlap) cfg.overlap_ratio = *f_overlap;
            if (f_scale) cfg.scale = *f_scale;
            if (f_conf) cfg.confidence_threshold = *f_conf;
            if (f_refine) cfg.refine = true;
            if (f_iou_accept) cfg.refinement.iou_accept = *f_iou_accept;
            if (f_voting) {
                if (*f_voting == "affirmative")
                    cfg.refinement.voting = sahi::VotingMode::affirmative;
                else if (*f_voting == "consensus")
                    cfg.refinement.voting = sahi::VotingMode::consensus;
                else if (*f_voting == "unanimous")
                    cfg.refinement.voting = sahi::VotingMode::unanimous;
                else throw std::invalid_argument("--voting must be affirmative|consensus|unanimous");
            }
            if (f_detector) {
                if (*f_detector == "oracle") cfg.detector = sahi::DetectorKind::oracle;
                else if (*f_detector == "adapter") cfg.detector = sahi::DetectorKind::adapter;
                else throw std::invalid_argument("--detector must be oracle or adapter");
            }
            if (f_adapter_cmd) cfg.adapter_cmd = *f_adapter_cmd;
            if (seed) cfg.seed = *seed;
            if (workers) cfg.workers = *workers;
            if (!config.contains("out_dir") || out_dir != "out") cfg.out_dir = out_dir;
            return cmd_infer(cfg, cfg.out_dir.empty() ? out_dir : cfg.out_dir);
        }
        if (eval->parsed()) return cmd_eval(config, out_dir);
        if (compare->parsed()) return cmd_compare_gt(config, out_dir);
        if (rev_export->parsed()) return cmd_review_export(config, out_dir);
        if (rev_import->parsed()) return cmd_review_import(config, out_dir);
    } catch (CLI::ValidationError const& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (std::invalid_argument const& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (std::exception const& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
