#ifndef SAHI_DATASETS_HPP
#define SAHI_DATASETS_HPP

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sahi/detector.hpp"
#include "sahi/raster.hpp"
#include "sahi/tiling.hpp"

namespace sahi {

using json = nlohmann::json;

struct ClassInfo {
    int class_id = 0;
    std::string name;
    std::string abbreviation;
};

struct ImageEntry {
    std::string image_id;
    std::string path;  // relative to the manifest's directory
    int width = 0;
    int height = 0;
    std::vector<Annotation> annotations;
};

struct DatasetManifest {
    int format_version = 1;
    std::vector<ClassInfo> classes;
    std::vector<ImageEntry> images;

    ImageEntry const* find_image(std::string const& id) const {
        for (auto const& im : images)
            if (im.image_id == id) return &im;
        return nullptr;
    }
    bool has_class(int class_id) const {
        for (auto const& c : classes)
            if (c.class_id == class_id) return true;
        return false;
    }
};

struct ImagePredictions {
    std::string image_id;
    std::vector<Detection> detections;
};

struct PredictionFile {
    int format_version = 1;
    json config_snapshot = json::object();
    std::vector<ImagePredictions> images;
};

enum class AdjVerdict { tp, fp, uncertain };

struct AdjudicationRow {
    std::string image_id;
    int prediction_index = 0;
    AdjVerdict verdict = AdjVerdict::uncertain;
    std::string note;
};

struct AdjudicationFile {
    std::vector<AdjudicationRow> rows;
};

// ---------------------------------------------------------------------------
// Canonical JSON helpers: sorted keys come from nlohmann's default object
// map; floats are rounded to 6 decimals before storage so that
// save -> load -> save is byte-identical.

namespace detail {
inline double round6(double v) { return std::round(v * 1e6) / 1e6; }

inline json bbox_to_json(BBox const& b) {
    return json::array({round6(b.x_min), round6(b.y_min), round6(b.x_max),
                        round6(b.y_max)});
}

inline BBox bbox_from_json(json const& j, std::string const& where) {
    if (!j.is_array() || j.size() != 4)
        throw std::runtime_error(where + ": bbox must be [x_min,y_min,x_max,y_max]");
    try {
        return BBox(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                    j[3].get<double>());
    } catch (std::exception const& e) {
        throw std::runtime_error(where + ": " + e.what());
    }
}

inline json const& require(json const& j, std::string const& key,
                           std::string const& where) {
    auto it = j.find(key);
    if (it == j.end())
        throw std::runtime_error(where + ": missing field '" + key + "'");
    return *it;
}

inline std::vector<std::string> edge_names(EdgeSet flags) {
    std::vector<std::string> out;
    if (flags & kEdgeLeft) out.push_back("left");
    if (flags & kEdgeRight) out.push_back("right");
    if (flags & kEdgeTop) out.push_back("top");
    if (flags & kEdgeBottom) out.push_back("bottom");
    return out;
}

inline EdgeSet edges_from_names(json const& j, std::string const& where) {
    EdgeSet flags = 0;
    for (auto const& e : j) {
        std::string s = e.get<std::string>();
        if (s == "left") flags |= kEdgeLeft;
        else if (s == "right") flags |= kEdgeRight;
        else if (s == "top") flags |= kEdgeTop;
        else if (s == "bottom") flags |= kEdgeBottom;
        else throw std::runtime_error(where + ": unknown edge '" + s + "'");
    }
    return flags;
}

inline std::string mode_name(InferenceMode m) {
    switch (m) {
        case InferenceMode::full: return "full";
        case InferenceMode::sliced: return "sliced";
        case InferenceMode::refinement: return "refinement";
    }
    return "?";
}

inline InferenceMode mode_from_name(std::string const& s, std::string const& where) {
    if (s == "full") return InferenceMode::full;
    if (s == "sliced") return InferenceMode::sliced;
    if (s == "refinement") return InferenceMode::refinement;
    throw std::runtime_error(where + ": unknown mode '" + s + "'");
}

inline void write_text_file(std::string const& path, std::string const& body) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f << body;
    if (!f) throw std::runtime_error("write failed: " + path);
}

inline std::string read_text_file(std::string const& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Manifest IO

inline json to_json(DatasetManifest const& m) {
    json j;
    j["format_version"] = m.format_version;
    j["classes"] = json::array();
    for (auto const& c : m.classes)
        j["classes"].push_back({{"class_id", c.class_id},
                                {"name", c.name},
                                {"abbreviation", c.abbreviation}});
    j["images"] = json::array();
    for (auto const& im : m.images) {
        json ji = {{"image_id", im.image_id},
                   {"path", im.path},
                   {"width", im.width},
                   {"height", im.height}};
        ji["annotations"] = json::array();
        for (auto const& a : im.annotations)
            ji["annotations"].push_back(
                {{"class_id", a.class_id}, {"bbox", detail::bbox_to_json(a.bbox)}});
        j["images"].push_back(std::move(ji));
    }
    return j;
}

inline DatasetManifest manifest_from_json(json const& j) {
    DatasetManifest m;
    m.format_version = detail::require(j, "format_version", "manifest").get<int>();
    std::set<int> class_ids;
    for (auto const& jc : detail::require(j, "classes", "manifest")) {
        ClassInfo c;
        c.class_id = detail::require(jc, "class_id", "manifest.classes").get<int>();
        c.name = detail::require(jc, "name", "manifest.classes").get<std::string>();
        c.abbreviation =
            detail::require(jc, "abbreviation", "manifest.classes").get<std::string>();
        if (!class_ids.insert(c.class_id).second)
            throw std::runtime_error("manifest.classes: duplicate class_id " +
                                     std::to_string(c.class_id));
        m.classes.push_back(std::move(c));
    }
    std::set<std::string> image_ids;
    for (auto const& ji : detail::require(j, "images", "manifest")) {
        ImageEntry im;
        im.image_id = detail::require(ji, "image_id", "manifest.images").get<std::string>();
        std::string where = "manifest.images[" + im.image_id + "]";
        if (!image_ids.insert(im.image_id).second)
            throw std::runtime_error(where + ": duplicate image_id");
        im.path = detail::require(ji, "path", where).get<std::string>();
        im.width = detail::require(ji, "width", where).get<int>();
        im.height = detail::require(ji, "height", where).get<int>();
        if (im.width < 1 || im.height < 1)
            throw std::runtime_error(where + ": non-positive dimensions");
        for (auto const& ja : detail::require(ji, "annotations", where)) {
            Annotation a;
            a.class_id = detail::require(ja, "class_id", where).get<int>();
            if (!class_ids.count(a.class_id))
                throw std::runtime_error(where + ": unknown class_id " +
                                         std::to_string(a.class_id));
            a.bbox = detail::bbox_from_json(detail::require(ja, "bbox", where), where);
            if (a.bbox.x_min < 0 || a.bbox.y_min < 0 || a.bbox.x_max > im.width ||
                a.bbox.y_max > im.height)
                throw std::runtime_error(where + ": annotation bbox out of image bounds");
            im.annotations.push_back(a);
        }
        m.images.push_back(std::move(im));
    }
    return m;
}

inline void save_manifest(DatasetManifest const& m, std::string const& path) {
    detail::write_text_file(path, to_json(m).dump(2) + "\n");
}

inline DatasetManifest load_manifest(std::string const& path) {
    json j;
    try {
        j = json::parse(detail::read_text_file(path));
    } catch (json::parse_error const& e) {
        throw std::runtime_error("manifest parse error in " + path + ": " + e.what());
    }
    return manifest_from_json(j);
}

// ---------------------------------------------------------------------------
// Prediction IO

inline json to_json(Detection const& d) {
    json j;
    j["bbox"] = detail::bbox_to_json(d.bbox);
    j["class_id"] = d.class_id;
    j["score"] = detail::round6(d.score);
    j["provenance"] = {{"mode", detail::mode_name(d.provenance.mode)},
                       {"slice_index", d.provenance.slice_index},
                       {"refined", d.provenance.refined},
                       {"edge_flags", detail::edge_names(d.provenance.edge_flags)}};
    return j;
}

inline Detection detection_from_json(json const& j, std::string const& where) {
    Detection d;
    d.bbox = detail::bbox_from_json(detail::require(j, "bbox", where), where);
    d.class_id = detail::require(j, "class_id", where).get<int>();
    d.score = detail::require(j, "score", where).get<double>();
    if (!(d.score >= 0.0 && d.score <= 1.0))
        throw std::runtime_error(where + ": score out of [0,1]");
    json const& p = detail::require(j, "provenance", where);
    d.provenance.mode =
        detail::mode_from_name(detail::require(p, "mode", where).get<std::string>(), where);
    d.provenance.slice_index = detail::require(p, "slice_index", where).get<int>();
    d.provenance.refined = detail::require(p, "refined", where).get<bool>();
    d.provenance.edge_flags =
        detail::edges_from_names(detail::require(p, "edge_flags", where), where);
    return d;
}

inline json to_json(PredictionFile const& p) {
    json j;
    j["format_version"] = p.format_version;
    j["config"] = p.config_snapshot;
    j["images"] = json::array();
    for (auto const& im : p.images) {
        json ji = {{"image_id", im.image_id}};
        ji["detections"] = json::array();
        for (auto const& d : im.detections) ji["detections"].push_back(to_json(d));
        j["images"].push_back(std::move(ji));
    }
    return j;
}

inline PredictionFile predictions_from_json(json const& j) {
    PredictionFile p;
    p.format_version = detail::require(j, "format_version", "predictions").get<int>();
    p.config_snapshot = detail::require(j, "config", "predictions");
    for (auto const& ji : detail::require(j, "images", "predictions")) {
        ImagePredictions im;
        im.image_id =
            detail::require(ji, "image_id", "predictions.images").get<std::string>();
        std::string where = "predictions.images[" + im.image_id + "]";
        for (auto const& jd : detail::require(ji, "detections", where))
            im.detections.push_back(detection_from_json(jd, where));
        p.images.push_back(std::move(im));
    }
    return p;
}

inline void save_predictions(PredictionFile const& p, std::string const& path) {
    detail::write_text_file(path, to_json(p).dump(2) + "\n");
}

inline PredictionFile load_predictions(std::string const& path) {
    json j;
    try {
        j = json::parse(detail::read_text_file(path));
    } catch (json::parse_error const& e) {
        throw std::runtime_error("predictions parse error in " + path + ": " + e.what());
    }
    return predictions_from_json(j);
}

// ---------------------------------------------------------------------------
// Sliced-dataset generation: keep a slice iff it fully contains at least one
// annotation; kept slices carry only their fully contained annotations,
// re-expressed in slice-local coordinates. Patch rasters are written to
// out_dir next to the new manifest.

inline DatasetManifest slice_dataset(DatasetManifest const& manifest,
                                     std::string const& image_root,
                                     int slice_size, double overlap_ratio,
                                     std::string const& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    DatasetManifest out;
    out.classes = manifest.classes;
    for (auto const& im : manifest.images) {
        GrayImage raster = read_image((fs::path(image_root) / im.path).string());
        if (raster.width != im.width || raster.height != im.height)
            throw std::runtime_error("slice_dataset: raster dims disagree with manifest for " +
                                     im.image_id);
        SlicePlan plan = plan_slices(im.width, im.height, slice_size, overlap_ratio);
        for (auto const& r : plan.regions) {
            BBox bounds = r.global_bounds();
            std::vector<Annotation> kept;
            for (auto const& a : im.annotations)
                if (contains(bounds, a.bbox)) {
                    Annotation local = a;
                    local.bbox = to_local(FrameTransform(r.origin_x, r.origin_y, 1.0),
                                          a.bbox);
                    kept.push_back(local);
                }
            if (kept.empty()) continue;
            ImageEntry slice_entry;
            slice_entry.image_id = im.image_id + "_s" + std::to_string(r.index);
            slice_entry.path = slice_entry.image_id + ".pgm";
            slice_entry.width = r.width;
            slice_entry.height = r.height;
            slice_entry.annotations = std::move(kept);
            write_image(extract_patch(raster, r),
                        (fs::path(out_dir) / slice_entry.path).string());
            out.images.push_back(std::move(slice_entry));
        }
    }
    save_manifest(out, (fs::path(out_dir) / "manifest.json").string());
    return out;
}

// ---------------------------------------------------------------------------
// Manual review: one overlay crop per prediction plus a CSV pre-filled with
// prediction identifiers and an empty verdict column.

namespace detail {
inline void draw_box(GrayImage& img, BBox const& b, std::uint8_t value) {
    int x0 = std::max(0, static_cast<int>(std::floor(b.x_min)));
    int y0 = std::max(0, static_cast<int>(std::floor(b.y_min)));
    int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(b.x_max)) - 1);
    int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(b.y_max)) - 1);
    for (int x = x0; x <= x1; ++x) {
        img.set(x, y0, value);
        img.set(x, y1, value);
    }
    for (int y = y0; y <= y1; ++y) {
        img.set(x0, y, value);
        img.set(x1, y, value);
    }
}

inline std::string csv_escape(std::string const& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}
}  // namespace detail

inline void export_review(PredictionFile const& predictions,
                          DatasetManifest const& manifest,
                          std::string const& image_root,
                          std::string const& out_dir, int crop_margin = 24) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::ostringstream csv;
    csv << "image_id,prediction_index,verdict,note\n";
    for (auto const& im : predictions.images) {
        ImageEntry const* entry = manifest.find_image(im.image_id);
        if (!entry)
            throw std::runtime_error("export_review: prediction references unknown image " +
                                     im.image_id);
        GrayImage raster = read_image((fs::path(image_root) / entry->path).string());
        for (std::size_t i = 0; i < im.detections.size(); ++i) {
            auto const& d = im.detections[i];
            int x0 = std::max(0, static_cast<int>(std::floor(d.bbox.x_min)) - crop_margin);
            int y0 = std::max(0, static_cast<int>(std::floor(d.bbox.y_min)) - crop_margin);
            int x1 = std::min(raster.width,
                              static_cast<int>(std::ceil(d.bbox.x_max)) + crop_margin);
            int y1 = std::min(raster.height,
                              static_cast<int>(std::ceil(d.bbox.y_max)) + crop_margin);
            GrayImage crop = extract_patch(raster, x0, y0, x1 - x0, y1 - y0);
            detail::draw_box(crop,
                             BBox(d.bbox.x_min - x0, d.bbox.y_min - y0,
                                  d.bbox.x_max - x0, d.bbox.y_max - y0),
                             255);
            std::string name = im.image_id + "_p" + std::to_string(i) + ".pgm";
            write_image(crop, (fs::path(out_dir) / name).string());
            csv << detail::csv_escape(im.image_id) << "," << i << ",,\n";
        }
    }
    detail::write_text_file((fs::path(out_dir) / "review.csv").string(), csv.str());
}

inline AdjudicationFile import_adjudication(std::string const& path,
                                            PredictionFile const& predictions) {
    AdjudicationFile adj;
    std::istringstream in(detail::read_text_file(path));
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("adjudication: empty file " + path);
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> cols;
        std::string cur;
        for (char c : line) {
            if (c == ',' && cols.size() < 3) {
                cols.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        cols.push_back(cur);
        if (cols.size() != 4)
            throw std::runtime_error("adjudication line " + std::to_string(lineno) +
                                     ": expected 4 columns");
        AdjudicationRow row;
        row.image_id = cols[0];
        row.prediction_index = std::stoi(cols[1]);
        if (cols[2] == "TP") row.verdict = AdjVerdict::tp;
        else if (cols[2] == "FP") row.verdict = AdjVerdict::fp;
        else if (cols[2] == "uncertain") row.verdict = AdjVerdict::uncertain;
        else
            throw std::runtime_error("adjudication line " + std::to_string(lineno) +
                                     ": bad verdict '" + cols[2] + "'");
        row.note = cols[3];

        ImagePredictions const* im = nullptr;
        for (auto const& p : predictions.images)
            if (p.image_id == row.image_id) im = &p;
        if (!im || row.prediction_index < 0 ||
            row.prediction_index >= static_cast<int>(im->detections.size()))
            throw std::runtime_error("adjudication line " + std::to_string(lineno) +
                                     ": unknown prediction " + row.image_id + "#" +
                                     cols[1]);
        adj.rows.push_back(std::move(row));
    }
    return adj;
}

}  // namespace sahi

#endif  // SAHI_DATASETS_HPP
