#pragma once

// Record files (JSON Lines), versioned JSON configs and result tables.
//
// Detections: {"frame", "pos", "pos_cov"?, "feat", "bbox"?, "gt_id"?}
// Trajectories (GT and predicted): {"frame", "id", "pos", "bbox"?}
//
// Strict mode rejects unknown fields, lenient mode drops them with a
// warning. Every parse error names the source and line.

#include "mot3d/experiment.hpp"

#include <json.hpp>

#include <array>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace mot3d {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

class ParseError : public ValidationError {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : ValidationError(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
          source_(source),
          line_(line) {}
    const std::string& source() const { return source_; }
    std::size_t line() const { return line_; }

private:
    std::string source_;
    std::size_t line_;
};

struct ParseOptions {
    bool strict = false;
    std::vector<std::string>* warnings = nullptr;  // lenient-mode notes; dropped when null
};

/// One line of a detections file, kept as read so that emit and parse are
/// exact inverses.
struct DetectionRecord {
    std::int64_t frame = 0;
    Vec3 pos = Vec3::Zero();
    std::optional<std::array<double, 9>> pos_cov;  // row-major
    std::vector<double> feat;
    std::optional<BBox> bbox;
    std::optional<std::int64_t> gt_id;

    bool operator==(const DetectionRecord& o) const {
        return frame == o.frame && pos == o.pos && pos_cov == o.pos_cov && feat == o.feat && bbox == o.bbox &&
               gt_id == o.gt_id;
    }
};

namespace detail {

/// Reads the fields of one JSON object and reports the ones never asked for.
class FieldReader {
public:
    FieldReader(const json& obj, std::string source, std::size_t line, std::string where)
        : obj_(obj), source_(std::move(source)), line_(line), where_(std::move(where)) {
        if (!obj_.is_object()) fail("expected a JSON object");
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(source_, line_, (where_.empty() ? "" : where_ + ": ") + msg);
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return obj_.contains(key) && !obj_.at(key).is_null();
    }

    const json& raw(const std::string& key) {
        if (!has(key)) fail("missing field '" + key + "'");
        return obj_.at(key);
    }

    std::int64_t integer(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_number_integer()) fail("field '" + key + "' must be an integer");
        return v.get<std::int64_t>();
    }

    double number(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_number()) fail("field '" + key + "' must be a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail("field '" + key + "' must be finite");
        return d;
    }

    bool boolean(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_boolean()) fail("field '" + key + "' must be true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_string()) fail("field '" + key + "' must be a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key, std::optional<std::size_t> size = std::nullopt) {
        const json& v = raw(key);
        if (!v.is_array()) fail("field '" + key + "' must be an array of numbers");
        if (size && v.size() != *size) {
            fail("field '" + key + "' must have " + std::to_string(*size) + " entries, got " + std::to_string(v.size()));
        }
        std::vector<double> out;
        out.reserve(v.size());
        for (const auto& e : v) {
            if (!e.is_number()) fail("field '" + key + "' must contain only numbers");
            const double d = e.get<double>();
            if (!std::isfinite(d)) fail("field '" + key + "' must contain only finite numbers");
            out.push_back(d);
        }
        return out;
    }

    std::vector<std::string> strings(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_array()) fail("field '" + key + "' must be an array of strings");
        std::vector<std::string> out;
        for (const auto& e : v) {
            if (!e.is_string()) fail("field '" + key + "' must contain only strings");
            out.push_back(e.get<std::string>());
        }
        return out;
    }

    FieldReader object(const std::string& key) {
        return FieldReader(raw(key), source_, line_, where_.empty() ? key : where_ + "." + key);
    }

    /// Unknown fields: an error in strict mode, a warning otherwise.
    void finish(const ParseOptions& opts) const {
        for (const auto& [key, value] : obj_.items()) {
            if (seen_.count(key)) continue;
            const std::string msg = "unknown field '" + (where_.empty() ? key : where_ + "." + key) + "'";
            if (opts.strict) throw ParseError(source_, line_, msg);
            if (opts.warnings) {
                opts.warnings->push_back(source_ + (line_ ? ":" + std::to_string(line_) : std::string()) + ": " + msg +
                                         " ignored");
            }
        }
    }

private:
    const json& obj_;
    std::string source_;
    std::size_t line_;
    std::string where_;
    std::set<std::string> seen_;
};

inline Vec3 to_vec3(const std::vector<double>& v) { return Vec3(v[0], v[1], v[2]); }

inline json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline json bbox_json(const BBox& b) { return json::array({b.u, b.v, b.w, b.h}); }

inline BBox read_bbox(FieldReader& r) {
    const auto b = r.numbers("bbox", 4);
    const BBox box{b[0], b[1], b[2], b[3]};
    if (!(box.w > 0.0 && box.h > 0.0)) r.fail("bbox width and height must be positive");
    return box;
}

/// Calls `fn(json, line)` for every non-blank line of a JSONL stream.
template <typename Fn>
void for_each_jsonl(std::istream& in, const std::string& source, Fn&& fn) {
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        if (text.find_first_not_of(" \t") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ParseError(source, line, std::string("malformed JSON: ") + e.what());
        }
        fn(j, line);
    }
    if (in.bad()) throw ParseError(source, 0, "read error");
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open file");
    return in;
}

}  // namespace detail

// ---------------------------------------------------------------- detections

inline DetectionRecord parse_detection_record(const json& j, const std::string& source, std::size_t line,
                                              const ParseOptions& opts = {}) {
    detail::FieldReader r(j, source, line, "");
    DetectionRecord rec;
    rec.frame = r.integer("frame");
    if (rec.frame < 0) r.fail("frame must be non-negative");
    rec.pos = detail::to_vec3(r.numbers("pos", 3));
    if (r.has("pos_cov")) {
        const auto c = r.numbers("pos_cov", 9);
        std::array<double, 9> a{};
        std::copy(c.begin(), c.end(), a.begin());
        rec.pos_cov = a;
    }
    rec.feat = r.numbers("feat");
    if (rec.feat.empty()) r.fail("feat must not be empty");
    if (r.has("bbox")) rec.bbox = detail::read_bbox(r);
    if (r.has("gt_id")) rec.gt_id = r.integer("gt_id");
    r.finish(opts);
    return rec;
}

inline json to_json(const DetectionRecord& rec) {
    json j;
    j["frame"] = rec.frame;
    j["pos"] = detail::vec_json(rec.pos);
    if (rec.pos_cov) j["pos_cov"] = *rec.pos_cov;
    j["feat"] = rec.feat;
    if (rec.bbox) j["bbox"] = detail::bbox_json(*rec.bbox);
    if (rec.gt_id) j["gt_id"] = *rec.gt_id;
    return j;
}

/// Parses a detections stream. All records must share one feature
/// dimension.
inline std::vector<DetectionRecord> parse_detections(std::istream& in, const std::string& source,
                                                     const ParseOptions& opts = {}) {
    std::vector<DetectionRecord> out;
    detail::for_each_jsonl(in, source, [&](const json& j, std::size_t line) {
        out.push_back(parse_detection_record(j, source, line, opts));
        if (out.size() > 1 && out.back().feat.size() != out.front().feat.size()) {
            throw ParseError(source, line,
                             "feature dimension " + std::to_string(out.back().feat.size()) + " differs from " +
                                 std::to_string(out.front().feat.size()) + " on earlier lines");
        }
    });
    return out;
}

inline std::vector<DetectionRecord> read_detections(const std::string& path, const ParseOptions& opts = {}) {
    auto in = detail::open_input(path);
    return parse_detections(in, path, opts);
}

inline void write_detections(std::ostream& out, std::span<const DetectionRecord> records) {
    for (const auto& r : records) out << to_json(r).dump() << '\n';
}

inline DetectionRecord to_record(const Detection& d, std::optional<std::int64_t> gt_id = std::nullopt,
                                 bool with_cov = true) {
    DetectionRecord r;
    r.frame = d.frame;
    r.pos = d.position.mean();
    if (with_cov) {
        std::array<double, 9> a{};
        for (int i = 0; i < 3; ++i) {
            for (int k = 0; k < 3; ++k) a[3 * i + k] = d.position.cov()(i, k);
        }
        r.pos_cov = a;
    }
    r.feat.assign(d.feature.values().data(), d.feature.values().data() + d.feature.dim());
    r.bbox = d.bbox;
    r.gt_id = gt_id;
    return r;
}

/// Builds a validated Detection. Records without "pos_cov" take
/// `default_cov`.
inline Detection to_detection(const DetectionRecord& r, const Mat3& default_cov) {
    Mat3 cov = default_cov;
    if (r.pos_cov) {
        for (int i = 0; i < 3; ++i) {
            for (int k = 0; k < 3; ++k) cov(i, k) = (*r.pos_cov)[3 * i + k];
        }
    }
    Detection d{Gaussian3(r.pos, cov), r.bbox, FeatureVector::from_std(r.feat), r.frame};
    d.validate();
    return d;
}

/// Groups detections into frames, filling gaps between the first and last
/// frame with empty frames so the tracker predicts through them.
inline std::vector<DetectionFrame> group_frames(std::span<const DetectionRecord> records, const Mat3& default_cov) {
    std::vector<DetectionFrame> frames;
    if (records.empty()) return frames;
    std::int64_t lo = records.front().frame, hi = lo;
    for (const auto& r : records) {
        lo = std::min(lo, r.frame);
        hi = std::max(hi, r.frame);
    }
    frames.resize(static_cast<std::size_t>(hi - lo + 1));
    for (std::size_t k = 0; k < frames.size(); ++k) frames[k].index = lo + static_cast<std::int64_t>(k);
    for (const auto& r : records) frames[static_cast<std::size_t>(r.frame - lo)].detections.push_back(to_detection(r, default_cov));
    return frames;
}

/// Labeled features of the records that carry a "gt_id".
inline std::vector<LabeledFeature> labeled_features(std::span<const DetectionRecord> records) {
    std::vector<LabeledFeature> out;
    for (const auto& r : records) {
        if (r.gt_id) out.push_back({*r.gt_id, FeatureVector::from_std(r.feat)});
    }
    return out;
}

// -------------------------------------------------------------- trajectories

inline TrajectoryRecord parse_trajectory_record(const json& j, const std::string& source, std::size_t line,
                                                const ParseOptions& opts = {}) {
    detail::FieldReader r(j, source, line, "");
    TrajectoryRecord rec;
    rec.frame = r.integer("frame");
    if (rec.frame < 0) r.fail("frame must be non-negative");
    rec.id = r.integer("id");
    rec.pos = detail::to_vec3(r.numbers("pos", 3));
    if (r.has("bbox")) rec.bbox = detail::read_bbox(r);
    r.finish(opts);
    return rec;
}

inline json to_json(const TrajectoryRecord& rec) {
    json j;
    j["frame"] = rec.frame;
    j["id"] = rec.id;
    j["pos"] = detail::vec_json(rec.pos);
    if (rec.bbox) j["bbox"] = detail::bbox_json(*rec.bbox);
    return j;
}

/// Parses a trajectory stream; duplicate (frame, id) pairs are rejected
/// with the line of the second occurrence.
inline TrajectorySet parse_trajectories(std::istream& in, const std::string& source, const ParseOptions& opts = {}) {
    TrajectorySet out;
    std::set<std::pair<std::int64_t, std::int64_t>> keys;
    detail::for_each_jsonl(in, source, [&](const json& j, std::size_t line) {
        auto rec = parse_trajectory_record(j, source, line, opts);
        if (!keys.insert({rec.frame, rec.id}).second) {
            throw ParseError(source, line,
                             "duplicate record for id " + std::to_string(rec.id) + " in frame " + std::to_string(rec.frame));
        }
        out.records.push_back(std::move(rec));
    });
    return out;
}

inline TrajectorySet read_trajectories(const std::string& path, const ParseOptions& opts = {}) {
    auto in = detail::open_input(path);
    return parse_trajectories(in, path, opts);
}

inline void write_trajectories(std::ostream& out, const TrajectorySet& set) {
    for (const auto& r : set.records) out << to_json(r).dump() << '\n';
}

// ------------------------------------------------------------------- configs

/// Everything a config file can set. Sections that are absent keep their
/// defaults.
struct Config {
    ExperimentSpec experiment;  // also holds the scene and the tracker settings
};

namespace detail {

inline void read_path(FieldReader r, PathSpec& p, const ParseOptions& opts) {
    if (r.has("n_heights")) p.n_heights = static_cast<int>(r.integer("n_heights"));
    if (r.has("n_azimuths")) p.n_azimuths = static_cast<int>(r.integer("n_azimuths"));
    if (r.has("radius")) p.radius = r.number("radius");
    if (r.has("azimuth_span")) p.azimuth_span = r.number("azimuth_span");
    if (r.has("azimuth_start")) p.azimuth_start = r.number("azimuth_start");
    if (r.has("height_min")) p.height_min = r.number("height_min");
    if (r.has("height_max")) p.height_max = r.number("height_max");
    if (r.has("fov_horizontal")) p.fov_horizontal = r.number("fov_horizontal");
    if (r.has("fov_vertical")) p.fov_vertical = r.number("fov_vertical");
    if (r.has("max_range")) p.max_range = r.number("max_range");
    if (r.has("serpentine")) p.serpentine = r.boolean("serpentine");
    r.finish(opts);
}

inline void read_noise(FieldReader r, NoiseSpec& n, const ParseOptions& opts) {
    if (r.has("sigma_pos_lateral")) n.sigma_pos_lateral = r.number("sigma_pos_lateral");
    if (r.has("sigma_pos_ray")) n.sigma_pos_ray = r.number("sigma_pos_ray");
    if (r.has("ray_bias")) n.ray_bias = r.number("ray_bias");
    if (r.has("detect_prob_visible")) n.detect_prob_visible = r.number("detect_prob_visible");
    if (r.has("occlusion_exponent")) n.occlusion_exponent = r.number("occlusion_exponent");
    if (r.has("clutter_rate")) n.clutter_rate = r.number("clutter_rate");
    if (r.has("feat_dim")) n.feat_dim = static_cast<int>(r.integer("feat_dim"));
    if (r.has("sigma_feat")) n.sigma_feat = r.number("sigma_feat");
    if (r.has("min_center_angle")) n.min_center_angle = r.number("min_center_angle");
    if (r.has("view_feat_sigma")) n.view_feat_sigma = r.number("view_feat_sigma");
    if (r.has("registration_sigma")) n.registration_sigma = r.number("registration_sigma");
    if (r.has("registration_wavelength")) n.registration_wavelength = r.number("registration_wavelength");
    if (r.has("occlusion")) n.occlusion = r.boolean("occlusion");
    if (r.has("emit_bbox")) n.emit_bbox = r.boolean("emit_bbox");
    if (r.has("note")) (void)r.string("note");
    r.finish(opts);
}

inline void read_scene(FieldReader r, SceneSpec& s, const ParseOptions& opts) {
    if (r.has("seed")) s.seed = static_cast<std::uint64_t>(r.integer("seed"));
    if (r.has("n_trusses")) s.n_trusses = static_cast<int>(r.integer("n_trusses"));
    if (r.has("tomatoes_per_truss")) {
        const auto v = r.numbers("tomatoes_per_truss", 2);
        if (v[0] != std::floor(v[0]) || v[1] != std::floor(v[1])) r.fail("tomatoes_per_truss must hold integers");
        s.tomatoes_min = static_cast<int>(v[0]);
        s.tomatoes_max = static_cast<int>(v[1]);
    }
    if (r.has("stem_height")) s.stem_height = r.number("stem_height");
    if (r.has("truss_radius")) s.truss_radius = r.number("truss_radius");
    if (r.has("truss_offset")) s.truss_offset = r.number("truss_offset");
    if (r.has("tomato_radius")) s.tomato_radius = r.number("tomato_radius");
    if (r.has("n_leaves")) s.n_leaves = static_cast<int>(r.integer("n_leaves"));
    if (r.has("leaf_radius")) s.leaf_radius = r.number("leaf_radius");
    if (r.has("leaf_density_gradient")) s.leaf_density_gradient = r.number("leaf_density_gradient");
    if (r.has("path")) read_path(r.object("path"), s.path, opts);
    if (r.has("noise")) read_noise(r.object("noise"), s.noise, opts);
    r.finish(opts);
}

inline Mat3 read_cov(FieldReader& r, const std::string& matrix_key, const std::string& sigma_key, const Mat3& fallback) {
    const bool has_m = r.has(matrix_key), has_s = r.has(sigma_key);
    if (has_m && has_s) r.fail("give either '" + matrix_key + "' or '" + sigma_key + "', not both");
    if (has_s) {
        const double s = r.number(sigma_key);
        if (!(s >= 0.0)) r.fail("'" + sigma_key + "' must be non-negative");
        return Mat3::Identity() * (s * s);
    }
    if (has_m) {
        const auto v = r.numbers(matrix_key, 9);
        Mat3 m;
        for (int i = 0; i < 3; ++i) {
            for (int k = 0; k < 3; ++k) m(i, k) = v[3 * i + k];
        }
        return m;
    }
    return fallback;
}

inline void read_tracker(FieldReader r, TrackerConfig& t, const ParseOptions& opts) {
    if (r.has("pos_gate")) t.gate.pos_gate = r.number("pos_gate");
    if (r.has("feat_gate")) t.gate.feat_gate = r.number("feat_gate");
    if (r.has("lambda")) t.gate.lambda = r.number("lambda");
    t.meas_cov_default = read_cov(r, "meas_cov", "sigma_meas", t.meas_cov_default);
    t.process_noise = read_cov(r, "process_noise", "sigma_process", t.process_noise);
    if (r.has("feature_cap")) {
        const auto cap = r.integer("feature_cap");
        if (cap < 1) r.fail("feature_cap must be positive");
        t.feature_cap = static_cast<std::size_t>(cap);
    }
    r.finish(opts);
}

inline void read_similarity(FieldReader r, SimilarityConfig& s, const ParseOptions& opts) {
    if (r.has("kind")) {
        const auto k = r.string("kind");
        if (k == "distance3d") s.kind = SimilarityKind::distance3d;
        else if (k == "iou2d") s.kind = SimilarityKind::iou2d;
        else r.fail("similarity kind must be distance3d or iou2d");
    }
    if (r.has("d_max")) s.d_max = r.number("d_max");
    if (r.has("alpha_grid")) s.alpha_grid = r.numbers("alpha_grid");
    r.finish(opts);
}

inline void read_presets(const json& arr, const std::string& source, std::vector<OperatingPoint>& out,
                         const ParseOptions& opts) {
    if (!arr.is_array() || arr.empty()) throw ParseError(source, 0, "operating_point_presets must be a non-empty array");
    out.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
        FieldReader r(arr[i], source, 0, "operating_point_presets[" + std::to_string(i) + "]");
        OperatingPoint op;
        op.name = r.string("name");
        if (r.has("target_det_re")) op.target_det_re = r.number("target_det_re");
        if (r.has("target_det_pr")) op.target_det_pr = r.number("target_det_pr");
        op.detect_prob_visible = r.number("detect_prob_visible");
        op.clutter_rate = r.number("clutter_rate");
        r.finish(opts);
        for (const auto& prev : out) {
            if (prev.name == op.name) r.fail("duplicate operating point '" + op.name + "'");
        }
        out.push_back(op);
    }
}

inline void read_experiment(FieldReader r, ExperimentSpec& e, const ParseOptions& opts) {
    if (r.has("lambda_grid")) e.lambda_grid = r.numbers("lambda_grid");
    if (r.has("orders")) {
        e.orders.clear();
        for (const auto& s : r.strings("orders")) {
            try {
                e.orders.push_back(parse_frame_order(s));
            } catch (const ValidationError& err) {
                r.fail(err.what());
            }
        }
    }
    if (r.has("operating_points")) e.operating_points = r.strings("operating_points");
    if (r.has("n_subsets")) e.n_subsets = static_cast<int>(r.integer("n_subsets"));
    if (r.has("subset_size")) {
        const auto n = r.integer("subset_size");
        if (n < 1) r.fail("subset_size must be positive");
        e.subset_size = static_cast<std::size_t>(n);
    }
    if (r.has("seed")) e.seed = static_cast<std::uint64_t>(r.integer("seed"));
    if (r.has("feat_gate")) e.feat_gate = r.number("feat_gate");
    if (r.has("match_threshold")) e.match_threshold = r.number("match_threshold");
    if (r.has("compare_to_baseline")) e.compare_to_baseline = r.boolean("compare_to_baseline");
    if (r.has("similarity")) read_similarity(r.object("similarity"), e.similarity, opts);
    r.finish(opts);
}

}  // namespace detail

inline Config parse_config(const json& j, const std::string& source, const ParseOptions& opts = {}) {
    detail::FieldReader r(j, source, 0, "");
    if (!r.has("schema_version")) r.fail("missing field 'schema_version'");
    const json& v = r.raw("schema_version");
    if (!v.is_number_integer() || v.get<std::int64_t>() != kSchemaVersion) {
        r.fail("unsupported schema_version " + v.dump() + " (this build reads version " + std::to_string(kSchemaVersion) + ")");
    }
    Config c;
    if (r.has("description")) (void)r.string("description");
    if (r.has("scene")) detail::read_scene(r.object("scene"), c.experiment.scene, opts);
    if (r.has("tracker")) detail::read_tracker(r.object("tracker"), c.experiment.tracker, opts);
    if (r.has("experiment")) detail::read_experiment(r.object("experiment"), c.experiment, opts);
    if (r.has("operating_point_presets")) {
        detail::read_presets(r.raw("operating_point_presets"), source, c.experiment.presets, opts);
    }
    r.finish(opts);
    try {
        c.experiment.validate();
    } catch (const ParseError&) {
        throw;
    } catch (const ValidationError& e) {
        throw ParseError(source, 0, e.what());
    }
    return c;
}

inline Config read_config(const std::string& path, const ParseOptions& opts = {}) {
    auto in = detail::open_input(path);
    json j;
    try {
        j = json::parse(in, nullptr, true, false);
    } catch (const json::parse_error& e) {
        throw ParseError(path, 0, std::string("malformed JSON: ") + e.what());
    }
    return parse_config(j, path, opts);
}

inline json to_json(const Config& c) {
    const ExperimentSpec& e = c.experiment;
    const SceneSpec& s = e.scene;
    auto cov = [](const Mat3& m) {
        json a = json::array();
        for (int i = 0; i < 3; ++i) {
            for (int k = 0; k < 3; ++k) a.push_back(m(i, k));
        }
        return a;
    };
    json j;
    j["schema_version"] = kSchemaVersion;
    j["scene"] = {
        {"seed", s.seed},
        {"n_trusses", s.n_trusses},
        {"tomatoes_per_truss", {s.tomatoes_min, s.tomatoes_max}},
        {"stem_height", s.stem_height},
        {"truss_radius", s.truss_radius},
        {"truss_offset", s.truss_offset},
        {"tomato_radius", s.tomato_radius},
        {"n_leaves", s.n_leaves},
        {"leaf_radius", s.leaf_radius},
        {"leaf_density_gradient", s.leaf_density_gradient},
        {"path",
         {{"n_heights", s.path.n_heights},
          {"n_azimuths", s.path.n_azimuths},
          {"radius", s.path.radius},
          {"azimuth_span", s.path.azimuth_span},
          {"azimuth_start", s.path.azimuth_start},
          {"height_min", s.path.height_min},
          {"height_max", s.path.height_max},
          {"fov_horizontal", s.path.fov_horizontal},
          {"fov_vertical", s.path.fov_vertical},
          {"max_range", s.path.max_range},
          {"serpentine", s.path.serpentine}}},
        {"noise",
         {{"sigma_pos_lateral", s.noise.sigma_pos_lateral},
          {"sigma_pos_ray", s.noise.sigma_pos_ray},
          {"ray_bias", s.noise.ray_bias},
          {"detect_prob_visible", s.noise.detect_prob_visible},
          {"occlusion_exponent", s.noise.occlusion_exponent},
          {"clutter_rate", s.noise.clutter_rate},
          {"feat_dim", s.noise.feat_dim},
          {"sigma_feat", s.noise.sigma_feat},
          {"min_center_angle", s.noise.min_center_angle},
          {"view_feat_sigma", s.noise.view_feat_sigma},
          {"registration_sigma", s.noise.registration_sigma},
          {"registration_wavelength", s.noise.registration_wavelength},
          {"occlusion", s.noise.occlusion},
          {"emit_bbox", s.noise.emit_bbox}}},
    };
    j["tracker"] = {
        {"pos_gate", e.tracker.gate.pos_gate},
        {"feat_gate", e.tracker.gate.feat_gate},
        {"lambda", e.tracker.gate.lambda},
        {"meas_cov", cov(e.tracker.meas_cov_default)},
        {"process_noise", cov(e.tracker.process_noise)},
    };
    if (e.tracker.feature_cap) j["tracker"]["feature_cap"] = *e.tracker.feature_cap;
    json orders = json::array();
    for (auto o : e.orders) orders.push_back(to_string(o));
    j["experiment"] = {
        {"lambda_grid", e.lambda_grid},
        {"orders", orders},
        {"operating_points", e.operating_points},
        {"n_subsets", e.n_subsets},
        {"subset_size", e.subset_size},
        {"seed", e.seed},
        {"match_threshold", e.match_threshold},
        {"compare_to_baseline", e.compare_to_baseline},
        {"similarity",
         {{"kind", e.similarity.kind == SimilarityKind::distance3d ? "distance3d" : "iou2d"},
          {"d_max", e.similarity.d_max},
          {"alpha_grid", e.similarity.alpha_grid}}},
    };
    if (e.feat_gate) j["experiment"]["feat_gate"] = *e.feat_gate;
    json presets = json::array();
    for (const auto& op : e.presets) {
        presets.push_back({{"name", op.name},
                           {"target_det_re", op.target_det_re},
                           {"target_det_pr", op.target_det_pr},
                           {"detect_prob_visible", op.detect_prob_visible},
                           {"clutter_rate", op.clutter_rate}});
    }
    j["operating_point_presets"] = presets;
    return j;
}

// ------------------------------------------------------------------- reports

namespace detail {

inline std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string pct(double v) { return fixed(100.0 * v, 2); }

/// Quotes a CSV field when it contains a separator, quote or newline.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace detail

inline json to_json(const MetricReport& r) {
    return {{"HOTA", r.hota},     {"DetRe", r.det_re}, {"DetPr", r.det_pr}, {"DetA", r.det_a},
            {"AssA", r.ass_a},    {"LocA", r.loc_a},   {"MOTA", r.mota},    {"FP", r.fp},
            {"FN", r.fn},         {"IDSW", r.idsw},    {"num_gt", r.num_gt}, {"num_pred", r.num_pred}};
}

/// Header plus one row; rates in percent with two decimals.
inline void write_report_csv(std::ostream& out, const MetricReport& r) {
    out << "HOTA,DetRe,DetPr,DetA,AssA,LocA,MOTA,FP,FN,IDSW,num_gt,num_pred\n";
    using detail::pct;
    out << pct(r.hota) << ',' << pct(r.det_re) << ',' << pct(r.det_pr) << ',' << pct(r.det_a) << ',' << pct(r.ass_a)
        << ',' << pct(r.loc_a) << ',' << pct(r.mota) << ',' << r.fp << ',' << r.fn << ',' << r.idsw << ','
        << r.num_gt << ',' << r.num_pred << '\n';
}

/// Per-subset rows followed by one mean row per (operating point, order,
/// lambda). Star columns appear only when some lambda is compared with the
/// baseline.
inline void write_results_csv(std::ostream& out, const ResultTable& table) {
    using detail::fixed;
    using detail::pct;
    const bool sig = table.has_significance();
    out << "operating_point,order,lambda,subset,HOTA,DetRe,DetPr,DetA,AssA,LocA,MOTA,FP,FN,IDSW,status";
    if (sig) {
        for (const auto& m : compared_metrics()) out << ',' << m << "_p," << m << "_sig";
    }
    out << '\n';
    const std::string empty_sig = [&] {
        std::string s;
        if (sig) {
            for (std::size_t i = 0; i < compared_metrics().size(); ++i) s += ",,";
        }
        return s;
    }();
    for (const auto& c : table.cells) {
        out << detail::csv_field(c.key.operating_point) << ',' << to_string(c.key.order) << ','
            << format_lambda(c.key.lambda) << ',' << c.key.subset << ',';
        if (c.error) {
            out << ",,,,,,,,,," << detail::csv_field("error: " + *c.error);
        } else {
            const auto& r = c.report;
            out << pct(r.hota) << ',' << pct(r.det_re) << ',' << pct(r.det_pr) << ',' << pct(r.det_a) << ','
                << pct(r.ass_a) << ',' << pct(r.loc_a) << ',' << pct(r.mota) << ',' << r.fp << ',' << r.fn << ','
                << r.idsw << ",ok";
        }
        out << empty_sig << '\n';
    }
    for (const auto& a : table.aggregates) {
        out << detail::csv_field(a.operating_point) << ',' << to_string(a.order) << ',' << format_lambda(a.lambda)
            << ",mean,";
        if (a.n_ok == 0) {
            out << ",,,,,,,,,,no successful subsets";
        } else {
            const auto& r = a.mean;
            out << pct(r.hota) << ',' << pct(r.det_re) << ',' << pct(r.det_pr) << ',' << pct(r.det_a) << ','
                << pct(r.ass_a) << ',' << pct(r.loc_a) << ',' << pct(r.mota) << ',' << fixed(a.mean_fp, 2) << ','
                << fixed(a.mean_fn, 2) << ',' << fixed(a.mean_idsw, 2) << ",ok";
        }
        if (sig) {
            for (const auto& m : compared_metrics()) {
                const auto it = a.vs_baseline.find(m);
                if (it == a.vs_baseline.end()) {
                    out << ",,";
                } else {
                    char buf[32];
                    std::snprintf(buf, sizeof buf, "%.4g", it->second.p);
                    out << ',' << buf << ',' << it->second.stars;
                }
            }
        }
        out << '\n';
    }
}

inline json to_json(const ResultTable& table) {
    json j;
    j["lambda_grid"] = table.lambda_grid;
    j["warnings"] = table.warnings;
    j["feature_gates"] = table.feature_gates;
    json audits = json::object();
    for (const auto& [name, a] : table.detection_audits) {
        audits[name] = {{"gt_records", a.gt_records},
                        {"true_detections", a.true_detections},
                        {"detections", a.detections},
                        {"recall", a.recall()},
                        {"precision", a.precision()}};
    }
    j["detection_audits"] = audits;
    json cells = json::array();
    for (const auto& c : table.cells) {
        json cj = {{"operating_point", c.key.operating_point},
                   {"order", to_string(c.key.order)},
                   {"lambda", c.key.lambda},
                   {"subset", c.key.subset}};
        if (c.error) {
            cj["error"] = *c.error;
        } else {
            cj["metrics"] = to_json(c.report);
        }
        cells.push_back(cj);
    }
    j["cells"] = cells;
    json aggs = json::array();
    for (const auto& a : table.aggregates) {
        json m = to_json(a.mean);
        m["FP"] = a.mean_fp;
        m["FN"] = a.mean_fn;
        m["IDSW"] = a.mean_idsw;
        m.erase("num_gt");
        m.erase("num_pred");
        json aj = {{"operating_point", a.operating_point},
                   {"order", to_string(a.order)},
                   {"lambda", a.lambda},
                   {"n_ok", a.n_ok},
                   {"mean", m}};
        json cmp = json::object();
        for (const auto& [metric, c] : a.vs_baseline) cmp[metric] = {{"t", c.t}, {"p", c.p}, {"stars", c.stars}};
        aj["vs_baseline"] = cmp;
        aggs.push_back(aj);
    }
    j["aggregates"] = aggs;
    return j;
}

/// Long format for plotting metric over lambda: one row per cell and
/// metric, values in percent (counts for IDSW, FP, FN).
inline void write_sweep_long_csv(std::ostream& out, const ResultTable& table) {
    static const std::vector<std::string> metrics = {"HOTA", "DetA", "AssA", "DetRe", "DetPr", "MOTA", "IDSW", "FP", "FN"};
    out << "operating_point,order,lambda,subset,metric,value\n";
    for (const auto& c : table.cells) {
        if (c.error) continue;
        for (const auto& m : metrics) {
            const double v = metric_value(c.report, m);
            const bool count = m == "IDSW" || m == "FP" || m == "FN";
            out << detail::csv_field(c.key.operating_point) << ',' << to_string(c.key.order) << ','
                << format_lambda(c.key.lambda) << ',' << c.key.subset << ',' << m << ','
                << (count ? detail::fixed(v, 0) : detail::fixed(100.0 * v, 4)) << '\n';
        }
    }
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << content;
    if (!out) throw Error("write failed for " + path);
}

}  // namespace mot3d
