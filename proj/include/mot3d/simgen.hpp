#pragma once

// Deterministic synthetic greenhouse scenes: tomato trusses along a stem,
// occluding leaves, a semi-cylindrical camera path around the plant and a
// statistical stand-in for the detector and the appearance-feature network.

#include "mot3d/core.hpp"
#include "mot3d/rng.hpp"
#include "mot3d/trajectory.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mot3d {

struct PathSpec {
    int n_heights = 10;
    int n_azimuths = 10;
    double radius = 0.55;                       // meters from the stem axis
    double azimuth_span = std::numbers::pi;     // endpoints inclusive
    double azimuth_start = 0.0;
    double height_min = 0.35;
    double height_max = 1.45;
    double fov_horizontal = 70.0 * std::numbers::pi / 180.0;
    double fov_vertical = 55.0 * std::numbers::pi / 180.0;
    double max_range = 1.5;
    bool serpentine = true;  // alternate sweep direction between height levels

    void validate() const {
        if (n_heights < 1 || n_azimuths < 1) throw ValidationError("PathSpec: need at least one height and azimuth");
        if (!(radius > 0.0)) throw ValidationError("PathSpec: radius must be positive");
        if (!(azimuth_span >= 0.0)) throw ValidationError("PathSpec: azimuth_span must be non-negative");
        if (!(height_max >= height_min)) throw ValidationError("PathSpec: height range is inverted");
        if (!(fov_horizontal > 0.0 && fov_horizontal < std::numbers::pi) ||
            !(fov_vertical > 0.0 && fov_vertical < std::numbers::pi)) {
            throw ValidationError("PathSpec: fields of view must lie in (0, pi)");
        }
        if (!(max_range > 0.0)) throw ValidationError("PathSpec: max_range must be positive");
    }
};

/// Detector and feature-extractor stand-in. Values are modelling choices,
/// not measured properties of a real sensor.
struct NoiseSpec {
    double sigma_pos_lateral = 0.003;
    double sigma_pos_ray = 0.006;
    double ray_bias = 0.005;  // systematic shift of the fitted center toward the camera
    double detect_prob_visible = 0.8;
    double occlusion_exponent = 0.5;  // detect prob scales with (visible share)^exponent
    double clutter_rate = 2.0;  // expected false detections per frame
    int feat_dim = 64;
    double sigma_feat = 0.5;
    double min_center_angle = std::numbers::pi / 4.0;
    double view_feat_sigma = 0.0;  // optional azimuth-aligned feature drift
    // Per-viewpoint registration error shared by all detections of a view: a
    // smooth random field over the camera path (robot-to-camera calibration
    // drift). Neighbouring viewpoints get similar offsets.
    double registration_sigma = 0.025;
    double registration_wavelength = 1.5;  // in units of the path extent
    bool occlusion = true;
    bool emit_bbox = false;

    void validate() const {
        if (!(sigma_pos_lateral >= 0.0 && sigma_pos_ray >= 0.0 && sigma_feat >= 0.0 && view_feat_sigma >= 0.0)) {
            throw ValidationError("NoiseSpec: sigma values must be non-negative");
        }
        if (!(detect_prob_visible >= 0.0 && detect_prob_visible <= 1.0)) {
            throw ValidationError("NoiseSpec: detect_prob_visible must lie in [0, 1]");
        }
        if (!(occlusion_exponent >= 0.0)) throw ValidationError("NoiseSpec: occlusion_exponent must be non-negative");
        if (!(clutter_rate >= 0.0)) throw ValidationError("NoiseSpec: clutter_rate must be non-negative");
        if (feat_dim < 1) throw ValidationError("NoiseSpec: feat_dim must be positive");
        if (!(min_center_angle >= 0.0 && min_center_angle <= std::numbers::pi)) {
            throw ValidationError("NoiseSpec: min_center_angle must lie in [0, pi]");
        }
        if (!std::isfinite(ray_bias)) throw ValidationError("NoiseSpec: ray_bias must be finite");
        if (!(registration_sigma >= 0.0)) throw ValidationError("NoiseSpec: registration_sigma must be non-negative");
        if (!(registration_wavelength > 0.0)) throw ValidationError("NoiseSpec: registration_wavelength must be positive");
    }
};

struct SceneSpec {
    std::uint64_t seed = 7;
    int n_trusses = 7;
    int tomatoes_min = 5;
    int tomatoes_max = 9;
    double stem_height = 1.8;
    double truss_radius = 0.07;  // tomato centers lie within this distance of the truss center
    double truss_offset = 0.12;  // horizontal distance of truss centers from the stem
    double tomato_radius = 0.03;
    int n_leaves = 14;
    double leaf_radius = 0.11;
    double leaf_density_gradient = 2.0;  // leaf density grows as 1 + g * (z / stem_height)
    PathSpec path;
    NoiseSpec noise;

    void validate() const {
        if (n_trusses < 0 || n_leaves < 0) throw ValidationError("SceneSpec: counts must be non-negative");
        if (tomatoes_min < 0 || tomatoes_max < tomatoes_min) {
            throw ValidationError("SceneSpec: tomatoes_per_truss range is invalid");
        }
        if (!(stem_height > 0.0 && truss_radius > 0.0 && truss_offset >= 0.0 && tomato_radius > 0.0 &&
              leaf_radius > 0.0)) {
            throw ValidationError("SceneSpec: geometric quantities must be positive");
        }
        if (!(leaf_density_gradient >= 0.0)) throw ValidationError("SceneSpec: leaf_density_gradient must be non-negative");
        path.validate();
        noise.validate();
    }
};

/// Named detector regimes mirroring three confidence thresholds.
struct OperatingPoint {
    std::string name;
    double target_det_re = 0.0;  // percent
    double target_det_pr = 0.0;  // percent
    double detect_prob_visible = 0.0;
    double clutter_rate = 0.0;

    NoiseSpec apply(NoiseSpec base) const {
        base.detect_prob_visible = detect_prob_visible;
        base.clutter_rate = clutter_rate;
        return base;
    }
};

/// Presets calibrated once with tools/calibrate_presets against the default
/// scene and frozen here.
inline const std::vector<OperatingPoint>& operating_points() {
    static const std::vector<OperatingPoint> presets = {
        {"low", 67.76, 68.83, 0.8798, 4.9097},
        {"mid", 60.83, 82.33, 0.7864, 2.1183},
        {"high", 46.71, 88.07, 0.6107, 0.9592},
    };
    return presets;
}

inline const OperatingPoint& operating_point(const std::string& name,
                                             const std::vector<OperatingPoint>& presets = operating_points()) {
    for (const auto& op : presets) {
        if (op.name == name) return op;
    }
    std::string known;
    for (const auto& op : presets) known += (known.empty() ? "" : ", ") + op.name;
    throw ValidationError("unknown operating point '" + name + "' (known: " + known + ")");
}

struct Tomato {
    std::int64_t id = 0;
    Vec3 center = Vec3::Zero();
    double radius = 0.0;
};

struct Leaf {
    Vec3 center = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
    double radius = 0.0;
};

struct Scene {
    std::vector<Tomato> tomatoes;
    std::vector<Leaf> leaves;
};

struct Viewpoint {
    Vec3 position = Vec3::Zero();
    Vec3 look_at = Vec3::Zero();
    double azimuth = 0.0;
    int height_index = 0;
    int azimuth_index = 0;
};

namespace detail {

inline Vec3 random_unit3(Rng& rng) {
    for (;;) {
        Vec3 v(rng.normal(), rng.normal(), rng.normal());
        const double n = v.norm();
        if (n > 1e-12) return v / n;
    }
}

inline Vec3 random_in_ball(Rng& rng, double radius) {
    for (;;) {
        Vec3 v(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
        if (v.squaredNorm() <= 1.0) return v * radius;
    }
}

/// Inverse CDF of the density 1 + g x on [0, 1].
inline double sample_linear_density(Rng& rng, double g) {
    const double u = rng.uniform();
    if (g <= 1e-12) return u;
    const double target = u * (1.0 + 0.5 * g);
    return (-1.0 + std::sqrt(1.0 + 2.0 * g * target)) / g;
}

/// Orthonormal pair spanning the plane orthogonal to unit vector `u`.
inline std::pair<Vec3, Vec3> orthonormal_basis(const Vec3& u) {
    Vec3 e1 = u.cross(Vec3::UnitZ());
    if (e1.norm() < 1e-9) e1 = u.cross(Vec3::UnitX());
    e1.normalize();
    Vec3 e2 = u.cross(e1);
    return {e1, e2};
}

inline bool segment_hits_disc(const Vec3& a, const Vec3& b, const Leaf& leaf) {
    const Vec3 d = b - a;
    const double denom = leaf.normal.dot(d);
    if (std::fabs(denom) < 1e-15) return false;
    const double t = leaf.normal.dot(leaf.center - a) / denom;
    if (t <= 0.0 || t >= 1.0) return false;
    return (a + t * d - leaf.center).norm() <= leaf.radius;
}

inline bool segment_hits_sphere(const Vec3& a, const Vec3& b, const Vec3& c, double r) {
    const Vec3 d = b - a;
    const double len2 = d.squaredNorm();
    double t = len2 > 0.0 ? (c - a).dot(d) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (a + t * d - c).norm() < r;
}

}  // namespace detail

/// Tomatoes grouped in trusses along the stem plus leaf discs whose density
/// increases with height.
inline Scene generate_scene(const SceneSpec& spec) {
    spec.validate();
    Rng rng(spec.seed, {static_cast<std::uint64_t>(Stream::scene)});
    Scene scene;
    const double min_dist = 1.5 * spec.tomato_radius;
    constexpr int kMaxRetries = 2000;

    std::int64_t next_id = 0;
    for (int k = 0; k < spec.n_trusses; ++k) {
        const double slot = (k + 0.5) / static_cast<double>(spec.n_trusses);
        const double h = spec.stem_height * (0.15 + 0.75 * slot) + rng.uniform(-0.03, 0.03);
        const double phi = rng.uniform(0.0, std::numbers::pi);
        const Vec3 truss_center(spec.truss_offset * std::cos(phi), spec.truss_offset * std::sin(phi), h);
        const int count = spec.tomatoes_min + static_cast<int>(rng.below(
                                                   static_cast<std::uint64_t>(spec.tomatoes_max - spec.tomatoes_min + 1)));
        for (int t = 0; t < count; ++t) {
            bool placed = false;
            for (int attempt = 0; attempt < kMaxRetries && !placed; ++attempt) {
                const Vec3 c = truss_center + detail::random_in_ball(rng, spec.truss_radius);
                const bool clear = std::none_of(scene.tomatoes.begin(), scene.tomatoes.end(),
                                                [&](const Tomato& o) { return (o.center - c).norm() < min_dist; });
                if (clear) {
                    scene.tomatoes.push_back({next_id++, c, spec.tomato_radius});
                    placed = true;
                }
            }
            if (!placed) {
                throw ValidationError("generate_scene: could not place tomato " + std::to_string(t) + " of truss " +
                                      std::to_string(k) + "; use fewer tomatoes per truss or a larger truss_radius");
            }
        }
    }

    for (int k = 0; k < spec.n_leaves; ++k) {
        const double z = spec.stem_height * (0.1 + 0.9 * detail::sample_linear_density(rng, spec.leaf_density_gradient));
        const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double dist = rng.uniform(0.08, 0.28);
        Leaf leaf;
        leaf.center = Vec3(dist * std::cos(phi), dist * std::sin(phi), z);
        leaf.normal = (Vec3::UnitZ() + 0.9 * detail::random_unit3(rng)).normalized();
        leaf.radius = spec.leaf_radius;
        scene.leaves.push_back(leaf);
    }
    return scene;
}

/// n_heights x n_azimuths poses on a half cylinder around the stem, each
/// aimed at the stem axis point of its own height.
inline std::vector<Viewpoint> camera_path(const PathSpec& path) {
    path.validate();
    std::vector<Viewpoint> out;
    out.reserve(static_cast<std::size_t>(path.n_heights * path.n_azimuths));
    for (int hi = 0; hi < path.n_heights; ++hi) {
        const double h = path.n_heights == 1
                             ? 0.5 * (path.height_min + path.height_max)
                             : path.height_min + (path.height_max - path.height_min) * hi / (path.n_heights - 1.0);
        for (int k = 0; k < path.n_azimuths; ++k) {
            const int ai = (path.serpentine && hi % 2 == 1) ? path.n_azimuths - 1 - k : k;
            const double theta = path.n_azimuths == 1
                                     ? path.azimuth_start + 0.5 * path.azimuth_span
                                     : path.azimuth_start + path.azimuth_span * ai / (path.n_azimuths - 1.0);
            Viewpoint vp;
            vp.position = Vec3(path.radius * std::cos(theta), path.radius * std::sin(theta), h);
            vp.look_at = Vec3(0.0, 0.0, h);
            vp.azimuth = theta;
            vp.height_index = hi;
            vp.azimuth_index = ai;
            out.push_back(vp);
        }
    }
    return out;
}

/// Unit vectors with pairwise angle >= min_center_angle, by rejection.
inline std::vector<Eigen::VectorXd> embedding_centers(int n_ids, int feat_dim, double min_center_angle,
                                                      std::uint64_t seed) {
    if (n_ids < 0 || feat_dim < 1) throw ValidationError("embedding_centers: invalid size");
    Rng rng(seed, {static_cast<std::uint64_t>(Stream::embedding)});
    auto draw = [&]() {
        Eigen::VectorXd v(feat_dim);
        for (;;) {
            for (int i = 0; i < feat_dim; ++i) v(i) = rng.normal();
            const double n = v.norm();
            if (n > 1e-12) return Eigen::VectorXd(v / n);
        }
    };
    std::vector<Eigen::VectorXd> out;
    if (n_ids == 0) return out;
    if (min_center_angle >= std::numbers::pi - 1e-12) {
        if (n_ids > 2) throw ValidationError("embedding_centers: more than two vectors cannot be pairwise antipodal");
        out.push_back(draw());
        if (n_ids == 2) out.push_back(-out.front());
        return out;
    }
    const double max_dot = std::cos(min_center_angle) + 1e-12;
    constexpr int kMaxRetries = 100000;
    for (int k = 0; k < n_ids; ++k) {
        bool accepted = false;
        for (int attempt = 0; attempt < kMaxRetries && !accepted; ++attempt) {
            Eigen::VectorXd v = draw();
            const bool ok = std::all_of(out.begin(), out.end(), [&](const Eigen::VectorXd& o) { return o.dot(v) <= max_dot; });
            if (ok) {
                out.push_back(std::move(v));
                accepted = true;
            }
        }
        if (!accepted) {
            throw ValidationError("embedding_centers: could not place " + std::to_string(n_ids) + " centers in dimension " +
                                  std::to_string(feat_dim) + " with the requested minimum angle");
        }
    }
    return out;
}

/// Smooth random offset field over normalized path coordinates (u, v) in
/// [0, 1]^2: a sum of random plane waves with per-axis RMS `sigma`.
class RegistrationField {
public:
    RegistrationField(std::uint64_t seed, double sigma, double wavelength) : sigma_(sigma) {
        Rng rng(seed, {static_cast<std::uint64_t>(Stream::registration)});
        for (auto& w : waves_) {
            w.amplitude = Vec3(rng.normal(), rng.normal(), rng.normal());
            const double dir = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double freq = rng.uniform(0.5, 1.5) / wavelength;
            w.ku = 2.0 * std::numbers::pi * freq * std::cos(dir);
            w.kv = 2.0 * std::numbers::pi * freq * std::sin(dir);
            w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        }
    }

    Vec3 at(double u, double v) const {
        if (sigma_ == 0.0) return Vec3::Zero();
        Vec3 out = Vec3::Zero();
        for (const auto& w : waves_) out += w.amplitude * std::cos(w.ku * u + w.kv * v + w.phase);
        return sigma_ * std::sqrt(2.0 / static_cast<double>(kWaves)) * out;
    }

private:
    static constexpr int kWaves = 6;
    struct Wave {
        Vec3 amplitude = Vec3::Zero();
        double ku = 0.0, kv = 0.0, phase = 0.0;
    };
    double sigma_ = 0.0;
    std::array<Wave, kWaves> waves_{};
};

/// Normalized (u, v) position of a viewpoint on its path.
inline std::pair<double, double> path_coordinates(const Viewpoint& vp, const PathSpec& path) {
    const double u = path.n_azimuths > 1 ? vp.azimuth_index / (path.n_azimuths - 1.0) : 0.5;
    const double v = path.n_heights > 1 ? vp.height_index / (path.n_heights - 1.0) : 0.5;
    return {u, v};
}

struct RenderedFrame {
    std::int64_t index = 0;
    Viewpoint viewpoint;
    std::vector<Detection> detections;
    std::vector<std::optional<std::int64_t>> gt_ids;  // parallel to detections; empty for clutter
    std::vector<TrajectoryRecord> ground_truth;       // annotated tomatoes of this view
};

/// Geometry of one camera view and the ray tests against the scene.
class ViewGeometry {
public:
    ViewGeometry(const Scene& scene, const Viewpoint& vp, const PathSpec& path)
        : scene_(scene), vp_(vp), path_(path) {
        forward_ = (vp.look_at - vp.position).normalized();
        right_ = forward_.cross(Vec3::UnitZ());
        if (right_.norm() < 1e-9) right_ = forward_.cross(Vec3::UnitX());
        right_.normalize();
        up_ = right_.cross(forward_);
    }

    bool in_frustum(const Vec3& p) const {
        const Vec3 v = p - vp_.position;
        const double depth = v.dot(forward_);
        if (depth <= 0.05 || depth > path_.max_range) return false;
        return std::fabs(std::atan2(v.dot(right_), depth)) <= 0.5 * path_.fov_horizontal &&
               std::fabs(std::atan2(v.dot(up_), depth)) <= 0.5 * path_.fov_vertical;
    }

    bool ray_clear(const Vec3& target, std::size_t own_index) const {
        const Vec3& cam = vp_.position;
        for (const auto& leaf : scene_.leaves) {
            if (detail::segment_hits_disc(cam, target, leaf)) return false;
        }
        for (std::size_t k = 0; k < scene_.tomatoes.size(); ++k) {
            if (k == own_index) continue;
            const auto& o = scene_.tomatoes[k];
            if (detail::segment_hits_sphere(cam, target, o.center, o.radius)) return false;
        }
        return true;
    }

    /// Six points on the silhouette circle of a tomato as seen from the camera.
    std::array<Vec3, 6> limb_points(const Tomato& t) const {
        const Vec3 to_cam = vp_.position - t.center;
        const double dist = to_cam.norm();
        const Vec3 u = to_cam / dist;
        const double r = t.radius;
        const double ratio = std::min(1.0, r / dist);
        const Vec3 circle_center = t.center + (r * ratio) * u;
        const double circle_radius = r * std::sqrt(1.0 - ratio * ratio);
        const auto [e1, e2] = detail::orthonormal_basis(u);
        std::array<Vec3, 6> pts;
        for (int k = 0; k < 6; ++k) {
            const double a = 2.0 * std::numbers::pi * k / 6.0;
            pts[k] = circle_center + circle_radius * (std::cos(a) * e1 + std::sin(a) * e2);
        }
        return pts;
    }

    struct Visibility {
        bool annotated = false;      // in view and at least partly unoccluded
        bool center_clear = false;
        double clear_fraction = 0.0;  // share of clear rays, center and limbs
    };

    Visibility visibility(std::size_t index, bool occlusion) const {
        const Tomato& t = scene_.tomatoes[index];
        Visibility v;
        if (!in_frustum(t.center)) return v;
        if (!occlusion) return {true, true, 1.0};
        v.center_clear = ray_clear(t.center, index);
        int clear = 0;
        for (const auto& p : limb_points(t)) clear += ray_clear(p, index) ? 1 : 0;
        v.clear_fraction = (clear + (v.center_clear ? 1 : 0)) / 7.0;
        v.annotated = v.center_clear || clear > 0;
        return v;
    }

    std::optional<BBox> project_box(const Vec3& center, double radius) const {
        constexpr double kWidth = 640.0, kHeight = 480.0;
        const Vec3 v = center - vp_.position;
        const double depth = v.dot(forward_);
        if (depth <= 1e-6) return std::nullopt;
        const double fx = 0.5 * kWidth / std::tan(0.5 * path_.fov_horizontal);
        const double fy = 0.5 * kHeight / std::tan(0.5 * path_.fov_vertical);
        const double u = 0.5 * kWidth + fx * v.dot(right_) / depth;
        const double w = 0.5 * kHeight - fy * v.dot(up_) / depth;
        const double rx = fx * radius / depth;
        const double ry = fy * radius / depth;
        return BBox{u - rx, w - ry, 2.0 * rx, 2.0 * ry};
    }

    const Vec3& forward() const { return forward_; }
    const Vec3& right() const { return right_; }
    const Vec3& up() const { return up_; }

private:
    const Scene& scene_;
    Viewpoint vp_;
    PathSpec path_;
    Vec3 forward_, right_, up_;
};

/// Emulated detector output for one view. Ground-truth identities are kept
/// in `gt_ids`, outside the detections handed to the tracker.
inline RenderedFrame render_frame(const Scene& scene, std::span<const Eigen::VectorXd> centers, const Viewpoint& vp,
                                  std::int64_t frame_index, const PathSpec& path, const NoiseSpec& noise,
                                  const Mat3& meas_cov, Rng& rng, const Vec3& view_offset = Vec3::Zero()) {
    noise.validate();
    if (centers.size() < scene.tomatoes.size()) throw ValidationError("render_frame: missing embedding centers");
    const ViewGeometry geo(scene, vp, path);
    RenderedFrame out;
    out.index = frame_index;
    out.viewpoint = vp;

    const double per_dim = noise.sigma_feat / std::sqrt(static_cast<double>(noise.feat_dim));
    // The perturbation strength varies per detection (squared-normal scale), so
    // some views embed cleanly and others poorly.
    auto make_feature = [&](const Eigen::VectorXd& center, std::int64_t id) {
        Eigen::VectorXd f = center;
        const double z = rng.normal();
        const double scale = per_dim * z * z;
        if (scale > 0.0) {
            for (Eigen::Index i = 0; i < f.size(); ++i) f(i) += scale * rng.normal();
        }
        if (noise.view_feat_sigma > 0.0) {
            // Deterministic per-ID drift direction that rotates with the viewing azimuth.
            Rng drift(static_cast<std::uint64_t>(id), {static_cast<std::uint64_t>(Stream::embedding), 0xD1F7ULL});
            Eigen::VectorXd a(f.size()), b(f.size());
            for (Eigen::Index i = 0; i < f.size(); ++i) a(i) = drift.normal();
            for (Eigen::Index i = 0; i < f.size(); ++i) b(i) = drift.normal();
            a.normalize();
            b.normalize();
            f += noise.view_feat_sigma * (std::cos(vp.azimuth) * a + std::sin(vp.azimuth) * b);
        }
        return FeatureVector(std::move(f));
    };

    for (std::size_t k = 0; k < scene.tomatoes.size(); ++k) {
        const Tomato& t = scene.tomatoes[k];
        const auto vis = geo.visibility(k, noise.occlusion);
        if (!vis.annotated) continue;
        std::optional<BBox> box;
        if (noise.emit_bbox) box = geo.project_box(t.center, t.radius);
        // Annotations live in the view's own registered frame, like image
        // labels: the registration error of the view moves them too.
        out.ground_truth.push_back(TrajectoryRecord{frame_index, t.id, t.center + view_offset, box});

        // Draw every random number even for undetected tomatoes, so that the
        // stream consumption does not depend on detection outcomes.
        const double p = noise.detect_prob_visible * std::pow(vis.clear_fraction, noise.occlusion_exponent);
        const bool detected = rng.uniform() < p;
        const Vec3 to_cam = (vp.position - t.center).normalized();
        const auto [e1, e2] = detail::orthonormal_basis(to_cam);
        const double n_ray = rng.normal(), n_l1 = rng.normal(), n_l2 = rng.normal();
        const Vec3 pos = t.center + view_offset + (noise.ray_bias + noise.sigma_pos_ray * n_ray) * to_cam +
                         noise.sigma_pos_lateral * (n_l1 * e1 + n_l2 * e2);
        FeatureVector feat = make_feature(centers[k], t.id);
        if (!detected) continue;
        std::optional<BBox> det_box;
        if (noise.emit_bbox) det_box = geo.project_box(pos, t.radius);
        out.detections.push_back(Detection{Gaussian3(pos, meas_cov), det_box, std::move(feat), frame_index});
        out.gt_ids.push_back(t.id);
    }

    const std::uint64_t n_clutter = rng.poisson(noise.clutter_rate);
    for (std::uint64_t c = 0; c < n_clutter; ++c) {
        const double depth = rng.uniform(0.2, 0.9);
        const double ax = rng.uniform(-0.5, 0.5) * path.fov_horizontal;
        const double ay = rng.uniform(-0.5, 0.5) * path.fov_vertical;
        const Vec3 pos =
            vp.position + depth * (geo.forward() + std::tan(ax) * geo.right() + std::tan(ay) * geo.up());
        Eigen::VectorXd f(noise.feat_dim);
        for (int i = 0; i < noise.feat_dim; ++i) f(i) = rng.normal();
        std::optional<BBox> det_box;
        if (noise.emit_bbox) det_box = geo.project_box(pos, 0.03);
        out.detections.push_back(Detection{Gaussian3(pos, meas_cov), det_box, FeatureVector(std::move(f)), frame_index});
        out.gt_ids.push_back(std::nullopt);
    }
    return out;
}

struct RenderedSequence {
    Scene scene;
    std::vector<Eigen::VectorXd> centers;
    std::vector<RenderedFrame> frames;  // in camera-path order, index = position on the path
};

/// Scene, embeddings and every camera-path view. Each frame draws from its
/// own stream keyed by (seed, frame index).
inline RenderedSequence render_sequence(const SceneSpec& spec, const Mat3& meas_cov) {
    RenderedSequence seq;
    seq.scene = generate_scene(spec);
    seq.centers = embedding_centers(static_cast<int>(seq.scene.tomatoes.size()), spec.noise.feat_dim,
                                    spec.noise.min_center_angle, spec.seed);
    const auto views = camera_path(spec.path);
    const RegistrationField registration(spec.seed, spec.noise.registration_sigma, spec.noise.registration_wavelength);
    for (std::size_t k = 0; k < views.size(); ++k) {
        Rng rng(spec.seed, {static_cast<std::uint64_t>(Stream::render), static_cast<std::uint64_t>(k)});
        const auto [u, v] = path_coordinates(views[k], spec.path);
        seq.frames.push_back(render_frame(seq.scene, seq.centers, views[k], static_cast<std::int64_t>(k), spec.path,
                                          spec.noise, meas_cov, rng, registration.at(u, v)));
    }
    return seq;
}

enum class FrameOrder { sequential, random };

inline std::string to_string(FrameOrder o) { return o == FrameOrder::sequential ? "sequential" : "random"; }

inline FrameOrder parse_frame_order(const std::string& s) {
    if (s == "sequential") return FrameOrder::sequential;
    if (s == "random") return FrameOrder::random;
    throw ValidationError("unknown frame order '" + s + "' (expected sequential or random)");
}

/// Identity for sequential order, a seeded uniform shuffle otherwise.
template <typename T>
std::vector<T> order_frames(std::vector<T> frames, FrameOrder mode, std::uint64_t seed) {
    if (mode == FrameOrder::random) {
        Rng rng(seed, {static_cast<std::uint64_t>(Stream::order)});
        rng.shuffle(frames);
    }
    return frames;
}

/// `count` seeded uniform subsets of `size` frame positions out of
/// `n_frames`, each kept in ascending (recording) order.
inline std::vector<std::vector<std::size_t>> subsample_viewpoints(std::size_t n_frames, int count, std::size_t size,
                                                                  std::uint64_t seed) {
    if (size > n_frames) {
        throw ValidationError("subsample_viewpoints: subset size " + std::to_string(size) + " exceeds the " +
                              std::to_string(n_frames) + " available frames");
    }
    if (count < 0) throw ValidationError("subsample_viewpoints: negative subset count");
    std::vector<std::vector<std::size_t>> out;
    for (int s = 0; s < count; ++s) {
        Rng rng(seed, {static_cast<std::uint64_t>(Stream::subsets), static_cast<std::uint64_t>(s)});
        std::vector<std::size_t> idx(n_frames);
        for (std::size_t i = 0; i < n_frames; ++i) idx[i] = i;
        for (std::size_t i = 0; i < size; ++i) {
            const std::size_t j = i + rng.below(n_frames - i);
            std::swap(idx[i], idx[j]);
        }
        idx.resize(size);
        std::sort(idx.begin(), idx.end());
        out.push_back(std::move(idx));
    }
    return out;
}

/// Frame-level detection recall and precision of rendered frames, using the
/// simulator's identity side channel.
struct DetectionAudit {
    std::int64_t gt_records = 0;
    std::int64_t true_detections = 0;
    std::int64_t detections = 0;

    double recall() const { return gt_records ? static_cast<double>(true_detections) / gt_records : 0.0; }
    double precision() const { return detections ? static_cast<double>(true_detections) / detections : 0.0; }
};

inline DetectionAudit audit_detections(std::span<const RenderedFrame> frames) {
    DetectionAudit a;
    for (const auto& f : frames) {
        a.gt_records += static_cast<std::int64_t>(f.ground_truth.size());
        a.detections += static_cast<std::int64_t>(f.detections.size());
        for (const auto& id : f.gt_ids) a.true_detections += id ? 1 : 0;
    }
    return a;
}

}  // namespace mot3d
