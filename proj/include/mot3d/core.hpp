#pragma once

// Domain types for the 3D world model and the static-model Kalman filter
// that keeps each track's position belief.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mot3d {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a type invariant or an operation precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A linear-algebra step could not be carried out reliably.
class NumericalError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline double max_abs(const Mat3& m) { return m.cwiseAbs().maxCoeff(); }

inline bool is_symmetric(const Mat3& m, double tol = 1e-9) {
    const double scale = std::max(1.0, max_abs(m));
    return ((m - m.transpose()).cwiseAbs().maxCoeff()) <= tol * scale;
}

inline bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m) { return m.allFinite(); }

inline Mat3 symmetrize(const Mat3& m) { return 0.5 * (m + m.transpose()); }

inline double condition_number(const Mat3& m) {
    Eigen::SelfAdjointEigenSolver<Mat3> es;
    es.computeDirect(m, Eigen::EigenvaluesOnly);
    const Vec3& ev = es.eigenvalues();
    if (ev.minCoeff() <= 0.0) return std::numeric_limits<double>::infinity();
    return ev.maxCoeff() / ev.minCoeff();
}

}  // namespace detail

/// 3D position belief: mean in meters, covariance in square meters.
/// The constructor enforces symmetry and positive definiteness.
class Gaussian3 {
public:
    Gaussian3(const Vec3& mean, const Mat3& cov) : mean_(mean), cov_(cov) {
        if (!mean_.allFinite() || !cov_.allFinite()) {
            throw ValidationError("Gaussian3: non-finite mean or covariance");
        }
        if (!detail::is_symmetric(cov_)) {
            throw ValidationError("Gaussian3: covariance is not symmetric");
        }
        Eigen::LLT<Mat3> llt(cov_);
        if (llt.info() != Eigen::Success) {
            throw ValidationError("Gaussian3: covariance is not positive definite");
        }
    }

    static Gaussian3 isotropic(const Vec3& mean, double sigma) {
        return Gaussian3(mean, Mat3::Identity() * sigma * sigma);
    }

    const Vec3& mean() const { return mean_; }
    const Mat3& cov() const { return cov_; }

private:
    Vec3 mean_;
    Mat3 cov_;
};

/// Unit-norm appearance embedding. Inputs are renormalized on construction.
class FeatureVector {
public:
    FeatureVector() = default;

    explicit FeatureVector(Eigen::VectorXd values) : values_(std::move(values)) {
        if (values_.size() == 0) throw ValidationError("FeatureVector: empty vector");
        if (!values_.allFinite()) throw ValidationError("FeatureVector: non-finite component");
        const double n = values_.norm();
        if (!(n > 0.0)) throw ValidationError("FeatureVector: zero-norm vector cannot be normalized");
        if (n != 1.0) values_ /= n;
    }

    static FeatureVector from_std(const std::vector<double>& v) {
        return FeatureVector(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    }

    const Eigen::VectorXd& values() const { return values_; }
    Eigen::Index dim() const { return values_.size(); }
    bool empty() const { return values_.size() == 0; }

    double dot(const FeatureVector& other) const {
        if (other.dim() != dim()) {
            throw ValidationError("FeatureVector: dimension mismatch (" + std::to_string(dim()) + " vs " +
                                  std::to_string(other.dim()) + ")");
        }
        return values_.dot(other.values_);
    }

    bool operator==(const FeatureVector& o) const { return values_.size() == o.values_.size() && values_ == o.values_; }

private:
    Eigen::VectorXd values_;
};

/// Axis-aligned image box (u, v, w, h) in pixels.
struct BBox {
    double u = 0.0;
    double v = 0.0;
    double w = 0.0;
    double h = 0.0;

    bool operator==(const BBox&) const = default;
};

inline void validate_bbox(const BBox& b) {
    if (!(b.w > 0.0) || !(b.h > 0.0)) {
        throw ValidationError("BBox: width and height must be positive");
    }
}

struct Detection {
    Gaussian3 position;
    std::optional<BBox> bbox;
    FeatureVector feature;
    std::int64_t frame = 0;

    void validate() const {
        if (frame < 0) throw ValidationError("Detection: negative frame index");
        if (feature.empty()) throw ValidationError("Detection: missing feature vector");
        if (bbox) validate_bbox(*bbox);
    }
};

/// One object of the world model.
struct Track {
    std::uint64_t id = 0;
    Gaussian3 position;
    std::vector<FeatureVector> features;
    std::optional<BBox> bbox;
    std::int64_t birth_frame = 0;
    std::int64_t last_update_frame = 0;
    std::uint64_t hits = 0;

    static Track from_detection(std::uint64_t id, const Detection& det) {
        return Track{id, det.position, {det.feature}, det.bbox, det.frame, det.frame, 1};
    }
};

struct WorldModel {
    std::vector<Track> tracks;
    std::int64_t frame = -1;  // -1 before the first step
    std::uint64_t next_id = 0;

    bool empty() const { return tracks.empty() && frame < 0; }
};

/// Static-model prediction: identity transition, covariance grows by Q.
inline Gaussian3 kalman_predict(const Gaussian3& state, const Mat3& process_noise) {
    if (!process_noise.allFinite() || !detail::is_symmetric(process_noise)) {
        throw ValidationError("kalman_predict: process noise must be finite and symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es;
    es.computeDirect(process_noise, Eigen::EigenvaluesOnly);
    const double tol = 1e-12 * std::max(1.0, detail::max_abs(process_noise));
    if (es.eigenvalues().minCoeff() < -tol) {
        throw ValidationError("kalman_predict: process noise is not positive semidefinite");
    }
    return Gaussian3(state.mean(), state.cov() + process_noise);
}

/// Kalman correction with an identity observation model on (x, y, z).
inline Gaussian3 kalman_update(const Gaussian3& prior, const Gaussian3& measurement) {
    const Mat3 innovation_cov = prior.cov() + measurement.cov();
    const double cond = detail::condition_number(innovation_cov);
    if (!(cond <= 1e12)) {
        std::ostringstream os;
        os << "kalman_update: innovation covariance is numerically singular (condition number " << cond << ")";
        throw NumericalError(os.str());
    }
    Eigen::LLT<Mat3> llt(innovation_cov);
    // K = P S^-1 = (S^-1 P)^T since both P and S are symmetric.
    const Mat3 gain = llt.solve(prior.cov()).transpose();
    const Vec3 mean = prior.mean() + gain * (measurement.mean() - prior.mean());
    const Mat3 cov = detail::symmetrize((Mat3::Identity() - gain) * prior.cov());
    return Gaussian3(mean, cov);
}

}  // namespace mot3d
