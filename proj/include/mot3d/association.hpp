#pragma once

// Track-to-detection association: position and appearance costs, their
// convex fusion, threshold gating and the gated linear assignment.

#include "mot3d/core.hpp"
#include "mot3d/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mot3d {

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Squared-Mahalanobis chi-square(3) 0.95 quantile.
inline constexpr double kDefaultPositionGate = 7.82;

struct GateConfig {
    double pos_gate = kDefaultPositionGate;
    double feat_gate = 2.0;
    double lambda = 0.0;

    void validate() const {
        if (!(pos_gate > 0.0)) throw ValidationError("GateConfig: pos_gate must be positive");
        if (!(feat_gate >= 0.0 && feat_gate <= 2.0)) throw ValidationError("GateConfig: feat_gate must lie in [0, 2]");
        if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("GateConfig: lambda must lie in [0, 1]");
    }
};

/// Rows are tracks, columns are detections.
struct CostMatrix {
    Eigen::MatrixXd values;
    BoolMatrix forbidden;

    CostMatrix() = default;
    CostMatrix(Eigen::MatrixXd v, BoolMatrix f) : values(std::move(v)), forbidden(std::move(f)) {
        if (values.rows() != forbidden.rows() || values.cols() != forbidden.cols()) {
            throw ValidationError("CostMatrix: values and forbidden mask differ in shape");
        }
    }
    explicit CostMatrix(Eigen::MatrixXd v)
        : values(std::move(v)), forbidden(BoolMatrix::Constant(values.rows(), values.cols(), false)) {}

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
};

struct Assignment {
    std::vector<std::pair<int, int>> pairs;  // (track_index, detection_index), sorted by track index
    std::vector<int> unmatched_tracks;
    std::vector<int> unmatched_detections;
};

/// Squared Mahalanobis distance of `det_mean` under the track belief (track
/// covariance only). Throws NumericalError when the covariance condition
/// number exceeds 1e12.
inline double position_cost(const Gaussian3& track_belief, const Vec3& det_mean,
                            std::optional<std::uint64_t> track_id = std::nullopt) {
    const double cond = detail::condition_number(track_belief.cov());
    if (!(cond <= 1e12)) {
        std::string who = track_id ? "track " + std::to_string(*track_id) : std::string("track");
        throw NumericalError("position_cost: covariance of " + who + " is near-singular (condition number " +
                             std::to_string(cond) + ")");
    }
    Eigen::LLT<Mat3> llt(track_belief.cov());
    const Vec3 whitened = llt.matrixL().solve(det_mean - track_belief.mean());
    return whitened.squaredNorm();
}

/// Smallest cosine distance between the detection feature and any stored
/// track feature.
inline double feature_cost(std::span<const FeatureVector> track_features, const FeatureVector& det_feature) {
    if (track_features.empty()) throw ValidationError("feature_cost: track feature list is empty");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& f : track_features) {
        double d = 1.0 - f.dot(det_feature);
        if (d < 1e-12 && f == det_feature) d = 0.0;
        best = std::min(best, d);
    }
    return std::clamp(best, 0.0, 2.0);
}

inline Eigen::MatrixXd combined_cost(const Eigen::MatrixXd& pos, const Eigen::MatrixXd& feat, double lambda) {
    if (pos.rows() != feat.rows() || pos.cols() != feat.cols()) {
        throw ValidationError("combined_cost: position and feature matrices differ in shape");
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("combined_cost: lambda must lie in [0, 1]");
    if (lambda == 0.0) return pos;
    if (lambda == 1.0) return feat;
    return (1.0 - lambda) * pos + lambda * feat;
}

/// A pair is forbidden when either cost strictly exceeds its threshold.
inline BoolMatrix apply_gates(const Eigen::MatrixXd& pos, const Eigen::MatrixXd& feat, const GateConfig& gate) {
    if (pos.rows() != feat.rows() || pos.cols() != feat.cols()) {
        throw ValidationError("apply_gates: position and feature matrices differ in shape");
    }
    BoolMatrix out(pos.rows(), pos.cols());
    for (Eigen::Index i = 0; i < pos.rows(); ++i) {
        for (Eigen::Index j = 0; j < pos.cols(); ++j) {
            out(i, j) = pos(i, j) > gate.pos_gate || feat(i, j) > gate.feat_gate;
        }
    }
    return out;
}

/// Gated assignment: maximum number of allowed pairs, then minimum total
/// cost. Forbidden pairs carry a sentinel of 1e6 x the largest allowed cost
/// and are stripped from the solver output.
inline Assignment solve_assignment(const CostMatrix& cost) {
    const auto rows = static_cast<int>(cost.rows());
    const auto cols = static_cast<int>(cost.cols());
    Assignment out;

    double max_allowed = 0.0;
    bool any_allowed = false;
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            if (cost.forbidden(i, j)) continue;
            const double c = cost.values(i, j);
            if (!std::isfinite(c) || c < 0.0) {
                throw ValidationError("solve_assignment: allowed costs must be finite and non-negative");
            }
            max_allowed = std::max(max_allowed, c);
            any_allowed = true;
        }
    }

    std::vector<int> row_to_col(rows, -1);
    if (any_allowed) {
        const double sentinel = 1e6 * (max_allowed > 0.0 ? max_allowed : 1.0);
        Eigen::MatrixXd work = cost.values;
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < cols; ++j) {
                if (cost.forbidden(i, j)) work(i, j) = sentinel;
            }
        }
        row_to_col = hungarian_min_cost(work);
    }

    std::vector<char> det_used(cols, 0);
    for (int i = 0; i < rows; ++i) {
        const int j = row_to_col[i];
        if (j >= 0 && !cost.forbidden(i, j)) {
            out.pairs.emplace_back(i, j);
            det_used[j] = 1;
        } else {
            out.unmatched_tracks.push_back(i);
        }
    }
    for (int j = 0; j < cols; ++j) {
        if (!det_used[j]) out.unmatched_detections.push_back(j);
    }
    return out;
}

struct LabeledFeature {
    std::int64_t object_id = 0;
    FeatureVector feature;
};

/// Nearest-rank empirical quantile: the ceil(q n)-th order statistic.
inline double nearest_rank_quantile(std::vector<double> samples, double q) {
    if (samples.empty()) throw ValidationError("nearest_rank_quantile: no samples");
    std::sort(samples.begin(), samples.end());
    const auto n = samples.size();
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return samples[rank - 1];
}

/// Feature gate from a labeled validation set: the 0.95 quantile of each
/// occurrence's minimum cosine distance to other occurrences of its own ID.
inline double calibrate_feature_gate(std::span<const LabeledFeature> labeled, double quantile = 0.95) {
    std::map<std::int64_t, std::vector<const FeatureVector*>> by_id;
    for (const auto& lf : labeled) by_id[lf.object_id].push_back(&lf.feature);

    std::vector<double> minima;
    for (const auto& [id, feats] : by_id) {
        if (feats.size() < 2) continue;
        for (std::size_t a = 0; a < feats.size(); ++a) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t b = 0; b < feats.size(); ++b) {
                if (a == b) continue;
                double d = 1.0 - feats[a]->dot(*feats[b]);
                if (d < 1e-12 && *feats[a] == *feats[b]) d = 0.0;
                best = std::min(best, d);
            }
            minima.push_back(std::clamp(best, 0.0, 2.0));
        }
    }
    if (minima.empty()) {
        throw ValidationError("calibrate_feature_gate: no object ID has at least two occurrences");
    }
    return nearest_rank_quantile(std::move(minima), quantile);
}

}  // namespace mot3d
