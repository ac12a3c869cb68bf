#pragma once

// Per-frame world-model update: associate detections with the predicted
// tracks, correct matched tracks, spawn tracks for unmatched detections and
// predict every track forward. Tracks are never removed.

#include "mot3d/association.hpp"
#include "mot3d/core.hpp"
#include "mot3d/trajectory.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mot3d {

struct TrackerConfig {
    GateConfig gate;
    Mat3 meas_cov_default = Mat3::Identity() * (0.01 * 0.01);
    Mat3 process_noise = Mat3::Identity() * (0.002 * 0.002);
    std::optional<std::size_t> feature_cap;

    void validate() const {
        gate.validate();
        if (!detail::is_symmetric(meas_cov_default) || Eigen::LLT<Mat3>(meas_cov_default).info() != Eigen::Success) {
            throw ValidationError("TrackerConfig: default measurement covariance must be symmetric positive definite");
        }
        Eigen::SelfAdjointEigenSolver<Mat3> es;
        es.computeDirect(process_noise, Eigen::EigenvaluesOnly);
        if (!detail::is_symmetric(process_noise) || es.eigenvalues().minCoeff() < -1e-15) {
            throw ValidationError("TrackerConfig: process noise must be symmetric positive semidefinite");
        }
        if (feature_cap && *feature_cap == 0) throw ValidationError("TrackerConfig: feature_cap must be positive");
    }
};

/// Costs of one accepted pair, kept for auditing. A component that does not
/// take part in association (zero weight) is left empty.
struct PairCost {
    int track_index = 0;
    int detection_index = 0;
    std::uint64_t track_id = 0;
    std::optional<double> position;
    std::optional<double> feature;
    double combined = 0.0;
};

struct FrameLog {
    std::int64_t frame = 0;
    Assignment assignment;
    std::vector<std::uint64_t> new_track_ids;  // one per unmatched detection, in detection order
    std::vector<PairCost> pair_costs;
};

struct StepResult {
    WorldModel world;
    FrameLog log;
    // One per detection, in detection order: the track ID that absorbed the
    // detection, at the detection's own position.
    std::vector<TrajectoryRecord> records;
};

/// Correct a matched track with its detection.
inline Track update_track(Track track, const Detection& det, const TrackerConfig& config) {
    det.validate();
    track.position = kalman_update(track.position, det.position);
    track.features.push_back(det.feature);
    if (config.feature_cap && track.features.size() > *config.feature_cap) {
        track.features.erase(track.features.begin(),
                             track.features.end() - static_cast<std::ptrdiff_t>(*config.feature_cap));
    }
    if (det.bbox) track.bbox = det.bbox;
    track.last_update_frame = det.frame;
    ++track.hits;
    return track;
}

namespace detail {

/// Min cosine distance of every detection to every track's feature list.
inline Eigen::MatrixXd feature_cost_matrix(const std::vector<Track>& tracks, std::span<const Detection> dets) {
    const auto m = static_cast<Eigen::Index>(tracks.size());
    const auto n = static_cast<Eigen::Index>(dets.size());
    Eigen::MatrixXd out(m, n);
    if (m == 0 || n == 0) return out;
    const Eigen::Index dim = dets.front().feature.dim();
    Eigen::MatrixXd det_rows(n, dim);
    for (Eigen::Index j = 0; j < n; ++j) {
        if (dets[j].feature.dim() != dim) throw ValidationError("tracker: detections of one frame differ in feature dimension");
        det_rows.row(j) = dets[j].feature.values().transpose();
    }
    Eigen::VectorXd dots(n);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& feats = tracks[i].features;
        if (feats.empty()) throw ValidationError("tracker: track " + std::to_string(tracks[i].id) + " has no features");
        Eigen::VectorXd best = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
        for (const auto& f : feats) {
            if (f.dim() != dim) throw ValidationError("tracker: feature dimension mismatch against track " + std::to_string(tracks[i].id));
            dots.noalias() = det_rows * f.values();
            for (Eigen::Index j = 0; j < n; ++j) {
                double d = 1.0 - dots(j);
                if (d < 1e-12 && f == dets[j].feature) d = 0.0;
                if (d < best(j)) best(j) = d;
            }
        }
        out.row(i) = best.cwiseMax(0.0).cwiseMin(2.0).transpose();
    }
    return out;
}

inline Eigen::MatrixXd position_cost_matrix(const std::vector<Track>& tracks, std::span<const Detection> dets) {
    const auto m = static_cast<Eigen::Index>(tracks.size());
    const auto n = static_cast<Eigen::Index>(dets.size());
    Eigen::MatrixXd out(m, n);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& belief = tracks[i].position;
        const double cond = condition_number(belief.cov());
        if (!(cond <= 1e12)) {
            throw NumericalError("tracker: covariance of track " + std::to_string(tracks[i].id) +
                                 " is near-singular (condition number " + std::to_string(cond) + ")");
        }
        Eigen::LLT<Mat3> llt(belief.cov());
        for (Eigen::Index j = 0; j < n; ++j) {
            out(i, j) = llt.matrixL().solve(dets[j].position.mean() - belief.mean()).squaredNorm();
        }
    }
    return out;
}

inline StepResult step_impl(WorldModel world, std::int64_t frame, std::span<const Detection> dets,
                            const TrackerConfig& config, double lambda, bool use_position, bool use_features) {
    if (frame < 0) throw ValidationError("tracker: negative frame index " + std::to_string(frame));
    if (world.frame >= 0 && frame <= world.frame) {
        throw ValidationError("tracker: frame index " + std::to_string(frame) +
                              " does not increase past " + std::to_string(world.frame));
    }
    for (const auto& d : dets) {
        d.validate();
        if (d.frame != frame) {
            throw ValidationError("tracker: detection frame " + std::to_string(d.frame) +
                                  " differs from step frame " + std::to_string(frame));
        }
    }

    const auto m = static_cast<Eigen::Index>(world.tracks.size());
    const auto n = static_cast<Eigen::Index>(dets.size());
    Eigen::MatrixXd pos = use_position ? position_cost_matrix(world.tracks, dets) : Eigen::MatrixXd::Zero(m, n);
    Eigen::MatrixXd feat = use_features ? feature_cost_matrix(world.tracks, dets) : Eigen::MatrixXd::Zero(m, n);

    GateConfig effective = config.gate;
    if (!use_position) effective.pos_gate = std::numeric_limits<double>::infinity();
    if (!use_features) effective.feat_gate = 2.0;

    CostMatrix cost(combined_cost(pos, feat, lambda), apply_gates(pos, feat, effective));
    StepResult out;
    out.log.frame = frame;
    out.log.assignment = solve_assignment(cost);
    out.records.resize(dets.size());

    for (const auto& [i, j] : out.log.assignment.pairs) {
        Track& t = world.tracks[i];
        PairCost pc;
        pc.track_index = i;
        pc.detection_index = j;
        pc.track_id = t.id;
        if (use_position) pc.position = pos(i, j);
        if (use_features) pc.feature = feat(i, j);
        pc.combined = cost.values(i, j);
        out.log.pair_costs.push_back(pc);

        t = update_track(std::move(t), dets[j], config);
        out.records[j] = TrajectoryRecord{frame, static_cast<std::int64_t>(t.id), dets[j].position.mean(), t.bbox};
    }
    for (int j : out.log.assignment.unmatched_detections) {
        const std::uint64_t id = world.next_id++;
        world.tracks.push_back(Track::from_detection(id, dets[j]));
        out.log.new_track_ids.push_back(id);
        out.records[j] = TrajectoryRecord{frame, static_cast<std::int64_t>(id), dets[j].position.mean(), dets[j].bbox};
    }

    for (auto& t : world.tracks) t.position = kalman_predict(t.position, config.process_noise);
    world.frame = frame;
    out.world = std::move(world);
    return out;
}

}  // namespace detail

/// One tracker cycle. Costs are evaluated against the predicted track
/// states held in `world`. A cost component with zero weight is neither
/// computed nor gated, so lambda = 0 ignores features entirely and
/// lambda = 1 ignores positions.
inline StepResult step(WorldModel world, std::int64_t frame, std::span<const Detection> dets,
                       const TrackerConfig& config) {
    config.validate();
    const double lambda = config.gate.lambda;
    return detail::step_impl(std::move(world), frame, dets, config, lambda, lambda < 1.0, lambda > 0.0);
}

/// Position-only cycle (3D-SORT): never reads detection features for
/// association, whatever lambda says.
inline StepResult step_baseline(WorldModel world, std::int64_t frame, std::span<const Detection> dets,
                                const TrackerConfig& config) {
    config.validate();
    return detail::step_impl(std::move(world), frame, dets, config, 0.0, true, false);
}

struct DetectionFrame {
    std::int64_t index = 0;
    std::vector<Detection> detections;
};

struct SequenceResult {
    WorldModel world;
    TrajectorySet trajectories;
    std::vector<FrameLog> logs;
};

/// Runs the tracker over frames in presentation order. Frame indices must
/// be strictly increasing; shuffled inputs are re-indexed by the caller.
inline SequenceResult run_sequence(std::span<const DetectionFrame> frames, const TrackerConfig& config,
                                   bool baseline = false) {
    SequenceResult out;
    for (const auto& f : frames) {
        StepResult r = baseline ? step_baseline(std::move(out.world), f.index, f.detections, config)
                                : step(std::move(out.world), f.index, f.detections, config);
        out.world = std::move(r.world);
        out.logs.push_back(std::move(r.log));
        for (auto& rec : r.records) out.trajectories.records.push_back(std::move(rec));
    }
    return out;
}

}  // namespace mot3d
