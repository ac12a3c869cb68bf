#pragma once

// CLEAR-MOT (MOTA, FP, FN, IDSW) and HOTA (DetRe, DetPr, DetA, AssA) between a
// ground-truth and a predicted TrajectorySet. The matching rules follow the
// reference TrackEval implementation.

#include "mot3d/hungarian.hpp"
#include "mot3d/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace mot3d {

enum class SimilarityKind { distance3d, iou2d };

struct SimilarityConfig {
    SimilarityKind kind = SimilarityKind::distance3d;
    double d_max = 0.05;  // meters, one tomato diameter
    std::vector<double> alpha_grid = default_alpha_grid();

    /// 0.05, 0.10, ..., 0.95.
    static std::vector<double> default_alpha_grid() {
        std::vector<double> a;
        for (int k = 1; k <= 19; ++k) a.push_back(0.05 * k);
        return a;
    }

    void validate() const {
        if (kind == SimilarityKind::distance3d && !(d_max > 0.0)) {
            throw ValidationError("SimilarityConfig: d_max must be positive");
        }
        if (alpha_grid.empty()) throw ValidationError("SimilarityConfig: empty alpha grid");
        for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
            if (!(alpha_grid[i] > 0.0 && alpha_grid[i] < 1.0)) {
                throw ValidationError("SimilarityConfig: alpha values must lie in (0, 1)");
            }
            if (i > 0 && !(alpha_grid[i] > alpha_grid[i - 1])) {
                throw ValidationError("SimilarityConfig: alpha grid must be strictly ascending");
            }
        }
    }
};

inline double box_iou(const BBox& a, const BBox& b) {
    const double x0 = std::max(a.u, b.u);
    const double y0 = std::max(a.v, b.v);
    const double x1 = std::min(a.u + a.w, b.u + b.w);
    const double y1 = std::min(a.v + a.h, b.v + b.h);
    const double inter = std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0);
    const double uni = a.w * a.h + b.w * b.h - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

inline double similarity(const TrajectoryRecord& gt, const TrajectoryRecord& pred, const SimilarityConfig& config) {
    if (gt.frame != pred.frame) throw ValidationError("similarity: records belong to different frames");
    if (config.kind == SimilarityKind::distance3d) {
        return std::max(0.0, 1.0 - (gt.pos - pred.pos).norm() / config.d_max);
    }
    if (!gt.bbox || !pred.bbox) throw ValidationError("similarity: iou2d requires bounding boxes on both records");
    return std::clamp(box_iou(*gt.bbox, *pred.bbox), 0.0, 1.0);
}

struct ClearResult {
    double mota = 0.0;
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t idsw = 0;
    std::int64_t num_gt = 0;
};

struct HotaResult {
    double hota = 0.0;
    double det_re = 0.0;
    double det_pr = 0.0;
    double det_a = 0.0;
    double ass_a = 0.0;
    double loc_a = 0.0;
    std::vector<double> alphas;
    std::vector<double> hota_alpha, det_a_alpha, ass_a_alpha, det_re_alpha, det_pr_alpha;
    std::vector<std::int64_t> tp_alpha, fp_alpha, fn_alpha;
};

struct MetricReport {
    double hota = 0.0;
    double det_re = 0.0;
    double det_pr = 0.0;
    double det_a = 0.0;
    double ass_a = 0.0;
    double loc_a = 0.0;
    double mota = 0.0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t idsw = 0;
    std::int64_t num_gt = 0;
    std::int64_t num_pred = 0;
};

namespace detail {

inline constexpr double kEps = std::numeric_limits<double>::epsilon();

/// Dense re-indexing of arbitrary object IDs, in ascending ID order.
struct IdIndex {
    std::map<std::int64_t, int> to_dense;

    explicit IdIndex(const TrajectorySet& s) {
        for (const auto& r : s.records) to_dense.emplace(r.id, 0);
        int k = 0;
        for (auto& [id, idx] : to_dense) idx = k++;
    }
    int operator()(std::int64_t id) const { return to_dense.at(id); }
    int size() const { return static_cast<int>(to_dense.size()); }
};

struct FramePair {
    std::vector<const TrajectoryRecord*> gt;
    std::vector<const TrajectoryRecord*> pred;
};

inline std::map<std::int64_t, FramePair> align_frames(const TrajectorySet& gt, const TrajectorySet& pred) {
    std::map<std::int64_t, FramePair> frames;
    for (const auto& r : gt.records) frames[r.frame].gt.push_back(&r);
    for (const auto& r : pred.records) frames[r.frame].pred.push_back(&r);
    return frames;
}

inline Eigen::MatrixXd similarity_matrix(const FramePair& f, const SimilarityConfig& config) {
    Eigen::MatrixXd s(f.gt.size(), f.pred.size());
    for (std::size_t i = 0; i < f.gt.size(); ++i) {
        for (std::size_t j = 0; j < f.pred.size(); ++j) s(i, j) = similarity(*f.gt[i], *f.pred[j], config);
    }
    return s;
}

inline void check_inputs(const TrajectorySet& gt, const TrajectorySet& pred, const char* who) {
    if (gt.empty()) throw ValidationError(std::string(who) + ": ground truth is empty");
    gt.validate();
    pred.validate();
}

}  // namespace detail

/// CLEAR-MOT with correspondence carry-over from the previous frame.
inline ClearResult mota(const TrajectorySet& gt, const TrajectorySet& pred, const SimilarityConfig& config,
                        double match_threshold = 0.5) {
    detail::check_inputs(gt, pred, "mota");
    config.validate();
    constexpr std::int64_t kNone = std::numeric_limits<std::int64_t>::min();
    std::unordered_map<std::int64_t, std::int64_t> last_match;       // gt id -> most recent pred id
    std::unordered_map<std::int64_t, std::int64_t> previous_frame;   // gt id -> pred id in the previous frame
    ClearResult res;

    for (const auto& [frame, f] : detail::align_frames(gt, pred)) {
        res.num_gt += static_cast<std::int64_t>(f.gt.size());
        if (f.gt.empty() || f.pred.empty()) {
            res.fp += static_cast<std::int64_t>(f.pred.size());
            res.fn += static_cast<std::int64_t>(f.gt.size());
            continue;
        }
        const Eigen::MatrixXd sim = detail::similarity_matrix(f, config);
        Eigen::MatrixXd score(sim.rows(), sim.cols());
        for (Eigen::Index i = 0; i < sim.rows(); ++i) {
            const auto it = previous_frame.find(f.gt[i]->id);
            const std::int64_t prev = it == previous_frame.end() ? kNone : it->second;
            for (Eigen::Index j = 0; j < sim.cols(); ++j) {
                double s = (prev == f.pred[j]->id ? 1000.0 : 0.0) + sim(i, j);
                if (sim(i, j) < match_threshold - detail::kEps) s = 0.0;
                score(i, j) = s;
            }
        }
        const std::vector<int> match = hungarian_min_cost(-score);
        std::unordered_map<std::int64_t, std::int64_t> current;
        std::int64_t matched = 0;
        for (Eigen::Index i = 0; i < sim.rows(); ++i) {
            const int j = match[i];
            if (j < 0 || !(score(i, j) > detail::kEps)) continue;
            const std::int64_t gid = f.gt[i]->id;
            const std::int64_t pid = f.pred[j]->id;
            const auto it = last_match.find(gid);
            if (it != last_match.end() && it->second != pid) ++res.idsw;
            last_match[gid] = pid;
            current[gid] = pid;
            ++matched;
        }
        previous_frame = std::move(current);
        res.tp += matched;
        res.fn += static_cast<std::int64_t>(f.gt.size()) - matched;
        res.fp += static_cast<std::int64_t>(f.pred.size()) - matched;
    }
    res.mota = 1.0 - static_cast<double>(res.fp + res.fn + res.idsw) / static_cast<double>(res.num_gt);
    return res;
}

/// HOTA averaged over the alpha grid.
inline HotaResult hota(const TrajectorySet& gt, const TrajectorySet& pred, const SimilarityConfig& config) {
    detail::check_inputs(gt, pred, "hota");
    config.validate();
    const detail::IdIndex gt_index(gt);
    const detail::IdIndex pred_index(pred);
    const int ng = gt_index.size();
    const int np = pred_index.size();
    const auto frames = detail::align_frames(gt, pred);

    // Global alignment score between every gt and predicted trajectory.
    Eigen::MatrixXd potential = Eigen::MatrixXd::Zero(ng, np);
    Eigen::VectorXd gt_count = Eigen::VectorXd::Zero(ng);
    Eigen::RowVectorXd pred_count = Eigen::RowVectorXd::Zero(np);
    std::map<std::int64_t, Eigen::MatrixXd> sims;
    for (const auto& [frame, f] : frames) {
        for (const auto* r : f.gt) gt_count(gt_index(r->id)) += 1.0;
        for (const auto* r : f.pred) pred_count(pred_index(r->id)) += 1.0;
        if (f.gt.empty() || f.pred.empty()) continue;
        Eigen::MatrixXd sim = detail::similarity_matrix(f, config);
        const Eigen::RowVectorXd col_sum = sim.colwise().sum();
        const Eigen::VectorXd row_sum = sim.rowwise().sum();
        for (Eigen::Index i = 0; i < sim.rows(); ++i) {
            for (Eigen::Index j = 0; j < sim.cols(); ++j) {
                const double denom = col_sum(j) + row_sum(i) - sim(i, j);
                if (denom > detail::kEps) {
                    potential(gt_index(f.gt[i]->id), pred_index(f.pred[j]->id)) += sim(i, j) / denom;
                }
            }
        }
        sims.emplace(frame, std::move(sim));
    }
    Eigen::MatrixXd global_score(ng, np);
    for (int i = 0; i < ng; ++i) {
        for (int j = 0; j < np; ++j) {
            global_score(i, j) = potential(i, j) / (gt_count(i) + pred_count(j) - potential(i, j));
        }
    }

    const auto& alphas = config.alpha_grid;
    const std::size_t na = alphas.size();
    std::vector<Eigen::MatrixXd> matches(na, Eigen::MatrixXd::Zero(ng, np));
    std::vector<std::int64_t> tp(na, 0), fn(na, 0), fp(na, 0);
    std::vector<double> loc(na, 0.0);

    for (const auto& [frame, f] : frames) {
        const auto n_gt = static_cast<std::int64_t>(f.gt.size());
        const auto n_pred = static_cast<std::int64_t>(f.pred.size());
        if (n_gt == 0 || n_pred == 0) {
            for (std::size_t a = 0; a < na; ++a) {
                fp[a] += n_pred;
                fn[a] += n_gt;
            }
            continue;
        }
        const Eigen::MatrixXd& sim = sims.at(frame);
        Eigen::MatrixXd score(sim.rows(), sim.cols());
        for (Eigen::Index i = 0; i < sim.rows(); ++i) {
            for (Eigen::Index j = 0; j < sim.cols(); ++j) {
                score(i, j) = global_score(gt_index(f.gt[i]->id), pred_index(f.pred[j]->id)) * sim(i, j);
            }
        }
        const std::vector<int> match = hungarian_min_cost(-score);
        for (std::size_t a = 0; a < na; ++a) {
            std::int64_t matched = 0;
            for (Eigen::Index i = 0; i < sim.rows(); ++i) {
                const int j = match[i];
                if (j < 0 || !(sim(i, j) >= alphas[a] - detail::kEps)) continue;
                ++matched;
                loc[a] += sim(i, j);
                matches[a](gt_index(f.gt[i]->id), pred_index(f.pred[j]->id)) += 1.0;
            }
            tp[a] += matched;
            fn[a] += n_gt - matched;
            fp[a] += n_pred - matched;
        }
    }

    HotaResult res;
    res.alphas = alphas;
    res.tp_alpha = tp;
    res.fp_alpha = fp;
    res.fn_alpha = fn;
    for (std::size_t a = 0; a < na; ++a) {
        double ass_sum = 0.0;
        for (int i = 0; i < ng; ++i) {
            for (int j = 0; j < np; ++j) {
                const double c = matches[a](i, j);
                if (c == 0.0) continue;
                ass_sum += c * c / std::max(1.0, gt_count(i) + pred_count(j) - c);
            }
        }
        const double t = static_cast<double>(tp[a]);
        const double ass_a = ass_sum / std::max(1.0, t);
        const double det_a = t / std::max(1.0, t + static_cast<double>(fn[a] + fp[a]));
        res.ass_a_alpha.push_back(ass_a);
        res.det_a_alpha.push_back(det_a);
        res.det_re_alpha.push_back(t / std::max(1.0, t + static_cast<double>(fn[a])));
        res.det_pr_alpha.push_back(t / std::max(1.0, t + static_cast<double>(fp[a])));
        res.hota_alpha.push_back(std::sqrt(det_a * ass_a));
        res.loc_a += std::max(1e-10, loc[a]) / std::max(1e-10, t);
    }
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    res.hota = mean(res.hota_alpha);
    res.det_a = mean(res.det_a_alpha);
    res.ass_a = mean(res.ass_a_alpha);
    res.det_re = mean(res.det_re_alpha);
    res.det_pr = mean(res.det_pr_alpha);
    res.loc_a /= static_cast<double>(na);
    return res;
}

inline MetricReport evaluate(const TrajectorySet& gt, const TrajectorySet& pred, const SimilarityConfig& config,
                             double match_threshold = 0.5) {
    const HotaResult h = hota(gt, pred, config);
    const ClearResult c = mota(gt, pred, config, match_threshold);
    MetricReport r;
    r.hota = h.hota;
    r.det_re = h.det_re;
    r.det_pr = h.det_pr;
    r.det_a = h.det_a;
    r.ass_a = h.ass_a;
    r.loc_a = h.loc_a;
    r.mota = c.mota;
    r.fp = c.fp;
    r.fn = c.fn;
    r.idsw = c.idsw;
    r.num_gt = c.num_gt;
    r.num_pred = static_cast<std::int64_t>(pred.size());
    return r;
}

}  // namespace mot3d
