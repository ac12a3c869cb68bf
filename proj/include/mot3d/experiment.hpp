#pragma once

// Experiment grid: for every (operating point, frame order, lambda, subset)
// cell, order the subset's frames, run the tracker and evaluate it; then
// compare each lambda > 0 against lambda = 0 with a paired t-test over the
// subsets.

#include "mot3d/association.hpp"
#include "mot3d/metrics.hpp"
#include "mot3d/simgen.hpp"
#include "mot3d/stats.hpp"
#include "mot3d/tracker.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace mot3d {

/// Tracker noise used by the synthetic benchmark: measurement noise at the
/// simulated detector's level, and process noise large enough for a track to
/// follow the registration drift between neighbouring viewpoints.
inline TrackerConfig benchmark_tracker_config() {
    TrackerConfig c;
    c.meas_cov_default = Mat3::Identity() * (0.005 * 0.005);
    c.process_noise = Mat3::Identity() * (0.015 * 0.015);
    return c;
}

struct ExperimentSpec {
    SceneSpec scene;
    std::vector<double> lambda_grid{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<FrameOrder> orders{FrameOrder::sequential, FrameOrder::random};
    std::vector<std::string> operating_points{"mid"};
    std::vector<OperatingPoint> presets = mot3d::operating_points();
    int n_subsets = 5;
    std::size_t subset_size = 80;
    std::uint64_t seed = 2023;  // subsets, random orders and the validation scene
    TrackerConfig tracker = benchmark_tracker_config();
    std::optional<double> feat_gate;  // calibrated on a validation scene when absent
    SimilarityConfig similarity;
    double match_threshold = 0.5;
    bool compare_to_baseline = true;

    void validate() const {
        scene.validate();
        tracker.validate();
        similarity.validate();
        if (lambda_grid.empty()) throw ValidationError("ExperimentSpec: lambda_grid is empty");
        for (double l : lambda_grid) {
            if (!(l >= 0.0 && l <= 1.0)) throw ValidationError("ExperimentSpec: lambda values must lie in [0, 1]");
        }
        if (compare_to_baseline && std::find(lambda_grid.begin(), lambda_grid.end(), 0.0) == lambda_grid.end()) {
            throw ValidationError("ExperimentSpec: baseline comparison requires lambda 0 in lambda_grid");
        }
        if (orders.empty()) throw ValidationError("ExperimentSpec: no frame orders requested");
        if (operating_points.empty()) throw ValidationError("ExperimentSpec: no operating points requested");
        for (const auto& op : presets) {
            if (!(op.detect_prob_visible >= 0.0 && op.detect_prob_visible <= 1.0) || !(op.clutter_rate >= 0.0)) {
                throw ValidationError("ExperimentSpec: operating point '" + op.name + "' has invalid parameters");
            }
        }
        for (const auto& op : operating_points) (void)operating_point(op, presets);
        if (n_subsets < 1) throw ValidationError("ExperimentSpec: n_subsets must be positive");
        if (subset_size < 1) throw ValidationError("ExperimentSpec: subset_size must be positive");
        if (feat_gate && !(*feat_gate >= 0.0 && *feat_gate <= 2.0)) {
            throw ValidationError("ExperimentSpec: feat_gate must lie in [0, 2]");
        }
    }
};

struct CellKey {
    std::string operating_point;
    FrameOrder order = FrameOrder::sequential;
    double lambda = 0.0;
    int subset = 0;
};

struct CellResult {
    CellKey key;
    MetricReport report;
    std::optional<std::string> error;
};

/// A metric of one (operating point, order, lambda) group compared with the
/// lambda = 0 group over the same subsets.
struct Comparison {
    double t = 0.0;
    double p = 1.0;
    std::string stars;
};

struct AggregateRow {
    std::string operating_point;
    FrameOrder order = FrameOrder::sequential;
    double lambda = 0.0;
    MetricReport mean;   // means over subsets (counts are stored rounded down; see mean_idsw)
    double mean_idsw = 0.0;
    double mean_fp = 0.0;
    double mean_fn = 0.0;
    int n_ok = 0;
    std::map<std::string, Comparison> vs_baseline;  // keyed by metric name
};

struct ResultTable {
    std::vector<CellResult> cells;
    std::vector<AggregateRow> aggregates;
    std::map<std::string, double> feature_gates;  // per operating point
    std::map<std::string, DetectionAudit> detection_audits;
    std::vector<std::string> warnings;
    std::vector<double> lambda_grid;  // deduplicated, ascending

    bool has_significance() const {
        return std::any_of(aggregates.begin(), aggregates.end(), [](const AggregateRow& a) { return !a.vs_baseline.empty(); });
    }
};

/// Metric names compared against the baseline, in table order.
inline const std::vector<std::string>& compared_metrics() {
    static const std::vector<std::string> names = {"HOTA", "DetRe", "DetPr", "AssA", "MOTA", "IDSW"};
    return names;
}

inline double metric_value(const MetricReport& r, const std::string& name) {
    if (name == "HOTA") return r.hota;
    if (name == "DetRe") return r.det_re;
    if (name == "DetPr") return r.det_pr;
    if (name == "DetA") return r.det_a;
    if (name == "AssA") return r.ass_a;
    if (name == "MOTA") return r.mota;
    if (name == "IDSW") return static_cast<double>(r.idsw);
    if (name == "FP") return static_cast<double>(r.fp);
    if (name == "FN") return static_cast<double>(r.fn);
    throw ValidationError("unknown metric '" + name + "'");
}

/// Frames of one subset in presentation order, re-indexed 0..n-1, with the
/// matching ground truth.
struct PreparedRun {
    std::vector<DetectionFrame> frames;
    TrajectorySet ground_truth;
};

inline PreparedRun prepare_run(const RenderedSequence& seq, std::span<const std::size_t> positions) {
    PreparedRun run;
    for (std::size_t p = 0; p < positions.size(); ++p) {
        const RenderedFrame& src = seq.frames.at(positions[p]);
        const auto idx = static_cast<std::int64_t>(p);
        DetectionFrame f;
        f.index = idx;
        f.detections = src.detections;
        for (auto& d : f.detections) d.frame = idx;
        run.frames.push_back(std::move(f));
        for (auto rec : src.ground_truth) {
            rec.frame = idx;
            run.ground_truth.records.push_back(rec);
        }
    }
    return run;
}

/// Labeled features of the true detections of a validation rendering.
inline std::vector<LabeledFeature> labeled_features(const RenderedSequence& seq) {
    std::vector<LabeledFeature> out;
    for (const auto& f : seq.frames) {
        for (std::size_t k = 0; k < f.detections.size(); ++k) {
            if (f.gt_ids[k]) out.push_back({*f.gt_ids[k], f.detections[k].feature});
        }
    }
    return out;
}

inline int experiment_threads() {
    if (const char* env = std::getenv("MOT3D_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Called once per finished cell with the predicted trajectories.
using TrajectorySink = std::function<void(const CellKey&, const TrajectorySet&)>;

inline std::string format_lambda(double l) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", l);
    return buf;
}

inline ResultTable run_experiment(const ExperimentSpec& spec, int threads = experiment_threads(),
                                  const TrajectorySink& sink = {}) {
    spec.validate();
    ResultTable table;

    std::vector<double> lambdas = spec.lambda_grid;
    std::sort(lambdas.begin(), lambdas.end());
    const auto last = std::unique(lambdas.begin(), lambdas.end());
    if (last != lambdas.end()) {
        table.warnings.push_back("duplicate lambda values removed from lambda_grid");
        lambdas.erase(last, lambdas.end());
    }
    table.lambda_grid = lambdas;

    struct OpData {
        std::string name;
        RenderedSequence seq;
        double feat_gate = 2.0;
    };
    std::vector<OpData> ops;
    for (const auto& name : spec.operating_points) {
        OpData d;
        d.name = name;
        SceneSpec scene = spec.scene;
        scene.noise = operating_point(name, spec.presets).apply(scene.noise);
        d.seq = render_sequence(scene, spec.tracker.meas_cov_default);
        if (spec.feat_gate) {
            d.feat_gate = *spec.feat_gate;
        } else {
            SceneSpec validation = scene;
            validation.seed = derive_seed(spec.seed, {static_cast<std::uint64_t>(Stream::validation)});
            const auto labeled = labeled_features(render_sequence(validation, spec.tracker.meas_cov_default));
            d.feat_gate = calibrate_feature_gate(labeled);
        }
        table.feature_gates[name] = d.feat_gate;
        table.detection_audits[name] = audit_detections(d.seq.frames);
        ops.push_back(std::move(d));
    }

    const std::size_t n_frames = ops.front().seq.frames.size();
    const auto subsets = subsample_viewpoints(n_frames, spec.n_subsets, spec.subset_size, spec.seed);

    // Cell layout: op-major, then order, lambda, subset.
    std::vector<CellKey> keys;
    for (const auto& op : ops) {
        for (FrameOrder order : spec.orders) {
            for (double l : lambdas) {
                for (int s = 0; s < spec.n_subsets; ++s) keys.push_back({op.name, order, l, s});
            }
        }
    }
    table.cells.resize(keys.size());

    auto run_cell = [&](std::size_t c) {
        const CellKey& key = keys[c];
        CellResult& out = table.cells[c];
        out.key = key;
        try {
            const OpData& op = *std::find_if(ops.begin(), ops.end(), [&](const OpData& o) { return o.name == key.operating_point; });
            const auto positions = order_frames(subsets[key.subset], key.order,
                                                derive_seed(spec.seed, {static_cast<std::uint64_t>(key.subset)}));
            const PreparedRun run = prepare_run(op.seq, positions);
            TrackerConfig cfg = spec.tracker;
            cfg.gate.lambda = key.lambda;
            cfg.gate.feat_gate = op.feat_gate;
            const SequenceResult res = run_sequence(run.frames, cfg);
            out.report = evaluate(run.ground_truth, res.trajectories, spec.similarity, spec.match_threshold);
            if (sink) sink(key, res.trajectories);
        } catch (const std::exception& e) {
            out.error = e.what();
        }
    };

    const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(keys.size())));
    if (n_threads == 1) {
        for (std::size_t c = 0; c < keys.size(); ++c) run_cell(c);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t c = next++; c < keys.size(); c = next++) run_cell(c);
            });
        }
        for (auto& th : pool) th.join();
    }

    for (const auto& c : table.cells) {
        if (c.error) {
            table.warnings.push_back("cell " + c.key.operating_point + "/" + to_string(c.key.order) + "/lambda=" +
                                     format_lambda(c.key.lambda) + "/subset=" + std::to_string(c.key.subset) +
                                     " failed: " + *c.error);
        }
    }

    // Aggregates and paired comparisons against lambda = 0.
    auto group = [&](const std::string& op, FrameOrder order, double l) {
        std::vector<const CellResult*> g;
        for (const auto& c : table.cells) {
            if (c.key.operating_point == op && c.key.order == order && c.key.lambda == l) g.push_back(&c);
        }
        return g;
    };
    const bool has_baseline = std::find(lambdas.begin(), lambdas.end(), 0.0) != lambdas.end();
    for (const auto& op : ops) {
        for (FrameOrder order : spec.orders) {
            const auto base = group(op.name, order, 0.0);
            for (double l : lambdas) {
                AggregateRow row;
                row.operating_point = op.name;
                row.order = order;
                row.lambda = l;
                const auto g = group(op.name, order, l);
                for (const auto* c : g) {
                    if (c->error) continue;
                    ++row.n_ok;
                    row.mean.hota += c->report.hota;
                    row.mean.det_re += c->report.det_re;
                    row.mean.det_pr += c->report.det_pr;
                    row.mean.det_a += c->report.det_a;
                    row.mean.ass_a += c->report.ass_a;
                    row.mean.loc_a += c->report.loc_a;
                    row.mean.mota += c->report.mota;
                    row.mean_idsw += static_cast<double>(c->report.idsw);
                    row.mean_fp += static_cast<double>(c->report.fp);
                    row.mean_fn += static_cast<double>(c->report.fn);
                }
                if (row.n_ok > 0) {
                    const double n = row.n_ok;
                    row.mean.hota /= n;
                    row.mean.det_re /= n;
                    row.mean.det_pr /= n;
                    row.mean.det_a /= n;
                    row.mean.ass_a /= n;
                    row.mean.loc_a /= n;
                    row.mean.mota /= n;
                    row.mean_idsw /= n;
                    row.mean_fp /= n;
                    row.mean_fn /= n;
                    row.mean.idsw = static_cast<std::int64_t>(row.mean_idsw);
                    row.mean.fp = static_cast<std::int64_t>(row.mean_fp);
                    row.mean.fn = static_cast<std::int64_t>(row.mean_fn);
                }
                const bool all_ok = std::none_of(g.begin(), g.end(), [](const CellResult* c) { return c->error.has_value(); }) &&
                                    std::none_of(base.begin(), base.end(), [](const CellResult* c) { return c->error.has_value(); });
                if (has_baseline && spec.compare_to_baseline && l != 0.0 && all_ok && g.size() >= 2) {
                    for (const auto& metric : compared_metrics()) {
                        std::vector<double> a, b;
                        for (std::size_t s = 0; s < g.size(); ++s) {
                            a.push_back(metric_value(g[s]->report, metric));
                            b.push_back(metric_value(base[s]->report, metric));
                        }
                        const TTestResult t = paired_t_test(a, b);
                        row.vs_baseline[metric] = Comparison{t.t, t.p, significance_stars(t.p)};
                    }
                }
                table.aggregates.push_back(std::move(row));
            }
        }
    }
    return table;
}

}  // namespace mot3d
