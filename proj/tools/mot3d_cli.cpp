// mot3d: simulate, track, eval, calibrate-gate, experiment, print-config.

#include "mot3d/mot3d.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace mot3d;

namespace {

struct Common {
    std::string config_path;
    bool strict = false;
    std::vector<std::string> warnings;

    ParseOptions options() { return ParseOptions{strict, &warnings}; }

    Config load() {
        Config c;
        if (!config_path.empty()) c = read_config(config_path, options());
        return c;
    }

    void flush_warnings() {
        for (const auto& w : warnings) std::cerr << "mot3d: warning: " << w << '\n';
        warnings.clear();
    }
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "JSON config file (schema_version 1)")->check(CLI::ExistingFile);
    cmd->add_flag("--strict", c.strict, "Reject unknown fields in input files");
}

fs::path ensure_dir(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw Error("cannot create directory " + dir + ": " + ec.message());
    return p;
}

std::string to_text(const std::function<void(std::ostream&)>& fn) {
    std::ostringstream os;
    fn(os);
    return os.str();
}

void apply_gate_flags(TrackerConfig& t, const std::optional<double>& lambda, const std::optional<double>& pos_gate,
                      const std::optional<double>& feat_gate) {
    if (lambda) t.gate.lambda = *lambda;
    if (pos_gate) t.gate.pos_gate = *pos_gate;
    if (feat_gate) t.gate.feat_gate = *feat_gate;
    t.validate();
}

void print_report(const MetricReport& r) {
    std::cout << to_text([&](std::ostream& os) { write_report_csv(os, r); });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"3D multi-object tracking with position and appearance association"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "mot3d 1.0");

    Common common;

    // simulate
    auto* sim = app.add_subcommand("simulate", "Render a synthetic scene into detection and ground-truth files");
    add_common(sim, common);
    std::optional<std::uint64_t> sim_seed;
    std::string sim_op = "mid", sim_out = ".";
    std::optional<int> sim_subset;
    std::string sim_order = "sequential";
    sim->add_option("--seed", sim_seed, "Scene seed");
    sim->add_option("--operating-point", sim_op, "Detector preset");
    sim->add_option("--subset", sim_subset, "Write only this experiment subset, re-indexed in presentation order");
    sim->add_option("--order", sim_order, "Presentation order of --subset")->check(CLI::IsMember({"sequential", "random"}));
    sim->add_option("--out", sim_out, "Output directory");

    // track
    auto* trk = app.add_subcommand("track", "Run the tracker over a detections file");
    add_common(trk, common);
    std::string trk_dets, trk_out = ".";
    std::optional<double> trk_lambda, trk_pos_gate, trk_feat_gate;
    bool trk_baseline = false;
    trk->add_option("--detections", trk_dets, "Detections JSONL")->required()->check(CLI::ExistingFile);
    trk->add_option("--lambda", trk_lambda, "Weight of the position cost")->check(CLI::Range(0.0, 1.0));
    trk->add_option("--pos-gate", trk_pos_gate, "Position gate on the squared Mahalanobis distance");
    trk->add_option("--feat-gate", trk_feat_gate, "Feature gate on the cosine distance");
    trk->add_flag("--baseline", trk_baseline, "Position-only tracker (ignores features and lambda)");
    trk->add_option("--out", trk_out, "Output directory (writes trajectories.jsonl)");

    // eval
    auto* ev = app.add_subcommand("eval", "Score predicted trajectories against ground truth");
    add_common(ev, common);
    std::string ev_gt, ev_pred, ev_out;
    std::optional<double> ev_dmax;
    ev->add_option("--gt", ev_gt, "Ground-truth trajectories JSONL")->required()->check(CLI::ExistingFile);
    ev->add_option("--pred", ev_pred, "Predicted trajectories JSONL")->required()->check(CLI::ExistingFile);
    ev->add_option("--d-max", ev_dmax, "Distance (m) at which 3D similarity reaches zero");
    ev->add_option("--out", ev_out, "Output directory (writes report.json and report.csv)");

    // calibrate-gate
    auto* cal = app.add_subcommand("calibrate-gate", "Feature gate from labeled detections");
    add_common(cal, common);
    std::string cal_in, cal_out;
    double cal_q = 0.95;
    cal->add_option("--labeled", cal_in, "Detections JSONL with gt_id fields")->required()->check(CLI::ExistingFile);
    cal->add_option("--quantile", cal_q, "Quantile of the per-occurrence minimum distances")->check(CLI::Range(0.0, 1.0));
    cal->add_option("--out", cal_out, "Output directory (writes feature_gate.json)");

    // experiment
    auto* exp = app.add_subcommand("experiment", "Run the lambda / order / operating-point grid");
    add_common(exp, common);
    std::optional<std::uint64_t> exp_seed;
    std::vector<double> exp_lambdas;
    std::vector<std::string> exp_orders;
    std::optional<double> exp_pos_gate, exp_feat_gate;
    std::string exp_out = "results";
    std::optional<int> exp_threads;
    bool exp_no_traj = false;
    exp->add_option("--seed", exp_seed, "Experiment seed (subsets, orders, validation scene)");
    exp->add_option("--lambda", exp_lambdas, "Lambda grid (repeatable)")->check(CLI::Range(0.0, 1.0));
    exp->add_option("--order", exp_orders, "Frame orders (repeatable)")->check(CLI::IsMember({"sequential", "random"}));
    exp->add_option("--pos-gate", exp_pos_gate, "Position gate");
    exp->add_option("--feat-gate", exp_feat_gate, "Fixed feature gate instead of calibration");
    exp->add_option("--out", exp_out, "Output directory");
    exp->add_option("--threads", exp_threads, "Worker threads (default: MOT3D_THREADS or all cores)")->check(CLI::PositiveNumber);
    exp->add_flag("--no-trajectories", exp_no_traj, "Skip per-run trajectory files");

    // print-config
    auto* pc = app.add_subcommand("print-config", "Print the effective configuration as JSON");
    add_common(pc, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (sim->parsed()) {
            Config cfg = common.load();
            ExperimentSpec& spec = cfg.experiment;
            if (sim_seed) spec.scene.seed = *sim_seed;
            SceneSpec scene = spec.scene;
            scene.noise = operating_point(sim_op, spec.presets).apply(scene.noise);
            const RenderedSequence seq = render_sequence(scene, spec.tracker.meas_cov_default);

            std::vector<DetectionRecord> dets, labeled;
            TrajectorySet gt;
            auto emit = [&](const RenderedFrame& f, std::int64_t index) {
                for (std::size_t k = 0; k < f.detections.size(); ++k) {
                    Detection d = f.detections[k];
                    d.frame = index;
                    dets.push_back(to_record(d, std::nullopt, false));
                    labeled.push_back(to_record(d, f.gt_ids[k], false));
                }
                for (auto rec : f.ground_truth) {
                    rec.frame = index;
                    gt.records.push_back(rec);
                }
            };
            if (sim_subset) {
                const auto subsets = subsample_viewpoints(seq.frames.size(), spec.n_subsets, spec.subset_size, spec.seed);
                if (*sim_subset < 0 || *sim_subset >= spec.n_subsets) {
                    throw ValidationError("--subset must lie in [0, " + std::to_string(spec.n_subsets) + ")");
                }
                const auto positions = order_frames(subsets[*sim_subset], parse_frame_order(sim_order),
                                                    derive_seed(spec.seed, {static_cast<std::uint64_t>(*sim_subset)}));
                for (std::size_t p = 0; p < positions.size(); ++p) emit(seq.frames[positions[p]], static_cast<std::int64_t>(p));
            } else {
                for (const auto& f : seq.frames) emit(f, f.index);
            }
            const fs::path dir = ensure_dir(sim_out);
            write_text_file((dir / "detections.jsonl").string(), to_text([&](std::ostream& os) { write_detections(os, dets); }));
            write_text_file((dir / "labeled_detections.jsonl").string(),
                            to_text([&](std::ostream& os) { write_detections(os, labeled); }));
            write_text_file((dir / "ground_truth.jsonl").string(), to_text([&](std::ostream& os) { write_trajectories(os, gt); }));
            const auto audit = audit_detections(seq.frames);
            std::cout << "frames " << (sim_subset ? spec.subset_size : seq.frames.size()) << ", tomatoes "
                      << seq.scene.tomatoes.size() << ", detections " << dets.size() << ", gt records " << gt.size()
                      << "\nscene recall " << detail::pct(audit.recall()) << "%, precision "
                      << detail::pct(audit.precision()) << "%\n";
        } else if (trk->parsed()) {
            Config cfg = common.load();
            TrackerConfig t = cfg.experiment.tracker;
            apply_gate_flags(t, trk_lambda, trk_pos_gate, trk_feat_gate);
            const auto records = read_detections(trk_dets, common.options());
            const auto frames = group_frames(records, t.meas_cov_default);
            const SequenceResult res = run_sequence(frames, t, trk_baseline);
            const fs::path dir = ensure_dir(trk_out);
            write_text_file((dir / "trajectories.jsonl").string(),
                            to_text([&](std::ostream& os) { write_trajectories(os, res.trajectories); }));
            std::cout << "frames " << frames.size() << ", tracks " << res.world.tracks.size() << ", records "
                      << res.trajectories.size() << '\n';
        } else if (ev->parsed()) {
            Config cfg = common.load();
            SimilarityConfig sim_cfg = cfg.experiment.similarity;
            if (ev_dmax) sim_cfg.d_max = *ev_dmax;
            const TrajectorySet gt = read_trajectories(ev_gt, common.options());
            const TrajectorySet pred = read_trajectories(ev_pred, common.options());
            const MetricReport r = evaluate(gt, pred, sim_cfg, cfg.experiment.match_threshold);
            print_report(r);
            if (!ev_out.empty()) {
                const fs::path dir = ensure_dir(ev_out);
                write_text_file((dir / "report.json").string(), to_json(r).dump(2) + "\n");
                write_text_file((dir / "report.csv").string(), to_text([&](std::ostream& os) { write_report_csv(os, r); }));
            }
        } else if (cal->parsed()) {
            (void)common.load();
            const auto records = read_detections(cal_in, common.options());
            const auto labeled = labeled_features(std::span<const DetectionRecord>(records));
            const double gate = calibrate_feature_gate(labeled, cal_q);
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.17g", gate);
            std::cout << "feature_gate " << buf << " (" << labeled.size() << " labeled features, quantile " << cal_q << ")\n";
            if (!cal_out.empty()) {
                const fs::path dir = ensure_dir(cal_out);
                const json j = {{"feature_gate", gate}, {"quantile", cal_q}, {"n_features", labeled.size()}};
                write_text_file((dir / "feature_gate.json").string(), j.dump(2) + "\n");
            }
        } else if (exp->parsed()) {
            Config cfg = common.load();
            ExperimentSpec& spec = cfg.experiment;
            if (exp_seed) spec.seed = *exp_seed;
            if (!exp_lambdas.empty()) spec.lambda_grid = exp_lambdas;
            if (!exp_orders.empty()) {
                spec.orders.clear();
                for (const auto& o : exp_orders) spec.orders.push_back(parse_frame_order(o));
            }
            if (exp_pos_gate) spec.tracker.gate.pos_gate = *exp_pos_gate;
            if (exp_feat_gate) spec.feat_gate = *exp_feat_gate;
            if (spec.compare_to_baseline &&
                std::find(spec.lambda_grid.begin(), spec.lambda_grid.end(), 0.0) == spec.lambda_grid.end()) {
                spec.compare_to_baseline = false;
                common.warnings.push_back("lambda 0 not in the grid; baseline comparison disabled");
            }
            const fs::path dir = ensure_dir(exp_out);
            std::mutex io_mutex;
            TrajectorySink sink;
            if (!exp_no_traj) {
                ensure_dir((dir / "trajectories").string());
                sink = [&](const CellKey& k, const TrajectorySet& t) {
                    const std::string name = k.operating_point + "_" + to_string(k.order) + "_lambda" +
                                             format_lambda(k.lambda) + "_subset" + std::to_string(k.subset) + ".jsonl";
                    const std::string text = to_text([&](std::ostream& os) { write_trajectories(os, t); });
                    std::lock_guard lock(io_mutex);
                    write_text_file((dir / "trajectories" / name).string(), text);
                };
            }
            const ResultTable table = run_experiment(spec, exp_threads.value_or(experiment_threads()), sink);
            write_text_file((dir / "results.csv").string(), to_text([&](std::ostream& os) { write_results_csv(os, table); }));
            write_text_file((dir / "results.json").string(), to_json(table).dump(2) + "\n");
            write_text_file((dir / "fig6_long.csv").string(), to_text([&](std::ostream& os) { write_sweep_long_csv(os, table); }));
            for (const auto& w : table.warnings) common.warnings.push_back(w);
            common.flush_warnings();
            for (const auto& a : table.aggregates) {
                std::cout << a.operating_point << ' ' << to_string(a.order) << " lambda=" << format_lambda(a.lambda)
                          << "  HOTA " << detail::pct(a.mean.hota) << "  AssA " << detail::pct(a.mean.ass_a) << "  IDSW "
                          << detail::fixed(a.mean_idsw, 1);
                const auto it = a.vs_baseline.find("HOTA");
                if (it != a.vs_baseline.end()) std::cout << "  " << it->second.stars;
                std::cout << '\n';
            }
            const bool failed = std::any_of(table.cells.begin(), table.cells.end(), [](const CellResult& c) { return c.error.has_value(); });
            if (failed) {
                std::cerr << "mot3d: error: some cells failed; see results.csv\n";
                return 1;
            }
        } else if (pc->parsed()) {
            std::cout << to_json(common.load()).dump(2) << '\n';
        }
        common.flush_warnings();
    } catch (const std::exception& e) {
        common.flush_warnings();
        std::cerr << "mot3d: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
