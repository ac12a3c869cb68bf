// Monte-Carlo search for the operating-point presets: for each target
// (recall, precision), find the visible-tomato detection probability and
// the clutter rate whose audited frame-level recall and precision match,
// averaged over several scene seeds. Prints the values to freeze in the
// shipped config and in operating_points().

#include "mot3d/mot3d.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace mot3d;

namespace {

DetectionAudit pooled_audit(const SceneSpec& base, double p, double clutter, std::span<const std::uint64_t> seeds,
                            const Mat3& meas_cov) {
    DetectionAudit total;
    for (auto s : seeds) {
        SceneSpec spec = base;
        spec.seed = s;
        spec.noise.detect_prob_visible = p;
        spec.noise.clutter_rate = clutter;
        const auto a = audit_detections(render_sequence(spec, meas_cov).frames);
        total.gt_records += a.gt_records;
        total.true_detections += a.true_detections;
        total.detections += a.detections;
    }
    return total;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Calibrate detector operating-point presets"};
    std::string config_path;
    int replicates = 8;
    app.add_option("--config", config_path, "Config whose scene is used")->check(CLI::ExistingFile);
    app.add_option("--replicates", replicates, "Scene seeds per evaluation (the config seed plus derived ones)")
        ->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    try {
        Config cfg;
        if (!config_path.empty()) cfg = read_config(config_path);
        const SceneSpec& scene = cfg.experiment.scene;
        std::vector<std::uint64_t> seeds{scene.seed};
        for (int r = 1; r < replicates; ++r) seeds.push_back(derive_seed(scene.seed, {0xCA1ULL, static_cast<std::uint64_t>(r)}));
        const Mat3& cov = cfg.experiment.tracker.meas_cov_default;

        for (const auto& op : cfg.experiment.presets) {
            const double re = op.target_det_re / 100.0, pr = op.target_det_pr / 100.0;
            // Recall does not depend on clutter: bisect the detection probability.
            double lo = 0.0, hi = 1.0;
            for (int it = 0; it < 16; ++it) {
                const double mid = 0.5 * (lo + hi);
                (pooled_audit(scene, mid, 0.0, seeds, cov).recall() < re ? lo : hi) = mid;
            }
            const double p = 0.5 * (lo + hi);
            // Precision falls with clutter: bisect the rate.
            double clo = 0.0, chi = 30.0;
            for (int it = 0; it < 16; ++it) {
                const double mid = 0.5 * (clo + chi);
                (pooled_audit(scene, p, mid, seeds, cov).precision() > pr ? clo : chi) = mid;
            }
            const double clutter = 0.5 * (clo + chi);
            const auto check = pooled_audit(scene, p, clutter, {seeds.data(), 1}, cov);
            std::printf("%-5s detect_prob_visible %.4f clutter_rate %.4f  (default scene: recall %.2f precision %.2f; "
                        "target %.2f / %.2f)\n",
                        op.name.c_str(), p, clutter, 100 * check.recall(), 100 * check.precision(), op.target_det_re,
                        op.target_det_pr);
        }
    } catch (const std::exception& e) {
        std::cerr << "calibrate_presets: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
