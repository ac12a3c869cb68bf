// Two frames, two tomatoes: the second frame lists the detections in the
// opposite order and the tracker keeps the identities.

#include "mot3d/tracker.hpp"

#include <cstdio>

using namespace mot3d;

int main() {
    auto det = [](double x, std::vector<double> f, std::int64_t frame) {
        return Detection{Gaussian3::isotropic(Vec3(x, 0.0, 1.0), 0.01), std::nullopt, FeatureVector::from_std(f), frame};
    };

    TrackerConfig config;
    config.gate.lambda = 0.5;
    config.gate.feat_gate = 0.3;

    std::vector<DetectionFrame> frames = {
        {0, {det(0.00, {1, 0, 0}, 0), det(0.10, {0, 1, 0}, 0)}},
        {1, {det(0.102, {0.1, 1, 0}, 1), det(0.003, {1, 0.05, 0}, 1)}},
    };
    const SequenceResult result = run_sequence(frames, config);

    for (const auto& r : result.trajectories.records) {
        std::printf("frame %lld  id %lld  x %.3f\n", static_cast<long long>(r.frame), static_cast<long long>(r.id), r.pos.x());
    }
    std::printf("%zu tracks\n", result.world.tracks.size());
}
