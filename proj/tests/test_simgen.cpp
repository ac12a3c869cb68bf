#include "oracles.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace mot3d;

namespace {

SceneSpec noiseless_scene() {
    SceneSpec s;
    auto& n = s.noise;
    n.sigma_pos_lateral = n.sigma_pos_ray = n.ray_bias = 0.0;
    n.sigma_feat = 0.0;
    n.registration_sigma = 0.0;
    n.detect_prob_visible = 1.0;
    n.occlusion_exponent = 0.0;
    n.clutter_rate = 0.0;
    return s;
}

}  // namespace

TEST(Rng, SeededStreamsAreReproducibleAndDistinct) {
    Rng a(42, {1, 2}), b(42, {1, 2}), c(42, {1, 3});
    bool differs = false;
    for (int k = 0; k < 100; ++k) {
        const auto x = a.next();
        EXPECT_EQ(x, b.next());
        differs |= x != c.next();
    }
    EXPECT_TRUE(differs);
    EXPECT_NE(derive_seed(1, {0}), derive_seed(2, {0}));
}

TEST(Rng, DistributionsHaveTheRightMoments) {
    Rng r(3);
    double s = 0, s2 = 0, su = 0, sp = 0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
        const double x = r.normal();
        s += x;
        s2 += x * x;
        su += r.uniform();
    }
    for (int k = 0; k < 20000; ++k) sp += static_cast<double>(r.poisson(2.5));
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.02);
    EXPECT_NEAR(su / n, 0.5, 0.005);
    EXPECT_NEAR(sp / 20000, 2.5, 0.05);
}

TEST(CameraPath, HundredViewsOnASemiCylinder) {
    const PathSpec p;
    const auto views = camera_path(p);
    ASSERT_EQ(views.size(), 100u);
    std::set<int> azimuth_idx;
    for (const auto& v : views) {
        EXPECT_NEAR(v.look_at.x(), 0.0, 1e-15);
        EXPECT_NEAR(v.look_at.y(), 0.0, 1e-15);
        EXPECT_NEAR(v.look_at.z(), v.position.z(), 1e-15);
        EXPECT_NEAR(std::hypot(v.position.x(), v.position.y()), p.radius, 1e-12);
        EXPECT_GE(v.azimuth, -1e-12);
        EXPECT_LE(v.azimuth, std::numbers::pi + 1e-12);
        azimuth_idx.insert(v.azimuth_index);
    }
    EXPECT_EQ(azimuth_idx.size(), 10u);
    // Consecutive views within a height level are one azimuth step apart.
    EXPECT_NEAR(std::fabs(views[1].azimuth - views[0].azimuth), std::numbers::pi / 9.0, 1e-12);
    // Serpentine: the second level starts where the first ended.
    EXPECT_NEAR(views[10].azimuth, views[9].azimuth, 1e-12);
    EXPECT_GT(views[10].position.z(), views[9].position.z());
}

TEST(EmbeddingCenters, AntipodalPairAndMinimumAngle) {
    const auto two = embedding_centers(2, 16, std::numbers::pi, 1);
    ASSERT_EQ(two.size(), 2u);
    EXPECT_NEAR(two[0].dot(two[1]), -1.0, 1e-12);
    EXPECT_THROW(embedding_centers(3, 16, std::numbers::pi, 1), ValidationError);

    const auto many = embedding_centers(58, 64, std::numbers::pi / 4.0, 9);
    ASSERT_EQ(many.size(), 58u);
    for (std::size_t a = 0; a < many.size(); ++a) {
        EXPECT_NEAR(many[a].norm(), 1.0, 1e-12);
        for (std::size_t b = a + 1; b < many.size(); ++b) {
            EXPECT_GE(std::acos(std::clamp(many[a].dot(many[b]), -1.0, 1.0)), std::numbers::pi / 4.0 - 1e-9);
        }
    }
    EXPECT_EQ(embedding_centers(58, 64, std::numbers::pi / 4.0, 9), many);
}

TEST(Scene, DeterministicWithinCountBoundsAndSeparated) {
    for (std::uint64_t seed : {1u, 7u, 99u}) {
        SceneSpec spec;
        spec.seed = seed;
        const Scene a = generate_scene(spec), b = generate_scene(spec);
        ASSERT_EQ(a.tomatoes.size(), b.tomatoes.size());
        EXPECT_GE(a.tomatoes.size(), 35u);
        EXPECT_LE(a.tomatoes.size(), 63u);
        for (std::size_t i = 0; i < a.tomatoes.size(); ++i) {
            EXPECT_EQ(a.tomatoes[i].center, b.tomatoes[i].center);
            EXPECT_EQ(a.tomatoes[i].id, static_cast<std::int64_t>(i));
            for (std::size_t j = i + 1; j < a.tomatoes.size(); ++j) {
                EXPECT_GE((a.tomatoes[i].center - a.tomatoes[j].center).norm(), 1.5 * spec.tomato_radius);
            }
        }
        EXPECT_EQ(a.leaves.size(), static_cast<std::size_t>(spec.n_leaves));
    }
    SceneSpec none;
    none.n_trusses = 0;
    EXPECT_TRUE(generate_scene(none).tomatoes.empty());
    const auto seq = render_sequence(none, Mat3::Identity() * 1e-4);
    for (const auto& f : seq.frames) EXPECT_TRUE(f.ground_truth.empty());
}

TEST(Visibility, RemovingALeafNeverHidesATomato) {
    SceneSpec spec;
    const Scene full = generate_scene(spec);
    const auto views = camera_path(spec.path);
    for (std::size_t drop = 0; drop < full.leaves.size(); drop += 3) {
        Scene fewer = full;
        fewer.leaves.erase(fewer.leaves.begin() + static_cast<std::ptrdiff_t>(drop));
        for (std::size_t v = 0; v < views.size(); v += 7) {
            const ViewGeometry a(full, views[v], spec.path), b(fewer, views[v], spec.path);
            for (std::size_t k = 0; k < full.tomatoes.size(); ++k) {
                const auto va = a.visibility(k, true), vb = b.visibility(k, true);
                EXPECT_GE(vb.clear_fraction, va.clear_fraction);
                if (va.annotated) EXPECT_TRUE(vb.annotated);
            }
        }
    }
}

TEST(Render, NoiselessLimitReproducesTheScene) {
    const SceneSpec spec = noiseless_scene();
    const auto seq = render_sequence(spec, Mat3::Identity() * 1e-4);
    ASSERT_EQ(seq.frames.size(), 100u);
    std::size_t total = 0;
    for (const auto& f : seq.frames) {
        ASSERT_EQ(f.detections.size(), f.ground_truth.size());
        for (std::size_t k = 0; k < f.detections.size(); ++k) {
            ASSERT_TRUE(f.gt_ids[k].has_value());
            const auto id = *f.gt_ids[k];
            EXPECT_EQ(f.ground_truth[k].id, id);
            const Vec3 truth = seq.scene.tomatoes[static_cast<std::size_t>(id)].center;
            EXPECT_NEAR((f.detections[k].position.mean() - truth).norm(), 0.0, 1e-12);
            EXPECT_NEAR(f.detections[k].feature.values().dot(seq.centers[static_cast<std::size_t>(id)]), 1.0, 1e-12);
        }
        total += f.detections.size();
    }
    EXPECT_GT(total, 0u);
}

TEST(Render, NoClutterMeansEveryDetectionHasAnIdentity) {
    SceneSpec spec;
    spec.noise.clutter_rate = 0.0;
    const auto seq = render_sequence(spec, Mat3::Identity() * 1e-4);
    for (const auto& f : seq.frames) {
        for (const auto& id : f.gt_ids) EXPECT_TRUE(id.has_value());
    }
}

TEST(Render, DeterministicPerSeed) {
    SceneSpec spec;
    const auto a = render_sequence(spec, Mat3::Identity() * 1e-4);
    const auto b = render_sequence(spec, Mat3::Identity() * 1e-4);
    ASSERT_EQ(a.frames.size(), b.frames.size());
    for (std::size_t k = 0; k < a.frames.size(); ++k) {
        ASSERT_EQ(a.frames[k].detections.size(), b.frames[k].detections.size());
        for (std::size_t j = 0; j < a.frames[k].detections.size(); ++j) {
            EXPECT_EQ(a.frames[k].detections[j].position.mean(), b.frames[k].detections[j].position.mean());
            EXPECT_EQ(a.frames[k].detections[j].feature, b.frames[k].detections[j].feature);
        }
    }
}

TEST(Subsets, ReproducibleSortedAndBounded) {
    const auto a = subsample_viewpoints(100, 5, 80, 2023);
    const auto b = subsample_viewpoints(100, 5, 80, 2023);
    EXPECT_EQ(a, b);
    ASSERT_EQ(a.size(), 5u);
    for (const auto& s : a) {
        ASSERT_EQ(s.size(), 80u);
        EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
        EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), 80u);
        EXPECT_LT(s.back(), 100u);
    }
    EXPECT_NE(a[0], a[1]);
    EXPECT_THROW(subsample_viewpoints(100, 1, 101, 1), ValidationError);
}

TEST(OrderFrames, RandomOrderIsAPermutation) {
    std::vector<int> v(80);
    std::iota(v.begin(), v.end(), 0);
    EXPECT_EQ(order_frames(v, FrameOrder::sequential, 5), v);
    auto r = order_frames(v, FrameOrder::random, 5);
    EXPECT_NE(r, v);
    EXPECT_EQ(r, order_frames(v, FrameOrder::random, 5));
    std::sort(r.begin(), r.end());
    EXPECT_EQ(r, v);
    EXPECT_THROW(parse_frame_order("reverse"), ValidationError);
}

TEST(OperatingPoints, PresetsAndLookup) {
    ASSERT_EQ(operating_points().size(), 3u);
    EXPECT_EQ(operating_point("mid").target_det_re, 60.83);
    EXPECT_EQ(operating_point("mid").target_det_pr, 82.33);
    EXPECT_EQ(operating_point("low").target_det_re, 67.76);
    EXPECT_EQ(operating_point("high").target_det_pr, 88.07);
    EXPECT_THROW(operating_point("extreme"), ValidationError);
}

TEST(EndToEnd, NoiselessScenesTrackPerfectly) {
    const SceneSpec spec = noiseless_scene();
    const auto seq = render_sequence(spec, Mat3::Identity() * 1e-4);
    for (auto order : {FrameOrder::sequential, FrameOrder::random}) {
        std::vector<std::size_t> pos(seq.frames.size());
        std::iota(pos.begin(), pos.end(), 0);
        const PreparedRun run = prepare_run(seq, order_frames(pos, order, 3));
        TrackerConfig c;
        c.gate.lambda = 1.0;
        c.gate.feat_gate = 0.1;
        const SequenceResult r = run_sequence(run.frames, c);
        const MetricReport m = evaluate(run.ground_truth, r.trajectories, SimilarityConfig{});
        EXPECT_DOUBLE_EQ(m.hota, 1.0);
        EXPECT_DOUBLE_EQ(m.mota, 1.0);
        EXPECT_EQ(m.idsw, 0);
    }
}

TEST(Calibration, MidPresetAuditNearTargets) {
    SceneSpec spec;
    spec.noise = operating_point("mid").apply(spec.noise);
    const auto audit = audit_detections(render_sequence(spec, benchmark_tracker_config().meas_cov_default).frames);
    EXPECT_NEAR(100.0 * audit.recall(), 60.83, 5.0);
    EXPECT_NEAR(100.0 * audit.precision(), 82.33, 5.0);
}
