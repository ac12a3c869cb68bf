#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace mot3d;

TEST(Gaussian3, RejectsInvalidCovariance) {
    Mat3 asym = Mat3::Identity();
    asym(0, 1) = 0.5;
    EXPECT_THROW(Gaussian3(Vec3::Zero(), asym), ValidationError);
    EXPECT_THROW(Gaussian3(Vec3::Zero(), Mat3::Zero()), ValidationError);
    Mat3 indefinite = Mat3::Identity();
    indefinite(2, 2) = -1.0;
    EXPECT_THROW(Gaussian3(Vec3::Zero(), indefinite), ValidationError);
    EXPECT_THROW(Gaussian3(Vec3(std::nan(""), 0, 0), Mat3::Identity()), ValidationError);
    EXPECT_NO_THROW(Gaussian3(Vec3(1, 2, 3), Mat3::Identity() * 1e-6));
}

TEST(FeatureVector, NormalizesOnConstruction) {
    const FeatureVector f = FeatureVector::from_std({3.0, 4.0});
    EXPECT_NEAR(f.values().norm(), 1.0, 1e-15);
    EXPECT_DOUBLE_EQ(f.values()(0), 0.6);
    EXPECT_THROW(FeatureVector::from_std({0.0, 0.0}), ValidationError);
    EXPECT_THROW(FeatureVector::from_std({}), ValidationError);
    EXPECT_THROW(FeatureVector::from_std({1.0, INFINITY}), ValidationError);
    EXPECT_THROW((void)f.dot(FeatureVector::from_std({1, 0, 0})), ValidationError);
}

TEST(FeatureVector, NormalizationIsIdempotent) {
    std::mt19937_64 gen(11);
    std::normal_distribution<double> n;
    for (int t = 0; t < 200; ++t) {
        Eigen::VectorXd v(64);
        for (auto& x : v) x = n(gen) * 10.0;
        const FeatureVector once(v);
        const FeatureVector twice(once.values());
        EXPECT_LE((once.values() - twice.values()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Detection, ValidatesBox) {
    Detection d{Gaussian3::isotropic(Vec3::Zero(), 0.01), BBox{0, 0, 0, 5}, FeatureVector::from_std({1}), 0};
    EXPECT_THROW(d.validate(), ValidationError);
    d.bbox = BBox{0, 0, 3, 5};
    EXPECT_NO_THROW(d.validate());
    d.frame = -1;
    EXPECT_THROW(d.validate(), ValidationError);
}

TEST(KalmanPredict, ZeroNoiseIsIdentity) {
    const Gaussian3 s(Vec3::Zero(), Mat3::Identity());
    const Gaussian3 p = kalman_predict(s, Mat3::Zero());
    EXPECT_EQ(p.mean(), s.mean());
    EXPECT_EQ(p.cov(), s.cov());
}

TEST(KalmanPredict, AddsProcessNoise) {
    const Gaussian3 p = kalman_predict(Gaussian3(Vec3(1, 2, 3), Mat3::Identity()), 0.01 * Mat3::Identity());
    EXPECT_EQ(p.mean(), Vec3(1, 2, 3));
    EXPECT_TRUE(p.cov().isApprox(1.01 * Mat3::Identity(), 1e-15));
}

TEST(KalmanPredict, RandomCovarianceDifferenceEqualsQ) {
    std::mt19937_64 gen(3);
    for (int t = 0; t < 100; ++t) {
        const Gaussian3 s(oracle::random_vec(gen), oracle::random_spd(gen));
        Mat3 q = oracle::random_spd(gen, 0.1, 0.0);
        const Gaussian3 p = kalman_predict(s, q);
        EXPECT_LE(((p.cov() - s.cov()) - q).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(KalmanPredict, RejectsNonPsdNoise) {
    Mat3 q = Mat3::Identity();
    q(1, 1) = -0.5;
    EXPECT_THROW(kalman_predict(Gaussian3(Vec3::Zero(), Mat3::Identity()), q), ValidationError);
}

TEST(KalmanUpdate, SymmetricFusion) {
    const Gaussian3 a(Vec3(1, 1, 1), Mat3::Identity());
    const Gaussian3 r = kalman_update(a, a);
    EXPECT_TRUE(r.mean().isApprox(Vec3(1, 1, 1), 1e-15));
    EXPECT_TRUE(r.cov().isApprox(0.5 * Mat3::Identity(), 1e-15));
}

TEST(KalmanUpdate, UninformativeMeasurementKeepsPrior) {
    const Gaussian3 prior(Vec3(0.3, -0.2, 1.0), Mat3::Identity() * 0.01);
    const Gaussian3 meas(Vec3(5, 5, 5), Mat3::Identity() * 1e9);
    const Gaussian3 r = kalman_update(prior, meas);
    EXPECT_LE((r.mean() - prior.mean()).norm() / prior.mean().norm(), 1e-6);
    EXPECT_LE((r.cov() - prior.cov()).norm() / prior.cov().norm(), 1e-6);
}

TEST(KalmanUpdate, MatchesInformationFormOracle) {
    std::mt19937_64 gen(5);
    for (int t = 0; t < 100; ++t) {
        const Gaussian3 prior(oracle::random_vec(gen), oracle::random_spd(gen));
        const Gaussian3 meas(oracle::random_vec(gen), oracle::random_spd(gen));
        const Gaussian3 r = kalman_update(prior, meas);
        const auto [m, c] = oracle::information_update(prior.mean(), prior.cov(), meas.mean(), meas.cov());
        EXPECT_LE((r.mean() - m).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LE((r.cov() - c).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LT(r.cov().trace(), prior.cov().trace());
    }
}

TEST(KalmanUpdate, SingularInnovationReportsConditionNumber) {
    Mat3 thin = Mat3::Identity() * 1e-14;
    thin(0, 0) = 1.0;
    const Gaussian3 a(Vec3::Zero(), thin);
    try {
        (void)kalman_update(a, a);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("condition number"), std::string::npos);
    }
}

TEST(KalmanProperty, SelfMeasurementShrinksEveryEigenvalue) {
    std::mt19937_64 gen(8);
    for (int t = 0; t < 100; ++t) {
        const Gaussian3 prior(oracle::random_vec(gen), oracle::random_spd(gen));
        const Gaussian3 pred = kalman_predict(prior, Mat3::Zero());
        const Gaussian3 post = kalman_update(pred, Gaussian3(pred.mean(), oracle::random_spd(gen)));
        EXPECT_LE((post.mean() - prior.mean()).norm(), 1e-12);
        // prior - post must be positive definite.
        Eigen::SelfAdjointEigenSolver<Mat3> es(prior.cov() - post.cov());
        EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
        Eigen::SelfAdjointEigenSolver<Mat3> a(prior.cov()), b(post.cov());
        for (int k = 0; k < 3; ++k) EXPECT_LT(b.eigenvalues()(k), a.eigenvalues()(k));
    }
}

TEST(KalmanProperty, LongAlternatingRunStaysSymmetricPd) {
    std::mt19937_64 gen(13);
    Gaussian3 s(Vec3::Zero(), oracle::random_spd(gen, 0.01));
    for (int t = 0; t < 10000; ++t) {
        s = kalman_predict(s, oracle::random_spd(gen, 1e-4, 0.0));
        s = kalman_update(s, Gaussian3(oracle::random_vec(gen, 0.01), oracle::random_spd(gen, 1e-3)));
        ASSERT_LE((s.cov() - s.cov().transpose()).cwiseAbs().maxCoeff(), 1e-9);
        ASSERT_EQ(Eigen::LLT<Mat3>(s.cov()).info(), Eigen::Success);
    }
}

TEST(KalmanProperty, TraceNeverIncreases) {
    std::mt19937_64 gen(21);
    for (int t = 0; t < 1000; ++t) {
        const Gaussian3 prior(oracle::random_vec(gen), oracle::random_spd(gen, std::exp(std::normal_distribution<>(0, 2)(gen))));
        const Gaussian3 meas(oracle::random_vec(gen), oracle::random_spd(gen, std::exp(std::normal_distribution<>(0, 2)(gen))));
        EXPECT_LE(kalman_update(prior, meas).cov().trace(), prior.cov().trace() * (1 + 1e-12));
    }
}

TEST(Track, FromDetectionSeedsFeatureList) {
    const Detection d{Gaussian3::isotropic(Vec3(1, 2, 3), 0.01), std::nullopt, FeatureVector::from_std({0, 1}), 4};
    const Track t = Track::from_detection(9, d);
    EXPECT_EQ(t.id, 9u);
    ASSERT_EQ(t.features.size(), 1u);
    EXPECT_EQ(t.features[0], d.feature);
    EXPECT_EQ(t.birth_frame, 4);
    EXPECT_EQ(t.last_update_frame, 4);
    EXPECT_EQ(t.hits, 1u);
}
