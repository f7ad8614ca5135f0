#include <gtest/gtest.h>

#include <cmath>

#include "ofu/system.hpp"

using namespace ofu;

namespace {

MatrixXd scalar(double v) { return MatrixXd::Constant(1, 1, v); }
VectorXd vec1(double v) { return VectorXd::Constant(1, v); }

SystemSpec plant(MatrixXd a, MatrixXd b) {
    SystemSpec s;
    s.a_star = std::move(a);
    s.b_star = std::move(b);
    s.noise = NoiseModel::make(NoiseKind::ScaledRademacher, static_cast<int>(s.a_star.rows()), 1.0);
    return s;
}

}  // namespace

TEST(MakeSystem, ScalarHalfGamma) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        RngStream rng(seed, 0);
        const auto sys = make_strongly_stable_system(1, 1, 1.0, 0.5, 1.0, rng);
        EXPECT_LE(std::abs(sys.a_star(0, 0)), 0.5);
        EXPECT_LE(operator_norm(sys.b_star), 1.0);
    }
}

TEST(MakeSystem, GammaOneGivesZeroA) {
    RngStream rng(1, 0);
    const auto sys = make_strongly_stable_system(3, 2, 2.0, 1.0, 1.0, rng,
                                                 NoiseModel::make(NoiseKind::ScaledUniform, 3, 1.0));
    EXPECT_EQ(sys.a_star, MatrixXd::Zero(3, 3));
}

TEST(MakeSystem, CertificateHolds) {
    RngStream rng(17, 0);
    const auto sys = make_strongly_stable_system(3, 2, 2.0, 0.25, 1.5, rng,
                                                 NoiseModel::make(NoiseKind::ScaledRademacher, 3, 1.0));
    EXPECT_TRUE(verify_strong_stability(sys.a_star, 2.0, 0.25, 50));
    EXPECT_LE(operator_norm(sys.b_star), 1.5);
}

TEST(MakeSystem, CertificateHoldsForManySeeds) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        RngStream rng(seed, 11);
        const int dx = 1 + static_cast<int>(seed % 4);
        const double kappa = 1.0 + static_cast<double>(seed % 5);
        const double gamma = 0.05 + 0.9 * static_cast<double>(seed % 7) / 6.0;
        const auto sys = make_strongly_stable_system(dx, 2, kappa, gamma, 1.0, rng,
                                                     NoiseModel::make(NoiseKind::ScaledRademacher, dx, 1.0));
        ASSERT_TRUE(verify_strong_stability(sys.a_star, kappa, gamma, 50)) << "seed " << seed;
        ASSERT_LE(operator_norm(sys.b_star), 1.0);
    }
}

TEST(MakeSystem, RejectsBadParameters) {
    RngStream rng(1, 0);
    EXPECT_THROW(make_strongly_stable_system(2, 1, 0.5, 0.5, 1.0, rng), ParameterError);
    EXPECT_THROW(make_strongly_stable_system(2, 1, 1.0, 0.0, 1.0, rng), ParameterError);
    EXPECT_THROW(make_strongly_stable_system(2, 1, 1.0, 1.5, 1.0, rng), ParameterError);
    EXPECT_THROW(make_strongly_stable_system(2, 1, 1.0, 0.5, 0.0, rng), ParameterError);
}

TEST(VerifyStability, Examples) {
    EXPECT_TRUE(verify_strong_stability(scalar(0.5), 1.0, 0.5, 10));
    EXPECT_FALSE(verify_strong_stability(MatrixXd::Identity(2, 2), 5.0, 0.1, 60));
    MatrixXd nil(2, 2);
    nil << 0, 1, 0, 0;
    EXPECT_FALSE(verify_strong_stability(nil, 1.0, 0.5, 3));
    EXPECT_THROW(verify_strong_stability(MatrixXd::Zero(2, 3), 1.0, 0.5, 3), DimensionError);
}

TEST(VerifyStability, IdentityFailsFirstAtSixteen) {
    // 5 * 0.9^k drops below 1 first at k = 16.
    EXPECT_TRUE(verify_strong_stability(MatrixXd::Identity(2, 2), 5.0, 0.1, 15));
    EXPECT_FALSE(verify_strong_stability(MatrixXd::Identity(2, 2), 5.0, 0.1, 16));
}

TEST(Step, Examples) {
    EXPECT_DOUBLE_EQ(step(plant(scalar(0.0), scalar(1.0)), vec1(7.0), vec1(3.0), vec1(-1.0))(0), 2.0);
    EXPECT_DOUBLE_EQ(step(plant(scalar(0.5), scalar(1.0)), vec1(2.0), vec1(1.0), vec1(0.0))(0), 2.0);
    MatrixXd a(2, 2);
    a << 0, 1, 0, 0;
    VectorXd x(2), w(2);
    x << 1, 2;
    w << 0.1, 0.1;
    const VectorXd next = step(plant(a, MatrixXd::Identity(2, 2)), x, VectorXd::Zero(2), w);
    EXPECT_NEAR(next(0), 2.1, 1e-15);
    EXPECT_NEAR(next(1), 0.1, 1e-15);
    EXPECT_THROW(step(plant(a, MatrixXd::Identity(2, 2)), vec1(1.0), VectorXd::Zero(2), w), DimensionError);
}

TEST(Step, Linearity) {
    RngStream rng(3, 3);
    const auto sys = make_strongly_stable_system(3, 2, 2.0, 0.3, 1.0, rng,
                                                 NoiseModel::make(NoiseKind::ScaledRademacher, 3, 1.0));
    for (int k = 0; k < 50; ++k) {
        const VectorXd x = gaussian_vector(3, rng), x2 = gaussian_vector(3, rng);
        const VectorXd u = gaussian_vector(2, rng), u2 = gaussian_vector(2, rng);
        const VectorXd w = gaussian_vector(3, rng), w2 = gaussian_vector(3, rng);
        const VectorXd lhs = step(sys, x + x2, u + u2, w + w2);
        const VectorXd rhs = step(sys, x, u, w) + step(sys, x2, u2, w2) -
                             step(sys, VectorXd::Zero(3), VectorXd::Zero(2), VectorXd::Zero(3));
        EXPECT_LT((lhs - rhs).norm(), 1e-12);
    }
}

TEST(Noise, RademacherNormAndSigma) {
    const auto m = NoiseModel::make(NoiseKind::ScaledRademacher, 4, 1.0);
    EXPECT_DOUBLE_EQ(m.sigma_lower, 0.5);
    RngStream rng(1, 2);
    for (int i = 0; i < 1000; ++i) {
        const VectorXd w = sample_noise(m, rng);
        EXPECT_NEAR(w.norm(), 1.0, 1e-15);
        for (int j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(std::abs(w(j)), 0.5);
    }
}

TEST(Noise, TruncatedGaussianInsideBall) {
    const auto m = NoiseModel::make(NoiseKind::TruncatedGaussian, 2, 1.0, 10.0);
    RngStream rng(4, 2);
    for (int i = 0; i < 2000; ++i) EXPECT_LE(sample_noise(m, rng).norm(), 1.0);
}

TEST(Noise, TruncatedGaussianSigmaMatchesTwoDimClosedForm) {
    // d = 2: E[r^2] for a Rayleigh law truncated at W, divided by 2.
    const double s = 0.8, wb = 1.0, c = wb * wb / (2 * s * s);
    const double er2 = 2 * s * s * (1.0 - (1.0 + c) * std::exp(-c)) / (1.0 - std::exp(-c));
    EXPECT_NEAR(truncated_gaussian_sigma_lower(2, wb, s), std::sqrt(er2 / 2.0), 1e-12);
}

class NoiseCovariance : public ::testing::TestWithParam<NoiseKind> {};

TEST_P(NoiseCovariance, LowerBoundedAndCentered) {
    const int d = 3;
    const auto m = NoiseModel::make(GetParam(), d, 1.0);
    RngStream rng(8, static_cast<std::uint64_t>(GetParam()));
    const int n = 100000;
    MatrixXd cov = MatrixXd::Zero(d, d);
    VectorXd mean = VectorXd::Zero(d);
    for (int i = 0; i < n; ++i) {
        const VectorXd w = sample_noise(m, rng);
        ASSERT_LE(w.norm(), m.w_bound * (1 + 1e-15));
        mean += w;
        cov += w * w.transpose();
    }
    mean /= n;
    cov /= n;
    const double min_eig = Eigen::SelfAdjointEigenSolver<MatrixXd>(cov).eigenvalues()(0);
    EXPECT_GE(min_eig, 0.9 * m.sigma_lower * m.sigma_lower);
    EXPECT_LT(mean.norm(), 0.01);
    // The analytic value is also the diagonal of the covariance.
    for (int j = 0; j < d; ++j) EXPECT_NEAR(cov(j, j), m.sigma_lower * m.sigma_lower, 0.01);
}

INSTANTIATE_TEST_SUITE_P(AllKinds, NoiseCovariance,
                         ::testing::Values(NoiseKind::ScaledRademacher, NoiseKind::TruncatedGaussian,
                                           NoiseKind::ScaledUniform));

TEST(Noise, KindStringsRoundTrip) {
    for (auto k : {NoiseKind::ScaledRademacher, NoiseKind::TruncatedGaussian, NoiseKind::ScaledUniform})
        EXPECT_EQ(noise_kind_from_string(to_string(k)), k);
    EXPECT_THROW(noise_kind_from_string("cauchy"), ParameterError);
}

TEST(Simulation, SameStreamSameTrajectory) {
    auto run = [] {
        RngStream rng(99, 4);
        const auto sys = make_strongly_stable_system(2, 1, 1.5, 0.2, 1.0, rng,
                                                     NoiseModel::make(NoiseKind::TruncatedGaussian, 2, 1.0));
        VectorXd x = VectorXd::Zero(2);
        for (int t = 0; t < 200; ++t) x = step(sys, x, VectorXd::Constant(1, 0.1), sample_noise(sys.noise, rng));
        return x;
    };
    EXPECT_EQ(run(), run());
}
