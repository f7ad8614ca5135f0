#include <gtest/gtest.h>

#include <cmath>

#include "ofu/costs.hpp"

using namespace ofu;

namespace {

VectorXd v(std::initializer_list<double> xs) {
    VectorXd out(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) out(i++) = x;
    return out;
}

CostSample at(VectorXd z) { return CostSample{std::move(z)}; }

}  // namespace

TEST(CostEval, NormTargetEuclidean) {
    const auto f = make_cost_family(CostKind::NormTarget, 2, 0.0);
    EXPECT_DOUBLE_EQ(eval(f, at(v({0, 0})), v({3}), v({4})), 5.0);
}

TEST(CostEval, RandomLinearInnerProduct) {
    const auto f = make_cost_family(CostKind::RandomLinear, 3, 0.0);
    EXPECT_DOUBLE_EQ(eval(f, at(v({1, 0, 0})), v({2, 5}), v({-1})), 2.0);
}

TEST(CostEval, HuberInsideKnee) {
    const auto f = make_cost_family(CostKind::HuberQuadratic, 2, 0.0, {}, 1.0, 1);
    EXPECT_DOUBLE_EQ(eval(f, at(v({0})), v({0.5}), v({0})), 0.125);
}

TEST(CostEval, DimensionMismatch) {
    const auto f = make_cost_family(CostKind::NormTarget, 2, 0.0);
    EXPECT_THROW(eval(f, at(v({0, 0})), v({1, 2}), v({3})), DimensionError);
}

TEST(CostSubgradient, Examples) {
    const auto f = make_cost_family(CostKind::NormTarget, 2, 0.0);
    const auto [gx, gu] = subgradient(f, at(v({0, 0})), v({3}), v({4}));
    EXPECT_DOUBLE_EQ(gx(0), 0.6);
    EXPECT_DOUBLE_EQ(gu(0), 0.8);
    EXPECT_EQ(subgradient(f, at(v({1, 2})), v({1, 2})), VectorXd::Zero(2));
    const auto lin = make_cost_family(CostKind::RandomLinear, 2, 0.5, v({0.3, -0.2}));
    RngStream rng(1, 1);
    for (int i = 0; i < 5; ++i) {
        const auto z = draw_cost_sample(lin, rng);
        EXPECT_EQ(subgradient(lin, z, gaussian_vector(2, rng)), z.z);
    }
}

TEST(CostFamilyFactory, Validation) {
    EXPECT_THROW(make_cost_family(CostKind::HuberQuadratic, 2, 0.1, {}, 1.5), ParameterError);
    EXPECT_THROW(make_cost_family(CostKind::RandomLinear, 2, 0.6, v({0.5, 0.0})), ParameterError);
    EXPECT_THROW(make_cost_family(CostKind::NormTarget, 2, 0.1, {}, 1.0, 3), ParameterError);
    EXPECT_THROW(make_cost_family(CostKind::NormTarget, 0, 0.1), ParameterError);
    EXPECT_EQ(cost_kind_from_string(to_string(CostKind::HuberQuadratic)), CostKind::HuberQuadratic);
}

TEST(ExpectedCost, DeterministicFamilyIsExact) {
    const auto f = make_cost_family(CostKind::NormTarget, 2, 0.0, v({0.3, 0.4}));
    RngStream rng(2, 2);
    const auto e = expected_cost_mc(f, v({1.0}), v({-1.0}), 100, rng);
    EXPECT_DOUBLE_EQ(e.mean, eval(f, at(v({0.3, 0.4})), v({1.0}), v({-1.0})));
    EXPECT_DOUBLE_EQ(e.std_error, 0.0);
}

TEST(ExpectedCost, ZeroMeanLinear) {
    const auto f = make_cost_family(CostKind::RandomLinear, 3, 1.0);
    RngStream rng(3, 2);
    const auto e = expected_cost_mc(f, v({0.5, -0.2, 0.9}), 20000, rng);
    EXPECT_LE(std::abs(e.mean), 3 * e.std_error);
}

TEST(ExpectedCost, UniformTargetScalar) {
    const auto f = make_cost_family(CostKind::NormTarget, 2, 1.0, {}, 1.0, 1);
    RngStream rng(4, 2);
    const auto e = expected_cost_mc(f, v({0.0}), v({0.0}), 20000, rng);
    EXPECT_NEAR(e.mean, 0.5, 3 * e.std_error);
}

class CostProperties : public ::testing::TestWithParam<CostKind> {
protected:
    CostFamily family() const {
        switch (GetParam()) {
            case CostKind::NormTarget: return make_cost_family(CostKind::NormTarget, 3, 0.7, v({0.1, 0.2, -0.1}));
            case CostKind::HuberQuadratic:
                return make_cost_family(CostKind::HuberQuadratic, 3, 0.7, v({0.1, 0.2, -0.1}), 0.5);
            case CostKind::RandomLinear: return make_cost_family(CostKind::RandomLinear, 3, 0.6, v({0.2, 0.1, 0.0}));
        }
        return {};
    }
};

TEST_P(CostProperties, OneLipschitz) {
    const auto f = family();
    RngStream rng(5, static_cast<std::uint64_t>(GetParam()));
    for (int i = 0; i < 1000; ++i) {
        const auto z = draw_cost_sample(f, rng);
        const VectorXd p = 2.0 * gaussian_vector(3, rng), q = 2.0 * gaussian_vector(3, rng);
        ASSERT_LE(std::abs(eval(f, z, p) - eval(f, z, q)), (p - q).norm() + 1e-12);
        ASSERT_LE(subgradient(f, z, p).norm(), 1.0 + 1e-12);
    }
}

TEST_P(CostProperties, SubgradientInequality) {
    const auto f = family();
    RngStream rng(6, static_cast<std::uint64_t>(GetParam()));
    for (int i = 0; i < 1000; ++i) {
        const auto z = draw_cost_sample(f, rng);
        const VectorXd p = gaussian_vector(3, rng), q = gaussian_vector(3, rng);
        ASSERT_GE(eval(f, z, q), eval(f, z, p) + subgradient(f, z, p).dot(q - p) - 1e-9);
    }
}

TEST_P(CostProperties, BoundedStochasticPart) {
    const auto f = family();
    RngStream rng(7, static_cast<std::uint64_t>(GetParam()));
    const double working = 1.0;
    for (int i = 0; i < 20; ++i) {
        const VectorXd p = uniform_in_ball(3, working, rng);
        const auto mu = expected_cost_mc(f, p, 4000, rng);
        for (int k = 0; k < 20; ++k)
            ASSERT_LE(std::abs(eval(f, draw_cost_sample(f, rng), p) - mu.mean), f.sigma_c(working) + 3 * mu.std_error);
    }
}

INSTANTIATE_TEST_SUITE_P(AllFamilies, CostProperties,
                         ::testing::Values(CostKind::NormTarget, CostKind::HuberQuadratic, CostKind::RandomLinear));

TEST(CostSubgradient, HuberFiniteDifferences) {
    const auto f = make_cost_family(CostKind::HuberQuadratic, 3, 0.5, {}, 0.8);
    RngStream rng(8, 8);
    const double h = 1e-6;
    int checked = 0;
    for (int i = 0; i < 300; ++i) {
        const auto z = draw_cost_sample(f, rng);
        const VectorXd p = gaussian_vector(3, rng);
        const VectorXd d = (p - z.z).cwiseAbs();
        const double k = f.coordinate_knee();
        if (((d.array() - k).abs() < 1e-3).any()) continue;
        const VectorXd dir = gaussian_vector(3, rng).normalized();
        const double fd = (eval(f, z, p + h * dir) - eval(f, z, p - h * dir)) / (2 * h);
        const double an = subgradient(f, z, p).dot(dir);
        ASSERT_LE(std::abs(fd - an), 1e-5 * std::max(1.0, std::abs(an)));
        ++checked;
    }
    EXPECT_GT(checked, 200);
}

TEST(CostFamily, SigmaC) {
    EXPECT_DOUBLE_EQ(make_cost_family(CostKind::NormTarget, 2, 0.3).sigma_c(), 0.6);
    EXPECT_DOUBLE_EQ(make_cost_family(CostKind::RandomLinear, 2, 0.3).sigma_c(2.0), 0.6);
}
