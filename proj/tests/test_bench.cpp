#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "ofu/bench.hpp"
#include "ofu/oracle.hpp"

using namespace ofu;

namespace {

SystemSpec scalar_system(double a, double b) {
    SystemSpec sys;
    sys.a_star = MatrixXd::Constant(1, 1, a);
    sys.b_star = MatrixXd::Constant(1, 1, b);
    sys.kappa = 1.0;
    sys.gamma = 1.0 - std::abs(a);
    sys.w_bound = 1.0;
    sys.r_b = 1.0;
    sys.noise = NoiseModel::make(NoiseKind::ScaledRademacher, 1, 1.0);
    return sys;
}

ControllerConfig small_config(long horizon) {
    ControllerConfig c;
    c.horizon = horizon;
    c.h = 2;
    c.alpha = 0.2;
    c.budget.min_iterations = 60;
    c.budget.iterations_per_sample = 1;
    c.budget.max_iterations = 200;
    return c;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

DapPolicy policy2(double m1, double m2) { return {(MatrixXd(1, 2) << m1, m2).finished(), 2, 1.0}; }

}  // namespace

TEST(Hindsight, ObjectiveEqualsReplayedCost) {
    const SystemSpec sys = scalar_system(0.5, 1.0);
    const CostFamily cost = make_cost_family(CostKind::NormTarget, 2, 0.4, Eigen::Vector2d(0.3, -0.2));
    const RunRecord rec = run_controller(sys, cost, small_config(60), RngStream(7, 1));
    const HindsightResult best = best_dap_in_hindsight(rec, sys, cost, 2, 1.0, 500);
    EXPECT_TRUE(best.policy.in_class());
    const double replay = sum(run_fixed_policy(sys, cost, best.policy, rec.traces.w, rec.traces.z));
    EXPECT_NEAR(best.objective, replay, 1e-9 * std::max(1.0, std::abs(replay)));
}

TEST(Hindsight, StateOnlyCostIsFlatWithoutInput) {
    const SystemSpec sys = scalar_system(0.3, 0.0);
    const CostFamily cost = make_cost_family(CostKind::NormTarget, 2, 0.2, {}, 1.0, 1);
    const RunRecord rec = run_controller(sys, cost, small_config(40), RngStream(3, 2));
    const double c0 = sum(run_fixed_policy(sys, cost, policy2(0.0, 0.0), rec.traces.w, rec.traces.z));
    const double c1 = sum(run_fixed_policy(sys, cost, policy2(0.6, -0.7), rec.traces.w, rec.traces.z));
    EXPECT_NEAR(c0, c1, 1e-12);
    EXPECT_NEAR(best_dap_in_hindsight(rec, sys, cost, 2, 1.0, 300).objective, c0, 1e-9);
}

TEST(Hindsight, MatchesBruteForceOverTwoParameters) {
    const SystemSpec sys = scalar_system(0.4, 1.0);
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        const CostFamily cost = make_cost_family(CostKind::NormTarget, 2, 0.3, Eigen::Vector2d(0.4, 0.1));
        const RunRecord rec = run_controller(sys, cost, small_config(50), RngStream(seed, 0));
        const HindsightResult best = best_dap_in_hindsight(rec, sys, cost, 2, 1.0, 4000);
        const auto replay = [&](const VectorXd& m) {
            return sum(run_fixed_policy(sys, cost, policy2(m(0), m(1)), rec.traces.w, rec.traces.z));
        };
        const double bf = brute_force_disc(replay, 1.0).value;
        EXPECT_GE(best.objective, bf - 1e-6) << "seed " << seed;
        EXPECT_LE(best.objective, bf + 1e-3 * rec.horizon) << "seed " << seed;
    }
}

TEST(Hindsight, NoSmallPerturbationImproves) {
    RngStream sys_rng(5, 0);
    const SystemSpec sys = make_strongly_stable_system(2, 1, 1.0, 0.5, 1.0, sys_rng);
    const CostFamily cost = make_cost_family(CostKind::HuberQuadratic, 3, 0.3, {}, 0.5);
    ControllerConfig cfg = small_config(80);
    cfg.h = 3;
    const RunRecord rec = run_controller(sys, cost, cfg, RngStream(5, 1));
    const HindsightResult best = best_dap_in_hindsight(rec, sys, cost, 3, 1.0, 2000);
    RngStream dirs(5, 2);
    for (int i = 0; i < 20; ++i) {
        DapPolicy p = best.policy;
        VectorXd d = gaussian_vector(static_cast<int>(p.m.size()), dirs);
        d *= 0.01 / d.norm();
        p.m += Eigen::Map<const MatrixXd>(d.data(), p.m.rows(), p.m.cols());
        if (p.m.norm() > 1.0) p.m *= 1.0 / p.m.norm();
        const double c = sum(run_fixed_policy(sys, cost, p, rec.traces.w, rec.traces.z));
        EXPECT_GE(c, best.objective - 1e-4 * rec.horizon) << "direction " << i;
    }
}

TEST(Regret, PrefixSumsOfDifferences) {
    const std::vector<double> c{3.0, 1.0, 4.0, 1.5};
    const std::vector<double> b{1.0, 1.0, 1.0, 2.0};
    const auto r = compute_regret(c, b);
    ASSERT_EQ(r.size(), 4u);
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        s += c[i] - b[i];
        EXPECT_DOUBLE_EQ(r[i], s);
    }
    EXPECT_DOUBLE_EQ(r.back(), 4.5);
    EXPECT_TRUE(compute_regret({}, {}).empty());
    EXPECT_THROW(compute_regret({1.0}, {}), DimensionError);
}

TEST(Regret, AttachFillsRows) {
    const SystemSpec sys = scalar_system(0.5, 1.0);
    const CostFamily cost = make_cost_family(CostKind::NormTarget, 2, 0.3);
    RunRecord rec = run_controller(sys, cost, small_config(20), RngStream(1, 1));
    const std::vector<double> cmp(20, 0.25);
    attach_comparator(rec, cmp);
    EXPECT_DOUBLE_EQ(rec.rows[4].comparator_cost, 0.25);
    EXPECT_NEAR(rec.final_regret(), rec.total_cost() - 5.0, 1e-12);
}

TEST(ExploreThenCommit, DefaultFractionAndSharedRealization) {
    const SystemSpec sys = scalar_system(0.5, 1.0);
    const CostFamily cost = make_cost_family(CostKind::NormTarget, 2, 0.3);
    const RngStream stream(9, 4);
    const RunRecord etc = baseline_explore_then_commit(sys, cost, small_config(64), 0.0, stream);
    const RunRecord ofu = run_controller(sys, cost, small_config(64), stream);
    long explore = 0;
    for (const auto& r : etc.rows) explore += r.subepoch == 1;
    EXPECT_EQ(explore, 16);  // ceil(64^{2/3})
    EXPECT_EQ(etc.policy_switches(), 1);
    for (std::size_t t = 0; t < 64; ++t) {
        EXPECT_EQ(etc.traces.w[t], ofu.traces.w[t]);
        EXPECT_EQ(etc.traces.z[t].z, ofu.traces.z[t].z);
    }
}

TEST(ExploreThenCommit, Extremes) {
    const SystemSpec sys = scalar_system(0.5, 1.0);
    const CostFamily cost = make_cost_family(CostKind::NormTarget, 2, 0.3);
    const RunRecord all = baseline_explore_then_commit(sys, cost, small_config(30), 1.0, RngStream(2, 2));
    for (const auto& r : all.rows) EXPECT_EQ(r.subepoch, 1);
    EXPECT_EQ(all.policy_switches(), 0);
    const RunRecord one = baseline_explore_then_commit(sys, cost, small_config(30), 1e-9, RngStream(2, 2));
    EXPECT_EQ(one.rows[0].subepoch, 1);
    EXPECT_EQ(one.rows[1].subepoch, 2);
    EXPECT_THROW(baseline_explore_then_commit(sys, cost, small_config(30), 1.5, RngStream(2, 2)), ParameterError);
    const RunRecord again = baseline_explore_then_commit(sys, cost, small_config(30), 1e-9, RngStream(2, 2));
    EXPECT_EQ(again.total_cost(), one.total_cost());
}
