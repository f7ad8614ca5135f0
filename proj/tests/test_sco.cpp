#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "ofu/sco.hpp"

using namespace ofu;

namespace {

ScoInstance instance(int d_a, int d_y, std::uint64_t seed, DecisionShape shape = DecisionShape::Ball) {
    RngStream rng(seed, 0);
    return make_sco_instance(d_a, d_y, 1.0, 1.0, NoiseModel::make(NoiseKind::ScaledRademacher, d_y, 1.0),
                             make_cost_family(CostKind::NormTarget, d_y, 0.5), rng, shape);
}

// l(q) = q^2 on a scalar problem; the quadratic is not in the cost families.
class ScalarSquareModel {
public:
    struct Workspace {};
    ScalarSquareModel(double q, double whitener, double alpha, std::size_t n) : q_(q), w_(whitener), a_(alpha), n_(n) {}
    int dim() const { return 1; }
    std::size_t samples() const { return n_; }
    Workspace workspace() const { return {}; }
    double sample_grad(std::size_t, const VectorXd& x, Eigen::Ref<VectorXd> g, double scale, Workspace&) const {
        const double p = q_ * x(0);
        g(0) += scale * 2.0 * p * q_;
        return p * p;
    }
    double loss_sum(const VectorXd& x) const { return static_cast<double>(n_) * q_ * q_ * x(0) * x(0); }
    long entries() const { return 1; }
    EntryMap entry_map(long) const { return {VectorXd::Constant(1, w_), 0.0}; }
    double max_abs_entry(const VectorXd& x) const { return std::abs(w_ * x(0)); }
    void project(Eigen::Ref<VectorXd> x) const { x(0) = std::clamp(x(0), -1.0, 1.0); }
    double step_radius() const { return 2.0; }
    double bonus_weight() const { return static_cast<double>(std::max<std::size_t>(n_, 1)) * a_; }

private:
    double q_, w_, a_;
    std::size_t n_;
};

double sco_objective(const ScoRelaxationModel& m, const VectorXd& a) { return full_objective(m, a); }

}  // namespace

TEST(DecisionSet, BallAndBoxGeometry) {
    const DecisionSet ball{DecisionShape::Ball, 2, 2.0};
    const DecisionSet box{DecisionShape::Box, 2, 2.0};
    EXPECT_DOUBLE_EQ(ball.max_norm(), 1.0);
    EXPECT_DOUBLE_EQ(box.half_width(), 1.0 / std::sqrt(2.0));
    VectorXd a(2);
    a << 3.0, 4.0;
    VectorXd b = a;
    ball.project(a);
    EXPECT_NEAR(a.norm(), 1.0, 1e-15);
    box.project(b);
    EXPECT_DOUBLE_EQ(b(0), box.half_width());
    EXPECT_DOUBLE_EQ(b(1), box.half_width());
    // Box corners sit on the diameter.
    EXPECT_NEAR(2.0 * b.norm(), box.diameter, 1e-12);
    RngStream rng(1, 0);
    for (int i = 0; i < 200; ++i) {
        EXPECT_TRUE(ball.contains(ball.sample(rng)));
        EXPECT_TRUE(box.contains(box.sample(rng)));
    }
    EXPECT_EQ(decision_shape_from_string("box"), DecisionShape::Box);
    EXPECT_THROW(decision_shape_from_string("simplex"), ParameterError);
}

TEST(ScoInstance, NormAndValidation) {
    const ScoInstance inst = instance(2, 3, 4);
    EXPECT_NEAR(operator_norm(inst.q_star), 1.0, 1e-12);
    EXPECT_NO_THROW(inst.validate());
    ScoInstance bad = inst;
    bad.r_q = 0.5;
    EXPECT_THROW(bad.validate(), ParameterError);
    bad = inst;
    bad.loss = make_cost_family(CostKind::NormTarget, 2, 0.5);
    EXPECT_THROW(bad.validate(), DimensionError);
}

TEST(ScoParameters, UnitDiameterGivesUnitLambda) {
    EXPECT_DOUBLE_EQ(sco_parameter_values(2, 2, 1, 1, 1, 100, 0.1).lambda, 1.0);
    EXPECT_DOUBLE_EQ(sco_parameter_values(2, 2, 1, 3, 1, 100, 0.1).lambda, 9.0);
}

TEST(ScoParameters, AlphaExample) {
    const double expected = std::sqrt(2.0) * (2.0 * std::sqrt(8.0 * std::log(2000.0)) + std::sqrt(2.0));
    const double alpha = sco_parameter_values(2, 2, 1, 1, 1, 100, 0.1).alpha;
    EXPECT_NEAR(alpha, expected, 1e-12);
    EXPECT_NEAR(alpha, 24.06, 0.005);
    EXPECT_GT(sco_parameter_values(2, 2, 1, 1, 1, 100, 0.01).alpha, alpha);
}

TEST(ScoParameters, HorizonCondition) {
    const ScoInstance inst = instance(2, 2, 5);
    EXPECT_THROW(sco_theory_parameters(inst, 100, 0.1), ParameterError);
    const double need = sco_horizon_threshold(inst, 1e6, 0.1);
    EXPECT_GT(need, 64.0 * 9.0);
    EXPECT_NO_THROW(sco_theory_parameters(inst, 1000000, 0.1));
    EXPECT_THROW(sco_theory_parameters(inst, 1000000, 1.5), ParameterError);
}

TEST(ScoStep, FirstRoundExploresToExtremePoint) {
    for (DecisionShape shape : {DecisionShape::Ball, DecisionShape::Box}) {
        const ScoInstance inst = instance(2, 2, 6, shape);
        ScoState s = make_sco_state(inst, 1.0);
        RngStream nr(1, 1), cr(1, 2);
        const auto r = sco_step(s, inst, 2.0, SolverBudget{}, nr, cr);
        const double reach = shape == DecisionShape::Ball ? inst.set.max_norm() : inst.set.half_width();
        EXPECT_NEAR(r.action.cwiseAbs().maxCoeff(), reach, 1e-9);
        EXPECT_NEAR(r.value, -2.0 * reach, 1e-9);
        EXPECT_TRUE(inst.set.contains(r.action));
        EXPECT_EQ(s.t, 2);
        EXPECT_EQ(s.history.size(), 1u);
        EXPECT_NEAR(r.harmonic, r.action.squaredNorm(), 1e-12);
    }
}

TEST(ScoStep, ScalarSquareRelaxation) {
    // a^2 - |a| on [-1, 1]: minimum -1/4 at a = +-1/2.
    const ScalarSquareModel m(1.0, 1.0, 1.0, 1);
    const auto r = solve_relaxation(m, SolverBudget{4000, 4, 32}, VectorXd::Zero(1));
    EXPECT_NEAR(r.value, -0.25, 1e-6);
    EXPECT_NEAR(std::abs(r.x(0)), 0.5, 1e-3);
    EXPECT_EQ(r.subproblems, 2);
    EXPECT_EQ(r.index.chi, -1);
    EXPECT_LT(r.x(0), 0.0);
}

TEST(ScoStep, ZeroAlphaFindsConvexMinimizer) {
    // sum_s |a - z_s| is minimized at the median of the z_s.
    const CostFamily loss = make_cost_family(CostKind::NormTarget, 1, 0.5);
    std::vector<CostSample> hist;
    for (double z : {0.3, -0.1, 0.05, 0.2, -0.4}) hist.push_back({VectorXd::Constant(1, z)});
    const DecisionSet set{DecisionShape::Ball, 1, 2.0};
    const ScoRelaxationModel m(loss, hist, MatrixXd::Identity(1, 1), MatrixXd::Identity(1, 1), 0.0, set);
    const auto r = solve_relaxation(m, SolverBudget{4000, 4, 32}, VectorXd::Zero(1));
    EXPECT_NEAR(r.x(0), 0.05, 2e-3);
    EXPECT_NEAR(r.value, 0.25 + 0.15 + 0.15 + 0.45, 1e-2);
    EXPECT_EQ(r.distinct_solves, 1);
}

TEST(ScoStep, RelaxationMatchesGrid) {
    RngStream rng(7, 0);
    for (int rep = 0; rep < 4; ++rep) {
        const ScoInstance inst = instance(2, 2, 70 + rep);
        std::vector<CostSample> hist;
        for (int i = 0; i < 6; ++i) hist.push_back(draw_cost_sample(inst.loss, rng));
        const MatrixXd q = inst.q_star + 0.3 * gaussian_matrix(2, 2, rng);
        MatrixXd v = MatrixXd::Identity(2, 2);
        for (int i = 0; i < 3; ++i) {
            const VectorXd a = inst.set.sample(rng);
            v += a * a.transpose();
        }
        const ScoRelaxationModel m(inst.loss, hist, q, inverse_sqrt_spd(v), 0.3 * rng.uniform(), inst.set);
        const auto r = solve_relaxation(m, SolverBudget{4000, 4, 32}, VectorXd::Zero(2));
        double grid = std::numeric_limits<double>::infinity();
        const int g = 201;
        const double rad = inst.set.max_norm();
        VectorXd a(2);
        for (int i = 0; i < g; ++i)
            for (int j = 0; j < g; ++j) {
                a << -rad + 2 * rad * i / (g - 1), -rad + 2 * rad * j / (g - 1);
                if (a.norm() > rad) continue;
                grid = std::min(grid, sco_objective(m, a));
            }
        EXPECT_LE(r.value, grid + 1e-3);
        EXPECT_NEAR(r.value, sco_objective(m, r.x), 1e-12);
        EXPECT_TRUE(inst.set.contains(r.x));
    }
}

TEST(ScoRun, DeterministicAndConsistent) {
    const ScoInstance inst = instance(2, 2, 8);
    ScoRunConfig cfg;
    cfg.horizon = 60;
    cfg.alpha = 1.0;
    cfg.lambda = 1.0;
    cfg.budget = SolverBudget{200, 1, 16};
    cfg.track_ridge_error = true;
    const ScoRun a = run_sco(inst, cfg, RngStream(3, 0));
    const ScoRun b = run_sco(inst, cfg, RngStream(3, 0));
    ASSERT_EQ(a.actions.size(), 60u);
    for (std::size_t i = 0; i < a.actions.size(); ++i) {
        EXPECT_EQ(a.actions[i], b.actions[i]);
        EXPECT_TRUE(inst.set.contains(a.actions[i], 1e-9));
    }
    EXPECT_EQ(a.ridge_errors.size(), 60u);
    EXPECT_EQ(a.final_state.history.size(), 60u);
    EXPECT_EQ(a.record.rows.back().t, 60);
    EXPECT_EQ(a.record.rows.back().epoch, 0);

    // V is lambda I plus the played outer products, and Q is the ridge solution.
    MatrixXd v = MatrixXd::Identity(2, 2);
    for (const auto& act : a.actions) v += act * act.transpose();
    EXPECT_LT((a.final_state.gram().matrix() - v).norm(), 1e-10);
    const MatrixXd q = a.final_state.q_hat();
    const MatrixXd foc = q * v - a.final_state.rls.cross().transpose();
    EXPECT_LT(foc.norm(), 1e-9);
}

TEST(ScoRun, HarmonicSumBound) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const ScoInstance inst = instance(2, 2, 20 + seed);
        ScoRunConfig cfg;
        cfg.horizon = 300;
        cfg.alpha = 2.0;
        cfg.lambda = inst.r_a() * inst.r_a();
        cfg.budget = SolverBudget{50, 1, 8, 200};
        const ScoRun r = run_sco(inst, cfg, RngStream(seed, 0));
        EXPECT_LE(r.record.harmonic_sum(), 5.0 * 2.0 * std::log(300.0));
    }
}

TEST(ScoRun, RidgeErrorWithinCertificate) {
    const ScoInstance inst = instance(2, 2, 9);
    ScoRunConfig cfg;
    cfg.horizon = 200;
    cfg.alpha = 1.0;
    cfg.lambda = 1.0;
    cfg.budget = SolverBudget{50, 1, 8, 200};
    cfg.track_ridge_error = true;
    const ScoRun r = run_sco(inst, cfg, RngStream(1, 0));
    const double bound = ridge_error_bound(1.0, 2, 1.0, 1.0, 200.0, 0.1);
    for (double e : r.ridge_errors) EXPECT_LE(e, bound);
}

TEST(PseudoRegret, OptimalPlayIsZero) {
    const ScoInstance inst = instance(2, 2, 10);
    RngStream rng(2, 4);
    const ScoRegret probe = sco_pseudo_regret({VectorXd::Zero(2)}, inst, 500, rng);
    std::vector<VectorXd> actions(10, probe.comparator_action);
    RngStream again(2, 4);
    const ScoRegret r = sco_pseudo_regret(actions, inst, 500, again);
    EXPECT_NEAR(r.total, 0.0, 1e-12);
    EXPECT_GE(r.total, 0.0);
}

TEST(PseudoRegret, ConstantLossIsZero) {
    ScoInstance inst = instance(2, 2, 11);
    inst.loss = make_cost_family(CostKind::RandomLinear, 2, 0.0);
    RngStream rng(3, 4);
    std::vector<VectorXd> actions;
    for (int i = 0; i < 20; ++i) actions.push_back(inst.set.sample(rng));
    const ScoRegret r = sco_pseudo_regret(actions, inst, 100, rng);
    EXPECT_EQ(r.total, 0.0);
}

TEST(PseudoRegret, SingleRoundBoundedByRange) {
    RngStream rng(4, 4);
    for (int rep = 0; rep < 20; ++rep) {
        const ScoInstance inst = instance(2, 2, 200 + rep);
        const ScoRegret r = sco_pseudo_regret({inst.set.sample(rng)}, inst, 400, rng);
        EXPECT_GE(r.total, 0.0);
        EXPECT_LE(r.total, 2.0 * inst.r_q * inst.r_a());
    }
}

TEST(PseudoRegret, AttachFillsColumns) {
    const ScoInstance inst = instance(2, 2, 12);
    ScoRunConfig cfg;
    cfg.horizon = 20;
    cfg.alpha = 0.5;
    cfg.budget = SolverBudget{50, 1, 8};
    ScoRun run = run_sco(inst, cfg, RngStream(5, 0));
    RngStream rng(5, kOracleStream);
    const ScoRegret reg = sco_pseudo_regret(run.actions, inst, 300, rng);
    attach_regret(run.record, reg);
    EXPECT_NEAR(run.record.final_regret(), reg.total, 1e-9);
    for (const auto& row : run.record.rows) EXPECT_EQ(row.comparator_cost, reg.comparator_value);
}

TEST(Sandwich, ExactEstimateHasBonusSlack) {
    const ScoInstance inst = instance(2, 2, 13);
    ScoState s = make_sco_state(inst, 1.0);
    RngStream rng(6, 0);
    // y = Q* a exactly so the ridge estimate converges toward Q*; force exactness by feeding many actions.
    for (int i = 0; i < 4000; ++i) {
        const VectorXd a = inst.set.sample(rng);
        s.rls.update(a, inst.q_star * a);
    }
    const auto probes = probe_actions(inst.set, 30, rng);
    const auto rep = sandwich_check(s, inst, 0.5, probes, 500, rng);
    EXPECT_TRUE(rep.confidence_holds);
    EXPECT_EQ(rep.lower_violations, 0);
    EXPECT_EQ(rep.upper_violations, 0);
    EXPECT_EQ(rep.probes, 30);
}

TEST(Sandwich, ZeroAlphaIsTightAtTruth) {
    ScoInstance inst = instance(2, 2, 14);
    // A state whose ridge solution is exactly Q*: cross = V Q*^T with no data beyond lambda I.
    ScoState s = make_sco_state(inst, 1.0);
    RngStream rng(7, 0);
    const auto probes = probe_actions(inst.set, 10, rng);
    inst.q_star.setZero();
    const auto rep = sandwich_check(s, inst, 0.0, probes, 200, rng);
    EXPECT_TRUE(rep.confidence_holds);
    EXPECT_EQ(rep.lower_violations, 0);
    EXPECT_EQ(rep.upper_violations, 0);
    EXPECT_EQ(rep.worst_lower_slack, 0.0);
    EXPECT_EQ(rep.worst_upper_slack, 0.0);
}

TEST(Sandwich, HoldsAfterLearning) {
    const ScoInstance inst = instance(2, 2, 15);
    ScoRunConfig cfg;
    cfg.horizon = 500;
    cfg.lambda = 1.0;
    cfg.alpha = sco_parameter_values(2, 2, 1.0, 1.0, 1.0, 500, 0.1).alpha;
    cfg.budget = SolverBudget{30, 0, 8, 30};
    const ScoRun run = run_sco(inst, cfg, RngStream(8, 0));
    RngStream rng(8, kOracleStream);
    const auto probes = probe_actions(inst.set, 50, rng);
    const auto rep = sandwich_check(run.final_state, inst, cfg.alpha, probes, 1000, rng);
    ASSERT_TRUE(rep.confidence_holds);
    EXPECT_EQ(rep.lower_violations, 0);
    EXPECT_EQ(rep.upper_violations, 0);
}
