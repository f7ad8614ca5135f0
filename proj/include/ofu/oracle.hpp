#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "ofu/optimism.hpp"
#include "ofu/sco.hpp"

// Brute-force references for the optimistic minimizations on two-dimensional
// decision spaces.

namespace ofu {

struct BruteForceResult {
    VectorXd x;
    double value = std::numeric_limits<double>::infinity();
};

/// Minimizes f over the disc of the given radius: a (grid x grid) lattice,
/// then repeated 21 x 21 zooms around the best `seeds` lattice points.
inline BruteForceResult brute_force_disc(const std::function<double(const VectorXd&)>& f, double radius,
                                         int grid = 201, int seeds = 8, int zooms = 8) {
    struct Pt {
        double v;
        double a, b;
    };
    std::vector<Pt> pts;
    pts.reserve(static_cast<std::size_t>(grid) * grid);
    VectorXd x(2);
    const double step = 2.0 * radius / (grid - 1);
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j) {
            x << -radius + step * i, -radius + step * j;
            if (x.norm() > radius) continue;
            pts.push_back({f(x), x(0), x(1)});
        }
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(seeds), pts.size());
    std::partial_sort(pts.begin(), pts.begin() + static_cast<long>(k), pts.end(),
                      [](const Pt& l, const Pt& r) { return l.v < r.v; });

    BruteForceResult best;
    for (std::size_t s = 0; s < k; ++s) {
        double ca = pts[s].a, cb = pts[s].b, cv = pts[s].v;
        double half = step;
        for (int z = 0; z < zooms; ++z) {
            double na = ca, nb = cb, nv = cv;
            for (int i = -10; i <= 10; ++i)
                for (int j = -10; j <= 10; ++j) {
                    x << ca + half * i / 10.0, cb + half * j / 10.0;
                    if (x.norm() > radius) project_to_ball(x, radius);
                    const double v = f(x);
                    if (v < nv) {
                        nv = v;
                        na = x(0);
                        nb = x(1);
                    }
                }
            ca = na;
            cb = nb;
            cv = nv;
            half *= 0.25;
        }
        if (cv < best.value) {
            best.value = cv;
            best.x = (VectorXd(2) << ca, cb).finished();
        }
    }
    return best;
}

struct RelaxationCheck {
    double relaxation = 0.0;  // exact objective at the decomposition's answer
    double brute_force = 0.0;
    double gap() const { return std::abs(relaxation - brute_force); }
};

/// A random two-parameter DAP problem: d_x = d_u = 1, H = 2, so vec(M) is 2-D.
inline OptimisticProblem random_dap_problem(RngStream& rng) {
    OptimisticProblem p;
    p.d_x = 1;
    p.d_u = 1;
    p.h = 2;
    VectorXd center(2);
    center << rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5);
    p.cost = make_cost_family(CostKind::NormTarget, 2, rng.uniform(0.05, 0.4), center);
    const int n = 3 + static_cast<int>(rng.index(6));
    for (int i = 0; i < n; ++i) p.samples.push_back(draw_cost_sample(p.cost, rng));
    for (int i = 0; i < n + 2 * p.h - 1; ++i) p.noise.push_back(VectorXd::Constant(1, rng.uniform(-1.0, 1.0)));
    const int reg = p.regressor();
    p.psi = UnrolledModel{0.6 * gaussian_matrix(1, reg, rng)};
    MatrixXd v = MatrixXd::Identity(reg, reg);
    for (int i = 0; i < 4; ++i) {
        const VectorXd r = gaussian_vector(reg, rng);
        v += r * r.transpose();
    }
    p.whitener = inverse_sqrt_spd(v);
    p.alpha = rng.uniform(0.02, 0.4);
    p.w_bound = 1.0;
    p.radius = 1.0;
    return p;
}

inline RelaxationCheck check_dap_relaxation(const OptimisticProblem& p, const SolverBudget& budget) {
    require_dims(p.d_x == 1 && p.d_u == 1 && p.h == 2, "check_dap_relaxation: needs a two-parameter problem");
    const OptimisticSolution s = solve_optimistic_min(p, budget);
    const DapRelaxationModel model(p);
    const auto f = [&](const VectorXd& m) { return full_objective(model, m); };
    return {optimistic_objective(p, s.policy), brute_force_disc(f, p.radius).value};
}

struct ScoRelaxationCase {
    ScoInstance inst;
    std::vector<CostSample> history;
    MatrixXd q_hat;
    MatrixXd whitener;
    double alpha = 0.0;
};

/// A random d_a = d_y = 2 optimistic SCO problem over the unit-diameter ball.
inline ScoRelaxationCase random_sco_case(RngStream& rng) {
    ScoRelaxationCase c;
    VectorXd center(2);
    center << rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4);
    c.inst = make_sco_instance(2, 2, 1.0, 1.0, NoiseModel::make(NoiseKind::ScaledRademacher, 2, 1.0),
                               make_cost_family(CostKind::NormTarget, 2, rng.uniform(0.1, 0.5), center), rng);
    const int n = 2 + static_cast<int>(rng.index(8));
    for (int i = 0; i < n; ++i) c.history.push_back(draw_cost_sample(c.inst.loss, rng));
    c.q_hat = c.inst.q_star + 0.3 * gaussian_matrix(2, 2, rng);
    MatrixXd v = MatrixXd::Identity(2, 2);
    for (int i = 0; i < n; ++i) {
        const VectorXd a = c.inst.set.sample(rng);
        v += a * a.transpose();
    }
    c.whitener = inverse_sqrt_spd(v);
    c.alpha = rng.uniform(0.05, 1.0);
    return c;
}

inline RelaxationCheck check_sco_relaxation(const ScoRelaxationCase& c, const SolverBudget& budget) {
    const ScoRelaxationModel model(c.inst.loss, c.history, c.q_hat, c.whitener, c.alpha, c.inst.set);
    const RelaxationResult r = solve_relaxation(model, budget, VectorXd::Zero(2));
    const auto f = [&](const VectorXd& a) { return full_objective(model, a); };
    return {full_objective(model, r.x), brute_force_disc(f, c.inst.set.max_norm()).value};
}

}  // namespace ofu
