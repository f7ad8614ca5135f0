#pragma once

#include <algorithm>
#include <vector>

#include "ofu/costs.hpp"
#include "ofu/dap.hpp"
#include "ofu/errors.hpp"
#include "ofu/relaxation.hpp"

namespace ofu {

/// Inputs of one optimistic cost minimization over a subepoch window.
///
/// `samples[i]` is the cost realization of round s = s0 + i and `noise` holds
/// the estimated disturbances w_{s0-2H}, ..., w_{s0+n-2} (zeros before round 1),
/// so round i reads noise[i .. i+2H-1].
struct OptimisticProblem {
    int d_x = 1;
    int d_u = 1;
    int h = 2;
    CostFamily cost;
    std::vector<CostSample> samples;
    std::vector<VectorXd> noise;
    UnrolledModel psi;
    MatrixXd whitener;  // V^{-1/2} of the epoch Gram matrix
    double alpha = 0.0;
    double w_bound = 1.0;
    double radius = 1.0;  // R_M

    std::size_t window() const { return samples.size(); }
    int regressor() const { return regressor_dim(h, d_x, d_u); }
    long entries() const { return static_cast<long>(regressor()) * (2 * h - 1) * d_x; }
};

/// The fixed-entry relaxation model of an OptimisticProblem over vec(M)
/// (column-major). Round s contributes c_s(J_s vec(M) + b_s) where (x_s, u_s)
/// are affine in M; J_s^T and b_s are precomputed.
class DapRelaxationModel {
public:
    struct Workspace {
        VectorXd point;
        VectorXd grad;
    };

    explicit DapRelaxationModel(const OptimisticProblem& p) : p_(p) {
        const int h = p.h, d_x = p.d_x, d_u = p.d_u;
        const auto n = p.window();
        require_dims(p.cost.dim == d_x + d_u, "optimistic problem: cost dimension must be d_x + d_u");
        require_dims(p.psi.psi.rows() == d_x && p.psi.psi.cols() == p.regressor(),
                     "optimistic problem: Psi shape mismatch");
        require_dims(p.whitener.rows() == p.regressor() && p.whitener.cols() == p.regressor(),
                     "optimistic problem: whitener shape mismatch");
        if (n > 0)
            require_dims(p.noise.size() >= n + 2 * static_cast<std::size_t>(h) - 1,
                         "optimistic problem: noise history too short for the window");
        q_ = d_x + d_u;
        n_m_ = d_u * h * d_x;
        jt_.setZero(n_m_, static_cast<Eigen::Index>(q_ * n));
        offsets_.setZero(q_, static_cast<Eigen::Index>(n));

        VectorXd omega(h * d_x);
        auto fill_omega = [&](std::size_t i, int r) {
            // omega_{s-H+r} = (w_{s-H+r-1}, ..., w_{s-2H+r}) -> noise[i+H+r-1] down to noise[i+r]
            for (int k = 1; k <= h; ++k) omega.segment((k - 1) * d_x, d_x) = p.noise[i + h + r - k];
        };
        for (std::size_t i = 0; i < n; ++i) {
            auto jt = jt_.middleCols(static_cast<Eigen::Index>(i * q_), q_);
            // State rows: sum_r Psi_u[r] M omega_{s-H+r}.
            for (int r = 0; r < h; ++r) {
                fill_omega(i, r);
                const auto psi_u = p.psi.psi.middleCols(r * d_u, d_u);
                for (int j = 0; j < h * d_x; ++j)
                    for (int iu = 0; iu < d_u; ++iu)
                        for (int a = 0; a < d_x; ++a) jt(iu + j * d_u, a) += psi_u(a, iu) * omega(j);
            }
            // Action rows: u_s = M omega_s.
            fill_omega(i, h);
            for (int j = 0; j < h * d_x; ++j)
                for (int iu = 0; iu < d_u; ++iu) jt(iu + j * d_u, d_x + iu) = omega(j);
            // Offset: Psi_w (w_{s-H}, ..., w_{s-2}) + w_{s-1}.
            auto off = offsets_.col(static_cast<Eigen::Index>(i));
            for (int qb = 0; qb < h - 1; ++qb)
                off.head(d_x) += p.psi.psi.middleCols(h * d_u + qb * d_x, d_x) * p.noise[i + h + qb];
            off.head(d_x) += p.noise[i + 2 * h - 1];
        }
    }

    const OptimisticProblem& problem() const { return p_; }

    int dim() const { return static_cast<int>(n_m_); }
    std::size_t samples() const { return p_.window(); }
    Workspace workspace() const { return {VectorXd(q_), VectorXd(q_)}; }

    double sample_grad(std::size_t i, const VectorXd& x, Eigen::Ref<VectorXd> g, double scale,
                       Workspace& ws) const {
        const auto jt = jt_.middleCols(static_cast<Eigen::Index>(i * q_), q_);
        ws.point.noalias() = jt.transpose() * x;
        ws.point += offsets_.col(static_cast<Eigen::Index>(i));
        const double v = value_and_subgradient(p_.cost, p_.samples[i], ws.point, ws.grad);
        g.noalias() += scale * (jt * ws.grad);
        return v;
    }

    double loss_sum(const VectorXd& x) const {
        auto ws = workspace();
        double s = 0.0;
        for (std::size_t i = 0; i < samples(); ++i) {
            const auto jt = jt_.middleCols(static_cast<Eigen::Index>(i * q_), q_);
            ws.point.noalias() = jt.transpose() * x;
            ws.point += offsets_.col(static_cast<Eigen::Index>(i));
            s += value_and_subgradient(p_.cost, p_.samples[i], ws.point, ws.grad);
        }
        return s;
    }

    long entries() const { return p_.entries(); }

    /// Entry k (column-major in V^{-1/2} P(M)) as an affine function of vec(M):
    /// the unit indicator at (row, col) routed back through the P(M) stencil.
    EntryMap entry_map(long k) const {
        const int h = p_.h, d_x = p_.d_x, d_u = p_.d_u;
        const long rows = p_.regressor();
        const auto row = static_cast<Eigen::Index>(k % rows);
        const int col = static_cast<int>(k / rows);
        const int cb = col / d_x;
        const int j = col % d_x;
        EntryMap e{VectorXd::Zero(n_m_), 0.0};
        for (int hh = 1; hh <= h; ++hh) {
            const int rb = cb + hh - h;
            if (rb < 0 || rb > h - 1) continue;
            for (int iu = 0; iu < d_u; ++iu)
                e.grad(iu + ((hh - 1) * d_x + j) * d_u) += p_.whitener(row, rb * d_u + iu);
        }
        if (cb >= h) e.constant = p_.whitener(row, h * d_u + (cb - h) * d_x + j);
        return e;
    }

    double max_abs_entry(const VectorXd& x) const { return (p_.whitener * p_of(x)).cwiseAbs().maxCoeff(); }

    void project(Eigen::Ref<VectorXd> x) const { project_to_ball(x, p_.radius); }
    double step_radius() const { return p_.radius; }

    /// The bonus is charged once per round of the window (at least once).
    double bonus_weight() const {
        return static_cast<double>(std::max<std::size_t>(samples(), 1)) * p_.alpha * p_.w_bound;
    }

    DapPolicy policy_of(const VectorXd& x) const {
        return {Eigen::Map<const MatrixXd>(x.data(), p_.d_u, p_.h * p_.d_x), p_.h, p_.radius};
    }

    MatrixXd p_of(const VectorXd& x) const { return build_p_matrix(policy_of(x), p_.d_x); }

private:
    const OptimisticProblem& p_;
    int q_ = 0;
    Eigen::Index n_m_ = 0;
    MatrixXd jt_;
    MatrixXd offsets_;
};

static_assert(RelaxationModel<DapRelaxationModel>);

inline VectorXd vec(const DapPolicy& policy) { return Eigen::Map<const VectorXd>(policy.m.data(), policy.m.size()); }

inline double fixed_entry_objective(const OptimisticProblem& p, SubproblemIndex idx, const DapPolicy& policy) {
    return entry_objective(DapRelaxationModel(p), idx, vec(policy));
}

inline MatrixXd fixed_entry_subgradient(const OptimisticProblem& p, SubproblemIndex idx, const DapPolicy& policy) {
    const DapRelaxationModel model(p);
    const VectorXd g = entry_subgradient(model, idx, vec(policy));
    return Eigen::Map<const MatrixXd>(g.data(), p.d_u, p.h * p.d_x);
}

/// sum_s c_s(x_s(M), u_s(M)) - n alpha W ||V^{-1/2} P(M)||_inf.
inline double optimistic_objective(const OptimisticProblem& p, const DapPolicy& policy) {
    return full_objective(DapRelaxationModel(p), vec(policy));
}

struct PolicySolution {
    DapPolicy policy;
    double value = 0.0;
};

inline PolicySolution solve_subproblem(const OptimisticProblem& p, SubproblemIndex idx, const SolverBudget& budget,
                                       const DapPolicy* warm_start = nullptr) {
    const DapRelaxationModel model(p);
    const VectorXd x0 = warm_start ? vec(*warm_start) : VectorXd::Zero(model.dim());
    SubproblemSolution s = solve_subproblem(model, idx, budget, x0);
    return {model.policy_of(s.x), s.value};
}

struct OptimisticSolution {
    DapPolicy policy;
    double value = 0.0;
    SubproblemIndex index;
    long subproblems = 0;
    long distinct_solves = 0;
};

/// Minimizes the optimistic objective over the Frobenius ball via the 2m
/// fixed-entry convex problems. Warm start applies when shapes match.
inline OptimisticSolution solve_optimistic_min(const OptimisticProblem& p, const SolverBudget& budget,
                                               const DapPolicy* warm_start = nullptr, int parallel_width = 1) {
    const DapRelaxationModel model(p);
    VectorXd x0 = VectorXd::Zero(model.dim());
    if (warm_start && warm_start->m.rows() == p.d_u && warm_start->m.cols() == p.h * p.d_x) x0 = vec(*warm_start);
    RelaxationResult r = solve_relaxation(model, budget, x0, parallel_width);
    return {model.policy_of(r.x), r.value, r.index, r.subproblems, r.distinct_solves};
}

}  // namespace ofu
