#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ofu/controller.hpp"
#include "ofu/costs.hpp"
#include "ofu/dap.hpp"
#include "ofu/errors.hpp"
#include "ofu/estimation.hpp"
#include "ofu/optimism.hpp"
#include "ofu/parallel.hpp"
#include "ofu/record.hpp"
#include "ofu/relaxation.hpp"
#include "ofu/sco.hpp"
#include "ofu/system.hpp"

namespace ofu {

/// Realized cost of a fixed DAP on a recorded (w_t, z_t) realization as a
/// function of vec(M). With x_1 = 0 the comparator trajectory is affine in M:
///     u_t = K_t m,  K_t = omega_t^T (x) I,   x_{t+1} = A x_t + B u_t + w_t,
/// so x_t = J_t m + b_t with J_1 = 0, J_{t+1} = A J_t + B K_t.
class HindsightModel {
public:
    struct Workspace {
        VectorXd point;
        VectorXd grad;
    };

    HindsightModel(const SystemSpec& sys, const CostFamily& cost, const std::vector<VectorXd>& w,
                   const std::vector<CostSample>& z, int h, double r_m)
        : cost_(cost), z_(z), h_(h), r_m_(r_m), d_x_(sys.d_x()), d_u_(sys.d_u()) {
        if (w.size() != z.size()) throw DimensionError("hindsight: noise and cost traces differ in length");
        require_dims(cost.dim == d_x_ + d_u_, "hindsight: cost dimension must be d_x + d_u");
        if (h < 1) throw ParameterError("hindsight: memory must be >= 1");
        q_ = d_x_ + d_u_;
        n_m_ = static_cast<Eigen::Index>(d_u_) * h * d_x_;
        const auto n = w.size();
        jt_.setZero(n_m_, static_cast<Eigen::Index>(q_ * n));
        offsets_.setZero(q_, static_cast<Eigen::Index>(n));

        MatrixXd j = MatrixXd::Zero(d_x_, n_m_);  // J_t
        VectorXd b = VectorXd::Zero(d_x_);        // b_t
        MatrixXd k(d_u_, n_m_);
        for (std::size_t t = 0; t < n; ++t) {
            // omega_t = (w_{t-1}, ..., w_{t-H}), zeros before round 1.
            k.setZero();
            for (int hh = 1; hh <= h; ++hh) {
                const long s = static_cast<long>(t) - hh;
                if (s < 0) continue;
                for (int jx = 0; jx < d_x_; ++jx) {
                    const double v = w[static_cast<std::size_t>(s)](jx);
                    for (int iu = 0; iu < d_u_; ++iu) k(iu, iu + ((hh - 1) * d_x_ + jx) * d_u_) = v;
                }
            }
            auto jt = jt_.middleCols(static_cast<Eigen::Index>(t * q_), q_);
            jt.leftCols(d_x_) = j.transpose();
            jt.rightCols(d_u_) = k.transpose();
            offsets_.col(static_cast<Eigen::Index>(t)).head(d_x_) = b;
            j = sys.a_star * j + sys.b_star * k;
            b = sys.a_star * b + w[t];
        }
    }

    int dim() const { return static_cast<int>(n_m_); }
    std::size_t samples() const { return z_.size(); }
    Workspace workspace() const { return {VectorXd(q_), VectorXd(q_)}; }

    double sample_grad(std::size_t i, const VectorXd& m, Eigen::Ref<VectorXd> g, double scale, Workspace& ws) const {
        const auto jt = jt_.middleCols(static_cast<Eigen::Index>(i * q_), q_);
        ws.point.noalias() = jt.transpose() * m;
        ws.point += offsets_.col(static_cast<Eigen::Index>(i));
        const double v = value_and_subgradient(cost_, z_[i], ws.point, ws.grad);
        g.noalias() += scale * (jt * ws.grad);
        return v;
    }

    double loss_sum(const VectorXd& m) const {
        auto ws = workspace();
        double s = 0.0;
        for (std::size_t i = 0; i < samples(); ++i) {
            const auto jt = jt_.middleCols(static_cast<Eigen::Index>(i * q_), q_);
            ws.point.noalias() = jt.transpose() * m;
            ws.point += offsets_.col(static_cast<Eigen::Index>(i));
            s += value_and_subgradient(cost_, z_[i], ws.point, ws.grad);
        }
        return s;
    }

    long entries() const { return 0; }
    EntryMap entry_map(long) const { return {VectorXd::Zero(n_m_), 0.0}; }
    double max_abs_entry(const VectorXd&) const { return 0.0; }
    void project(Eigen::Ref<VectorXd> m) const { project_to_ball(m, r_m_); }
    double step_radius() const { return r_m_; }
    double bonus_weight() const { return 0.0; }

    DapPolicy policy_of(const VectorXd& m) const {
        return {Eigen::Map<const MatrixXd>(m.data(), d_u_, h_ * d_x_), h_, r_m_};
    }

private:
    const CostFamily& cost_;
    const std::vector<CostSample>& z_;
    int h_;
    double r_m_;
    int d_x_, d_u_;
    int q_ = 0;
    Eigen::Index n_m_ = 0;
    MatrixXd jt_;
    MatrixXd offsets_;
};

static_assert(RelaxationModel<HindsightModel>);

struct HindsightResult {
    DapPolicy policy;
    double objective = 0.0;  // sum_t c_t on the comparator trajectory
};

/// Best DAP in hindsight on the run's realization: full-batch projected
/// subgradient descent over ||M||_F <= R_M, keeping the best iterate.
inline HindsightResult best_dap_in_hindsight(const RunRecord& record, const SystemSpec& sys, const CostFamily& cost,
                                             int h, double r_m, int iterations,
                                             const DapPolicy* warm_start = nullptr) {
    if (record.traces.w.size() != record.rows.size() || record.traces.z.size() != record.rows.size())
        throw DimensionError("best_dap_in_hindsight: record traces are missing");
    const HindsightModel model(sys, cost, record.traces.w, record.traces.z, h, r_m);
    VectorXd x0 = VectorXd::Zero(model.dim());
    if (warm_start && warm_start->m.size() == model.dim()) x0 = vec(*warm_start);
    SolverBudget budget;
    budget.min_iterations = iterations;
    budget.iterations_per_sample = 0;
    budget.full_batch_max_samples = static_cast<int>(std::max<std::size_t>(model.samples(), 1));
    const VectorXd m = minimize_tilted(model, VectorXd::Zero(model.dim()), x0, budget).x;
    return {model.policy_of(m), model.loss_sum(m)};
}

/// Prefix sums of cost_t - comparator_t.
inline std::vector<double> compute_regret(const std::vector<double>& costs, const std::vector<double>& comparator) {
    if (costs.size() != comparator.size()) throw DimensionError("compute_regret: sequences differ in length");
    std::vector<double> out(costs.size());
    double s = 0.0;
    for (std::size_t i = 0; i < costs.size(); ++i) {
        s += costs[i] - comparator[i];
        out[i] = s;
    }
    return out;
}

inline std::vector<double> cost_sequence(const RunRecord& record) {
    std::vector<double> c;
    c.reserve(record.rows.size());
    for (const auto& r : record.rows) c.push_back(r.cost);
    return c;
}

/// Writes comparator_cost and cum_regret into the record's rows.
inline void attach_comparator(RunRecord& record, const std::vector<double>& comparator) {
    const auto curve = compute_regret(cost_sequence(record), comparator);
    for (std::size_t i = 0; i < curve.size(); ++i) {
        record.rows[i].comparator_cost = comparator[i];
        record.rows[i].cum_regret = curve[i];
    }
}

/// Explore-then-commit: random actions uniform on the ball of radius
/// R_M W sqrt(H) for the first ceil(f T) rounds (at least one), then one
/// estimate of (A, B) and Psi and one alpha = 0 policy solve over the
/// exploration window, held to the end. A non-positive fraction selects T^{-1/3}.
inline RunRecord baseline_explore_then_commit(const SystemSpec& sys, const CostFamily& cost,
                                              const ControllerConfig& cfg, double explore_fraction,
                                              const RngStream& rng) {
    cfg.validate();
    const long horizon = cfg.horizon;
    const double f = explore_fraction > 0.0 ? explore_fraction : std::pow(static_cast<double>(horizon), -1.0 / 3.0);
    if (!(f <= 1.0)) throw ParameterError("explore_then_commit: explore fraction must lie in (0, 1]");
    const long explore = std::clamp<long>(static_cast<long>(std::ceil(f * static_cast<double>(horizon) - 1e-9)), 1, horizon);

    const int d_x = sys.d_x(), d_u = sys.d_u(), h = cfg.h;
    const int p = regressor_dim(h, d_x, d_u);
    RngStream noise_rng = rng.derive(kNoiseStream);
    RngStream cost_rng = rng.derive(kCostStream);
    RngStream policy_rng = rng.derive(kPolicyStream);
    const double explore_radius = cfg.r_m * cfg.w_bound * std::sqrt(static_cast<double>(h));

    RlsState ab(d_x + d_u, d_x, cfg.lambda_w, cfg.gram_recompute_every);
    RlsState psi_rls(p, d_x, cfg.lambda_psi, cfg.gram_recompute_every);
    MatrixXd a_hat = MatrixXd::Zero(d_x, d_x), b_hat = MatrixXd::Zero(d_x, d_u);
    std::vector<VectorXd> w_hat, u_hist;
    DapPolicy policy = DapPolicy::zero(d_u, d_x, h, cfg.r_m);
    auto w_hat_at = [&](long s) { return s >= 1 ? w_hat[static_cast<std::size_t>(s - 1)] : VectorXd::Zero(d_x); };
    auto u_at = [&](long s) { return s >= 1 ? u_hist[static_cast<std::size_t>(s - 1)] : VectorXd::Zero(d_u); };

    RunRecord rec;
    rec.algo = "etc";
    rec.horizon = horizon;
    rec.h = h;
    rec.d_x = d_x;
    rec.d_u = d_u;
    rec.rows.reserve(static_cast<std::size_t>(horizon));
    VectorXd x = VectorXd::Zero(d_x);
    long switches = 0;
    for (long t = 1; t <= horizon; ++t) {
        VectorXd u;
        if (t <= explore) {
            u = uniform_in_ball(d_u, explore_radius, policy_rng);
        } else {
            std::vector<VectorXd> window;
            for (long s = t - h; s < t; ++s) window.push_back(w_hat_at(s));
            u = dap_action(policy, window);
        }
        const VectorXd w = sample_noise(sys.noise, noise_rng);
        const CostSample z = draw_cost_sample(cost, cost_rng);
        StepRow row;
        row.t = t;
        row.epoch = 1;
        row.subepoch = t <= explore ? 1 : 2;
        row.policy_switches = switches;
        row.cost = eval(cost, z, x, u);
        row.action_norm = u.norm();
        row.state_norm = x.norm();
        const VectorXd x_next = step(sys, x, u, w);
        u_hist.push_back(u);

        if (t <= explore) {
            VectorXd zz(d_x + d_u);
            zz << x, u;
            ab.update(zz, x_next);
            const MatrixXd est = ab.solve();
            a_hat = est.leftCols(d_x);
            b_hat = est.rightCols(d_u);
            VectorXd rho(p);
            for (int r = 0; r < h; ++r) rho.segment(r * d_u, d_u) = u_at(t + 1 - h + r);
            for (int q = 0; q < h - 1; ++q) rho.segment(h * d_u + q * d_x, d_x) = w_hat_at(t + 1 - h + q);
            row.harmonic_term = psi_rls.update(rho, x_next);
        }
        w_hat.push_back(estimate_noise(a_hat, b_hat, x, u, x_next, cfg.w_bound));
        row.noise_err_sq = (w - w_hat.back()).squaredNorm();
        row.logdet_v = psi_rls.gram().logdet();

        rec.rows.push_back(row);
        rec.traces.w.push_back(w);
        rec.traces.z.push_back(z);
        rec.traces.x.push_back(x);
        rec.traces.u.push_back(u);
        if (t == explore && t < horizon) {
            OptimisticProblem prob;
            prob.d_x = d_x;
            prob.d_u = d_u;
            prob.h = h;
            prob.cost = cost;
            prob.samples = rec.traces.z;
            for (long s = 1 - 2 * h; s <= explore - 1; ++s) prob.noise.push_back(w_hat_at(s));
            prob.psi = UnrolledModel{psi_rls.solve()};
            prob.whitener = MatrixXd::Identity(p, p);
            prob.alpha = 0.0;
            prob.w_bound = cfg.w_bound;
            prob.radius = cfg.r_m;
            policy = solve_optimistic_min(prob, cfg.budget, nullptr, cfg.parallel).policy;
            if (!policy.m.allFinite()) throw NumericalError(t, "explore_then_commit: non-finite policy");
            ++switches;
        }
        x = x_next;
    }
    rec.epochs.push_back({1, MatrixXd(), MatrixXd(), explore < horizon ? 2 : 1});
    return rec;
}

}  // namespace ofu
