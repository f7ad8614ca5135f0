#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "ofu/costs.hpp"
#include "ofu/dap.hpp"
#include "ofu/errors.hpp"
#include "ofu/estimation.hpp"
#include "ofu/optimism.hpp"
#include "ofu/record.hpp"
#include "ofu/system.hpp"

namespace ofu {

struct ControllerConfig {
    long horizon = 1;
    int h = 2;
    double alpha = 0.0;  // before alpha_scale
    double lambda_w = 1.0;
    double lambda_psi = 1.0;
    double r_m = 1.0;
    double w_bound = 1.0;
    double alpha_scale = 1.0;
    double delta = 0.1;
    SolverBudget budget;
    int parallel = 1;
    int gram_recompute_every = 1000;

    double effective_alpha() const { return alpha * alpha_scale; }

    void validate() const {
        if (horizon < 1) throw ParameterError("controller: horizon must be >= 1");
        if (h < 2) throw ParameterError("controller: memory H must be >= 2");
        if (!(alpha >= 0.0) || !(alpha_scale >= 0.0)) throw ParameterError("controller: alpha must be >= 0");
        if (!(lambda_w > 0.0) || !(lambda_psi > 0.0)) throw ParameterError("controller: regularizers must be > 0");
        if (!(r_m > 0.0)) throw ParameterError("controller: R_M must be > 0");
        if (!(w_bound > 0.0)) throw ParameterError("controller: W must be > 0");
        if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("controller: delta must lie in (0, 1)");
        if (budget.min_iterations < 1 || budget.iterations_per_sample < 0)
            throw ParameterError("controller: solver budget must be >= 1");
    }

    bool operator==(const ControllerConfig&) const = default;
};

/// H = max(2, ceil(ln T / gamma)). The small slack keeps ln(e^k) from rounding up.
inline int theory_memory(double gamma, double horizon) {
    const double raw = std::log(horizon) / gamma;
    return std::max(2, static_cast<int>(std::ceil(raw - 1e-9)));
}

inline double theory_lambda_w(double kappa, double w, double r_m, double r_b, int h, double gamma) {
    return 5.0 * kappa * kappa * w * w * r_m * r_m * r_b * r_b * h / gamma;
}

inline double theory_lambda_psi(double w, double r_m, int h) { return 2.0 * w * w * r_m * r_m * h * h; }

inline double theory_alpha(int d_x, int d_u, double kappa, double w, double r_m, double r_b, double gamma, int h,
                           double horizon, double delta) {
    const double dx = d_x, du = d_u;
    const double inner = dx / (gamma * gamma * gamma) * (dx * dx * kappa * kappa + du * r_b * r_b) *
                         std::log(12.0 * horizon / delta);
    return 30.0 * w * r_m * r_b * kappa * kappa * (dx + du) * h * h * std::sqrt(inner);
}

/// Ceiling on sqrt(sum_t ||w_t - w_hat_t||^2) for the disturbance estimates.
inline double disturbance_error_bound(int d_x, int d_u, double kappa, double w, double r_m, double r_b, double gamma,
                                      int h, double horizon, double delta) {
    const double dx = d_x, du = d_u;
    return 10.0 * w * kappa * r_m * r_b / gamma *
           std::sqrt(h * (dx + du) * (dx * dx * kappa * kappa + du * r_b * r_b) * std::log(horizon / delta));
}

/// Ceiling on sqrt(tr(Delta^T V Delta)) for the unrolled-model estimate.
inline double unrolled_confidence_bound(int d_x, int d_u, double kappa, double w, double r_m, double r_b,
                                        double gamma, int h, double horizon, double delta) {
    const double dx = d_x, du = d_u;
    return 21.0 * w * r_m * r_b * kappa * kappa * h *
           std::sqrt((dx + du) * (dx * dx * kappa * kappa + du * r_b * r_b) * std::log(horizon / delta) /
                     (gamma * gamma * gamma));
}

/// Epoch-count and per-epoch subepoch-count ceilings.
inline double epoch_count_bound(int d_x, int d_u, int h, double horizon) {
    return 2.0 * (d_x + d_u) * h * std::log(horizon);
}

inline double subepoch_count_bound(double horizon) { return 2.0 * std::log(horizon); }

/// Parameter choices of the regret guarantee. Throws unless T >= 64 R_M^2.
inline ControllerConfig theory_parameters(const SystemSpec& sys, double r_m, long horizon, double delta) {
    if (static_cast<double>(horizon) < 64.0 * r_m * r_m)
        throw ParameterError("theory_parameters: horizon T must satisfy T >= 64 R_M^2 (got T = " +
                             std::to_string(horizon) + ", 64 R_M^2 = " + std::to_string(64.0 * r_m * r_m) + ")");
    ControllerConfig c;
    const double t = static_cast<double>(horizon);
    c.horizon = horizon;
    c.h = theory_memory(sys.gamma, t);
    c.r_m = r_m;
    c.w_bound = sys.w_bound;
    c.delta = delta;
    c.lambda_w = theory_lambda_w(sys.kappa, sys.w_bound, r_m, sys.r_b, c.h, sys.gamma);
    c.lambda_psi = theory_lambda_psi(sys.w_bound, r_m, c.h);
    c.alpha = theory_alpha(sys.d_x(), sys.d_u(), sys.kappa, sys.w_bound, r_m, sys.r_b, sys.gamma, c.h, t, delta);
    return c;
}

/// The learner. It sees the states it is handed and the revealed cost samples,
/// nothing else: disturbances enter only through the observed states.
class OfuController {
public:
    OfuController(int d_x, int d_u, CostFamily cost, ControllerConfig cfg, VectorXd x_1)
        : d_x_(d_x),
          d_u_(d_u),
          cost_(std::move(cost)),
          cfg_(std::move(cfg)),
          p_(regressor_dim(cfg_.h, d_x, d_u)),
          ab_(d_x + d_u, d_x, cfg_.lambda_w, cfg_.gram_recompute_every),
          psi_rls_(p_, d_x, cfg_.lambda_psi, cfg_.gram_recompute_every),
          policy_(DapPolicy::zero(d_u, d_x, cfg_.h, cfg_.r_m)),
          x_(std::move(x_1)) {
        cfg_.validate();
        require_dims(cost_.dim == d_x + d_u, "controller: cost dimension must be d_x + d_u");
        require_dims(x_.size() == d_x, "controller: initial state dimension mismatch");
        a_hat_ = MatrixXd::Zero(d_x, d_x);
        b_hat_ = MatrixXd::Zero(d_x, d_u);
        begin_epoch(1);
    }

    long t() const { return t_; }
    int epoch() const { return static_cast<int>(epochs_.size()); }
    int subepoch() const { return j_; }
    long tau_i() const { return tau_i_; }
    long tau_ij() const { return tau_ij_; }
    long policy_switches() const { return switches_; }
    const DapPolicy& policy() const { return policy_; }
    const std::vector<EpochInfo>& epochs() const { return epochs_; }
    const GramTracker& gram() const { return psi_rls_.gram(); }
    const UnrolledModel& psi() const { return psi_; }
    const MatrixXd& a_hat() const { return a_hat_; }
    const MatrixXd& b_hat() const { return b_hat_; }
    const ControllerConfig& config() const { return cfg_; }
    double last_harmonic() const { return last_harmonic_; }

    /// w_hat_s, zero for s < 1.
    VectorXd w_hat(long s) const {
        return s >= 1 ? w_hat_[static_cast<std::size_t>(s - 1)] : VectorXd::Zero(d_x_);
    }

    /// u_t = sum_h M^[h] w_hat_{t-h}; the same value until observe() is called.
    const VectorXd& act() {
        if (!acted_) {
            std::vector<VectorXd> window;
            window.reserve(static_cast<std::size_t>(cfg_.h));
            for (long s = t_ - cfg_.h; s < t_; ++s) window.push_back(w_hat(s));
            u_ = dap_action(policy_, window);
            acted_ = true;
        }
        return u_;
    }

    /// Consumes x_{t+1} and the revealed cost sample of round t.
    void observe(const VectorXd& x_next, const CostSample& z) {
        require_dims(x_next.size() == d_x_, "controller: state dimension mismatch");
        if (!x_next.allFinite()) throw NumericalError(t_, "non-finite state observed");
        act();
        const int h = cfg_.h;
        u_hist_.push_back(u_);
        z_hist_.push_back(z);

        // (A_t B_t) by ridge over all (x_s, u_s) -> x_{s+1}.
        VectorXd zz(d_x_ + d_u_);
        zz << x_, u_;
        ab_.update(zz, x_next);
        const MatrixXd ab = ab_.solve();
        a_hat_ = ab.leftCols(d_x_);
        b_hat_ = ab.rightCols(d_u_);

        // rho_t = (u_{t+1-H..t}, w_hat_{t+1-H..t-1}); V and the Psi ridge share it.
        VectorXd rho(p_);
        for (int r = 0; r < h; ++r) rho.segment(r * d_u_, d_u_) = u_at(t_ + 1 - h + r);
        for (int q = 0; q < h - 1; ++q) rho.segment(h * d_u_ + q * d_x_, d_x_) = w_hat(t_ + 1 - h + q);
        last_harmonic_ = psi_rls_.update(rho, x_next);

        w_hat_.push_back(estimate_noise(a_hat_, b_hat_, x_, u_, x_next, cfg_.w_bound));

        if (psi_rls_.gram().logdet() - epoch_logdet_ > std::numbers::ln2) begin_epoch(t_ + 1);

        if (t_ + 1 - tau_i_ > 2 * (tau_ij_ - tau_i_)) {
            const long prev = tau_ij_;
            ++j_;
            tau_ij_ = t_ + 1;
            epochs_.back().subepochs = j_;
            solve_window(prev, t_);
            ++switches_;
        }

        x_ = x_next;
        ++t_;
        acted_ = false;
    }

    /// The optimistic problem over rounds [first, last] under the current epoch estimates.
    OptimisticProblem window_problem(long first, long last) const {
        OptimisticProblem p;
        p.d_x = d_x_;
        p.d_u = d_u_;
        p.h = cfg_.h;
        p.cost = cost_;
        for (long s = first; s <= last; ++s) p.samples.push_back(z_hist_[static_cast<std::size_t>(s - 1)]);
        for (long s = first - 2 * cfg_.h; s <= last - 1; ++s) p.noise.push_back(w_hat(s));
        p.psi = psi_;
        p.whitener = whitener_;
        p.alpha = cfg_.effective_alpha();
        p.w_bound = cfg_.w_bound;
        p.radius = cfg_.r_m;
        return p;
    }

private:
    VectorXd u_at(long s) const { return s >= 1 ? u_hist_[static_cast<std::size_t>(s - 1)] : VectorXd::Zero(d_u_); }

    void begin_epoch(long start) {
        tau_i_ = start;
        j_ = 2;
        tau_ij_ = start + 2 * cfg_.h;
        psi_ = UnrolledModel{psi_rls_.solve()};
        epoch_logdet_ = psi_rls_.gram().logdet();
        whitener_ = psi_rls_.gram().inverse_sqrt();
        if (!epochs_.empty()) ++switches_;
        policy_ = DapPolicy::zero(d_u_, d_x_, cfg_.h, cfg_.r_m);
        epochs_.push_back({start, psi_.psi, psi_rls_.gram().matrix(), 2});
    }

    void solve_window(long first, long last) {
        const OptimisticProblem p = window_problem(first, last);
        const auto sol = solve_optimistic_min(p, cfg_.budget, &policy_, cfg_.parallel);
        if (!sol.policy.m.allFinite()) throw NumericalError(t_, "optimistic minimization produced a non-finite policy");
        policy_ = sol.policy;
    }

    int d_x_, d_u_;
    CostFamily cost_;
    ControllerConfig cfg_;
    int p_;
    RlsState ab_;
    RlsState psi_rls_;
    DapPolicy policy_;
    UnrolledModel psi_;
    MatrixXd whitener_;
    MatrixXd a_hat_, b_hat_;
    VectorXd x_;
    VectorXd u_;
    bool acted_ = false;
    long t_ = 1;
    long tau_i_ = 1;
    long tau_ij_ = 1;
    int j_ = 2;
    double epoch_logdet_ = 0.0;
    double last_harmonic_ = 0.0;
    long switches_ = 0;
    std::vector<VectorXd> u_hist_;
    std::vector<VectorXd> w_hat_;
    std::vector<CostSample> z_hist_;
    std::vector<EpochInfo> epochs_;
};

/// Runs the OFU controller against the true plant from x_1 = 0.
inline RunRecord run_controller(const SystemSpec& sys, const CostFamily& cost, const ControllerConfig& cfg,
                                const RngStream& rng) {
    cfg.validate();
    const int d_x = sys.d_x(), d_u = sys.d_u();
    RngStream noise_rng = rng.derive(kNoiseStream);
    RngStream cost_rng = rng.derive(kCostStream);
    VectorXd x = VectorXd::Zero(d_x);
    OfuController ctl(d_x, d_u, cost, cfg, x);

    RunRecord rec;
    rec.algo = "ofu";
    rec.horizon = cfg.horizon;
    rec.h = cfg.h;
    rec.d_x = d_x;
    rec.d_u = d_u;
    rec.rows.reserve(static_cast<std::size_t>(cfg.horizon));
    for (long t = 1; t <= cfg.horizon; ++t) {
        StepRow row;
        row.t = t;
        row.epoch = ctl.epoch();
        row.subepoch = ctl.subepoch();
        row.policy_switches = ctl.policy_switches();
        const VectorXd u = ctl.act();
        const VectorXd w = sample_noise(sys.noise, noise_rng);
        const CostSample z = draw_cost_sample(cost, cost_rng);
        row.cost = eval(cost, z, x, u);
        row.action_norm = u.norm();
        row.state_norm = x.norm();
        const VectorXd x_next = step(sys, x, u, w);
        ctl.observe(x_next, z);
        row.noise_err_sq = (w - ctl.w_hat(t)).squaredNorm();
        row.logdet_v = ctl.gram().logdet();
        row.harmonic_term = ctl.last_harmonic();
        rec.rows.push_back(row);
        rec.traces.w.push_back(w);
        rec.traces.z.push_back(z);
        rec.traces.x.push_back(x);
        rec.traces.u.push_back(u);
        x = x_next;
    }
    rec.epochs = ctl.epochs();
    return rec;
}

/// Replays a fixed DAP with oracle access to the true disturbances on the
/// recorded (w_t, z_t) realization, from x_1 = 0. Returns c_t per round.
inline std::vector<double> run_fixed_policy(const SystemSpec& sys, const CostFamily& cost, const DapPolicy& policy,
                                            const std::vector<VectorXd>& noise_trace,
                                            const std::vector<CostSample>& cost_trace) {
    if (noise_trace.size() != cost_trace.size())
        throw DimensionError("run_fixed_policy: noise and cost traces differ in length");
    const int d_x = sys.d_x();
    require_dims(policy.d_x() == d_x && policy.d_u() == sys.d_u(), "run_fixed_policy: policy shape mismatch");
    const int h = policy.h;
    std::vector<VectorXd> padded(static_cast<std::size_t>(h), VectorXd::Zero(d_x));
    padded.insert(padded.end(), noise_trace.begin(), noise_trace.end());
    const NoiseWindow all(padded);
    std::vector<double> out;
    out.reserve(noise_trace.size());
    VectorXd x = VectorXd::Zero(d_x);
    for (std::size_t i = 0; i < noise_trace.size(); ++i) {
        const VectorXd u = dap_action(policy, all.subspan(i, static_cast<std::size_t>(h)));
        out.push_back(eval(cost, cost_trace[i], x, u));
        x = step(sys, x, u, noise_trace[i]);
    }
    return out;
}

}  // namespace ofu
