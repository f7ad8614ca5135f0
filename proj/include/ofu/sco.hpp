#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "ofu/costs.hpp"
#include "ofu/errors.hpp"
#include "ofu/estimation.hpp"
#include "ofu/record.hpp"
#include "ofu/relaxation.hpp"
#include "ofu/rng.hpp"
#include "ofu/system.hpp"

namespace ofu {

enum class DecisionShape { Ball, Box };

inline std::string_view to_string(DecisionShape s) { return s == DecisionShape::Ball ? "ball" : "box"; }

inline DecisionShape decision_shape_from_string(std::string_view s) {
    if (s == "ball") return DecisionShape::Ball;
    if (s == "box") return DecisionShape::Box;
    throw ParameterError("unknown decision set shape: " + std::string(s));
}

/// Origin-centered ball or cube in R^dim with the given diameter.
struct DecisionSet {
    DecisionShape shape = DecisionShape::Ball;
    int dim = 1;
    double diameter = 1.0;

    /// Largest norm of a member; R_a / 2 for both shapes.
    double max_norm() const { return 0.5 * diameter; }
    double half_width() const { return 0.5 * diameter / std::sqrt(static_cast<double>(dim)); }

    void project(Eigen::Ref<VectorXd> a) const {
        if (shape == DecisionShape::Ball) {
            project_to_ball(a, max_norm());
        } else {
            const double h = half_width();
            a = a.cwiseMax(-h).cwiseMin(h);
        }
    }

    bool contains(const VectorXd& a, double tol = 1e-12) const {
        if (shape == DecisionShape::Ball) return a.norm() <= max_norm() + tol;
        return a.cwiseAbs().maxCoeff() <= half_width() + tol;
    }

    VectorXd sample(RngStream& rng) const {
        if (shape == DecisionShape::Ball) return uniform_in_ball(dim, max_norm(), rng);
        VectorXd a(dim);
        for (int i = 0; i < dim; ++i) a(i) = rng.uniform(-half_width(), half_width());
        return a;
    }

    bool operator==(const DecisionSet&) const = default;
};

struct ScoInstance {
    MatrixXd q_star;  // d_y x d_a
    DecisionSet set;
    double r_q = 1.0;
    NoiseModel noise;
    CostFamily loss;

    int d_a() const { return static_cast<int>(q_star.cols()); }
    int d_y() const { return static_cast<int>(q_star.rows()); }
    double r_a() const { return set.diameter; }

    void validate() const {
        require_dims(set.dim == d_a(), "sco instance: decision set dimension must be d_a");
        require_dims(noise.dim == d_y() && loss.dim == d_y(), "sco instance: noise and loss live in R^{d_y}");
        if (!(set.diameter > 0.0)) throw ParameterError("sco instance: decision set diameter must be > 0");
        if (operator_norm(q_star) > r_q * (1.0 + 1e-9)) throw ParameterError("sco instance: ||Q*|| exceeds r_q");
    }
};

/// Gaussian Q* rescaled to operator norm r_q.
inline ScoInstance make_sco_instance(int d_a, int d_y, double r_a, double r_q, const NoiseModel& noise,
                                     const CostFamily& loss, RngStream& rng,
                                     DecisionShape shape = DecisionShape::Ball) {
    if (d_a < 1 || d_y < 1) throw ParameterError("sco instance: dimensions must be >= 1");
    if (!(r_q > 0.0)) throw ParameterError("sco instance: r_q must be > 0");
    ScoInstance inst;
    inst.q_star = gaussian_matrix(d_y, d_a, rng);
    inst.q_star *= r_q / operator_norm(inst.q_star);
    inst.set = {shape, d_a, r_a};
    inst.r_q = r_q;
    inst.noise = noise;
    inst.loss = loss;
    inst.validate();
    return inst;
}

struct ScoParameters {
    double lambda = 1.0;
    double alpha = 0.0;
};

inline ScoParameters sco_parameter_values(int d_a, int d_y, double w, double r_a, double r_q, double horizon,
                                          double delta) {
    const double alpha = std::sqrt(static_cast<double>(d_a)) *
                         (w * d_y * std::sqrt(8.0 * std::log(2.0 * horizon / delta)) + std::sqrt(2.0) * r_a * r_q);
    return {r_a * r_a, alpha};
}

inline double sco_horizon_threshold(const ScoInstance& inst, double horizon, double delta) {
    const double d_q =
        3.0 * inst.r_q * inst.r_a() + inst.noise.w_bound * inst.d_y() * std::sqrt(8.0 * std::log(4.0 * horizon / delta));
    return std::max(inst.loss.sigma_c(inst.r_q * inst.r_a()), 64.0 * d_q * d_q);
}

/// Parameters for a horizon that meets the regret guarantee's horizon condition.
inline ScoParameters sco_theory_parameters(const ScoInstance& inst, long horizon, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("sco: delta must lie in (0, 1)");
    const double need = sco_horizon_threshold(inst, static_cast<double>(horizon), delta);
    if (static_cast<double>(horizon) < need)
        throw ParameterError("sco: horizon T=" + std::to_string(horizon) +
                             " is below the regret guarantee's horizon condition T >= max(sigma, 64 D_q^2) = " +
                             std::to_string(need));
    return sco_parameter_values(inst.d_a(), inst.d_y(), inst.noise.w_bound, inst.r_a(), inst.r_q,
                                static_cast<double>(horizon), delta);
}

/// Learner state before round t: V_t, the ridge statistics for Q_t and the
/// observed losses l_1..l_{t-1}.
struct ScoState {
    RlsState rls;
    std::vector<CostSample> history;
    VectorXd last_action;
    long t = 1;

    const GramTracker& gram() const { return rls.gram(); }
    MatrixXd q_hat() const { return rls.solve(); }
};

inline ScoState make_sco_state(const ScoInstance& inst, double lambda) {
    if (!(lambda > 0.0)) throw ParameterError("sco: lambda must be > 0");
    ScoState s;
    s.rls = RlsState(inst.d_a(), inst.d_y(), lambda);
    s.last_action = VectorXd::Zero(inst.d_a());
    return s;
}

/// sum_s l_s(Q a) - max(n, 1) alpha ||V^{-1/2} a||_inf over the decision set.
class ScoRelaxationModel {
public:
    struct Workspace {
        VectorXd point;
        VectorXd grad;
    };

    ScoRelaxationModel(const CostFamily& loss, const std::vector<CostSample>& history, MatrixXd q_hat,
                       MatrixXd whitener, double alpha, const DecisionSet& set)
        : loss_(loss), history_(history), q_(std::move(q_hat)), whitener_(std::move(whitener)), alpha_(alpha),
          set_(set) {
        require_dims(q_.cols() == set_.dim && q_.rows() == loss_.dim, "sco model: Q shape mismatch");
        require_dims(whitener_.rows() == set_.dim && whitener_.cols() == set_.dim, "sco model: whitener shape");
    }

    ScoRelaxationModel(const ScoState& state, const ScoInstance& inst, double alpha)
        : ScoRelaxationModel(inst.loss, state.history, state.q_hat(), state.gram().inverse_sqrt(), alpha,
                             inst.set) {}

    int dim() const { return set_.dim; }
    std::size_t samples() const { return history_.size(); }
    Workspace workspace() const { return {VectorXd(q_.rows()), VectorXd(q_.rows())}; }

    double sample_grad(std::size_t i, const VectorXd& a, Eigen::Ref<VectorXd> g, double scale, Workspace& ws) const {
        ws.point.noalias() = q_ * a;
        const double v = value_and_subgradient(loss_, history_[i], ws.point, ws.grad);
        g.noalias() += scale * (q_.transpose() * ws.grad);
        return v;
    }

    double loss_sum(const VectorXd& a) const {
        auto ws = workspace();
        ws.point.noalias() = q_ * a;
        double s = 0.0;
        for (const auto& z : history_) s += value_and_subgradient(loss_, z, ws.point, ws.grad);
        return s;
    }

    long entries() const { return set_.dim; }
    EntryMap entry_map(long k) const { return {whitener_.row(static_cast<Eigen::Index>(k)).transpose(), 0.0}; }
    double max_abs_entry(const VectorXd& a) const { return (whitener_ * a).cwiseAbs().maxCoeff(); }
    void project(Eigen::Ref<VectorXd> a) const { set_.project(a); }
    double step_radius() const { return set_.diameter; }
    double bonus_weight() const { return static_cast<double>(std::max<std::size_t>(samples(), 1)) * alpha_; }

private:
    const CostFamily& loss_;
    const std::vector<CostSample>& history_;
    MatrixXd q_;
    MatrixXd whitener_;
    double alpha_ = 0.0;
    DecisionSet set_;
};

static_assert(RelaxationModel<ScoRelaxationModel>);

struct ScoStepResult {
    VectorXd action;
    double value = 0.0;     // optimistic objective at the action
    double harmonic = 0.0;  // a^T V_t^{-1} a
    double loss = 0.0;      // l_t(Q* a)
    long distinct_solves = 0;
};

/// Plays round t: optimistic action from the current state, then observes
/// y = Q* a + w and l_t and updates V, the ridge statistics and the history.
inline ScoStepResult sco_step(ScoState& state, const ScoInstance& inst, double alpha, const SolverBudget& budget,
                              RngStream& noise_rng, RngStream& cost_rng, int parallel_width = 1) {
    ScoStepResult out;
    {
        const ScoRelaxationModel model(state, inst, alpha);
        RelaxationResult r = solve_relaxation(model, budget, state.last_action, parallel_width);
        out.action = std::move(r.x);
        out.value = r.value;
        out.distinct_solves = r.distinct_solves;
    }
    const VectorXd y = inst.q_star * out.action + sample_noise(inst.noise, noise_rng);
    CostSample z = draw_cost_sample(inst.loss, cost_rng);
    out.loss = eval(inst.loss, z, inst.q_star * out.action);
    out.harmonic = state.rls.update(out.action, y);
    state.history.push_back(std::move(z));
    state.last_action = out.action;
    ++state.t;
    return out;
}

/// tr(Delta V Delta^T) with Delta = Q* - Q_t.
inline double ridge_error(const ScoState& state, const ScoInstance& inst) {
    const MatrixXd delta = inst.q_star - state.q_hat();
    return (delta * state.gram().matrix() * delta.transpose()).trace();
}

inline double ridge_error_bound(double w, int d_y, double r_a, double r_q, double horizon, double delta) {
    return 8.0 * w * w * d_y * d_y * std::log(horizon / delta) + 2.0 * r_a * r_a * r_q * r_q;
}

struct ScoRunConfig {
    long horizon = 256;
    double alpha = 0.0;
    double lambda = 1.0;
    SolverBudget budget;
    int parallel = 1;
    bool track_ridge_error = false;
};

struct ScoRun {
    RunRecord record;
    std::vector<VectorXd> actions;
    std::vector<double> ridge_errors;  // after each update, when tracked
    ScoState final_state;
};

inline ScoRun run_sco(const ScoInstance& inst, const ScoRunConfig& cfg, const RngStream& rng) {
    inst.validate();
    if (cfg.horizon < 1) throw ParameterError("sco: horizon must be >= 1");
    if (!(cfg.alpha >= 0.0)) throw ParameterError("sco: alpha must be >= 0");
    RngStream noise_rng = rng.derive(kNoiseStream);
    RngStream cost_rng = rng.derive(kCostStream);

    ScoRun run;
    run.record.algo = "sco";
    run.record.horizon = cfg.horizon;
    run.record.d_x = inst.d_y();
    run.record.d_u = inst.d_a();
    run.record.rows.reserve(static_cast<std::size_t>(cfg.horizon));
    run.actions.reserve(static_cast<std::size_t>(cfg.horizon));
    ScoState state = make_sco_state(inst, cfg.lambda);
    for (long t = 1; t <= cfg.horizon; ++t) {
        ScoStepResult s = sco_step(state, inst, cfg.alpha, cfg.budget, noise_rng, cost_rng, cfg.parallel);
        if (!s.action.allFinite()) throw NumericalError(t, "sco: non-finite action");
        StepRow row;
        row.t = t;
        row.cost = s.loss;
        row.action_norm = s.action.norm();
        row.logdet_v = state.gram().logdet();
        row.harmonic_term = s.harmonic;
        run.record.rows.push_back(row);
        run.record.traces.u.push_back(s.action);
        run.record.traces.z.push_back(state.history.back());
        if (cfg.track_ridge_error) run.ridge_errors.push_back(ridge_error(state, inst));
        run.actions.push_back(std::move(s.action));
    }
    run.final_state = std::move(state);
    return run;
}

/// a -> (1/n) sum_i l(Q* a; z_i) over a frozen sample; no entries, so the
/// relaxation machinery reduces to plain projected subgradient descent.
class ScoMeanModel {
public:
    struct Workspace {
        VectorXd point;
        VectorXd grad;
    };

    ScoMeanModel(const ScoInstance& inst, const std::vector<CostSample>& sample) : inst_(inst), sample_(sample) {}

    int dim() const { return inst_.d_a(); }
    std::size_t samples() const { return sample_.size(); }
    Workspace workspace() const { return {VectorXd(inst_.d_y()), VectorXd(inst_.d_y())}; }

    double sample_grad(std::size_t i, const VectorXd& a, Eigen::Ref<VectorXd> g, double scale, Workspace& ws) const {
        ws.point.noalias() = inst_.q_star * a;
        const double v = value_and_subgradient(inst_.loss, sample_[i], ws.point, ws.grad);
        g.noalias() += scale * (inst_.q_star.transpose() * ws.grad);
        return v;
    }

    double loss_sum(const VectorXd& a) const {
        auto ws = workspace();
        ws.point.noalias() = inst_.q_star * a;
        double s = 0.0;
        for (const auto& z : sample_) s += value_and_subgradient(inst_.loss, z, ws.point, ws.grad);
        return s;
    }

    double mean(const VectorXd& a) const { return sample_.empty() ? 0.0 : loss_sum(a) / static_cast<double>(samples()); }

    long entries() const { return 0; }
    EntryMap entry_map(long) const { return {VectorXd::Zero(dim()), 0.0}; }
    double max_abs_entry(const VectorXd&) const { return 0.0; }
    void project(Eigen::Ref<VectorXd> a) const { inst_.set.project(a); }
    double step_radius() const { return inst_.set.diameter; }
    double bonus_weight() const { return 0.0; }

private:
    const ScoInstance& inst_;
    const std::vector<CostSample>& sample_;
};

static_assert(RelaxationModel<ScoMeanModel>);

struct ScoRegret {
    double total = 0.0;
    double comparator_value = 0.0;
    VectorXd comparator_action;
    std::vector<double> step_means;  // mu(Q* a_t)
};

/// Pseudo-regret against the best fixed action, with mu replaced by a sample
/// average over `mc_samples` draws shared by both sides.
inline ScoRegret sco_pseudo_regret(const std::vector<VectorXd>& actions, const ScoInstance& inst, long mc_samples,
                                   RngStream& rng, int solver_iterations = 3000) {
    if (mc_samples < 1) throw ParameterError("sco_pseudo_regret: mc_samples must be >= 1");
    std::vector<CostSample> sample;
    sample.reserve(static_cast<std::size_t>(mc_samples));
    for (long i = 0; i < mc_samples; ++i) sample.push_back(draw_cost_sample(inst.loss, rng));
    const ScoMeanModel model(inst, sample);

    SolverBudget budget;
    budget.min_iterations = solver_iterations;
    budget.iterations_per_sample = 0;
    budget.full_batch_max_samples = static_cast<int>(mc_samples);
    ScoRegret out;
    out.comparator_action = minimize_tilted(model, VectorXd::Zero(model.dim()), VectorXd::Zero(model.dim()), budget).x;
    out.comparator_value = model.mean(out.comparator_action);

    out.step_means.reserve(actions.size());
    for (const auto& a : actions) {
        const double m = model.mean(a);
        out.step_means.push_back(m);
        if (m < out.comparator_value) {
            out.comparator_value = m;
            out.comparator_action = a;
        }
    }
    for (double m : out.step_means) out.total += m - out.comparator_value;
    return out;
}

/// Fills comparator_cost and cum_regret of an SCO record from its pseudo-regret.
inline void attach_regret(RunRecord& record, const ScoRegret& regret) {
    require_dims(record.rows.size() == regret.step_means.size(), "attach_regret: length mismatch");
    double cum = 0.0;
    for (std::size_t i = 0; i < record.rows.size(); ++i) {
        cum += regret.step_means[i] - regret.comparator_value;
        record.rows[i].comparator_cost = regret.comparator_value;
        record.rows[i].cum_regret = cum;
    }
}

struct SandwichReport {
    bool confidence_holds = false;
    double confidence_lhs = 0.0;  // sqrt(d_a) ||Q - Q*||_V
    long probes = 0;
    long lower_violations = 0;
    long upper_violations = 0;
    double worst_lower_slack = 0.0;  // min over probes of (mu* - L) + 3 se
    double worst_upper_slack = 0.0;  // min over probes of (L + width - mu*) + 3 se
};

/// Checks L(a) <= mu(Q* a) <= L(a) + 2 alpha ||a||_{V^{-1}} with
/// L(a) = mu(Q a) - alpha ||V^{-1/2} a||_inf at each probe. Both means use the
/// same draws, and a violation must exceed 3 standard errors of the paired
/// difference. The confidence condition is evaluated with the true Q*.
inline SandwichReport sandwich_check(const ScoState& state, const ScoInstance& inst, double alpha,
                                     const std::vector<VectorXd>& probes, long mc_samples, RngStream& rng) {
    SandwichReport rep;
    const MatrixXd q_hat = state.q_hat();
    const MatrixXd whitener = state.gram().inverse_sqrt();
    rep.confidence_lhs = std::sqrt(static_cast<double>(inst.d_a()) * std::max(0.0, ridge_error(state, inst)));
    rep.confidence_holds = rep.confidence_lhs <= alpha;
    rep.worst_lower_slack = std::numeric_limits<double>::infinity();
    rep.worst_upper_slack = std::numeric_limits<double>::infinity();

    std::vector<CostSample> sample;
    sample.reserve(static_cast<std::size_t>(mc_samples));
    for (long i = 0; i < mc_samples; ++i) sample.push_back(draw_cost_sample(inst.loss, rng));
    const double n = static_cast<double>(std::max<long>(mc_samples, 1));

    for (const auto& a : probes) {
        const VectorXd p_true = inst.q_star * a;
        const VectorXd p_hat = q_hat * a;
        double sum = 0.0, sum_sq = 0.0;
        for (const auto& z : sample) {
            const double d = eval(inst.loss, z, p_true) - eval(inst.loss, z, p_hat);
            sum += d;
            sum_sq += d * d;
        }
        const double mean = sum / n;
        const double var = mc_samples > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;
        const double tol = 3.0 * std::sqrt(var / n);
        const double bonus = alpha * (whitener * a).cwiseAbs().maxCoeff();
        const double width = 2.0 * alpha * std::sqrt(std::max(0.0, state.gram().quadratic_form(a)));
        // mu* - L = mean + bonus;  L + width - mu* = width - bonus - mean
        const double lower = mean + bonus + tol;
        const double upper = width - bonus - mean + tol;
        if (lower < 0.0) ++rep.lower_violations;
        if (upper < 0.0) ++rep.upper_violations;
        rep.worst_lower_slack = std::min(rep.worst_lower_slack, lower);
        rep.worst_upper_slack = std::min(rep.worst_upper_slack, upper);
        ++rep.probes;
    }
    return rep;
}

inline std::vector<VectorXd> probe_actions(const DecisionSet& set, long count, RngStream& rng) {
    std::vector<VectorXd> out;
    out.reserve(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) out.push_back(set.sample(rng));
    return out;
}

}  // namespace ofu
