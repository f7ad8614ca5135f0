#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <utility>

#include "ofu/dap.hpp"
#include "ofu/errors.hpp"
#include "ofu/linalg.hpp"

namespace ofu {

/// Regularized Gram matrix V = lambda I + sum rho rho^T with a Cholesky factor
/// maintained by rank-1 updates and an incrementally tracked log-determinant.
class GramTracker {
public:
    GramTracker() = default;

    /// `recompute_every` > 0 refactorizes from scratch after that many updates.
    GramTracker(int dim, double lambda, int recompute_every = 1000)
        : v_(MatrixXd::Identity(dim, dim) * lambda),
          lambda_(lambda),
          logdet_(static_cast<double>(dim) * std::log(lambda)),
          recompute_every_(recompute_every) {
        if (!(lambda > 0.0)) throw ParameterError("GramTracker: lambda must be > 0");
        llt_.compute(v_);
    }

    int dim() const { return static_cast<int>(v_.rows()); }
    double lambda() const { return lambda_; }
    double logdet() const { return logdet_; }
    const MatrixXd& matrix() const { return v_; }
    long updates() const { return updates_; }

    /// rho^T V^{-1} rho for the current V.
    double quadratic_form(const VectorXd& rho) const {
        require_dims(rho.size() == dim(), "GramTracker: regressor dimension mismatch");
        return llt_.matrixL().solve(rho).squaredNorm();
    }

    /// V <- V + rho rho^T. Returns rho^T V^{-1} rho evaluated before the update.
    double update(const VectorXd& rho) {
        const double q = quadratic_form(rho);
        v_.noalias() += rho * rho.transpose();
        ++updates_;
        if (q == 0.0) return 0.0;
        llt_.rankUpdate(rho, 1.0);
        logdet_ += std::log1p(q);
        if (llt_.info() != Eigen::Success || (recompute_every_ > 0 && updates_ % recompute_every_ == 0)) recompute();
        return q;
    }

    /// Refactorize from the stored matrix and reset the tracked log-determinant.
    void recompute() {
        llt_.compute(v_);
        if (llt_.info() != Eigen::Success) throw NumericalError(updates_, "Gram matrix lost positive definiteness");
        logdet_ = 2.0 * llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();
    }

    /// log det V computed from a fresh factorization (does not touch state).
    double recomputed_logdet() const {
        Eigen::LLT<MatrixXd> fresh(v_);
        return 2.0 * fresh.matrixL().toDenseMatrix().diagonal().array().log().sum();
    }

    MatrixXd solve(const MatrixXd& rhs) const { return llt_.solve(rhs); }

    MatrixXd inverse_sqrt() const { return inverse_sqrt_spd(v_); }

private:
    MatrixXd v_;
    Eigen::LLT<MatrixXd> llt_;
    double lambda_ = 1.0;
    double logdet_ = 0.0;
    long updates_ = 0;
    int recompute_every_ = 1000;
};

/// det V_now > 2 det V_start, strict.
inline bool det_doubled(const GramTracker& now, const GramTracker& epoch_start) {
    require_dims(now.dim() == epoch_start.dim(), "det_doubled: dimension mismatch");
    return now.logdet() - epoch_start.logdet() > std::numbers::ln2;
}

/// V^{-1/2} P(M) with the symmetric principal root.
inline MatrixXd whitened_bonus_matrix(const GramTracker& g, const MatrixXd& p_matrix) {
    require_dims(p_matrix.rows() == g.dim(), "whitened_bonus_matrix: row dimension must equal Gram dimension");
    return g.inverse_sqrt() * p_matrix;
}

/// Ridge regression theta = argmin sum ||theta z - y||^2 + lambda ||theta||_F^2,
/// kept as (lambda I + sum z z^T, sum z y^T).
class RlsState {
public:
    RlsState() = default;
    RlsState(int regressor_dim, int target_dim, double lambda, int recompute_every = 1000)
        : gram_(regressor_dim, lambda, recompute_every), cross_(MatrixXd::Zero(regressor_dim, target_dim)) {}

    int regressor_dim() const { return gram_.dim(); }
    int target_dim() const { return static_cast<int>(cross_.cols()); }
    const GramTracker& gram() const { return gram_; }
    const MatrixXd& cross() const { return cross_; }

    /// Returns z^T G^{-1} z before the update.
    double update(const VectorXd& z, const VectorXd& y) {
        require_dims(z.size() == regressor_dim() && y.size() == target_dim(), "rls_update: dimension mismatch");
        cross_.noalias() += z * y.transpose();
        return gram_.update(z);
    }

    /// theta in R^{target x regressor}.
    MatrixXd solve() const { return gram_.solve(cross_).transpose(); }

private:
    GramTracker gram_;
    MatrixXd cross_;
};

inline RlsState rls_update(RlsState state, const VectorXd& z, const VectorXd& y) {
    state.update(z, y);
    return state;
}

/// Projection of the one-step residual onto the W-ball.
inline VectorXd estimate_noise(const MatrixXd& a_hat, const MatrixXd& b_hat, const VectorXd& x, const VectorXd& u,
                               const VectorXd& x_next, double w_bound) {
    require_dims(a_hat.rows() == x_next.size() && a_hat.cols() == x.size() && b_hat.cols() == u.size() &&
                     b_hat.rows() == x_next.size(),
                 "estimate_noise: dimension mismatch");
    VectorXd r = x_next - a_hat * x - b_hat * u;
    project_to_ball(r, w_bound);
    return r;
}

/// Ridge estimate of Psi from (rho_s, x_{s+1}) pairs. `dims` = (regressor, state)
/// is needed when the history is empty.
inline UnrolledModel estimate_psi(std::span<const std::pair<VectorXd, VectorXd>> history, double lambda_psi,
                                  int regressor_dim, int d_x) {
    RlsState rls(regressor_dim, d_x, lambda_psi, 0);
    for (const auto& [rho, x_next] : history) rls.update(rho, x_next);
    return {rls.solve()};
}

}  // namespace ofu
