#pragma once

#include <span>

#include "ofu/errors.hpp"
#include "ofu/linalg.hpp"
#include "ofu/system.hpp"

namespace ofu {

/// Ordered slice of disturbances, oldest first.
using NoiseWindow = std::span<const VectorXd>;

/// Width of the regressor rho_t = (u_{t+1-H..t}, w_{t+1-H..t-1}).
inline int regressor_dim(int h, int d_x, int d_u) { return h * d_u + (h - 1) * d_x; }

/// Disturbance-action policy u_t = sum_{h=1}^H M^[h] w_{t-h}, with
/// M = (M^[1] ... M^[H]) in R^{d_u x H d_x}.
struct DapPolicy {
    MatrixXd m;
    int h = 1;
    double r_m = 1.0;

    static DapPolicy zero(int d_u, int d_x, int h, double r_m) { return {MatrixXd::Zero(d_u, h * d_x), h, r_m}; }

    int d_u() const { return static_cast<int>(m.rows()); }
    int d_x() const { return static_cast<int>(m.cols()) / h; }

    /// M^[k], 1-based as in the policy definition.
    auto block(int k) const { return m.middleCols((k - 1) * d_x(), d_x()); }

    bool in_class(double tol = 1e-12) const { return m.norm() <= r_m * (1.0 + tol); }
};

/// Stacked (w_{t-1}, w_{t-2}, ..., w_{t-H}) so that u_t = M * omega.
inline VectorXd stack_recent_first(NoiseWindow window) {
    if (window.empty()) return VectorXd(0);
    const Eigen::Index d = window.front().size();
    VectorXd out(static_cast<Eigen::Index>(window.size()) * d);
    const auto n = window.size();
    for (std::size_t k = 0; k < n; ++k) out.segment(static_cast<Eigen::Index>(k) * d, d) = window[n - 1 - k];
    return out;
}

/// Stacked window in its natural (oldest-first) order.
inline VectorXd stack_window(NoiseWindow window) {
    if (window.empty()) return VectorXd(0);
    const Eigen::Index d = window.front().size();
    VectorXd out(static_cast<Eigen::Index>(window.size()) * d);
    for (std::size_t k = 0; k < window.size(); ++k) out.segment(static_cast<Eigen::Index>(k) * d, d) = window[k];
    return out;
}

/// u_t(M; w) from the window (w_{t-H}, ..., w_{t-1}).
inline VectorXd dap_action(const DapPolicy& policy, NoiseWindow window) {
    require_dims(static_cast<int>(window.size()) == policy.h, "dap_action: window length must equal H");
    const int d_x = policy.d_x();
    VectorXd u = VectorXd::Zero(policy.d_u());
    for (int k = 1; k <= policy.h; ++k) {
        const VectorXd& w = window[static_cast<std::size_t>(policy.h - k)];
        require_dims(w.size() == d_x, "dap_action: noise dimension mismatch");
        u.noalias() += policy.block(k) * w;
    }
    return u;
}

/// rho_t(M; w) from the window (w_{t+1-2H}, ..., w_{t-1}), assembled from
/// dap_action directly.
inline VectorXd dap_rho(const DapPolicy& policy, NoiseWindow window) {
    const int h = policy.h;
    require_dims(static_cast<int>(window.size()) == 2 * h - 1, "dap_rho: window length must equal 2H-1");
    const int d_x = policy.d_x();
    const int d_u = policy.d_u();
    VectorXd rho(regressor_dim(h, d_x, d_u));
    for (int r = 0; r < h; ++r) rho.segment(r * d_u, d_u) = dap_action(policy, window.subspan(r, h));
    for (int q = 0; q < h - 1; ++q) rho.segment(h * d_u + q * d_x, d_x) = window[static_cast<std::size_t>(h + q)];
    return rho;
}

/// The banded operator P(M) with rho_t(M; w) = P(M) w_{t+1-2H:t-1}:
/// block-row r < H holds M^[H], ..., M^[1] starting at block-column r; the
/// last H-1 block-rows are the shifted identity.
inline MatrixXd build_p_matrix(const DapPolicy& policy, int d_x) {
    const int h = policy.h;
    const int d_u = policy.d_u();
    require_dims(policy.m.cols() == h * d_x, "build_p_matrix: policy width must be H*d_x");
    MatrixXd p = MatrixXd::Zero(regressor_dim(h, d_x, d_u), (2 * h - 1) * d_x);
    for (int r = 0; r < h; ++r)
        for (int c = r; c < r + h; ++c) p.block(r * d_u, c * d_x, d_u, d_x) = policy.block(h + r - c);
    for (int q = 0; q < h - 1; ++q) p.block(h * d_u + q * d_x, (h + q) * d_x, d_x, d_x).setIdentity();
    return p;
}

/// Unrolled model Psi in R^{d_x x (H d_u + (H-1) d_x)}.
struct UnrolledModel {
    MatrixXd psi;
};

/// x_t(M; Psi, w) = Psi rho_{t-1}(M; w) + w_{t-1} from (w_{t-2H}, ..., w_{t-1}).
inline VectorXd surrogate_state(const DapPolicy& policy, const UnrolledModel& model, NoiseWindow window) {
    const int h = policy.h;
    require_dims(static_cast<int>(window.size()) == 2 * h, "surrogate_state: window length must equal 2H");
    const int d_x = policy.d_x();
    require_dims(model.psi.rows() == d_x && model.psi.cols() == regressor_dim(h, d_x, policy.d_u()),
                 "surrogate_state: Psi shape mismatch");
    return model.psi * dap_rho(policy, window.first(2 * h - 1)) + window.back();
}

/// Psi* = [A^{H-1}B, ..., AB, B, A^{H-1}, ..., A].
inline UnrolledModel exact_unrolled_model(const SystemSpec& sys, int h) {
    if (h < 1) throw ParameterError("exact_unrolled_model: H must be >= 1");
    const int d_x = sys.d_x();
    const int d_u = sys.d_u();
    MatrixXd psi(d_x, regressor_dim(h, d_x, d_u));
    MatrixXd power = MatrixXd::Identity(d_x, d_x);  // A^k, k increasing
    for (int k = 0; k < h; ++k) {
        psi.block(0, (h - 1 - k) * d_u, d_x, d_u) = power * sys.b_star;
        if (k >= 1) psi.block(0, h * d_u + (h - 1 - k) * d_x, d_x, d_x) = power;
        power = power * sys.a_star;
    }
    return {psi};
}

}  // namespace ofu
