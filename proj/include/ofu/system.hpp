#pragma once

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <string>
#include <string_view>

#include "ofu/errors.hpp"
#include "ofu/linalg.hpp"
#include "ofu/rng.hpp"

namespace ofu {

enum class NoiseKind { ScaledRademacher, TruncatedGaussian, ScaledUniform };

inline std::string_view to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::ScaledRademacher: return "scaled_rademacher";
        case NoiseKind::TruncatedGaussian: return "truncated_gaussian";
        case NoiseKind::ScaledUniform: return "scaled_uniform";
    }
    return "?";
}

inline NoiseKind noise_kind_from_string(std::string_view s) {
    if (s == "scaled_rademacher") return NoiseKind::ScaledRademacher;
    if (s == "truncated_gaussian") return NoiseKind::TruncatedGaussian;
    if (s == "scaled_uniform") return NoiseKind::ScaledUniform;
    throw ParameterError("unknown noise kind '" + std::string(s) + "'");
}

/// Zero-mean i.i.d. disturbance law with ||w|| <= w_bound almost surely and
/// E[w w^T] = sigma_lower^2 I (all three families are isotropic).
struct NoiseModel {
    NoiseKind kind = NoiseKind::ScaledRademacher;
    int dim = 1;
    double w_bound = 1.0;
    double base_sigma = 0.0;  // TruncatedGaussian only
    double sigma_lower = 0.0;

    static NoiseModel make(NoiseKind kind, int dim, double w_bound, double base_sigma = 0.0);

    bool operator==(const NoiseModel&) const = default;
};

/// Second-moment root of a truncated isotropic Gaussian:
/// E[w_i^2] = s^2 P(chi2_{d+2} <= c) / P(chi2_d <= c), c = W^2 / s^2.
inline double truncated_gaussian_sigma_lower(int dim, double w_bound, double base_sigma) {
    const double half_c = 0.5 * (w_bound * w_bound) / (base_sigma * base_sigma);
    const double d = static_cast<double>(dim);
    const double ratio = boost::math::gamma_p(0.5 * d + 1.0, half_c) / boost::math::gamma_p(0.5 * d, half_c);
    return base_sigma * std::sqrt(ratio);
}

inline NoiseModel NoiseModel::make(NoiseKind kind, int dim, double w_bound, double base_sigma) {
    if (dim < 1) throw ParameterError("noise dimension must be >= 1");
    if (!(w_bound > 0.0)) throw ParameterError("noise bound W must be > 0");
    NoiseModel m;
    m.kind = kind;
    m.dim = dim;
    m.w_bound = w_bound;
    const double d = static_cast<double>(dim);
    switch (kind) {
        case NoiseKind::ScaledRademacher:
            m.sigma_lower = w_bound / std::sqrt(d);
            break;
        case NoiseKind::ScaledUniform:
            m.sigma_lower = w_bound / std::sqrt(3.0 * d);
            break;
        case NoiseKind::TruncatedGaussian:
            m.base_sigma = base_sigma > 0.0 ? base_sigma : w_bound / std::sqrt(d);
            m.sigma_lower = truncated_gaussian_sigma_lower(dim, w_bound, m.base_sigma);
            break;
    }
    return m;
}

inline VectorXd sample_noise(const NoiseModel& model, RngStream& rng) {
    const double d = static_cast<double>(model.dim);
    VectorXd w(model.dim);
    switch (model.kind) {
        case NoiseKind::ScaledRademacher: {
            const double scale = model.w_bound / std::sqrt(d);
            for (int i = 0; i < model.dim; ++i) w(i) = scale * rng.rademacher();
            break;
        }
        case NoiseKind::ScaledUniform: {
            const double scale = model.w_bound / std::sqrt(d);
            for (int i = 0; i < model.dim; ++i) w(i) = rng.uniform(-scale, scale);
            break;
        }
        case NoiseKind::TruncatedGaussian: {
            // Rejection keeps the law symmetric, hence zero mean.
            do {
                for (int i = 0; i < model.dim; ++i) w(i) = model.base_sigma * rng.normal();
            } while (w.norm() > model.w_bound);
            break;
        }
    }
    return w;
}

/// The true plant x_{t+1} = A x_t + B u_t + w_t with its stability certificate.
struct SystemSpec {
    MatrixXd a_star;
    MatrixXd b_star;
    double kappa = 1.0;
    double gamma = 1.0;
    double w_bound = 1.0;
    double r_b = 1.0;
    NoiseModel noise;

    int d_x() const { return static_cast<int>(a_star.rows()); }
    int d_u() const { return static_cast<int>(b_star.cols()); }
};

/// True iff ||a^k|| <= kappa (1 - gamma)^k for k = 1..k_check. A relative
/// slack of 1e-9 absorbs rounding in the matrix powers.
inline bool verify_strong_stability(const MatrixXd& a, double kappa, double gamma, int k_check) {
    require_dims(a.rows() == a.cols(), "verify_strong_stability: matrix must be square");
    if (k_check < 1) throw ParameterError("verify_strong_stability: k_check must be >= 1");
    MatrixXd power = a;
    double bound = kappa;
    for (int k = 1; k <= k_check; ++k) {
        bound *= (1.0 - gamma);
        if (operator_norm(power) > bound * (1.0 + 1e-9) + 1e-300) return false;
        power = power * a;
    }
    return true;
}

/// A = Q L Q^{-1} with |L_ii| <= 1 - gamma and cond(Q) <= kappa; ||B|| = r_b.
inline SystemSpec make_strongly_stable_system(int d_x, int d_u, double kappa, double gamma, double r_b,
                                              RngStream& rng, const NoiseModel& noise) {
    if (!(kappa >= 1.0)) throw ParameterError("kappa must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ParameterError("gamma must lie in (0, 1]");
    if (!(r_b > 0.0)) throw ParameterError("r_b must be > 0");
    if (d_x < 1 || d_u < 1) throw ParameterError("dimensions must be >= 1");
    require_dims(noise.dim == d_x, "make_strongly_stable_system: noise dimension must equal d_x");

    const double rho = 1.0 - gamma;
    VectorXd l(d_x);
    for (int i = 0; i < d_x; ++i) l(i) = rng.uniform(-rho, rho);

    VectorXd sv(d_x);
    for (int i = 0; i < d_x; ++i) sv(i) = rng.uniform(1.0, kappa);
    sv(0) = 1.0;  // pins the smallest singular value so cond(Q) = max(sv) <= kappa
    const MatrixXd u = random_orthogonal(d_x, rng);
    const MatrixXd v = random_orthogonal(d_x, rng);
    const MatrixXd q = u * sv.asDiagonal() * v.transpose();
    const MatrixXd q_inv = v * sv.cwiseInverse().asDiagonal() * u.transpose();

    SystemSpec sys;
    sys.a_star = q * l.asDiagonal() * q_inv;
    if (rho == 0.0) sys.a_star.setZero();

    MatrixXd b = gaussian_matrix(d_x, d_u, rng);
    double bn = operator_norm(b);
    while (bn == 0.0) {
        b = gaussian_matrix(d_x, d_u, rng);
        bn = operator_norm(b);
    }
    b *= r_b / bn;
    if (operator_norm(b) > r_b) b *= (1.0 - 4 * std::numeric_limits<double>::epsilon());
    sys.b_star = b;
    sys.kappa = kappa;
    sys.gamma = gamma;
    sys.w_bound = noise.w_bound;
    sys.r_b = r_b;
    sys.noise = noise;
    return sys;
}

inline SystemSpec make_strongly_stable_system(int d_x, int d_u, double kappa, double gamma, double r_b,
                                              RngStream& rng) {
    return make_strongly_stable_system(d_x, d_u, kappa, gamma, r_b, rng,
                                       NoiseModel::make(NoiseKind::ScaledRademacher, d_x, 1.0));
}

inline VectorXd step(const SystemSpec& sys, const VectorXd& x, const VectorXd& u, const VectorXd& w) {
    require_dims(x.size() == sys.a_star.cols() && u.size() == sys.b_star.cols() && w.size() == sys.a_star.rows(),
                 "step: dimension mismatch");
    return sys.a_star * x + sys.b_star * u + w;
}

}  // namespace ofu
