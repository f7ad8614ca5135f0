#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <utility>

#include "ofu/errors.hpp"
#include "ofu/linalg.hpp"
#include "ofu/rng.hpp"

namespace ofu {

enum class CostKind { NormTarget, HuberQuadratic, RandomLinear };

inline std::string_view to_string(CostKind k) {
    switch (k) {
        case CostKind::NormTarget: return "norm_target";
        case CostKind::HuberQuadratic: return "huber_quadratic";
        case CostKind::RandomLinear: return "random_linear";
    }
    return "?";
}

inline CostKind cost_kind_from_string(std::string_view s) {
    if (s == "norm_target") return CostKind::NormTarget;
    if (s == "huber_quadratic") return CostKind::HuberQuadratic;
    if (s == "random_linear") return CostKind::RandomLinear;
    throw ParameterError("unknown cost family '" + std::string(s) + "'");
}

/// Stochastic cost c(p; z) over points p in R^dim, convex and 1-Lipschitz in p.
///
/// Only the first `active` coordinates of p enter the cost (active = dim by
/// default), so a state-only cost over p = (x, u) uses active = d_x.
///  - NormTarget:     c = ||p_a - z||,                 z ~ center + Unif(ball(radius))
///  - HuberQuadratic: c = sum_i huber_k(p_a,i - z_i),  k = knee / sqrt(active), same z law
///  - RandomLinear:   c = <z, p_a>,                    z ~ center + Unif(ball(radius)), ||center|| + radius <= 1
struct CostFamily {
    CostKind kind = CostKind::NormTarget;
    int dim = 1;
    int active = 1;
    double radius = 0.0;
    double knee = 1.0;
    VectorXd center;

    /// Bound on |c(p; z) - E c(p; z')|. For RandomLinear it depends on ||p||,
    /// hence the working radius.
    double sigma_c(double working_radius = 1.0) const {
        if (kind == CostKind::RandomLinear) return radius * working_radius;
        return 2.0 * radius;
    }

    double coordinate_knee() const { return knee / std::sqrt(static_cast<double>(active)); }

    bool operator==(const CostFamily& o) const {
        return kind == o.kind && dim == o.dim && active == o.active && radius == o.radius && knee == o.knee &&
               center.size() == o.center.size() && center == o.center;
    }
};

inline CostFamily make_cost_family(CostKind kind, int dim, double radius, VectorXd center = {}, double knee = 1.0,
                                   int active = 0) {
    if (dim < 1) throw ParameterError("cost dimension must be >= 1");
    if (active <= 0) active = dim;
    if (active > dim) throw ParameterError("active cost dimensions exceed point dimension");
    if (!(radius >= 0.0)) throw ParameterError("cost radius must be >= 0");
    if (center.size() == 0) center = VectorXd::Zero(active);
    require_dims(center.size() == active, "cost center must have `active` entries");
    if (kind == CostKind::HuberQuadratic && !(knee > 0.0 && knee <= 1.0))
        throw ParameterError("huber knee must lie in (0, 1] for a 1-Lipschitz cost");
    if (kind == CostKind::RandomLinear && center.norm() + radius > 1.0 + 1e-12)
        throw ParameterError("random_linear requires ||center|| + radius <= 1");
    CostFamily f;
    f.kind = kind;
    f.dim = dim;
    f.active = active;
    f.radius = radius;
    f.knee = knee;
    f.center = std::move(center);
    return f;
}

/// One realization z_t of the cost randomness.
struct CostSample {
    VectorXd z;
};

inline CostSample draw_cost_sample(const CostFamily& f, RngStream& rng) {
    return CostSample{f.center + uniform_in_ball(f.active, f.radius, rng)};
}

/// Cost value and one subgradient at p; `grad` must have size f.dim.
inline double value_and_subgradient(const CostFamily& f, const CostSample& s, const Eigen::Ref<const VectorXd>& p,
                                    Eigen::Ref<VectorXd> grad) {
    const int a = f.active;
    grad.setZero();
    switch (f.kind) {
        case CostKind::NormTarget: {
            double sq = 0.0;
            for (int i = 0; i < a; ++i) {
                const double d = p(i) - s.z(i);
                sq += d * d;
            }
            const double n = std::sqrt(sq);
            if (n > 0.0)
                for (int i = 0; i < a; ++i) grad(i) = (p(i) - s.z(i)) / n;
            return n;
        }
        case CostKind::HuberQuadratic: {
            const double k = f.coordinate_knee();
            double v = 0.0;
            for (int i = 0; i < a; ++i) {
                const double d = p(i) - s.z(i);
                if (std::abs(d) <= k) {
                    v += 0.5 * d * d;
                    grad(i) = d;
                } else {
                    v += k * (std::abs(d) - 0.5 * k);
                    grad(i) = d > 0 ? k : -k;
                }
            }
            return v;
        }
        case CostKind::RandomLinear: {
            double v = 0.0;
            for (int i = 0; i < a; ++i) {
                v += s.z(i) * p(i);
                grad(i) = s.z(i);
            }
            return v;
        }
    }
    return 0.0;
}

inline double eval(const CostFamily& f, const CostSample& s, const Eigen::Ref<const VectorXd>& p) {
    require_dims(p.size() == f.dim && s.z.size() == f.active, "cost eval: dimension mismatch");
    VectorXd g(f.dim);
    return value_and_subgradient(f, s, p, g);
}

inline VectorXd join_point(const VectorXd& x, const VectorXd& u) {
    VectorXd p(x.size() + u.size());
    p << x, u;
    return p;
}

inline double eval(const CostFamily& f, const CostSample& s, const VectorXd& x, const VectorXd& u) {
    require_dims(x.size() + u.size() == f.dim, "cost eval: dimension mismatch");
    return eval(f, s, join_point(x, u));
}

inline VectorXd subgradient(const CostFamily& f, const CostSample& s, const Eigen::Ref<const VectorXd>& p) {
    require_dims(p.size() == f.dim && s.z.size() == f.active, "cost subgradient: dimension mismatch");
    VectorXd g(f.dim);
    value_and_subgradient(f, s, p, g);
    return g;
}

/// Subgradient split into its state and action parts.
inline std::pair<VectorXd, VectorXd> subgradient(const CostFamily& f, const CostSample& s, const VectorXd& x,
                                                 const VectorXd& u) {
    const VectorXd g = subgradient(f, s, join_point(x, u));
    return {g.head(x.size()), g.tail(u.size())};
}

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

inline McEstimate expected_cost_mc(const CostFamily& f, const Eigen::Ref<const VectorXd>& p, long n_samples,
                                   RngStream& rng) {
    if (n_samples < 1) throw ParameterError("expected_cost_mc: n_samples must be >= 1");
    require_dims(p.size() == f.dim, "expected_cost_mc: dimension mismatch");
    VectorXd g(f.dim);
    double mean = 0.0, m2 = 0.0;
    for (long i = 0; i < n_samples; ++i) {
        const double v = value_and_subgradient(f, draw_cost_sample(f, rng), p, g);
        const double delta = v - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (v - mean);
    }
    const double var = n_samples > 1 ? m2 / static_cast<double>(n_samples - 1) : 0.0;
    return {mean, std::sqrt(var / static_cast<double>(n_samples))};
}

inline McEstimate expected_cost_mc(const CostFamily& f, const VectorXd& x, const VectorXd& u, long n_samples,
                                   RngStream& rng) {
    return expected_cost_mc(f, join_point(x, u), n_samples, rng);
}

}  // namespace ofu
