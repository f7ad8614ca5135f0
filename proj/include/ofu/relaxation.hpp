#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstring>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include "ofu/linalg.hpp"
#include "ofu/parallel.hpp"

// Optimistic minimization by sign/entry decomposition.
//
// The objectives handled here have the form
//     F(x) = sum_i loss_i(x) - beta * ||E(x)||_inf,   x in a convex set,
// where every loss_i is convex and every entry e_k(x) = <g_k, x> + c_k of E is
// affine. Since ||E||_inf = max_{chi, k} chi * e_k, minimizing F is the same as
// minimizing, over all (chi, k), the convex problems
//     F_{chi,k}(x) = sum_i loss_i(x) - beta * chi * e_k(x)
// and keeping the best candidate under F itself.

namespace ofu {

/// Iteration budget for one projected subgradient solve over n samples.
struct SolverBudget {
    int min_iterations = 2000;
    int iterations_per_sample = 4;
    /// Windows up to this size use exact full-batch subgradients; longer
    /// windows use one sample per iteration in a fixed cyclic order.
    int full_batch_max_samples = 32;
    /// Cap on iterations per solve, 0 for none.
    long max_iterations = 0;

    long iterations(std::size_t n) const {
        const long it = std::max<long>(min_iterations, static_cast<long>(iterations_per_sample) * static_cast<long>(n));
        return max_iterations > 0 ? std::min(it, max_iterations) : it;
    }

    bool operator==(const SolverBudget&) const = default;
};

struct SubproblemIndex {
    int chi = 1;  // -1 or +1
    long k = 0;   // linear entry index

    auto operator<=>(const SubproblemIndex&) const = default;
};

struct EntryMap {
    VectorXd grad;
    double constant = 0.0;
};

/// What a model exposes to the decomposition solver.
template <class M>
concept RelaxationModel = requires(const M& m, const VectorXd& x, Eigen::Ref<VectorXd> g, Eigen::Ref<VectorXd> xm,
                                   typename M::Workspace& ws, std::size_t i, long k) {
    typename M::Workspace;
    { m.dim() } -> std::convertible_to<int>;
    { m.samples() } -> std::convertible_to<std::size_t>;
    { m.workspace() } -> std::same_as<typename M::Workspace>;
    { m.sample_grad(i, x, g, 1.0, ws) } -> std::convertible_to<double>;
    { m.loss_sum(x) } -> std::convertible_to<double>;
    { m.entries() } -> std::convertible_to<long>;
    { m.entry_map(k) } -> std::same_as<EntryMap>;
    { m.max_abs_entry(x) } -> std::convertible_to<double>;
    { m.project(xm) };
    { m.step_radius() } -> std::convertible_to<double>;
    { m.bonus_weight() } -> std::convertible_to<double>;
};

template <RelaxationModel Model>
double entry_objective(const Model& model, SubproblemIndex idx, const VectorXd& x) {
    const EntryMap e = model.entry_map(idx.k);
    return model.loss_sum(x) - model.bonus_weight() * idx.chi * (e.grad.dot(x) + e.constant);
}

template <RelaxationModel Model>
VectorXd entry_subgradient(const Model& model, SubproblemIndex idx, const VectorXd& x) {
    auto ws = model.workspace();
    VectorXd g = VectorXd::Zero(model.dim());
    for (std::size_t i = 0; i < model.samples(); ++i) model.sample_grad(i, x, g, 1.0, ws);
    g -= model.bonus_weight() * idx.chi * model.entry_map(idx.k).grad;
    return g;
}

template <RelaxationModel Model>
double full_objective(const Model& model, const VectorXd& x) {
    return model.loss_sum(x) - model.bonus_weight() * model.max_abs_entry(x);
}

namespace detail {

/// Visits 0..n-1 cyclically with a stride coprime to n (a fixed permutation).
class CyclicOrder {
public:
    explicit CyclicOrder(std::size_t n) : n_(n) {
        stride_ = std::max<std::size_t>(1, static_cast<std::size_t>(0.6180339887498949 * static_cast<double>(n)));
        while (std::gcd(stride_, n_) != 1) --stride_;
    }
    std::size_t next() {
        const std::size_t i = pos_;
        pos_ = (pos_ + stride_) % n_;
        return i;
    }

private:
    std::size_t n_;
    std::size_t stride_ = 1;
    std::size_t pos_ = 0;
};

struct NoObserver {
    void operator()(long, const VectorXd&) const {}
};

}  // namespace detail

struct TiltedSolution {
    VectorXd x;
    double last_grad_norm = 0.0;
    long iterations = 0;
};

/// Projected subgradient descent on  sum_i loss_i(x) - <tilt, x>  from x0,
/// step R / (G sqrt(k + 1)) at iteration k with G the running maximum
/// subgradient norm. Returns
/// the averaged iterate; in full-batch mode the best visited iterate is kept
/// instead when it has a lower objective. Full-batch solves run in up to eight
/// phases, each restarting from the best iterate with half the step radius.
template <RelaxationModel Model, class Observer = detail::NoObserver>
TiltedSolution minimize_tilted(const Model& model, const VectorXd& tilt, VectorXd x, const SolverBudget& budget,
                               Observer&& observe = {}) {
    const int dim = model.dim();
    model.project(x);
    const std::size_t n = model.samples();
    const bool full = n <= static_cast<std::size_t>(budget.full_batch_max_samples);
    const long iters = budget.iterations(n);
    double radius = model.step_radius();
    const long phases = full ? std::clamp<long>(iters / 500, 1, 8) : 1;
    const long phase_len = std::max<long>(1, iters / phases);
    long kp = 0;  // iteration within the phase

    auto ws = model.workspace();
    VectorXd g(dim);
    VectorXd avg = x;
    VectorXd best = x;
    double best_value = std::numeric_limits<double>::infinity();
    double max_norm = 0.0;
    double grad_norm = 0.0;
    detail::CyclicOrder order(std::max<std::size_t>(n, 1));

    long k = 0;
    for (; k < iters; ++k, ++kp) {
        if (kp == phase_len && k + phase_len <= iters) {
            x = best;
            radius *= 0.5;
            kp = 0;
        }
        g = -tilt;
        if (full) {
            double value = -tilt.dot(x);
            for (std::size_t i = 0; i < n; ++i) value += model.sample_grad(i, x, g, 1.0, ws);
            if (value < best_value) {
                best_value = value;
                best = x;
            }
        } else {
            model.sample_grad(order.next(), x, g, static_cast<double>(n), ws);
        }
        grad_norm = g.norm();
        max_norm = std::max(max_norm, grad_norm);
        if (max_norm == 0.0) {
            if (full) break;  // zero subgradient: x is optimal
            avg += (x - avg) / static_cast<double>(k + 1);
            continue;
        }
        x.noalias() -= (radius / (std::sqrt(static_cast<double>(kp + 1)) * max_norm)) * g;
        model.project(x);
        avg += (x - avg) / static_cast<double>(k + 2);
        observe(k, x);
    }
    if (full && std::isfinite(best_value)) {
        const double avg_value = model.loss_sum(avg) - tilt.dot(avg);
        if (best_value < avg_value) avg = best;
    }
    return {avg, grad_norm, k};
}

struct SubproblemSolution {
    VectorXd x;
    double value = 0.0;  // fixed-entry objective at x
};

template <RelaxationModel Model>
SubproblemSolution solve_subproblem(const Model& model, SubproblemIndex idx, const SolverBudget& budget,
                                    const VectorXd& x0) {
    const EntryMap e = model.entry_map(idx.k);
    const VectorXd tilt = model.bonus_weight() * idx.chi * e.grad;
    TiltedSolution s = minimize_tilted(model, tilt, x0, budget);
    return {s.x, entry_objective(model, idx, s.x)};
}

struct RelaxationCandidate {
    SubproblemIndex index;  // first (chi, k) sharing this tilt
    VectorXd x;
    double value = 0.0;  // full objective
    long members = 0;    // number of (chi, k) pairs sharing the tilt
    double grad_norm = 0.0;
};

struct RelaxationResult {
    VectorXd x;
    double value = 0.0;
    SubproblemIndex index;
    long subproblems = 0;     // 2m
    long distinct_solves = 0;
    std::vector<RelaxationCandidate> candidates;
};

/// Solves all 2m fixed-(chi, k) problems and returns the candidate with the
/// smallest full objective, ties broken by the smallest (chi, k). Pairs whose
/// tilts coincide exactly (e.g. entries that do not depend on x, where the tilt
/// is zero) share one solve; their candidates are identical.
template <RelaxationModel Model>
RelaxationResult solve_relaxation(const Model& model, const SolverBudget& budget, const VectorXd& x0,
                                  int parallel_width = 1) {
    const long m = model.entries();
    const double beta = model.bonus_weight();

    struct Group {
        SubproblemIndex first;
        VectorXd tilt;
        long members = 0;
    };
    std::vector<Group> groups;
    std::map<std::vector<std::uint64_t>, std::size_t> by_key;
    auto key_of = [](const VectorXd& v) {
        std::vector<std::uint64_t> key(static_cast<std::size_t>(v.size()));
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double d = v(i) == 0.0 ? 0.0 : v(i);  // fold -0.0
            std::memcpy(&key[static_cast<std::size_t>(i)], &d, sizeof d);
        }
        return key;
    };
    for (int chi : {-1, 1}) {
        for (long k = 0; k < m; ++k) {
            const EntryMap e = model.entry_map(k);
            VectorXd tilt = beta * chi * e.grad;
            auto [it, inserted] = by_key.try_emplace(key_of(tilt), groups.size());
            if (inserted) groups.push_back({{chi, k}, std::move(tilt), 0});
            ++groups[it->second].members;
        }
    }

    std::vector<RelaxationCandidate> cands(groups.size());
    parallel_for(groups.size(), parallel_width, [&](std::size_t gi) {
        TiltedSolution s = minimize_tilted(model, groups[gi].tilt, x0, budget);
        cands[gi] = {groups[gi].first, s.x, full_objective(model, s.x), groups[gi].members, s.last_grad_norm};
    });

    RelaxationResult out;
    out.subproblems = 2 * m;
    out.distinct_solves = static_cast<long>(groups.size());
    std::size_t best = 0;
    for (std::size_t gi = 1; gi < cands.size(); ++gi) {
        const auto& c = cands[gi];
        const auto& b = cands[best];
        if (c.value < b.value || (c.value == b.value && c.index < b.index)) best = gi;
    }
    if (!cands.empty()) {
        out.x = cands[best].x;
        out.value = cands[best].value;
        out.index = cands[best].index;
    } else {
        out.x = x0;
        model.project(out.x);
        out.value = full_objective(model, out.x);
    }
    out.candidates = std::move(cands);
    return out;
}

}  // namespace ofu
