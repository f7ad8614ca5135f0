#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ofu/costs.hpp"
#include "ofu/linalg.hpp"

namespace ofu {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Child streams of a run stream: plant noise and cost randomness come from
// fixed children, so two algorithms given the same stream face the same
// (w_t, z_t) realization.
inline constexpr std::uint64_t kNoiseStream = 1;
inline constexpr std::uint64_t kCostStream = 2;
inline constexpr std::uint64_t kPolicyStream = 3;
inline constexpr std::uint64_t kOracleStream = 4;

/// One row per round t.
struct StepRow {
    long t = 0;
    int epoch = 0;
    int subepoch = 0;
    double cost = 0.0;
    double action_norm = 0.0;
    double state_norm = 0.0;
    double noise_err_sq = 0.0;  // ||w_t - w_hat_t||^2
    double logdet_v = 0.0;      // log det V_{t+1}
    double harmonic_term = 0.0; // rho_t^T V_t^{-1} rho_t
    long policy_switches = 0;
    double comparator_cost = kNaN;
    double cum_regret = kNaN;
};

/// Realizations kept for comparator re-simulation. Index t-1 holds round t.
struct RunTraces {
    std::vector<VectorXd> w;
    std::vector<CostSample> z;
    std::vector<VectorXd> x;
    std::vector<VectorXd> u;
};

/// Snapshot taken when an epoch starts.
struct EpochInfo {
    long start = 1;
    MatrixXd psi;
    MatrixXd gram;
    int subepochs = 2;
};

struct RunRecord {
    std::string algo;
    long horizon = 0;
    int h = 0;
    int d_x = 0;
    int d_u = 0;
    std::vector<StepRow> rows;
    RunTraces traces;
    std::vector<EpochInfo> epochs;

    int epoch_count() const { return static_cast<int>(epochs.size()); }

    int max_subepochs() const {
        int m = 0;
        for (const auto& e : epochs) m = std::max(m, e.subepochs);
        return m;
    }

    double total_cost() const {
        double s = 0.0;
        for (const auto& r : rows) s += r.cost;
        return s;
    }

    double noise_err_sum() const {
        double s = 0.0;
        for (const auto& r : rows) s += r.noise_err_sq;
        return s;
    }

    double harmonic_sum() const {
        double s = 0.0;
        for (const auto& r : rows) s += r.harmonic_term;
        return s;
    }

    long policy_switches() const { return rows.empty() ? 0 : rows.back().policy_switches; }

    double final_regret() const { return rows.empty() ? 0.0 : rows.back().cum_regret; }
};

}  // namespace ofu
