#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "ofu/bench.hpp"
#include "ofu/config.hpp"
#include "ofu/io.hpp"

namespace ofu {

/// Stream of cell (T, seed index): every algorithm in the cell shares it and
/// therefore faces the same disturbance and cost realization.
inline RngStream cell_stream(const ExperimentConfig& c, long horizon, int seed) {
    return RngStream(c.seed, (static_cast<std::uint64_t>(horizon) << 20) | static_cast<std::uint64_t>(seed));
}

struct InvariantViolation {
    std::string algo;
    long horizon = 0;
    int seed = 0;
    std::string what;
};

struct CellOutput {
    std::vector<SummaryRow> rows;
    std::vector<InvariantViolation> violations;
    std::vector<std::pair<std::string, double>> timings;  // (algo, ms)
};

struct SuiteOptions {
    bool write_runs = true;       // one CSV per run under <out>/runs
    bool record_wallclock = false;  // real timings into the summary (breaks byte-identity)
};

struct SuiteResult {
    std::vector<SummaryRow> rows;
    std::vector<InvariantViolation> violations;
    long failed_cells = 0;
};

inline std::string run_file_name(const std::string& algo, long horizon, int seed) {
    return algo + "_T" + std::to_string(horizon) + "_s" + std::to_string(seed) + ".csv";
}

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline void check_controller_invariants(const RunRecord& r, const SystemSpec& sys, long horizon, int seed,
                                        std::vector<InvariantViolation>& out) {
    const double t = static_cast<double>(horizon);
    if (horizon >= 2 && r.epoch_count() > epoch_count_bound(sys.d_x(), sys.d_u(), r.h, t))
        out.push_back({r.algo, horizon, seed, "epoch count exceeds 2(d_x+d_u)H log T"});
    const int p = regressor_dim(r.h, sys.d_x(), sys.d_u());
    if (horizon >= 2 && r.harmonic_sum() > 5.0 * p * std::log(t))
        out.push_back({r.algo, horizon, seed, "harmonic sum exceeds 5 p log T"});
    for (const auto& e : r.epochs)
        if (horizon >= 2 && e.subepochs - 1 > subepoch_count_bound(t))
            out.push_back({r.algo, horizon, seed, "subepoch count exceeds 2 log T"});
    for (std::size_t i = 1; i < r.rows.size(); ++i)
        if (r.rows[i].epoch < r.rows[i - 1].epoch ||
            (r.rows[i].epoch == r.rows[i - 1].epoch && r.rows[i].subepoch < r.rows[i - 1].subepoch)) {
            out.push_back({r.algo, horizon, seed, "epoch/subepoch ids decreased"});
            break;
        }
}

}  // namespace detail

/// Runs every algorithm of one (T, seed) cell.
inline CellOutput run_cell(const ExperimentConfig& c, const SystemSpec& sys, const ScoInstance* sco_inst,
                           long horizon, int seed, const std::filesystem::path& run_dir, const SuiteOptions& opt) {
    CellOutput out;
    const RngStream stream = cell_stream(c, horizon, seed);
    const auto& algos = c.suite.algorithms;
    const bool want_ofu = std::ranges::find(algos, "ofu") != algos.end();
    const bool want_etc = std::ranges::find(algos, "etc") != algos.end();

    RunRecord ofu_rec, etc_rec, sco_rec;
    double ofu_ms = 0.0, etc_ms = 0.0;
    if (want_ofu || want_etc) {
        const CostFamily cost = make_cost(c.cost, sys.d_x() + sys.d_u());
        const ControllerConfig cfg = resolve_controller(c, sys, horizon);
        if (want_ofu) {
            const auto t0 = std::chrono::steady_clock::now();
            ofu_rec = run_controller(sys, cost, cfg, stream);
            ofu_ms = detail::elapsed_ms(t0);
            detail::check_controller_invariants(ofu_rec, sys, horizon, seed, out.violations);
        }
        if (want_etc) {
            const auto t0 = std::chrono::steady_clock::now();
            etc_rec = baseline_explore_then_commit(sys, cost, cfg, c.controller.explore_fraction, stream);
            etc_ms = detail::elapsed_ms(t0);
        }
        // Both runs share the realization, hence one comparator.
        const RunRecord& ref = want_ofu ? ofu_rec : etc_rec;
        const auto t0 = std::chrono::steady_clock::now();
        const HindsightResult best =
            best_dap_in_hindsight(ref, sys, cost, cfg.h, cfg.r_m, c.controller.hindsight_iterations);
        const auto comparator = run_fixed_policy(sys, cost, best.policy, ref.traces.w, ref.traces.z);
        const double cmp_ms = detail::elapsed_ms(t0);
        if (want_ofu) attach_comparator(ofu_rec, comparator);
        if (want_etc) attach_comparator(etc_rec, comparator);
        ofu_ms += cmp_ms;
        etc_ms += want_ofu ? 0.0 : cmp_ms;
    }

    for (const auto& algo : algos) {
        SummaryRow row;
        row.algo = algo;
        row.horizon = horizon;
        row.seed = static_cast<std::uint64_t>(seed);
        RunRecord* rec = nullptr;
        double ms = 0.0;
        if (algo == "ofu") {
            rec = &ofu_rec;
            ms = ofu_ms;
            row.regret_vs_etc_baseline = want_etc ? ofu_rec.total_cost() - etc_rec.total_cost() : kNaN;
        } else if (algo == "etc") {
            rec = &etc_rec;
            ms = etc_ms;
            row.regret_vs_etc_baseline = 0.0;
        } else {
            const auto t0 = std::chrono::steady_clock::now();
            const ResolvedSco r = resolve_sco(c, *sco_inst, horizon);
            ScoRun run = run_sco(*sco_inst, r.run, stream);
            RngStream oracle = stream.derive(kOracleStream);
            const ScoRegret reg = sco_pseudo_regret(run.actions, *sco_inst, c.sco.mc_samples, oracle);
            attach_regret(run.record, reg);
            ms = detail::elapsed_ms(t0);
            if (run.record.harmonic_sum() > 5.0 * sco_inst->d_a() * std::log(static_cast<double>(horizon)) &&
                horizon >= 2)
                out.violations.push_back({algo, horizon, seed, "harmonic sum exceeds 5 d_a log T"});
            sco_rec = std::move(run.record);
            rec = &sco_rec;
        }
        row.final_regret = rec->final_regret();
        row.epochs = rec->epoch_count();
        row.max_subepochs = rec->max_subepochs();
        row.noise_err_sum = rec->noise_err_sum();
        row.harmonic_sum = rec->harmonic_sum();
        row.wallclock_ms = opt.record_wallclock ? std::round(ms) : 0.0;
        out.timings.emplace_back(algo, ms);
        if (opt.write_runs) write_run_csv(*rec, run_dir / run_file_name(algo, horizon, seed));
        out.rows.push_back(std::move(row));
    }
    return out;
}

/// Executes the (T grid) x (seeds) x (algorithms) suite, one CSV per run plus
/// summary.csv and a timings.csv sidecar under `out_dir`. Cells run in
/// parallel; the summary order is fixed (T, seed, algorithm as listed). A
/// failing cell yields rows carrying the error and the suite continues.
inline SuiteResult run_experiment_suite(const ExperimentConfig& c, const std::filesystem::path& out_dir,
                                        const SuiteOptions& opt = {}) {
    validate(c);
    const bool need_system = std::ranges::any_of(c.suite.algorithms, [](const auto& a) { return a != "sco"; });
    const bool need_sco = std::ranges::find(c.suite.algorithms, "sco") != c.suite.algorithms.end();
    SystemSpec sys;
    if (need_system) sys = make_system(c);
    ScoInstance sco_inst;
    if (need_sco) sco_inst = make_sco_instance(c);

    struct Cell {
        long horizon;
        int seed;
    };
    std::vector<Cell> cells;
    for (long t : c.suite.grid)
        for (int s = 0; s < c.suite.seeds; ++s) cells.push_back({t, s});

    const auto run_dir = out_dir / "runs";
    std::vector<CellOutput> outputs(cells.size());
    std::vector<std::string> errors(cells.size());
    parallel_for(cells.size(), c.suite.parallel, [&](std::size_t i) {
        try {
            outputs[i] = run_cell(c, sys, need_sco ? &sco_inst : nullptr, cells[i].horizon, cells[i].seed, run_dir,
                                  opt);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });

    SuiteResult res;
    std::vector<std::pair<std::string, double>> timing_rows;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (!errors[i].empty()) {
            ++res.failed_cells;
            for (const auto& algo : c.suite.algorithms) {
                SummaryRow row;
                row.algo = algo;
                row.horizon = cells[i].horizon;
                row.seed = static_cast<std::uint64_t>(cells[i].seed);
                row.error = errors[i];
                res.rows.push_back(row);
            }
            continue;
        }
        for (auto& r : outputs[i].rows) res.rows.push_back(std::move(r));
        for (auto& v : outputs[i].violations) res.violations.push_back(std::move(v));
    }
    write_summary_csv(res.rows, out_dir / "summary.csv");

    std::ofstream tf = open_for_write(out_dir / "timings.csv");
    tf << "algo,T,seed,wallclock_ms,error\n";
    for (std::size_t i = 0; i < cells.size(); ++i) {
        for (const auto& [algo, ms] : outputs[i].timings)
            tf << algo << ',' << cells[i].horizon << ',' << cells[i].seed << ',' << format_real(std::round(ms))
               << ",\n";
        if (!errors[i].empty()) {
            std::string e = errors[i];
            std::ranges::replace(e, ',', ';');
            std::ranges::replace(e, '\n', ' ');
            tf << "*," << cells[i].horizon << ',' << cells[i].seed << ",nan," << e << '\n';
        }
    }
    return res;
}

/// Median of final_regret per (algo, T), skipping failed rows.
inline double median_final_regret(const std::vector<SummaryRow>& rows, const std::string& algo, long horizon) {
    std::vector<double> v;
    for (const auto& r : rows)
        if (r.algo == algo && r.horizon == horizon && !r.failed() && !std::isnan(r.final_regret))
            v.push_back(r.final_regret);
    if (v.empty()) return kNaN;
    std::ranges::sort(v);
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    require_dims(x.size() == y.size() && x.size() >= 2, "loglog_slope: need at least two matching points");
    double mx = 0, my = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]) / n;
        my += std::log(y[i]) / n;
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

}  // namespace ofu
