// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when
// every selected criterion passes. Tolerances are the constants below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ofu/ofu.hpp"

using namespace ofu;

namespace {

constexpr double kSlopeLow = 0.35;
constexpr double kSlopeHigh = 0.75;
constexpr double kScoSuiteMinutes = 10.0;
constexpr double kRelaxationTol = 1e-3;
constexpr int kRelaxationCases = 20;
constexpr int kSandwichRuns = 200;
constexpr long kSandwichRounds = 500;
constexpr long kSandwichProbes = 50;
constexpr long kSandwichMc = 2000;
constexpr int kDisturbanceRuns = 100;
constexpr long kDisturbanceHorizon = 256;
constexpr double kDisturbanceMinRate = 0.9;
constexpr int kRidgeRuns = 200;
constexpr double kRidgeMaxRate = 0.1;
constexpr int kIdentityCases = 200;
constexpr double kIdentityTol = 1e-12;

struct Verdict {
    std::string name;
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

// Harmonic and epoch checks accumulate over every run the acceptance makes.
struct RunLedger {
    long harmonic_runs = 0;
    long harmonic_violations = 0;
    long epoch_runs = 0;
    long epoch_violations = 0;
    std::vector<std::string> notes;

    void absorb(const SuiteResult& res) {
        for (const auto& r : res.rows) {
            if (r.failed()) continue;
            ++harmonic_runs;
            if (r.algo == "ofu") ++epoch_runs;
        }
        for (const auto& v : res.violations) {
            const bool harmonic = v.what.find("harmonic") != std::string::npos;
            (harmonic ? harmonic_violations : epoch_violations) += 1;
            notes.push_back(v.algo + " T=" + std::to_string(v.horizon) + " seed=" + std::to_string(v.seed) + ": " +
                            v.what);
        }
    }
};

struct Context {
    std::filesystem::path configs;
    std::filesystem::path out;
    RunLedger ledger;
};

// ---------------------------------------------------------------------------

Verdict sco_scaling(Context& ctx) {
    const ExperimentConfig c = parse_config(ctx.configs / "sco_scaling.json");
    const auto t0 = std::chrono::steady_clock::now();
    const SuiteResult res = run_experiment_suite(c, ctx.out / "sco_scaling");
    const double minutes = seconds_since(t0) / 60.0;
    ctx.ledger.absorb(res);

    std::vector<double> x, y;
    std::string medians;
    bool per_round_decreasing = true, monotone = true;
    double prev_rate = std::numeric_limits<double>::infinity(), prev = -1.0;
    for (long t : c.suite.grid) {
        const double m = median_final_regret(res.rows, "sco", t);
        x.push_back(static_cast<double>(t));
        y.push_back(m);
        medians += fmt("%s%ld:%.3g", medians.empty() ? "" : " ", t, m);
        per_round_decreasing = per_round_decreasing && m / static_cast<double>(t) < prev_rate;
        monotone = monotone && m > prev;
        prev_rate = m / static_cast<double>(t);
        prev = m;
    }
    const bool finite = std::ranges::all_of(y, [](double v) { return std::isfinite(v) && v > 0.0; });
    const double slope = finite ? loglog_slope(x, y) : kNaN;
    const bool rows_ok = res.rows.size() == c.suite.grid.size() * static_cast<std::size_t>(c.suite.seeds) &&
                         res.failed_cells == 0;
    const bool pass = finite && rows_ok && slope >= kSlopeLow && slope <= kSlopeHigh && minutes <= kScoSuiteMinutes;
    return {"sco_sqrt_t_scaling", pass,
            fmt("slope=%.3f in [%.2f, %.2f]; medians {%s}; regret/T decreasing=%s; medians monotone=%s; rows=%zu; "
                "alpha_scale=%g; %.1f min (limit %.0f)",
                slope, kSlopeLow, kSlopeHigh, medians.c_str(), per_round_decreasing ? "yes" : "no",
                monotone ? "yes" : "no", res.rows.size(), c.sco.alpha_scale, minutes, kScoSuiteMinutes)};
}

Verdict relaxation_equivalence(Context&) {
    RngStream rng(1, 0x0AC1E);
    const SolverBudget budget{4000, 4, 32, 0};
    double worst_dap = 0.0, worst_sco = 0.0;
    int bad = 0;
    for (int i = 0; i < kRelaxationCases; ++i) {
        const double g = check_dap_relaxation(random_dap_problem(rng), budget).gap();
        worst_dap = std::max(worst_dap, g);
        bad += g > kRelaxationTol;
    }
    for (int i = 0; i < kRelaxationCases; ++i) {
        const double g = check_sco_relaxation(random_sco_case(rng), budget).gap();
        worst_sco = std::max(worst_sco, g);
        bad += g > kRelaxationTol;
    }
    return {"relaxation_vs_brute_force", bad == 0,
            fmt("%d+%d instances; worst gap dap=%.2e sco=%.2e (tol %.0e); %d beyond", kRelaxationCases,
                kRelaxationCases, worst_dap, worst_sco, kRelaxationTol, bad)};
}

// Sandwich and ridge certificate share the same 200 seeded 500-round runs.
struct ScoBatch {
    long confident = 0;
    long sandwich_violations = 0;
    long ridge_violations = 0;
    double worst_lower = std::numeric_limits<double>::infinity();
    double worst_upper = std::numeric_limits<double>::infinity();
    double ridge_bound = 0.0;
    double ridge_worst = 0.0;
    long harmonic_violations = 0;
};

ScoBatch sco_batch(int runs) {
    ScoBatch b;
    const double w = 1.0, r_a = 1.0, r_q = 1.0, delta = 0.1;
    const ScoParameters par =
        sco_parameter_values(2, 2, w, r_a, r_q, static_cast<double>(kSandwichRounds), delta);
    b.ridge_bound = ridge_error_bound(w, 2, r_a, r_q, static_cast<double>(kSandwichRounds), delta);
    for (int i = 0; i < runs; ++i) {
        RngStream inst_rng(0xACCE, static_cast<std::uint64_t>(i));
        VectorXd center(2);
        center << inst_rng.uniform(-0.3, 0.3), inst_rng.uniform(-0.3, 0.3);
        const ScoInstance inst =
            make_sco_instance(2, 2, r_a, r_q, NoiseModel::make(NoiseKind::ScaledRademacher, 2, w),
                              make_cost_family(CostKind::NormTarget, 2, 0.5, center), inst_rng);
        ScoRunConfig cfg;
        cfg.horizon = kSandwichRounds;
        cfg.alpha = par.alpha;
        cfg.lambda = par.lambda;
        cfg.budget = {50, 1, 32, 100};
        cfg.track_ridge_error = true;
        const RngStream stream(0xACCE + 1, static_cast<std::uint64_t>(i));
        const ScoRun run = run_sco(inst, cfg, stream);
        if (run.record.harmonic_sum() > 5.0 * 2 * std::log(static_cast<double>(kSandwichRounds)))
            ++b.harmonic_violations;

        const double worst = *std::ranges::max_element(run.ridge_errors);
        b.ridge_worst = std::max(b.ridge_worst, worst);
        b.ridge_violations += worst > b.ridge_bound;

        RngStream probe_rng = stream.derive(kOracleStream);
        const auto probes = probe_actions(inst.set, kSandwichProbes, probe_rng);
        const SandwichReport rep = sandwich_check(run.final_state, inst, par.alpha, probes, kSandwichMc, probe_rng);
        if (!rep.confidence_holds) continue;
        ++b.confident;
        b.sandwich_violations += rep.lower_violations + rep.upper_violations;
        b.worst_lower = std::min(b.worst_lower, rep.worst_lower_slack);
        b.worst_upper = std::min(b.worst_upper, rep.worst_upper_slack);
    }
    return b;
}

std::vector<Verdict> sandwich_and_ridge(Context& ctx) {
    const ScoBatch b = sco_batch(std::max(kSandwichRuns, kRidgeRuns));
    ctx.ledger.harmonic_runs += std::max(kSandwichRuns, kRidgeRuns);
    ctx.ledger.harmonic_violations += b.harmonic_violations;
    const double rate = static_cast<double>(b.ridge_violations) / kRidgeRuns;
    return {
        {"optimism_sandwich", b.confident > 0 && b.sandwich_violations == 0,
         fmt("%ld of %d runs in the confidence event; %ld probes checked; violations=%ld; min slack lower=%.3g "
             "upper=%.3g",
             b.confident, kSandwichRuns, b.confident * kSandwichProbes, b.sandwich_violations, b.worst_lower,
             b.worst_upper)},
        {"ridge_certificate", rate <= kRidgeMaxRate,
         fmt("%ld of %d runs exceed %.3f at some t (rate %.3f, limit %.2f); worst %.3f", b.ridge_violations,
             kRidgeRuns, b.ridge_bound, rate, kRidgeMaxRate, b.ridge_worst)},
    };
}

Verdict disturbance_growth(Context& ctx) {
    std::string detail;
    bool pass = true;
    for (int d_x : {1, 2}) {
        ExperimentConfig c = parse_config(ctx.configs / "disturbance.json");
        c.system.d_x = d_x;
        validate(c);
        const SystemSpec sys = make_system(c);
        const CostFamily cost = make_cost(c.cost, sys.d_x() + sys.d_u());
        const ControllerConfig cfg = resolve_controller(c, sys, kDisturbanceHorizon);
        const double cw = disturbance_error_bound(sys.d_x(), sys.d_u(), sys.kappa, sys.w_bound, cfg.r_m, sys.r_b,
                                                  sys.gamma, cfg.h, static_cast<double>(kDisturbanceHorizon),
                                                  c.controller.delta);
        int within = 0;
        double worst = 0.0;
        for (int s = 0; s < kDisturbanceRuns; ++s) {
            RunRecord rec = run_controller(sys, cost, cfg, cell_stream(c, kDisturbanceHorizon, s));
            std::vector<InvariantViolation> v;
            detail::check_controller_invariants(rec, sys, kDisturbanceHorizon, s, v);
            ctx.ledger.harmonic_runs += 1;
            ctx.ledger.epoch_runs += 1;
            for (const auto& e : v) {
                const bool harmonic = e.what.find("harmonic") != std::string::npos;
                (harmonic ? ctx.ledger.harmonic_violations : ctx.ledger.epoch_violations) += 1;
                ctx.ledger.notes.push_back("disturbance run d_x=" + std::to_string(d_x) + ": " + e.what);
            }
            const double err = rec.noise_err_sum();
            worst = std::max(worst, err);
            within += err <= cw * cw;
        }
        const double rate = static_cast<double>(within) / kDisturbanceRuns;
        pass = pass && rate >= kDisturbanceMinRate;
        detail += fmt("%sd_x=%d: %d/%d runs with sum ||w-w_hat||^2 <= C_w^2=%.4g (worst %.4g, H=%d, lambda_w=%.4g)",
                      detail.empty() ? "" : "; ", d_x, within, kDisturbanceRuns, cw * cw, worst, cfg.h, cfg.lambda_w);
    }
    return {"disturbance_estimation_growth", pass, detail + fmt("; need rate >= %.2f", kDisturbanceMinRate)};
}

DapPolicy random_policy(int d_u, int d_x, int h, double r_m, RngStream& rng) {
    DapPolicy p{gaussian_matrix(d_u, h * d_x, rng), h, r_m};
    p.m *= rng.uniform() * r_m / p.m.norm();
    return p;
}

Verdict dap_identities(Context&) {
    RngStream rng(0xDA9, 1);
    int op_cases = 0, tr_cases = 0;
    double op_worst = 0.0, tr_excess = -std::numeric_limits<double>::infinity();
    while (op_cases < kIdentityCases) {
        const int h = 1 + static_cast<int>(rng.index(5));
        const int d_x = 1 + static_cast<int>(rng.index(3));
        const int d_u = 1 + static_cast<int>(rng.index(3));
        const DapPolicy pol = random_policy(d_u, d_x, h, 2.0, rng);
        std::vector<VectorXd> w;
        for (int i = 0; i < 2 * h - 1; ++i) w.push_back(uniform_in_ball(d_x, 1.0, rng));
        const VectorXd via_p = build_p_matrix(pol, d_x) * stack_window(w);
        op_worst = std::max(op_worst, (dap_rho(pol, w) - via_p).cwiseAbs().maxCoeff());
        ++op_cases;
    }
    // x_t - x_hat_t(M | Psi*) <= kappa (1 - gamma)^H max_s ||x_s|| along the closed loop.
    while (tr_cases < kIdentityCases) {
        const int d_x = 1 + static_cast<int>(rng.index(3));
        const int d_u = 1 + static_cast<int>(rng.index(2));
        const double kappa = 1.0 + rng.uniform(), gamma = 0.2 + 0.5 * rng.uniform();
        const int h = 2 + static_cast<int>(rng.index(4));
        const SystemSpec sys = make_strongly_stable_system(d_x, d_u, kappa, gamma, 1.0, rng,
                                                           NoiseModel::make(NoiseKind::ScaledRademacher, d_x, 1.0));
        const UnrolledModel psi = exact_unrolled_model(sys, h);
        const DapPolicy pol = random_policy(d_u, d_x, h, 1.0, rng);
        const int t_end = 30;
        std::vector<VectorXd> w(static_cast<std::size_t>(t_end + 2 * h), VectorXd::Zero(d_x));
        auto idx = [&](int s) { return static_cast<std::size_t>(s + 2 * h - 1); };
        for (int s = 1; s <= t_end; ++s) w[idx(s)] = sample_noise(sys.noise, rng);
        std::vector<VectorXd> x(static_cast<std::size_t>(t_end + 2), VectorXd::Zero(d_x));
        double max_x = 0.0;
        for (int t = 1; t <= t_end; ++t) {
            const VectorXd u = dap_action(pol, NoiseWindow(w).subspan(idx(t - h), h));
            x[static_cast<std::size_t>(t + 1)] = step(sys, x[static_cast<std::size_t>(t)], u, w[idx(t)]);
            max_x = std::max(max_x, x[static_cast<std::size_t>(t)].norm());
        }
        for (int t = 2; t <= t_end && tr_cases < kIdentityCases; t += 7) {
            const VectorXd sur = surrogate_state(pol, psi, NoiseWindow(w).subspan(idx(t - 2 * h), 2 * h));
            const double bound = kappa * std::pow(1.0 - gamma, h) * max_x;
            tr_excess = std::max(tr_excess, (x[static_cast<std::size_t>(t)] - sur).norm() - bound);
            ++tr_cases;
        }
    }
    const bool pass = op_worst <= kIdentityTol && tr_excess <= kIdentityTol;
    return {"dap_operator_and_truncation_identities", pass,
            fmt("P(M) identity %d cases, worst |rho - P(M) w| = %.2e; truncation %d cases, worst excess over "
                "kappa(1-gamma)^H max||x|| = %.2e (tol %.0e)",
                op_cases, op_worst, tr_cases, tr_excess, kIdentityTol)};
}

Verdict ofu_vs_etc(Context& ctx) {
    const ExperimentConfig c = parse_config(ctx.configs / "ofu_vs_etc.json");
    const auto t0 = std::chrono::steady_clock::now();
    const SuiteResult res = run_experiment_suite(c, ctx.out / "ofu_vs_etc");
    const double minutes = seconds_since(t0) / 60.0;
    ctx.ledger.absorb(res);
    const long t = c.suite.grid.back();
    const double ofu = median_final_regret(res.rows, "ofu", t);
    const double etc = median_final_regret(res.rows, "etc", t);
    int wins = 0;
    for (std::size_t i = 0; i + 1 < res.rows.size(); ++i)
        if (res.rows[i].algo == "ofu" && res.rows[i + 1].algo == "etc" && res.rows[i].horizon == t)
            wins += res.rows[i].regret_vs_etc_baseline < 0.0;
    return {"ofu_beats_explore_then_commit", res.failed_cells == 0 && ofu < etc,
            fmt("T=%ld, %d seeds: median regret ofu=%.4g etc=%.4g; ofu cheaper on %d seeds; alpha_scale=%g; %.1f min",
                t, c.suite.seeds, ofu, etc, wins, c.controller.alpha_scale, minutes)};
}

Verdict harmonic(const Context& ctx) {
    return {"harmonic_sum_bounds", ctx.ledger.harmonic_runs > 0 && ctx.ledger.harmonic_violations == 0,
            fmt("%ld runs checked (sco: 5 d_a log T, controller: 5 p log T); violations=%ld",
                ctx.ledger.harmonic_runs, ctx.ledger.harmonic_violations)};
}

Verdict epochs(const Context& ctx) {
    return {"epoch_count_bounds", ctx.ledger.epoch_runs > 0 && ctx.ledger.epoch_violations == 0,
            fmt("%ld controller runs checked (N <= 2(d_x+d_u)H log T, n_i <= 2 log T); violations=%ld",
                ctx.ledger.epoch_runs, ctx.ledger.epoch_violations)};
}

Verdict determinism(Context& ctx) {
    ExperimentConfig c = parse_config(ctx.configs / "determinism.json");
    const auto a = ctx.out / "determinism_a", b = ctx.out / "determinism_b";
    std::filesystem::remove_all(a);
    std::filesystem::remove_all(b);
    run_experiment_suite(c, a);
    c.suite.parallel = 2;
    run_experiment_suite(c, b);
    const std::string sa = slurp(a / "summary.csv"), sb = slurp(b / "summary.csv");
    const long lines = std::ranges::count(sa, '\n');
    return {"byte_identical_rerun", !sa.empty() && sa == sb,
            fmt("summary.csv %zu bytes, %ld lines, identical=%s (second run with 2 workers)", sa.size(), lines,
                sa == sb ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    Context ctx;
    std::string configs = OFU_CONFIG_DIR;
    std::string out = "acceptance_out";
    std::vector<std::string> only;
    app.add_option("--configs", configs, "directory holding the acceptance configs");
    app.add_option("--out", out, "scratch output directory");
    app.add_option("--only", only, "subset: sco, relaxation, sandwich, disturbance, identities, ofu, determinism")
        ->delimiter(',');
    CLI11_PARSE(app, argc, argv);
    ctx.configs = configs;
    ctx.out = out;
    const std::set<std::string> sel(only.begin(), only.end());
    auto want = [&](const std::string& k) { return sel.empty() || sel.contains(k); };

    std::vector<Verdict> verdicts;
    auto run = [&](const std::string& key, auto&& fn) {
        if (!want(key)) return;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            auto v = fn();
            if constexpr (std::is_same_v<decltype(v), Verdict>)
                verdicts.push_back(std::move(v));
            else
                for (auto& x : v) verdicts.push_back(std::move(x));
        } catch (const std::exception& e) {
            verdicts.push_back({key, false, std::string("threw: ") + e.what()});
        }
        std::fprintf(stderr, "[%s done in %.1f s]\n", key.c_str(), seconds_since(t0));
    };

    run("relaxation", [&] { return relaxation_equivalence(ctx); });
    run("identities", [&] { return dap_identities(ctx); });
    run("sandwich", [&] { return sandwich_and_ridge(ctx); });
    run("disturbance", [&] { return disturbance_growth(ctx); });
    run("determinism", [&] { return determinism(ctx); });
    run("sco", [&] { return sco_scaling(ctx); });
    run("ofu", [&] { return ofu_vs_etc(ctx); });
    if (ctx.ledger.harmonic_runs > 0) verdicts.push_back(harmonic(ctx));
    if (ctx.ledger.epoch_runs > 0) verdicts.push_back(epochs(ctx));

    int failed = 0;
    std::ostringstream report;
    for (const auto& v : verdicts) {
        report << (v.pass ? "PASS " : "FAIL ") << v.name << ": " << v.detail << '\n';
        failed += !v.pass;
    }
    for (const auto& n : ctx.ledger.notes) report << "  invariant: " << n << '\n';
    report << verdicts.size() << " criteria, " << failed << " failed\n";
    std::fputs(report.str().c_str(), stdout);
    std::ofstream(open_for_write(ctx.out / "verdicts.txt")) << report.str();
    return failed == 0 ? 0 : 1;
}
