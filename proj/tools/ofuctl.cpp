#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ofu/ofu.hpp"

namespace {

using namespace ofu;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInvariant = 3;
constexpr int kExitNumerical = 4;

struct Common {
    std::string config_path;
    std::string out_dir;
    std::optional<int> seeds;
    std::optional<int> parallel;
    std::optional<double> alpha_scale;
    std::string grid;
    std::optional<long> horizon;
    int seed_index = 0;
};

std::vector<long> parse_grid(const std::string& s) {
    std::vector<long> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            const long v = std::stol(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError("--grid", "not a comma-separated list of integers: '" + s + "'");
        }
    }
    return out;
}

ExperimentConfig load(const Common& o) {
    ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : parse_config(o.config_path);
    if (!o.out_dir.empty()) c.output_dir = o.out_dir;
    if (o.seeds) c.suite.seeds = *o.seeds;
    if (o.parallel) c.suite.parallel = *o.parallel;
    if (o.alpha_scale) {
        c.controller.alpha_scale = *o.alpha_scale;
        c.sco.alpha_scale = *o.alpha_scale;
    }
    if (!o.grid.empty()) c.suite.grid = parse_grid(o.grid);
    if (o.horizon) c.controller.horizon = *o.horizon;
    validate(c);
    return c;
}

void print_row(const SummaryRow& r) {
    std::printf("%s T=%ld seed=%llu final_regret=%s epochs=%d max_subepochs=%d noise_err_sum=%s harmonic_sum=%s\n",
                r.algo.c_str(), r.horizon, static_cast<unsigned long long>(r.seed),
                format_real(r.final_regret).c_str(), r.epochs, r.max_subepochs, format_real(r.noise_err_sum).c_str(),
                format_real(r.harmonic_sum).c_str());
}

int report(const SuiteResult& res) {
    for (const auto& r : res.rows) {
        if (r.failed())
            std::fprintf(stderr, "cell %s T=%ld seed=%llu failed: %s\n", r.algo.c_str(), r.horizon,
                         static_cast<unsigned long long>(r.seed), r.error.c_str());
        else
            print_row(r);
    }
    for (const auto& v : res.violations)
        std::fprintf(stderr, "invariant violated: %s T=%ld seed=%d: %s\n", v.algo.c_str(), v.horizon, v.seed,
                     v.what.c_str());
    if (!res.violations.empty()) return kExitInvariant;
    if (res.failed_cells > 0) return kExitNumerical;
    return kExitOk;
}

/// One cell of the given algorithm at T = controller.T.
int cmd_single(const Common& o, const std::string& algo) {
    ExperimentConfig c = load(o);
    c.suite.grid = {c.controller.horizon};
    c.suite.algorithms = {algo};
    c.suite.seeds = o.seed_index + 1;
    const SystemSpec sys = algo == "sco" ? SystemSpec{} : make_system(c);
    const ScoInstance inst = algo == "sco" ? make_sco_instance(c) : ScoInstance{};
    const CellOutput out = run_cell(c, sys, algo == "sco" ? &inst : nullptr, c.controller.horizon, o.seed_index,
                                    std::filesystem::path(c.output_dir) / "runs", SuiteOptions{});
    for (const auto& r : out.rows) print_row(r);
    for (const auto& v : out.violations) std::fprintf(stderr, "invariant violated: %s\n", v.what.c_str());
    std::printf("wrote %s\n",
                (std::filesystem::path(c.output_dir) / "runs" / run_file_name(algo, c.controller.horizon, o.seed_index))
                    .string()
                    .c_str());
    return out.violations.empty() ? kExitOk : kExitInvariant;
}

int cmd_suite(const Common& o) {
    const ExperimentConfig c = load(o);
    const std::filesystem::path out(c.output_dir);
    const SuiteResult res = run_experiment_suite(c, out);
    std::ofstream(out / "config.json") << serialize_config(c);
    const int code = report(res);
    std::printf("wrote %s\n", (out / "summary.csv").string().c_str());
    return code;
}

int cmd_oracle(int cases, std::uint64_t seed, double tol) {
    RngStream rng(seed, 0x0AC1E);
    const SolverBudget budget{4000, 4, 32, 0};
    int bad = 0;
    for (int i = 0; i < cases; ++i) {
        const OptimisticProblem p = random_dap_problem(rng);
        const RelaxationCheck r = check_dap_relaxation(p, budget);
        std::printf("dap case %d relaxation=%s brute_force=%s gap=%.3g\n", i, format_real(r.relaxation).c_str(),
                    format_real(r.brute_force).c_str(), r.gap());
        bad += r.gap() > tol;
    }
    for (int i = 0; i < cases; ++i) {
        const ScoRelaxationCase sc = random_sco_case(rng);
        const RelaxationCheck r = check_sco_relaxation(sc, budget);
        std::printf("sco case %d relaxation=%s brute_force=%s gap=%.3g\n", i, format_real(r.relaxation).c_str(),
                    format_real(r.brute_force).c_str(), r.gap());
        bad += r.gap() > tol;
    }
    std::printf("%d of %d cases beyond tolerance %g\n", bad, 2 * cases, tol);
    return bad == 0 ? kExitOk : kExitInvariant;
}

void add_common(CLI::App* app, Common& o) {
    app->add_option("--config", o.config_path, "JSON experiment config")->check(CLI::ExistingFile);
    app->add_option("--out", o.out_dir, "output directory (overrides output_dir)");
    app->add_option("--seeds", o.seeds, "number of seeds");
    app->add_option("--parallel", o.parallel, "worker threads across cells");
    app->add_option("--alpha-scale", o.alpha_scale, "multiplier on the optimism parameter");
    app->add_option("--grid", o.grid, "comma-separated horizons, e.g. 256,1024,4096,16384");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"OFU control and hidden-transform SCO experiments"};
    app.require_subcommand(1);
    Common o;
    int oracle_cases = 20;
    std::uint64_t oracle_seed = 1;
    double oracle_tol = 1e-3;

    auto* run = app.add_subcommand("run", "single controller run at T = controller.T");
    add_common(run, o);
    run->add_option("--T", o.horizon, "horizon override");
    run->add_option("--seed-index", o.seed_index, "seed index within the config seed");
    auto* sco = app.add_subcommand("sco", "single hidden-transform SCO run at T = controller.T");
    add_common(sco, o);
    sco->add_option("--T", o.horizon, "horizon override");
    sco->add_option("--seed-index", o.seed_index, "seed index within the config seed");
    auto* suite = app.add_subcommand("suite", "T grid x seeds x algorithms");
    add_common(suite, o);
    auto* oracle = app.add_subcommand("oracle", "relaxation vs brute force on random 2-D instances");
    oracle->add_option("--cases", oracle_cases, "instances per problem type");
    oracle->add_option("--seed", oracle_seed, "instance seed");
    oracle->add_option("--tol", oracle_tol, "absolute tolerance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*run) return cmd_single(o, "ofu");
        if (*sco) return cmd_single(o, "sco");
        if (*suite) return cmd_suite(o);
        if (*oracle) return cmd_oracle(oracle_cases, oracle_seed, oracle_tol);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const ParameterError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return kExitOk;
}
