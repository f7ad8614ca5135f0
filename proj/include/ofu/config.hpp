#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ofu/controller.hpp"
#include "ofu/costs.hpp"
#include "ofu/errors.hpp"
#include "ofu/relaxation.hpp"
#include "ofu/sco.hpp"
#include "ofu/system.hpp"

namespace ofu {

struct SystemSection {
    int d_x = 1;
    int d_u = 1;
    double kappa = 1.0;
    double gamma = 0.5;
    double r_b = 1.0;
    NoiseKind noise = NoiseKind::ScaledRademacher;
    double w_bound = 1.0;
    double base_sigma = 0.0;  // truncated Gaussian only; 0 selects W / sqrt(d_x)

    bool operator==(const SystemSection&) const = default;
};

struct CostSection {
    CostKind kind = CostKind::NormTarget;
    double radius = 0.5;
    std::vector<double> center;  // empty selects the origin
    double knee = 1.0;
    int active = 0;  // 0 selects all coordinates

    bool operator==(const CostSection&) const = default;
};

struct ControllerSection {
    long horizon = 1024;
    double delta = 0.1;
    double r_m = 1.0;
    double alpha_scale = 1.0;
    std::optional<int> h;  // unset: theory values
    std::optional<double> alpha;
    std::optional<double> lambda_w;
    std::optional<double> lambda_psi;
    SolverBudget budget{2000, 4, 32, 0};
    double explore_fraction = 0.0;  // explore-then-commit; 0 selects T^{-1/3}
    int hindsight_iterations = 400;

    bool operator==(const ControllerSection&) const = default;
};

struct ScoSection {
    int d_a = 2;
    int d_y = 2;
    double r_a = 1.0;
    double r_q = 1.0;
    DecisionShape shape = DecisionShape::Ball;
    NoiseKind noise = NoiseKind::ScaledRademacher;
    double w_bound = 1.0;
    CostSection loss{CostKind::NormTarget, 0.5, {0.3, 0.0}, 1.0, 0};
    double delta = 0.1;
    double alpha_scale = 1.0;
    SolverBudget budget{200, 1, 32, 1000};
    long mc_samples = 2000;

    bool operator==(const ScoSection&) const = default;
};

struct SuiteSection {
    std::vector<long> grid{256, 1024, 4096, 16384};
    int seeds = 10;
    std::vector<std::string> algorithms{"ofu", "etc"};
    int parallel = 1;

    bool operator==(const SuiteSection&) const = default;
};

struct ExperimentConfig {
    SystemSection system;
    CostSection cost;
    ControllerSection controller;
    ScoSection sco;
    SuiteSection suite;
    std::uint64_t seed = 0;
    std::string output_dir = "out";

    bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

using nlohmann::json;

/// Walks one JSON object, recording which keys were read so the rest can be
/// rejected with their full path.
class SectionReader {
public:
    SectionReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_, "expected an object");
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    template <class T>
    void read(const std::string& key, T& out) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(key_path(key), std::string("wrong type: ") + e.what());
        }
    }

    template <class T>
    void read(const std::string& key, std::optional<T>& out) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end() || it->is_null()) {
            out.reset();
            return;
        }
        try {
            out = it->template get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(key_path(key), std::string("wrong type: ") + e.what());
        }
    }

    template <class E, class Parse>
    void read_enum(const std::string& key, E& out, Parse parse) {
        std::string s;
        const bool present = j_.contains(key);
        read(key, s);
        if (!present) return;
        try {
            out = parse(s);
        } catch (const std::exception& e) {
            throw ConfigError(key_path(key), e.what());
        }
    }

    SectionReader child(const std::string& key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return SectionReader(it == j_.end() ? empty() : *it, key_path(key));
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.contains(k)) throw ConfigError(key_path(k), "unknown key");
    }

private:
    static const json& empty() {
        static const json e = json::object();
        return e;
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline void read_budget(SectionReader r, SolverBudget& b) {
    r.read("min_iterations", b.min_iterations);
    r.read("iterations_per_sample", b.iterations_per_sample);
    r.read("full_batch_max_samples", b.full_batch_max_samples);
    r.read("max_iterations", b.max_iterations);
    r.finish();
}

inline json budget_json(const SolverBudget& b) {
    return {{"min_iterations", b.min_iterations},
            {"iterations_per_sample", b.iterations_per_sample},
            {"full_batch_max_samples", b.full_batch_max_samples},
            {"max_iterations", b.max_iterations}};
}

inline void read_cost(SectionReader r, CostSection& c) {
    r.read_enum("family", c.kind, cost_kind_from_string);
    r.read("radius", c.radius);
    r.read("center", c.center);
    r.read("knee", c.knee);
    r.read("active", c.active);
    r.finish();
}

inline json cost_json(const CostSection& c) {
    return {{"family", std::string(to_string(c.kind))},
            {"radius", c.radius},
            {"center", c.center},
            {"knee", c.knee},
            {"active", c.active}};
}

template <class T>
json optional_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

inline void check(bool ok, const std::string& path, const std::string& what) {
    if (!ok) throw ConfigError(path, what);
}

inline void validate_budget(const SolverBudget& b, const std::string& path) {
    check(b.min_iterations >= 1, path + ".min_iterations", "must be >= 1");
    check(b.iterations_per_sample >= 0, path + ".iterations_per_sample", "must be >= 0");
    check(b.full_batch_max_samples >= 0, path + ".full_batch_max_samples", "must be >= 0");
    check(b.max_iterations >= 0, path + ".max_iterations", "must be >= 0");
}

}  // namespace detail

/// Builds the cost family a section describes over points of dimension `dim`.
inline CostFamily make_cost(const CostSection& c, int dim) {
    VectorXd center;
    if (!c.center.empty()) center = Eigen::Map<const VectorXd>(c.center.data(), static_cast<Eigen::Index>(c.center.size()));
    return make_cost_family(c.kind, dim, c.radius, center, c.knee, c.active);
}

/// Checks every section against the preconditions of the module it feeds.
inline void validate(const ExperimentConfig& c) {
    using detail::check;
    const auto& s = c.system;
    check(s.d_x >= 1, "system.d_x", "must be >= 1");
    check(s.d_u >= 1, "system.d_u", "must be >= 1");
    check(s.kappa >= 1.0, "system.kappa", "kappa must be >= 1");
    check(s.gamma > 0.0 && s.gamma <= 1.0, "system.gamma", "gamma must lie in (0, 1]");
    check(s.r_b > 0.0, "system.r_b", "must be > 0");
    check(s.w_bound > 0.0, "system.w_bound", "must be > 0");
    check(s.base_sigma >= 0.0, "system.base_sigma", "must be >= 0");
    try {
        make_cost(c.cost, s.d_x + s.d_u);
    } catch (const std::exception& e) {
        throw ConfigError("cost", e.what());
    }

    const auto& k = c.controller;
    check(k.horizon >= 1, "controller.T", "must be >= 1");
    check(k.delta > 0.0 && k.delta < 1.0, "controller.delta", "must lie in (0, 1)");
    check(k.r_m > 0.0, "controller.r_m", "must be > 0");
    check(k.alpha_scale >= 0.0, "controller.alpha_scale", "must be >= 0");
    check(!k.h || *k.h >= 2, "controller.h", "must be >= 2");
    check(!k.alpha || *k.alpha >= 0.0, "controller.alpha", "must be >= 0");
    check(!k.lambda_w || *k.lambda_w > 0.0, "controller.lambda_w", "must be > 0");
    check(!k.lambda_psi || *k.lambda_psi > 0.0, "controller.lambda_psi", "must be > 0");
    check(k.explore_fraction >= 0.0 && k.explore_fraction <= 1.0, "controller.explore_fraction",
          "must lie in [0, 1]");
    check(k.hindsight_iterations >= 1, "controller.hindsight_iterations", "must be >= 1");
    detail::validate_budget(k.budget, "controller.budget");

    const auto& q = c.sco;
    check(q.d_a >= 1, "sco.d_a", "must be >= 1");
    check(q.d_y >= 1, "sco.d_y", "must be >= 1");
    check(q.r_a > 0.0, "sco.r_a", "must be > 0");
    check(q.r_q > 0.0, "sco.r_q", "must be > 0");
    check(q.w_bound > 0.0, "sco.w_bound", "must be > 0");
    check(q.delta > 0.0 && q.delta < 1.0, "sco.delta", "must lie in (0, 1)");
    check(q.alpha_scale >= 0.0, "sco.alpha_scale", "must be >= 0");
    check(q.mc_samples >= 1, "sco.mc_samples", "must be >= 1");
    detail::validate_budget(q.budget, "sco.budget");
    try {
        make_cost(q.loss, q.d_y);
    } catch (const std::exception& e) {
        throw ConfigError("sco.loss", e.what());
    }

    const auto& u = c.suite;
    check(!u.grid.empty(), "suite.grid", "must not be empty");
    for (long t : u.grid) check(t >= 1, "suite.grid", "horizons must be >= 1");
    check(u.seeds >= 1, "suite.seeds", "must be >= 1");
    check(!u.algorithms.empty(), "suite.algorithms", "must not be empty");
    for (const auto& a : u.algorithms)
        check(a == "ofu" || a == "etc" || a == "sco", "suite.algorithms", "unknown algorithm '" + a + "'");
    check(u.parallel >= 1, "suite.parallel", "must be >= 1");
    check(!c.output_dir.empty(), "output_dir", "must not be empty");
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    detail::SectionReader root(j, "");
    {
        auto r = root.child("system");
        r.read("d_x", c.system.d_x);
        r.read("d_u", c.system.d_u);
        r.read("kappa", c.system.kappa);
        r.read("gamma", c.system.gamma);
        r.read("r_b", c.system.r_b);
        r.read_enum("noise", c.system.noise, noise_kind_from_string);
        r.read("w_bound", c.system.w_bound);
        r.read("base_sigma", c.system.base_sigma);
        r.finish();
    }
    detail::read_cost(root.child("cost"), c.cost);
    {
        auto r = root.child("controller");
        r.read("T", c.controller.horizon);
        r.read("delta", c.controller.delta);
        r.read("r_m", c.controller.r_m);
        r.read("alpha_scale", c.controller.alpha_scale);
        r.read("h", c.controller.h);
        r.read("alpha", c.controller.alpha);
        r.read("lambda_w", c.controller.lambda_w);
        r.read("lambda_psi", c.controller.lambda_psi);
        r.read("explore_fraction", c.controller.explore_fraction);
        r.read("hindsight_iterations", c.controller.hindsight_iterations);
        detail::read_budget(r.child("budget"), c.controller.budget);
        r.finish();
    }
    {
        auto r = root.child("sco");
        r.read("d_a", c.sco.d_a);
        r.read("d_y", c.sco.d_y);
        r.read("r_a", c.sco.r_a);
        r.read("r_q", c.sco.r_q);
        r.read_enum("decision_set", c.sco.shape, decision_shape_from_string);
        r.read_enum("noise", c.sco.noise, noise_kind_from_string);
        r.read("w_bound", c.sco.w_bound);
        r.read("delta", c.sco.delta);
        r.read("alpha_scale", c.sco.alpha_scale);
        r.read("mc_samples", c.sco.mc_samples);
        detail::read_cost(r.child("loss"), c.sco.loss);
        detail::read_budget(r.child("budget"), c.sco.budget);
        r.finish();
    }
    {
        auto r = root.child("suite");
        r.read("grid", c.suite.grid);
        r.read("seeds", c.suite.seeds);
        r.read("algorithms", c.suite.algorithms);
        r.read("parallel", c.suite.parallel);
        r.finish();
    }
    root.read("seed", c.seed);
    root.read("output_dir", c.output_dir);
    root.finish();
    validate(c);
    return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
    using detail::optional_json;
    nlohmann::json j;
    j["system"] = {{"d_x", c.system.d_x},       {"d_u", c.system.d_u},
                   {"kappa", c.system.kappa},   {"gamma", c.system.gamma},
                   {"r_b", c.system.r_b},       {"noise", std::string(to_string(c.system.noise))},
                   {"w_bound", c.system.w_bound}, {"base_sigma", c.system.base_sigma}};
    j["cost"] = detail::cost_json(c.cost);
    const auto& k = c.controller;
    j["controller"] = {{"T", k.horizon},
                       {"delta", k.delta},
                       {"r_m", k.r_m},
                       {"alpha_scale", k.alpha_scale},
                       {"h", optional_json(k.h)},
                       {"alpha", optional_json(k.alpha)},
                       {"lambda_w", optional_json(k.lambda_w)},
                       {"lambda_psi", optional_json(k.lambda_psi)},
                       {"explore_fraction", k.explore_fraction},
                       {"hindsight_iterations", k.hindsight_iterations},
                       {"budget", detail::budget_json(k.budget)}};
    const auto& q = c.sco;
    j["sco"] = {{"d_a", q.d_a},
                {"d_y", q.d_y},
                {"r_a", q.r_a},
                {"r_q", q.r_q},
                {"decision_set", std::string(to_string(q.shape))},
                {"noise", std::string(to_string(q.noise))},
                {"w_bound", q.w_bound},
                {"delta", q.delta},
                {"alpha_scale", q.alpha_scale},
                {"mc_samples", q.mc_samples},
                {"loss", detail::cost_json(q.loss)},
                {"budget", detail::budget_json(q.budget)}};
    j["suite"] = {{"grid", c.suite.grid},
                  {"seeds", c.suite.seeds},
                  {"algorithms", c.suite.algorithms},
                  {"parallel", c.suite.parallel}};
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    return j;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("", std::string("malformed config: ") + e.what());
    }
    return config_from_json(j);
}

inline ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_string(text);
}

inline std::string serialize_config(const ExperimentConfig& c) { return config_to_json(c).dump(2) + "\n"; }

// Seed-derived streams. Every random object of a run hangs off (seed, id).
inline constexpr std::uint64_t kSystemStream = 0x5157;
inline constexpr std::uint64_t kScoInstanceStream = 0x5C0;

inline SystemSpec make_system(const ExperimentConfig& c) {
    RngStream rng(c.seed, kSystemStream);
    const auto& s = c.system;
    const NoiseModel noise = NoiseModel::make(s.noise, s.d_x, s.w_bound, s.base_sigma);
    return make_strongly_stable_system(s.d_x, s.d_u, s.kappa, s.gamma, s.r_b, rng, noise);
}

inline ScoInstance make_sco_instance(const ExperimentConfig& c) {
    RngStream rng(c.seed, kScoInstanceStream);
    const auto& q = c.sco;
    return make_sco_instance(q.d_a, q.d_y, q.r_a, q.r_q, NoiseModel::make(q.noise, q.d_y, q.w_bound),
                             make_cost(q.loss, q.d_y), rng, q.shape);
}

/// Controller parameters for horizon T: theory values with any explicit
/// overrides from the config applied.
inline ControllerConfig resolve_controller(const ExperimentConfig& c, const SystemSpec& sys, long horizon) {
    const auto& k = c.controller;
    if (!k.alpha && static_cast<double>(horizon) < 64.0 * k.r_m * k.r_m)
        throw ConfigError("controller.T", "theory parameters need T >= 64 R_M^2 (got T = " +
                                              std::to_string(horizon) + ")");
    const double t = static_cast<double>(horizon);
    ControllerConfig out;
    out.horizon = horizon;
    out.h = k.h.value_or(theory_memory(sys.gamma, t));
    out.r_m = k.r_m;
    out.w_bound = sys.w_bound;
    out.delta = k.delta;
    out.lambda_w = k.lambda_w.value_or(theory_lambda_w(sys.kappa, sys.w_bound, k.r_m, sys.r_b, out.h, sys.gamma));
    out.lambda_psi = k.lambda_psi.value_or(theory_lambda_psi(sys.w_bound, k.r_m, out.h));
    out.alpha = k.alpha.value_or(
        theory_alpha(sys.d_x(), sys.d_u(), sys.kappa, sys.w_bound, k.r_m, sys.r_b, sys.gamma, out.h, t, k.delta));
    out.alpha_scale = k.alpha_scale;
    out.budget = k.budget;
    out.parallel = 1;
    return out;
}

struct ResolvedSco {
    ScoRunConfig run;
    ScoParameters theory;
};

inline ResolvedSco resolve_sco(const ExperimentConfig& c, const ScoInstance& inst, long horizon) {
    const auto& q = c.sco;
    const ScoParameters p = sco_parameter_values(inst.d_a(), inst.d_y(), inst.noise.w_bound, inst.r_a(), inst.r_q,
                                                 static_cast<double>(horizon), q.delta);
    ResolvedSco out;
    out.theory = p;
    out.run.horizon = horizon;
    out.run.lambda = p.lambda;
    out.run.alpha = p.alpha * q.alpha_scale;
    out.run.budget = q.budget;
    return out;
}

}  // namespace ofu
