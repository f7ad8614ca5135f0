#include <gtest/gtest.h>

#include "ofu/config.hpp"

using namespace ofu;

TEST(Config, EmptyObjectGivesDefaults) {
    const ExperimentConfig c = parse_config_string("{}");
    EXPECT_EQ(c, ExperimentConfig{});
    EXPECT_EQ(c.controller.horizon, 1024);
    EXPECT_EQ(c.suite.grid, (std::vector<long>{256, 1024, 4096, 16384}));
    EXPECT_EQ(c.sco.loss.center, (std::vector<double>{0.3, 0.0}));
}

TEST(Config, PartialSectionsKeepOtherDefaults) {
    const ExperimentConfig c =
        parse_config_string(R"({"system": {"d_x": 2}, "controller": {"h": 4, "budget": {"max_iterations": 50}}})");
    EXPECT_EQ(c.system.d_x, 2);
    EXPECT_EQ(c.system.d_u, 1);
    EXPECT_EQ(c.controller.h, 4);
    EXPECT_FALSE(c.controller.alpha.has_value());
    EXPECT_EQ(c.controller.budget.max_iterations, 50);
    EXPECT_EQ(c.controller.budget.min_iterations, 2000);
}

TEST(Config, ValidationErrorCarriesKeyPath) {
    try {
        parse_config_string(R"({"system": {"kappa": 0.5}})");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key_path(), "system.kappa");
        EXPECT_NE(std::string(e.what()).find("kappa must be >= 1"), std::string::npos);
    }
}

TEST(Config, UnknownAndMistypedKeysRejected) {
    try {
        parse_config_string(R"({"controller": {"budget": {"min_iters": 3}}})");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key_path(), "controller.budget.min_iters");
    }
    EXPECT_THROW(parse_config_string(R"({"suite": {"seeds": "ten"}})"), ConfigError);
    EXPECT_THROW(parse_config_string(R"({"cost": {"family": "cubic"}})"), ConfigError);
    EXPECT_THROW(parse_config_string(R"({"suite": {"algorithms": ["lqr"]}})"), ConfigError);
    EXPECT_THROW(parse_config_string("{not json"), ConfigError);
}

TEST(Config, SerializeRoundTrip) {
    ExperimentConfig c;
    c.system.d_x = 2;
    c.system.noise = NoiseKind::TruncatedGaussian;
    c.cost.kind = CostKind::HuberQuadratic;
    c.cost.knee = 0.5;
    c.controller.alpha = 0.25;
    c.controller.h = 5;
    c.sco.shape = DecisionShape::Box;
    c.suite.grid = {64, 128};
    c.suite.algorithms = {"sco"};
    c.seed = 42;
    const std::string text = serialize_config(c);
    const ExperimentConfig back = parse_config_string(text);
    EXPECT_EQ(back, c);
    EXPECT_EQ(serialize_config(back), text);
}

TEST(Config, ResolvedControllerUsesTheoryUnlessOverridden) {
    ExperimentConfig c;
    const SystemSpec sys = make_system(c);
    const ControllerConfig k = resolve_controller(c, sys, 1024);
    EXPECT_EQ(k.h, theory_memory(0.5, 1024.0));
    EXPECT_DOUBLE_EQ(k.lambda_psi, theory_lambda_psi(1.0, 1.0, k.h));
    EXPECT_THROW(resolve_controller(c, sys, 63), ConfigError);
    c.controller.alpha = 0.5;
    c.controller.h = 3;
    const ControllerConfig o = resolve_controller(c, sys, 63);
    EXPECT_EQ(o.h, 3);
    EXPECT_DOUBLE_EQ(o.alpha, 0.5);
}

TEST(Config, InstancesDependOnlyOnConfigSeed) {
    ExperimentConfig c;
    c.seed = 5;
    EXPECT_EQ(make_system(c).a_star, make_system(c).a_star);
    EXPECT_EQ(make_sco_instance(c).q_star, make_sco_instance(c).q_star);
    ExperimentConfig d = c;
    d.seed = 6;
    EXPECT_NE(make_sco_instance(c).q_star, make_sco_instance(d).q_star);
}
