#include "helpers.hpp"

#include <brw/config.hpp>
#include <brw/harness.hpp>

using namespace brw;

static const char* kGood = R"(
experiment = "variance"

[lattice]
d = 1
n = 4
M = 4
boundary = "periodic"

[environment]
dist = "rademacher"
seed = 42

[particles]
rho = 0.5
mode = "binary"

[time]
t_end = 0.5
obs_times = [0.25, 0.5]

[mc]
replicas = 100
base_seed = 1

[solver]
backend = "dense_expm"

[output]
dir = "/tmp/brw_cfg_test"
)";

TEST_CASE("parser handles the subset", "[config]") {
    ConfigFile f = parse_config_text(
        "a = 1\nb = 2.5\nc = \"hi\"\nd = true\ne = [1, 2, 3]\n[s]\nx = -4  # comment\n");
    CHECK(f.at("", "a").as_int() == 1);
    CHECK(f.at("", "b").as_double() == 2.5);
    CHECK(f.at("", "c").as_string() == "hi");
    CHECK(f.at("", "d").as_bool());
    CHECK(f.at("", "e").as_int_array() == std::vector<int>{1, 2, 3});
    CHECK(f.at("s", "x").as_int() == -4);
    CHECK_THROWS_AS(parse_config_text("junk line\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("a = 1\na = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[open\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_file("/nonexistent/brw.toml"), ConfigError);
}

TEST_CASE("experiment config round trip", "[config]") {
    ExperimentConfig cfg = parse_experiment_config(parse_config_text(kGood));
    CHECK(cfg.experiment == "variance");
    CHECK(cfg.n == 4);
    CHECK(cfg.obs_times == std::vector<double>{0.25, 0.5});
    CHECK(cfg.branching.rho == 0.5);
}

TEST_CASE("unknown keys rejected", "[config]") {
    std::string bad1 = std::string(kGood) + "\n[lattice2]\nz = 1\n";
    CHECK_THROWS_AS(parse_experiment_config(parse_config_text(bad1)), ConfigError);
    std::string bad2 = std::string(kGood) + "\n[lattice]\nwhat = 1\n";
    CHECK_THROWS_AS(parse_experiment_config(parse_config_text(bad2)), ConfigError);
}

TEST_CASE("structural validation", "[config]") {
    std::string lln = kGood;
    lln.replace(lln.find("\"variance\""), 10, "\"lln\"");
    // lln needs an n_grid and rho > d/2
    CHECK_THROWS_AS(parse_experiment_config(parse_config_text(lln)), ConfigError);
    std::string bad_exp = kGood;
    bad_exp.replace(bad_exp.find("\"variance\""), 10, "\"unknown\"");
    CHECK_THROWS_AS(parse_experiment_config(parse_config_text(bad_exp)), ConfigError);
}

TEST_CASE("config hash is stable and content sensitive", "[config]") {
    CHECK(config_hash("abc") == config_hash("abc"));
    CHECK(config_hash("abc") != config_hash("abd"));
    CHECK(config_hash("abc").size() == 16);
}
