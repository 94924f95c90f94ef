#include "helpers.hpp"

#include <brw/harness.hpp>

#include <filesystem>
#include <fstream>

using namespace brw;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig variance_cfg(const std::string& dir, uint64_t base_seed, int threads) {
    std::string text = R"(
experiment = "variance"
[lattice]
d = 1
n = 4
M = 4
[environment]
dist = "rademacher"
seed = 42
[particles]
rho = 0.5
[time]
t_end = 0.5
obs_times = [0.25, 0.5]
[mc]
replicas = 600
base_seed = )" + std::to_string(base_seed) +
                       R"(
[output]
dir = ")" + dir + "\"\n";
    return parse_experiment_config(parse_config_text(text));
}

} // namespace

TEST_CASE("variance experiment end to end", "[harness]") {
    std::string dir = "/tmp/brw_harness_variance";
    std::filesystem::remove_all(dir);
    ExperimentConfig cfg = variance_cfg(dir, 1, 0);
    ExperimentReport rep = run_experiment(cfg);
    CHECK(rep.all_pass());
    CHECK(std::filesystem::exists(dir + "/summary.json"));
    CHECK(std::filesystem::exists(dir + "/provenance.json"));
    CHECK(std::filesystem::exists(dir + "/variance_mc.csv"));
}

TEST_CASE("reruns are byte identical and thread count neutral", "[harness]") {
    std::string d1 = "/tmp/brw_det_a", d2 = "/tmp/brw_det_b", d3 = "/tmp/brw_det_c";
    for (auto& d : {d1, d2, d3}) std::filesystem::remove_all(d);
    ExperimentConfig c1 = variance_cfg(d1, 5, 0);
    ExperimentConfig c2 = variance_cfg(d2, 5, 0);
    ExperimentConfig c3 = variance_cfg(d3, 5, 0);
    c1.max_threads = 1;
    c2.max_threads = 2;
    c3.max_threads = 1;
    run_experiment(c1);
    run_experiment(c2);
    run_experiment(c3);
    CHECK(slurp(d1 + "/variance_mc.csv") == slurp(d2 + "/variance_mc.csv"));
    CHECK(slurp(d1 + "/variance_mc.csv") == slurp(d3 + "/variance_mc.csv"));
    // different base seed changes the Monte Carlo output
    std::string d4 = "/tmp/brw_det_d";
    std::filesystem::remove_all(d4);
    ExperimentConfig c4 = variance_cfg(d4, 6, 0);
    run_experiment(c4);
    CHECK(slurp(d1 + "/variance_mc.csv") != slurp(d4 + "/variance_mc.csv"));
}

TEST_CASE("lln experiment trend", "[harness][slow]") {
    std::string dir = "/tmp/brw_harness_lln";
    std::filesystem::remove_all(dir);
    std::string text = R"(
experiment = "lln"
[lattice]
d = 1
n_grid = [4, 8]
M = 4
[environment]
dist = "rademacher"
seed = 7
[particles]
rho = 1.5
[time]
t_end = 0.5
[mc]
replicas = 1000
base_seed = 3
[output]
dir = ")" + dir + "\"\n";
    ExperimentReport rep = run_experiment(parse_experiment_config(parse_config_text(text)));
    CHECK(rep.all_pass());
    CHECK(std::filesystem::exists(dir + "/lln_summary.csv"));
    CHECK(std::filesystem::exists(dir + "/lln_n4.csv"));
}

TEST_CASE("json summary schema", "[harness]") {
    std::string dir = "/tmp/brw_harness_json";
    std::filesystem::remove_all(dir);
    ExperimentConfig cfg = variance_cfg(dir, 9, 0);
    run_experiment(cfg);
    auto j = nlohmann::json::parse(slurp(dir + "/summary.json"));
    CHECK(j.contains("experiment"));
    CHECK(j.contains("config_hash"));
    CHECK(j.contains("checks"));
    CHECK(j.contains("runtime_s"));
    for (const auto& c : j["checks"]) {
        CHECK(c.contains("name"));
        CHECK(c.contains("statistic"));
        CHECK(c.contains("tolerance"));
        CHECK(c.contains("pass"));
    }
    auto p = nlohmann::json::parse(slurp(dir + "/provenance.json"));
    CHECK(p.contains("config_hash"));
    CHECK(p.contains("version"));
}
