#pragma once

// Experiment orchestration: typed configuration over the flat config format,
// seeded replica ensembles, CSV/JSON reports. Every statistical gate is a
// 3-standard-error check computed from the ensemble itself; sizes in the
// shipped configs keep each experiment well under ten minutes.

#include "core.hpp"
#include "environment.hpp"
#include "besov.hpp"
#include "pam.hpp"
#include "particle.hpp"
#include "dual.hpp"
#include "spectral.hpp"
#include "spde.hpp"
#include "config.hpp"
#include "report.hpp"
#include "parallel.hpp"
#include "stats.hpp"

#include <chrono>
#include <filesystem>
#include <set>

namespace brw {

constexpr const char* kVersion = "0.1.0";

struct ExperimentConfig {
    std::string experiment;
    // lattice
    int d = 1;
    int n = 0;                    // single-scale experiments
    std::vector<int> n_grid;      // multi-scale experiments
    int M = 4;
    Boundary boundary = Boundary::periodic;
    // environment
    Dist dist = Dist::rademacher;
    double two_point_p = 0.5;
    uint64_t env_seed = 0;
    // particles
    BranchingSpec branching;
    // time
    double t_end = 0.5;
    std::vector<double> obs_times;
    // mc
    int replicas = 1000;
    uint64_t base_seed = 1;
    int max_threads = 0;
    // solver
    SemigroupBackend backend;
    double picard_tol = 1e-10;
    int steps = 64;
    double spde_dt = 0.0;
    // experiment specific
    double kappa = 0.0;           // duality/spde: 0 means 2*nu
    int gap_seeds = 10;
    std::vector<int> L_grid;
    int growth_seeds = 20;
    int L = 0;                    // persistence kill box
    double lambda_user = 0.0;     // persistence growth proxy rate
    int norm_seeds = 20;
    // output
    std::string output_dir = "out";
    std::string hash;

    Box box_at(int scale_n) const { return Box{d, scale_n, M, boundary}; }

    EnvironmentSpec env_spec_at(int scale_n) const {
        EnvironmentSpec es;
        es.dist = dist;
        es.two_point_p = two_point_p;
        es.box = box_at(scale_n);
        es.seed = env_seed;
        return es;
    }
};

namespace detail {

inline const std::set<std::string> kExperiments = {
    "lln", "duality", "moments", "variance", "persistence",
    "eigen_growth", "assumption_norms", "spde_compare"};

// sections/keys each experiment accepts; unknown keys are rejected
inline void check_known_keys(const ConfigFile& file,
                             const std::map<std::string, std::set<std::string>>& allowed) {
    for (const auto& [sec, kv] : file.sections) {
        auto it = allowed.find(sec);
        if (it == allowed.end()) throw ConfigError("unknown config section [" + sec + "]");
        for (const auto& [key, val] : kv)
            if (!it->second.count(key))
                throw ConfigError("unknown config key '" + key + "' in section [" + sec + "]");
    }
}

} // namespace detail

inline ExperimentConfig parse_experiment_config(const ConfigFile& file) {
    ExperimentConfig cfg;
    cfg.hash = config_hash(file.raw_text);
    cfg.experiment = file.at("", "experiment").as_string();
    if (!detail::kExperiments.count(cfg.experiment))
        throw ConfigError("unknown experiment: " + cfg.experiment);

    std::map<std::string, std::set<std::string>> allowed = {
        {"", {"experiment"}},
        {"lattice", {"d", "n", "n_grid", "M", "boundary"}},
        {"environment", {"dist", "seed", "two_point_p"}},
        {"particles", {"rho", "mode", "offspring_probs"}},
        {"time", {"t_end", "obs_times"}},
        {"mc", {"replicas", "base_seed", "max_threads"}},
        {"solver", {"backend", "dt_factor", "picard_tol", "steps", "spde_dt"}},
        {"output", {"dir"}},
        {"duality", {"kappa", "gap_seeds"}},
        {"eigen_growth", {"L_grid", "seeds"}},
        {"persistence", {"L", "lambda_user"}},
        {"norms", {"seeds"}},
    };
    detail::check_known_keys(file, allowed);

    if (file.has("lattice", "d")) cfg.d = int(file.at("lattice", "d").as_int());
    if (file.has("lattice", "n")) cfg.n = int(file.at("lattice", "n").as_int());
    if (file.has("lattice", "n_grid")) cfg.n_grid = file.at("lattice", "n_grid").as_int_array();
    if (file.has("lattice", "M")) cfg.M = int(file.at("lattice", "M").as_int());
    if (file.has("lattice", "boundary")) {
        std::string b = file.at("lattice", "boundary").as_string();
        if (b == "periodic") cfg.boundary = Boundary::periodic;
        else if (b == "dirichlet") cfg.boundary = Boundary::dirichlet;
        else throw ConfigError("boundary must be periodic or dirichlet");
    }
    if (file.has("environment", "dist"))
        cfg.dist = dist_from_name(file.at("environment", "dist").as_string());
    if (file.has("environment", "two_point_p"))
        cfg.two_point_p = file.at("environment", "two_point_p").as_double();
    if (file.has("environment", "seed"))
        cfg.env_seed = uint64_t(file.at("environment", "seed").as_int());
    if (file.has("particles", "rho")) cfg.branching.rho = file.at("particles", "rho").as_double();
    if (file.has("particles", "mode")) {
        std::string m = file.at("particles", "mode").as_string();
        if (m == "binary") cfg.branching.mode = BranchingMode::binary;
        else if (m == "offspring") cfg.branching.mode = BranchingMode::offspring;
        else throw ConfigError("particles.mode must be binary or offspring");
    }
    if (file.has("particles", "offspring_probs"))
        cfg.branching.offspring_probs = file.at("particles", "offspring_probs").as_double_array();
    if (file.has("time", "t_end")) cfg.t_end = file.at("time", "t_end").as_double();
    if (file.has("time", "obs_times")) cfg.obs_times = file.at("time", "obs_times").as_double_array();
    if (cfg.obs_times.empty()) cfg.obs_times = {cfg.t_end};
    if (file.has("mc", "replicas")) cfg.replicas = int(file.at("mc", "replicas").as_int());
    if (file.has("mc", "base_seed")) cfg.base_seed = uint64_t(file.at("mc", "base_seed").as_int());
    if (file.has("mc", "max_threads")) cfg.max_threads = int(file.at("mc", "max_threads").as_int());
    if (file.has("solver", "backend")) {
        std::string b = file.at("solver", "backend").as_string();
        if (b == "dense_expm") cfg.backend.kind = BackendKind::dense_expm;
        else if (b == "crank_nicolson") cfg.backend.kind = BackendKind::crank_nicolson;
        else throw ConfigError("solver.backend must be dense_expm or crank_nicolson");
    }
    if (file.has("solver", "dt_factor"))
        cfg.backend.dt_factor = file.at("solver", "dt_factor").as_double();
    if (file.has("solver", "picard_tol"))
        cfg.picard_tol = file.at("solver", "picard_tol").as_double();
    if (file.has("solver", "steps")) cfg.steps = int(file.at("solver", "steps").as_int());
    if (file.has("solver", "spde_dt")) cfg.spde_dt = file.at("solver", "spde_dt").as_double();
    if (file.has("duality", "kappa")) cfg.kappa = file.at("duality", "kappa").as_double();
    if (file.has("duality", "gap_seeds")) cfg.gap_seeds = int(file.at("duality", "gap_seeds").as_int());
    if (file.has("eigen_growth", "L_grid"))
        cfg.L_grid = file.at("eigen_growth", "L_grid").as_int_array();
    if (file.has("eigen_growth", "seeds"))
        cfg.growth_seeds = int(file.at("eigen_growth", "seeds").as_int());
    if (file.has("persistence", "L")) cfg.L = int(file.at("persistence", "L").as_int());
    if (file.has("persistence", "lambda_user"))
        cfg.lambda_user = file.at("persistence", "lambda_user").as_double();
    if (file.has("norms", "seeds")) cfg.norm_seeds = int(file.at("norms", "seeds").as_int());
    if (file.has("output", "dir")) cfg.output_dir = file.at("output", "dir").as_string();

    // structural validation
    try {
        cfg.branching.validate();
        if (cfg.d != 1 && cfg.d != 2) throw std::invalid_argument("lattice.d must be 1 or 2");
        bool needs_n = cfg.experiment == "duality" || cfg.experiment == "moments" ||
                       cfg.experiment == "variance" || cfg.experiment == "persistence" ||
                       cfg.experiment == "spde_compare";
        bool needs_grid = cfg.experiment == "lln" || cfg.experiment == "duality" ||
                          cfg.experiment == "assumption_norms";
        if (needs_n && cfg.n < 1) throw std::invalid_argument("lattice.n required");
        if (needs_grid && cfg.n_grid.size() < 2)
            throw std::invalid_argument("lattice.n_grid with at least two scales required");
        if (needs_n) cfg.box_at(cfg.n).validate();
        for (int nn : cfg.n_grid) cfg.box_at(nn).validate();
        if (cfg.experiment == "lln" && cfg.branching.rho <= cfg.d / 2.0)
            throw std::invalid_argument("lln requires rho > d/2");
        if (cfg.experiment == "duality" && std::abs(cfg.branching.rho - cfg.d / 2.0) > 1e-12)
            throw std::invalid_argument("duality requires rho = d/2");
        if (cfg.experiment == "eigen_growth" && cfg.L_grid.size() < 2)
            throw std::invalid_argument("eigen_growth needs an increasing L_grid");
        if (cfg.experiment == "persistence" && (cfg.L < 2 || cfg.L > cfg.M))
            throw std::invalid_argument("persistence needs 2 <= L <= M");
        if (cfg.experiment == "spde_compare") {
            if (cfg.d != 1) throw std::invalid_argument("spde_compare is d=1 only");
            if (cfg.spde_dt <= 0.0) throw std::invalid_argument("solver.spde_dt required");
        }
        if (cfg.replicas < 1) throw std::invalid_argument("mc.replicas >= 1");
        for (double t : cfg.obs_times)
            if (t < 0.0 || t > cfg.t_end + 1e-12)
                throw std::invalid_argument("obs_times must lie in [0, t_end]");
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

// default observable: a gaussian bump of unit height
inline Field gaussian_bump(const Box& box) {
    return make_field(box, [&](std::array<double, 2> x) {
        double r2 = x[0] * x[0] + (box.d == 2 ? x[1] * x[1] : 0.0);
        return std::exp(-2.0 * r2);
    });
}

namespace detail {

struct Runtime {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

inline Check se_check(const std::string& name, double value, double target, double se,
                      double n_se = 3.0) {
    double tol = n_se * se;
    return {name, value - target, tol, std::abs(value - target) <= tol};
}

// particle ensemble: per-replica measure paths under stream (base_seed, r).
// Aborted replicas (population cap) are counted, their slots left empty.
struct Ensemble {
    std::vector<MeasurePath> paths;
    int aborted = 0;
};

inline Ensemble run_particle_ensemble(const ExperimentConfig& cfg, const Environment& env,
                                      const std::vector<double>& obs,
                                      const std::vector<Field>& fields, int64_t normalizer,
                                      int kill_L = 0) {
    Ensemble ens;
    ens.paths.resize(size_t(cfg.replicas));
    std::atomic<int> aborted{0};
    run_replicas(cfg.replicas, cfg.max_threads, [&](int r) {
        RngStream rng(cfg.base_seed, uint64_t(r));
        ParticleState st0 = init_state(env.box(), cfg.branching.rho);
        try {
            ens.paths[size_t(r)] =
                kill_L > 0
                    ? killed_simulate(st0, env, cfg.branching, kill_L, obs, fields, rng, normalizer)
                    : simulate_path(st0, env, cfg.branching, obs, fields, rng, normalizer);
        } catch (const PopulationCapError&) {
            ++aborted;
        }
    });
    ens.aborted = aborted;
    return ens;
}

inline void add_abort_check(ExperimentReport& rep, const Ensemble& ens, int replicas,
                            const std::string& suffix = "") {
    double frac = double(ens.aborted) / replicas;
    rep.checks.push_back({"aborted_replica_fraction" + suffix, frac, 0.01, frac <= 0.01});
}

} // namespace detail

// ------------------------------------------------------------ experiments

inline ExperimentReport run_lln(const ExperimentConfig& cfg) {
    detail::Runtime rt;
    ExperimentReport rep{"lln", cfg.hash, {}, 0.0};
    std::filesystem::create_directories(cfg.output_dir);
    CsvWriter summary(cfg.output_dir + "/lln_summary.csv",
                      {"n", "mean", "se", "target", "abs_error", "variance"});
    double t = cfg.t_end;
    std::vector<double> variances;
    for (int nn : cfg.n_grid) {
        EnvironmentSpec es = cfg.env_spec_at(nn);
        Environment env = sample_environment(es);
        Field phi = gaussian_bump(env.box());
        auto ens = detail::run_particle_ensemble(cfg, env, {t}, {phi}, 0);
        detail::add_abort_check(rep, ens, cfg.replicas, "_n" + std::to_string(nn));
        CsvWriter paths(cfg.output_dir + "/lln_n" + std::to_string(nn) + ".csv",
                        {"replica", "time", "field_id", "value", "population"});
        std::vector<double> vals;
        for (int r = 0; r < cfg.replicas; ++r) {
            if (ens.paths[size_t(r)].times.empty()) continue;
            append_measure_rows(paths, r, ens.paths[size_t(r)]);
            vals.push_back(ens.paths[size_t(r)].values[0][0]);
        }
        SampleStats st = sample_stats(vals);
        double target = semigroup_apply(env, phi, t, cfg.backend)[env.box().origin()];
        summary.row({std::to_string(nn), fmt_g17(st.mean), fmt_g17(st.se), fmt_g17(target),
                     fmt_g17(std::abs(st.mean - target)), fmt_g17(st.variance)});
        rep.checks.push_back(
            detail::se_check("mean_identity_n" + std::to_string(nn), st.mean, target, st.se));
        variances.push_back(st.variance);
    }
    bool decreasing = true;
    for (size_t i = 1; i < variances.size(); ++i)
        if (variances[i] >= variances[i - 1]) decreasing = false;
    rep.checks.push_back({"variance_strictly_decreasing",
                          variances.back() / variances.front(), 1.0, decreasing});
    rep.runtime_s = rt.seconds();
    return rep;
}

inline ExperimentReport run_duality(const ExperimentConfig& cfg) {
    detail::Runtime rt;
    ExperimentReport rep{"duality", cfg.hash, {}, 0.0};
    std::filesystem::create_directories(cfg.output_dir);
    double t = cfg.t_end;

    // exact finite-n duality against Monte Carlo at the configured n
    EnvironmentSpec es = cfg.env_spec_at(cfg.n);
    Environment env = sample_environment(es);
    Field phi = gaussian_bump(env.box());
    int64_t N = std::max<int64_t>(1, floor_pow(cfg.n, cfg.branching.rho));
    auto ens = detail::run_particle_ensemble(cfg, env, {t}, {phi}, 1);
    detail::add_abort_check(rep, ens, cfg.replicas);
    CsvWriter paths(cfg.output_dir + "/duality_mc.csv",
                    {"replica", "time", "field_id", "value", "population"});
    std::vector<double> lap;
    for (int r = 0; r < cfg.replicas; ++r) {
        if (ens.paths[size_t(r)].times.empty()) continue;
        append_measure_rows(paths, r, ens.paths[size_t(r)]);
        lap.push_back(std::exp(-ens.paths[size_t(r)].values[0][0]));
    }
    SampleStats st = sample_stats(lap);
    LogLaplaceResult dual = exact_log_laplace(env, phi, t, cfg.branching, cfg.steps, cfg.backend);
    double target = std::pow(dual.value0, double(N));
    rep.checks.push_back(detail::se_check("laplace_mc_vs_exact_dual", st.mean, target, st.se));

    // duality gap trend over the scale grid
    double kappa = cfg.kappa > 0.0 ? cfg.kappa : 2.0 * env.nu;
    DualSpec dspec{kappa, cfg.picard_tol, 50};
    CsvWriter gaps(cfg.output_dir + "/duality_gaps.csv", {"n", "seed", "delta", "h0", "U0"});
    std::vector<double> med_first, med_last;
    for (size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
        int nn = cfg.n_grid[ni];
        std::vector<double> deltas;
        for (int sdx = 0; sdx < cfg.gap_seeds; ++sdx) {
            EnvironmentSpec ges = cfg.env_spec_at(nn);
            ges.seed = cfg.env_seed + 1000 + uint64_t(sdx);
            Environment genv = sample_environment(ges);
            Field gphi = gaussian_bump(genv.box());
            DualityGapRow row =
                duality_gap_study_row(genv, gphi, t, dspec, cfg.steps, cfg.backend);
            gaps.row({std::to_string(row.n), std::to_string(row.seed), fmt_g17(row.delta),
                      fmt_g17(row.h0), fmt_g17(row.U0)});
            deltas.push_back(row.delta);
        }
        if (ni == 0) med_first = deltas;
        if (ni + 1 == cfg.n_grid.size()) med_last = deltas;
    }
    double m0 = median(med_first), m1 = median(med_last);
    rep.checks.push_back({"gap_decreasing_in_n", m1 / m0, 1.0, m1 < m0});
    rep.runtime_s = rt.seconds();
    return rep;
}

inline ExperimentReport run_moments(const ExperimentConfig& cfg) {
    detail::Runtime rt;
    ExperimentReport rep{"moments", cfg.hash, {}, 0.0};
    std::filesystem::create_directories(cfg.output_dir);
    EnvironmentSpec es = cfg.env_spec_at(cfg.n);
    Environment env = sample_environment(es);
    Field phi = gaussian_bump(env.box());
    double t = cfg.t_end;

    // single initial particle, counting pairing
    std::vector<double> sq(size_t(cfg.replicas), std::nan(""));
    std::atomic<int> aborted{0};
    run_replicas(cfg.replicas, cfg.max_threads, [&](int r) {
        RngStream rng(cfg.base_seed, uint64_t(r));
        ParticleState st0(env.box());
        st0.counts[size_t(env.box().origin())] = 1;
        st0.population = 1;
        try {
            MeasurePath p = simulate_path(st0, env, cfg.branching, {t}, {phi}, rng, 1);
            sq[size_t(r)] = p.values[0][0] * p.values[0][0];
        } catch (const PopulationCapError&) {
            ++aborted;
        }
    });
    std::vector<double> vals;
    for (double x : sq)
        if (!std::isnan(x)) vals.push_back(x);
    double frac = double(aborted) / cfg.replicas;
    rep.checks.push_back({"aborted_replica_fraction", frac, 0.01, frac <= 0.01});
    SampleStats st = sample_stats(vals);
    TimeGrid grid{t, cfg.steps, {}};
    MomentHierarchy mh = moment_hierarchy(env, phi, 2, cfg.branching.rho, grid, cfg.backend);
    double target =
        std::pow(double(cfg.n), cfg.branching.rho) * mh.final(2)[env.box().origin()];
    rep.checks.push_back(detail::se_check("second_moment_vs_hierarchy", st.mean, target, st.se));
    CsvWriter csv(cfg.output_dir + "/moments.csv", {"replica", "time", "field_id", "value", "population"});
    for (int r = 0; r < cfg.replicas; ++r)
        if (!std::isnan(sq[size_t(r)]))
            csv.row({std::to_string(r), fmt_g17(t), "0", fmt_g17(sq[size_t(r)]), "1"});
    rep.runtime_s = rt.seconds();
    return rep;
}

inline ExperimentReport run_variance(const ExperimentConfig& cfg) {
    detail::Runtime rt;
    ExperimentReport rep{"variance", cfg.hash, {}, 0.0};
    std::filesystem::create_directories(cfg.output_dir);
    EnvironmentSpec es = cfg.env_spec_at(cfg.n);
    Environment env = sample_environment(es);
    Field phi = gaussian_bump(env.box());
    auto ens = detail::run_particle_ensemble(cfg, env, cfg.obs_times, {phi}, 0);
    detail::add_abort_check(rep, ens, cfg.replicas);
    CsvWriter paths(cfg.output_dir + "/variance_mc.csv",
                    {"replica", "time", "field_id", "value", "population"});
    Semigroup sg = Semigroup::for_environment(env, cfg.backend);
    for (size_t k = 0; k < cfg.obs_times.size(); ++k) {
        std::vector<double> vals;
        for (int r = 0; r < cfg.replicas; ++r) {
            if (ens.paths[size_t(r)].times.empty()) continue;
            if (k == 0) append_measure_rows(paths, r, ens.paths[size_t(r)]);
            vals.push_back(ens.paths[size_t(r)].values[0][k]);
        }
        SampleStats st = sample_stats(vals);
        double t = cfg.obs_times[k];
        double mean_target = sg.apply(phi, t)[env.box().origin()];
        rep.checks.push_back(
            detail::se_check("mean_identity_t" + fmt_g17(t), st.mean, mean_target, st.se));
        if (k + 1 == cfg.obs_times.size()) {
            double var_target =
                variance_functional(env, phi, t, cfg.branching.rho, cfg.backend);
            rep.checks.push_back(detail::se_check("variance_identity_t" + fmt_g17(t), st.variance,
                                                  var_target, st.variance_se));
        }
    }
    rep.runtime_s = rt.seconds();
    return rep;
}

inline ExperimentReport run_persistence(const ExperimentConfig& cfg) {
    detail::Runtime rt;
    ExperimentReport rep{"persistence", cfg.hash, {}, 0.0};
    std::filesystem::create_directories(cfg.output_dir);
    EnvironmentSpec es = cfg.env_spec_at(cfg.n);
    es.box.boundary = Boundary::periodic;  // killing is enforced by L
    Environment env = sample_environment(es);
    PersistenceReport pr = persistence_experiment(env, cfg.L, cfg.branching, cfg.obs_times,
                                                  cfg.replicas, cfg.base_seed);
    rep.checks.push_back({"lambda1_positive", pr.eigenpair.lambda1, 0.0,
                          pr.eigenpair.lambda1 > 0.0});
    double frac_abort = double(pr.aborted_replicas) / cfg.replicas;
    rep.checks.push_back({"aborted_replica_fraction", frac_abort, 0.01, frac_abort <= 0.01});

    // martingale mean constancy, pairwise on the paired differences
    size_t K = cfg.obs_times.size();
    for (size_t i = 0; i < K; ++i)
        for (size_t j = i + 1; j < K; ++j) {
            std::vector<double> diffs;
            for (int r = 0; r < cfg.replicas; ++r) {
                double a = pr.E[size_t(r)][i], b = pr.E[size_t(r)][j];
                if (!std::isnan(a) && !std::isnan(b)) diffs.push_back(a - b);
            }
            SampleStats st = sample_stats(diffs);
            rep.checks.push_back(detail::se_check(
                "mean_constancy_t" + fmt_g17(cfg.obs_times[i]) + "_t" + fmt_g17(cfg.obs_times[j]),
                st.mean, 0.0, st.se));
        }
    rep.checks.push_back({"survival_fraction_positive", pr.survival_fraction,
                          3.0 * pr.survival_se, pr.survival_fraction > 3.0 * pr.survival_se});

    // variance non-explosion between the last two observation times
    if (K >= 2) {
        std::vector<double> a, b;
        for (int r = 0; r < cfg.replicas; ++r) {
            if (!std::isnan(pr.E[size_t(r)][K - 2])) a.push_back(pr.E[size_t(r)][K - 2]);
            if (!std::isnan(pr.E[size_t(r)][K - 1])) b.push_back(pr.E[size_t(r)][K - 1]);
        }
        double ratio = sample_stats(b).variance / std::max(1e-300, sample_stats(a).variance);
        rep.checks.push_back({"variance_ratio_bounded", ratio, 3.0,
                              ratio <= 3.0 && ratio >= 1.0 / 3.0});
    }

    CsvWriter eig(cfg.output_dir + "/persistence_eig.csv", {"seed", "L", "lambda1", "e1_origin"});
    eig.row({std::to_string(cfg.env_seed), std::to_string(cfg.L), fmt_g17(pr.eigenpair.lambda1),
             fmt_g17(pr.eigenpair.e1[env.box().origin()])});
    double lam = cfg.lambda_user > 0.0 ? cfg.lambda_user : 0.5 * pr.eigenpair.lambda1;
    CsvWriter csv(cfg.output_dir + "/persistence_paths.csv",
                  {"replica", "t", "E_value", "population"});
    CsvWriter proxy(cfg.output_dir + "/persistence_growth_proxy.csv",
                    {"replica", "t", "lambda", "value"});
    for (int r = 0; r < cfg.replicas; ++r)
        for (size_t k = 0; k < K; ++k) {
            if (std::isnan(pr.E[size_t(r)][k])) continue;
            double lam1 = pr.eigenpair.lambda1;
            double raw = pr.E[size_t(r)][k] * std::exp(lam1 * cfg.obs_times[k]);
            csv.row({std::to_string(r), fmt_g17(cfg.obs_times[k]), fmt_g17(pr.E[size_t(r)][k]),
                     fmt_g17(pr.pop[size_t(r)][k])});
            proxy.row({std::to_string(r), fmt_g17(cfg.obs_times[k]), fmt_g17(lam),
                       fmt_g17(raw * std::exp(-lam * cfg.obs_times[k]))});
        }
    rep.runtime_s = rt.seconds();
    return rep;
}

inline ExperimentReport run_eigen_growth(const ExperimentConfig& cfg) {
    detail::Runtime rt;
    ExperimentReport rep{"eigen_growth", cfg.hash, {}, 0.0};
    std::filesystem::create_directories(cfg.output_dir);
    int n = cfg.n > 0 ? cfg.n : 1;
    // d=2 interiors get large; the shift-invert iteration is much faster
    // there than a full dense solve
    EigenMethod method = cfg.d == 2 ? EigenMethod::power_iteration : EigenMethod::automatic;
    GrowthReport gr = growth_study(cfg.dist, cfg.L_grid, n, cfg.growth_seeds, cfg.d,
                                   cfg.env_seed + 1, method);
    CsvWriter csv(cfg.output_dir + "/eigen_growth.csv", {"seed", "L", "lambda1", "normalized"});
    for (const auto& row : gr.rows)
        csv.row({std::to_string(row.seed), std::to_string(row.L), fmt_g17(row.lambda1),
                 fmt_g17(row.normalized)});
    auto [lo, hi] = std::minmax_element(gr.median_normalized.begin(), gr.median_normalized.end());
    double variation = (*hi - *lo) / *lo;
    double tol = cfg.d == 1 ? 0.15 : 0.20;
    rep.checks.push_back({"normalized_median_stable", variation, tol, variation < tol});
    rep.checks.push_back({"lambda1_monotone_in_L", gr.monotone_per_seed ? 1.0 : 0.0, 1.0,
                          gr.monotone_per_seed});
    rep.runtime_s = rt.seconds();
    return rep;
}

inline ExperimentReport run_assumption_norms(const ExperimentConfig& cfg) {
    detail::Runtime rt;
    ExperimentReport rep{"assumption_norms", cfg.hash, {}, 0.0};
    std::filesystem::create_directories(cfg.output_dir);
    CsvWriter csv(cfg.output_dir + "/norm_probes.csv", {"quantity", "d", "n", "M", "seed", "value"});
    WeightSpec w2{WeightKind::polynomial, 2.0, 0.5};

    // noise norm probe: ||xi||_{C^{alpha-2}(p(2))} medians stable across n
    double alpha = cfg.d == 1 ? 1.25 : 0.9;
    BesovParams bp;
    bp.alpha = cfg.d == 1 ? alpha - 2.0 : -1.6;
    bp.weight = w2;
    std::vector<double> medians;
    for (int nn : cfg.n_grid) {
        std::vector<double> vals;
        for (int sdx = 0; sdx < cfg.norm_seeds; ++sdx) {
            EnvironmentSpec es = cfg.env_spec_at(nn);
            es.seed = cfg.env_seed + uint64_t(sdx);
            Environment env = sample_environment(es);
            DyadicPartition part(nn);
            double v = besov_norm(env.xi, bp, part);
            vals.push_back(v);
            csv.row({"xi_besov", std::to_string(cfg.d), std::to_string(nn),
                     std::to_string(cfg.M), std::to_string(es.seed), fmt_g17(v)});
        }
        medians.push_back(median(vals));
    }
    auto [nlo, nhi] = std::minmax_element(medians.begin(), medians.end());
    double var_xi = (*nhi - *nlo) / *nlo;
    rep.checks.push_back({"xi_norm_median_stable", var_xi, 0.5, var_xi < 0.5});

    if (cfg.d == 2) {
        // renormalization constant behavior
        double k128 = renormalization_constant(2, 128);
        double k256 = renormalization_constant(2, 256);
        csv.row({"kappa_n", "2", "128", "-", "-", fmt_g17(k128)});
        csv.row({"kappa_n", "2", "256", "-", "-", fmt_g17(k256)});
        double r128 = k128 / std::log(128.0), r256 = k256 / std::log(256.0);
        double drift = std::abs(r256 - r128) / r128;
        rep.checks.push_back({"kappa_over_logn_stable", drift, 0.05, drift < 0.05});
        const double increment_limit = 0.11031780;  // lim kappa_{2n} - kappa_n
        double inc = k256 - k128;
        rep.checks.push_back({"kappa_increment_matches_limit",
                              std::abs(inc - increment_limit) / increment_limit, 0.10,
                              std::abs(inc - increment_limit) / increment_limit < 0.10});

        // enhancement probes across the scale grid
        std::vector<double> xmed, rmed;
        for (int nn : cfg.n_grid) {
            std::vector<double> xv, rv;
            for (int sdx = 0; sdx < cfg.norm_seeds; ++sdx) {
                EnvironmentSpec es = cfg.env_spec_at(nn);
                es.seed = cfg.env_seed + 100 + uint64_t(sdx);
                Environment env = sample_environment(es);
                Enhancement enh = pam_enhancement(env);
                DyadicPartition part(nn);
                BesovParams bx{alpha, std::numeric_limits<double>::infinity(),
                               std::numeric_limits<double>::infinity(), w2};
                BesovParams br{2 * alpha - 2.0, std::numeric_limits<double>::infinity(),
                               std::numeric_limits<double>::infinity(), w2};
                double vx = besov_norm(enh.X, bx, part);
                double vr = besov_norm(enh.resonant_renorm, br, part);
                xv.push_back(vx);
                rv.push_back(vr);
                csv.row({"X_besov", "2", std::to_string(nn), std::to_string(cfg.M),
                         std::to_string(es.seed), fmt_g17(vx)});
                csv.row({"resonant_renorm_besov", "2", std::to_string(nn), std::to_string(cfg.M),
                         std::to_string(es.seed), fmt_g17(vr)});
            }
            xmed.push_back(median(xv));
            rmed.push_back(median(rv));
        }
        auto [xlo, xhi] = std::minmax_element(xmed.begin(), xmed.end());
        rep.checks.push_back({"X_norm_median_stable", (*xhi - *xlo) / *xlo, 0.5,
                              (*xhi - *xlo) / *xlo < 0.5});
        auto [rlo, rhi] = std::minmax_element(rmed.begin(), rmed.end());
        rep.checks.push_back({"resonant_norm_median_stable", (*rhi - *rlo) / *rlo, 0.5,
                              (*rhi - *rlo) / *rlo < 0.5});

        // spatial mean of the resonant product against c_n at the finest scale
        int nn = cfg.n_grid.back();
        std::vector<double> gaps;
        for (int sdx = 0; sdx < cfg.norm_seeds; ++sdx) {
            EnvironmentSpec es = cfg.env_spec_at(nn);
            es.seed = cfg.env_seed + 300 + uint64_t(sdx);
            Environment env = sample_environment(es);
            Enhancement enh = pam_enhancement(env);
            double mean = 0.0;
            for (double x : enh.resonant_product.v) mean += x;
            mean /= double(enh.resonant_product.size());
            gaps.push_back(std::abs(mean - env.c_n) / env.c_n);
            csv.row({"resonant_mean_rel_gap", "2", std::to_string(nn), std::to_string(cfg.M),
                     std::to_string(es.seed), fmt_g17(gaps.back())});
        }
        double med_gap = median(gaps);
        rep.checks.push_back({"resonant_mean_matches_cn", med_gap, 0.10, med_gap < 0.10});
    }
    rep.runtime_s = rt.seconds();
    return rep;
}

inline ExperimentReport run_spde_compare(const ExperimentConfig& cfg) {
    detail::Runtime rt;
    ExperimentReport rep{"spde_compare", cfg.hash, {}, 0.0};
    std::filesystem::create_directories(cfg.output_dir);
    EnvironmentSpec es = cfg.env_spec_at(cfg.n);
    Environment env = sample_environment(es);
    Field phi = gaussian_bump(env.box());
    double t = cfg.t_end;
    double kappa = cfg.kappa > 0.0 ? cfg.kappa : 2.0 * env.nu;

    // SPDE ensemble (quenched: same xi as the particle ensemble)
    SpdeConfig sc{kappa, cfg.spde_dt, 0.0, cfg.base_seed};
    std::vector<double> spde_obs(size_t(cfg.replicas), std::nan(""));
    std::vector<double> spde_mass(size_t(cfg.replicas), std::nan(""));
    std::vector<SpdeStats> stats(size_t(cfg.replicas));
    std::atomic<int> spde_failed{0};
    run_replicas(cfg.replicas, cfg.max_threads, [&](int r) {
        RngStream rng(cfg.base_seed, uint64_t(r));
        try {
            MeasurePath p = spde_simulate(env, sc, {t}, {phi}, rng, &stats[size_t(r)]);
            spde_obs[size_t(r)] = p.values[0][0];
            spde_mass[size_t(r)] = p.population[0];
        } catch (const SpdeStepError&) {
            ++spde_failed;
        }
    });
    // particle ensemble at rho = 1/2 on the same environment, separate streams
    ExperimentConfig pcfg = cfg;
    pcfg.base_seed = cfg.base_seed + 0x9E3779B97F4A7C15ull;
    auto ens = detail::run_particle_ensemble(pcfg, env, {t}, {phi}, 0);
    detail::add_abort_check(rep, ens, cfg.replicas);
    double frac_failed = double(spde_failed) / cfg.replicas;
    rep.checks.push_back({"spde_failed_fraction", frac_failed, 0.01, frac_failed <= 0.01});

    std::vector<double> lap_spde, lap_part, mean_spde, mean_part;
    double clip_sum = 0.0;
    int clip_count = 0;
    CsvWriter csv(cfg.output_dir + "/spde_paths.csv",
                  {"replica", "time", "field_id", "value", "population"});
    for (int r = 0; r < cfg.replicas; ++r) {
        double x = spde_obs[size_t(r)];
        if (!std::isnan(x)) {
            lap_spde.push_back(std::exp(-x));
            mean_spde.push_back(x);
            csv.row({std::to_string(r), fmt_g17(t), "0", fmt_g17(x),
                     fmt_g17(spde_mass[size_t(r)])});
            clip_sum += stats[size_t(r)].clip_fraction();
            ++clip_count;
        }
        if (!ens.paths[size_t(r)].times.empty()) {
            double y = ens.paths[size_t(r)].values[0][0];
            lap_part.push_back(std::exp(-y));
            mean_part.push_back(y);
        }
    }
    SampleStats ls = sample_stats(lap_spde), lp = sample_stats(lap_part);
    double comb_se = std::hypot(ls.se, lp.se);
    rep.checks.push_back(detail::se_check("laplace_spde_vs_particle", ls.mean, lp.mean, comb_se));
    SampleStats ms = sample_stats(mean_spde);
    double target = semigroup_apply(env, phi, t, cfg.backend)[env.box().origin()];
    // clipping adds a small positive mass excess that persists at practical
    // dt, so the mean gate carries a 2% discretization allowance on top of
    // the statistical one
    double mean_tol = 3.0 * ms.se + 0.02 * std::abs(target);
    rep.checks.push_back({"spde_mean_identity", ms.mean - target, mean_tol,
                          ms.mean - target > -3.0 * ms.se && ms.mean - target <= mean_tol});
    double clip_avg = clip_count ? clip_sum / clip_count : 0.0;
    rep.checks.push_back({"clip_fraction_small", clip_avg, 0.01, clip_avg < 0.01});

    // Scale diagnostic: the particle system carries jump-transport noise and
    // an integer-floor branching excess that the density SPDE does not, so
    // the Laplace functionals differ at fixed n and meet only as n grows.
    // Measure the gap against the exact branching dual at n and 2n.
    auto gap_at = [&](int nn, uint64_t seed_shift) {
        EnvironmentSpec ges = cfg.env_spec_at(nn);
        Environment genv = sample_environment(ges);
        Field gphi = gaussian_bump(genv.box());
        int64_t N = std::max<int64_t>(1, floor_pow(nn, 0.5));
        Field psi(genv.box());
        for (int64_t a = 0; a < psi.size(); ++a) psi[a] = gphi[a] / double(N);
        BranchingSpec bs;
        bs.rho = 0.5;
        auto dual = exact_log_laplace(genv, psi, t, bs, 4 * cfg.steps, cfg.backend);
        double exact_particle = std::pow(dual.value0, double(N));
        double dx2 = 1.0 / (double(nn) * nn);
        SpdeConfig gc{kappa, 0.25 * dx2 / 16.0, 0.0, 0};
        int R = std::min(cfg.replicas, 2000);
        std::vector<double> vals(static_cast<size_t>(R), 0.0);
        run_replicas(R, cfg.max_threads, [&](int r) {
            RngStream rng(cfg.base_seed + seed_shift, uint64_t(r));
            vals[size_t(r)] =
                std::exp(-spde_simulate(genv, gc, {t}, {gphi}, rng).values[0][0]);
        });
        return std::abs(sample_stats(vals).mean - exact_particle);
    };
    double g1 = gap_at(cfg.n, 101), g2 = gap_at(2 * cfg.n, 202);
    rep.checks.push_back({"laplace_gap_shrinks_with_n", g2 / g1, 1.0, g2 < g1});
    rep.runtime_s = rt.seconds();
    return rep;
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    ExperimentReport rep;
    if (cfg.experiment == "lln") rep = run_lln(cfg);
    else if (cfg.experiment == "duality") rep = run_duality(cfg);
    else if (cfg.experiment == "moments") rep = run_moments(cfg);
    else if (cfg.experiment == "variance") rep = run_variance(cfg);
    else if (cfg.experiment == "persistence") rep = run_persistence(cfg);
    else if (cfg.experiment == "eigen_growth") rep = run_eigen_growth(cfg);
    else if (cfg.experiment == "assumption_norms") rep = run_assumption_norms(cfg);
    else if (cfg.experiment == "spde_compare") rep = run_spde_compare(cfg);
    else throw ConfigError("unknown experiment: " + cfg.experiment);

    write_json(rep.to_json(), cfg.output_dir + "/summary.json");
    nlohmann::json prov;
    prov["config_hash"] = cfg.hash;
    prov["experiment"] = cfg.experiment;
    prov["env_seed"] = cfg.env_seed;
    prov["base_seed"] = cfg.base_seed;
    prov["threads"] = resolve_threads(cfg.max_threads);
    prov["version"] = kVersion;
    write_json(prov, cfg.output_dir + "/provenance.json");
    return rep;
}

} // namespace brw
