// brwlab command line: run and validate experiment configs, sample
// environments, apply the lattice solvers, and merge CSV reports.

#include <brw/harness.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

const char* kConfigDoc = R"(Config format (TOML-compatible subset):

  experiment = "lln" | "duality" | "moments" | "variance" | "persistence"
             | "eigen_growth" | "assumption_norms" | "spde_compare"

  [lattice]     d = 1|2; n = <scale> or n_grid = [4, 8, 16]; M = <even box
                side>; boundary = "periodic" | "dirichlet"
  [environment] dist = "rademacher" | "centered_uniform" | "two_point";
                seed = <u64>; two_point_p = <p in (0,1)> (two_point only)
  [particles]   rho = <averaging exponent>; mode = "binary" | "offspring";
                offspring_probs = [p0, p1, p2, ...] (offspring mode,
                critical: sum k p_k = 1)
  [time]        t_end = <T>; obs_times = [t1, t2, ...] (subset of [0, T])
  [mc]          replicas = <count>; base_seed = <u64>; max_threads = <0=auto,
                else thread cap; RSBM_THREADS is the env fallback>
  [solver]      backend = "dense_expm" | "crank_nicolson"; dt_factor = 0.25;
                picard_tol = 1e-10; steps = <time grid steps>;
                spde_dt = <Euler step, <= 0.25/n^2> (spde_compare)
  [duality]     kappa = <0 = use 2*nu>; gap_seeds = <environments per scale>
  [eigen_growth] L_grid = [64, 128, 256]; seeds = <count>
  [persistence] L = <kill box side, even, <= M>; lambda_user = <proxy rate>
  [norms]       seeds = <environments per scale>
  [output]      dir = <output directory>

Replica r always draws from the stream (base_seed, r); results do not depend
on the thread count. Exit codes: 0 success, 1 experiment check failed,
2 configuration error.)";

int cmd_run(const std::string& path, int64_t seed_override, int threads_override,
            const std::string& out_override) {
    brw::ConfigFile file = brw::parse_config_file(path);
    brw::ExperimentConfig cfg = brw::parse_experiment_config(file);
    if (seed_override >= 0) cfg.base_seed = uint64_t(seed_override);
    if (threads_override > 0) cfg.max_threads = threads_override;
    if (!out_override.empty()) cfg.output_dir = out_override;
    brw::ExperimentReport rep = brw::run_experiment(cfg);
    for (const auto& c : rep.checks)
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << "  statistic=" << c.statistic
                  << " tolerance=" << c.tolerance << "\n";
    std::cout << "summary: " << cfg.output_dir << "/summary.json\n";
    return rep.all_pass() ? 0 : 1;
}

brw::Field make_initial(const brw::Box& box, const std::string& kind) {
    if (kind == "dirac") {
        brw::Field f(box);
        f[box.origin()] = std::pow(double(box.n), box.d);  // lattice Dirac
        return f;
    }
    if (kind == "uniform") return brw::Field(box, 1.0);
    if (kind == "bump") return brw::gaussian_bump(box);
    throw brw::ConfigError("unknown initial condition: " + kind);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"brwlab: branching random walks in random environment and the lattice Anderson model"};
    app.require_subcommand(1);
    app.footer(kConfigDoc);

    // run
    auto* run = app.add_subcommand("run", "run an experiment config");
    std::string run_config, run_out;
    int64_t run_seed = -1;
    int run_threads = 0;
    run->add_option("config", run_config, "config file")->required();
    run->add_option("--seed", run_seed, "override mc.base_seed");
    run->add_option("--threads", run_threads, "override mc.max_threads");
    run->add_option("--out", run_out, "override output.dir");

    // validate
    auto* val = app.add_subcommand("validate", "validate an experiment config");
    std::string val_config;
    val->add_option("config", val_config, "config file")->required();

    // env sample
    auto* env = app.add_subcommand("env", "environment utilities");
    auto* env_sample = env->add_subcommand("sample", "sample a random potential");
    int es_d = 1, es_n = 4, es_M = 4;
    std::string es_dist = "rademacher", es_out = "environment.bin", es_format = "bin";
    double es_p = 0.5;
    uint64_t es_seed = 0;
    env_sample->add_option("--d", es_d, "dimension (1 or 2)");
    env_sample->add_option("--n", es_n, "lattice scale");
    env_sample->add_option("--M", es_M, "box side (even)");
    env_sample->add_option("--dist", es_dist, "rademacher|centered_uniform|two_point");
    env_sample->add_option("--p", es_p, "two_point positive-atom probability");
    env_sample->add_option("--seed", es_seed, "sampling seed");
    env_sample->add_option("--out", es_out, "output path");
    env_sample->add_option("--format", es_format, "bin|csv");

    // pam solve
    auto* pam = app.add_subcommand("pam", "heat semigroup with potential");
    auto* pam_solve_cmd = pam->add_subcommand("solve", "apply T_t to an initial condition");
    std::string ps_env, ps_out = "pam.csv", ps_init = "dirac", ps_backend = "dense_expm",
                ps_boundary = "periodic", ps_format = "csv";
    double ps_t = 0.5;
    pam_solve_cmd->add_option("--env", ps_env, "environment file (binary)")->required();
    pam_solve_cmd->add_option("--t", ps_t, "time");
    pam_solve_cmd->add_option("--init", ps_init, "dirac|uniform|bump");
    pam_solve_cmd->add_option("--backend", ps_backend, "dense_expm|crank_nicolson");
    pam_solve_cmd->add_option("--boundary", ps_boundary, "periodic|dirichlet");
    pam_solve_cmd->add_option("--format", ps_format, "csv|bin");
    pam_solve_cmd->add_option("--out", ps_out, "output path");

    // dual solve
    auto* dual = app.add_subcommand("dual", "log-Laplace duals");
    auto* dual_solve_cmd = dual->add_subcommand("solve", "solve the dual equation");
    std::string ds_env, ds_out = "dual.csv", ds_mode = "fkpp";
    double ds_t = 0.5, ds_kappa = 0.0, ds_rho = 0.5;
    int ds_steps = 64;
    dual_solve_cmd->add_option("--env", ds_env, "environment file (binary)")->required();
    dual_solve_cmd->add_option("--t", ds_t, "time");
    dual_solve_cmd->add_option("--kappa", ds_kappa, "branching parameter, 0 = 2*nu");
    dual_solve_cmd->add_option("--mode", ds_mode, "fkpp|loglaplace");
    dual_solve_cmd->add_option("--rho", ds_rho, "averaging exponent (loglaplace)");
    dual_solve_cmd->add_option("--steps", ds_steps, "time grid steps");
    dual_solve_cmd->add_option("--out", ds_out, "output CSV (site,time,value)");

    // spectral eig
    auto* spectral = app.add_subcommand("spectral", "Dirichlet Hamiltonian");
    auto* spectral_eig = spectral->add_subcommand("eig", "top eigenpair on a kill box");
    std::string se_env, se_out = "eig.csv";
    int se_L = 0;
    spectral_eig->add_option("--env", se_env, "environment file (binary)")->required();
    spectral_eig->add_option("--L", se_L, "kill box side (even, <= M)")->required();
    spectral_eig->add_option("--out", se_out, "output CSV (site,time,value); lambda1 on stdout");

    // report merge
    auto* report = app.add_subcommand("report", "report utilities");
    auto* report_merge = report->add_subcommand("merge", "concatenate CSVs with one header");
    std::vector<std::string> rm_inputs;
    std::string rm_out = "merged.csv";
    report_merge->add_option("inputs", rm_inputs, "input CSV files")->required();
    report_merge->add_option("--out", rm_out, "output CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (run->parsed()) return cmd_run(run_config, run_seed, run_threads, run_out);
        if (val->parsed()) {
            brw::parse_experiment_config(brw::parse_config_file(val_config));
            std::cout << "config ok\n";
            return 0;
        }
        if (env_sample->parsed()) {
            brw::EnvironmentSpec spec;
            spec.dist = brw::dist_from_name(es_dist);
            spec.two_point_p = es_p;
            spec.box = brw::Box{es_d, es_n, es_M, brw::Boundary::periodic};
            spec.seed = es_seed;
            brw::Environment e = brw::sample_environment(spec);
            if (es_format == "bin") {
                brw::write_environment_binary(e, es_out);
            } else if (es_format == "csv") {
                std::ofstream out(es_out);
                brw::write_environment_csv(e, out);
            } else {
                throw brw::ConfigError("unknown format: " + es_format);
            }
            std::cout << "wrote " << es_out << " (c_n=" << e.c_n << ", nu=" << e.nu << ")\n";
            return 0;
        }
        if (pam_solve_cmd->parsed()) {
            brw::Boundary bd = ps_boundary == "dirichlet" ? brw::Boundary::dirichlet
                                                          : brw::Boundary::periodic;
            brw::Environment e = brw::read_environment_binary(ps_env, bd);
            brw::SemigroupBackend be;
            be.kind = ps_backend == "crank_nicolson" ? brw::BackendKind::crank_nicolson
                                                     : brw::BackendKind::dense_expm;
            brw::Field f0 = make_initial(e.box(), ps_init);
            brw::Field ft = brw::semigroup_apply(e, f0, ps_t, be);
            if (ps_format == "bin")
                brw::write_field_binary(ft, ps_out);
            else
                brw::write_field_csv(ps_out, {ps_t}, {&ft});
            std::cout << "wrote " << ps_out << "\n";
            return 0;
        }
        if (dual_solve_cmd->parsed()) {
            brw::Environment e = brw::read_environment_binary(ds_env);
            double kappa = ds_kappa > 0.0 ? ds_kappa : 2.0 * e.nu;
            brw::SemigroupBackend be;
            brw::Field phi = brw::gaussian_bump(e.box());
            if (ds_mode == "fkpp") {
                brw::DualSpec spec{kappa, 1e-10, 50};
                auto res = brw::fkpp_solve(e, phi, ds_t, spec, be, ds_steps);
                brw::write_field_csv(ds_out, {ds_t}, {&res.final()});
            } else if (ds_mode == "loglaplace") {
                brw::BranchingSpec bs;
                bs.rho = ds_rho;
                auto res = brw::exact_log_laplace(e, phi, ds_t, bs, ds_steps, be);
                brw::write_field_csv(ds_out, {ds_t}, {&res.h});
            } else {
                throw brw::ConfigError("unknown dual mode: " + ds_mode);
            }
            std::cout << "wrote " << ds_out << "\n";
            return 0;
        }
        if (spectral_eig->parsed()) {
            brw::Environment e = brw::read_environment_binary(se_env);
            auto ep = brw::top_eigenpair(brw::assemble(e, se_L));
            brw::write_field_csv(se_out, {0.0}, {&ep.e1});
            std::cout << "lambda1 = " << brw::fmt_g17(ep.lambda1) << "\n";
            return 0;
        }
        if (report_merge->parsed()) {
            std::ofstream out(rm_out);
            if (!out) throw std::runtime_error("cannot open " + rm_out);
            std::string header;
            for (const auto& in_path : rm_inputs) {
                std::ifstream in(in_path);
                if (!in) throw std::runtime_error("cannot open " + in_path);
                std::string line;
                if (!std::getline(in, line)) continue;
                if (header.empty()) {
                    header = line;
                    out << header << "\n";
                } else if (line != header) {
                    throw std::runtime_error("CSV schema mismatch in " + in_path);
                }
                while (std::getline(in, line)) out << line << "\n";
            }
            std::cout << "wrote " << rm_out << "\n";
            return 0;
        }
    } catch (const brw::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
