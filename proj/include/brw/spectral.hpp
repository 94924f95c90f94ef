#pragma once

// Dirichlet Anderson Hamiltonian on the open sub-box (-L/2, L/2)^d: assembly
// over the strictly interior sites, top eigenpair (dense solve for small
// dimensions, shifted power iteration above that), the eigenvalue growth
// study over L, and the persistence-martingale experiment
// E(t) = e^{-lambda1 t} <mu^L_t, e1>.

#include "core.hpp"
#include "environment.hpp"
#include "particle.hpp"
#include "pam.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace brw {

struct DirichletHamiltonian {
    int L = 0;
    Box box;
    std::vector<int64_t> sites;            // interior flat indices, ascending
    std::vector<int64_t> site_index;       // flat -> interior index, -1 outside
    Eigen::SparseMatrix<double> matrix;

    int64_t dim() const { return int64_t(sites.size()); }
};

inline DirichletHamiltonian assemble(const Environment& env, int L) {
    const Box& box = env.box();
    if (L < 2 || L % 2 != 0 || L > box.M)
        throw std::invalid_argument("assemble: L must be even with 2 <= L <= M");
    DirichletHamiltonian H;
    H.L = L;
    H.box = box;
    int s = box.side();
    int off = L * box.n / 2;  // interior: |j| < off strictly
    H.site_index.assign(size_t(box.sites()), -1);
    for (int64_t a = 0; a < box.sites(); ++a) {
        int jx = (box.d == 1 ? int(a) : int(a % s)) - s / 2;
        int jy = box.d == 1 ? 0 : int(a / s) - s / 2;
        if (std::abs(jx) < off && (box.d == 1 || std::abs(jy) < off)) {
            H.site_index[size_t(a)] = int64_t(H.sites.size());
            H.sites.push_back(a);
        }
    }
    double n2 = double(box.n) * box.n;
    std::vector<Eigen::Triplet<double>> trip;
    for (int64_t i = 0; i < H.dim(); ++i) {
        int64_t a = H.sites[size_t(i)];
        trip.emplace_back(int(i), int(i), -2.0 * box.d * n2 + env.xi_eff[a]);
        detail::for_neighbors(box, a, [&](int64_t b) {
            if (b < 0) return;
            int64_t j = H.site_index[size_t(b)];
            if (j >= 0) trip.emplace_back(int(i), int(j), n2);
        });
    }
    H.matrix.resize(H.dim(), H.dim());
    H.matrix.setFromTriplets(trip.begin(), trip.end());
    return H;
}

struct EigenPair {
    double lambda1 = 0.0;
    Field e1;  // on the full box, zero outside the interior, <e1,e1>_n = 1
};

enum class EigenMethod { automatic, dense, power_iteration };

namespace detail {

inline EigenPair finalize_eigenpair(const DirichletHamiltonian& H, double lambda,
                                    Eigen::VectorXd v) {
    // sign: make the mean positive. The ground state is strictly positive,
    // but for strongly localized states the far tail sits below roundoff, so
    // tolerate (and zero out) entries within 1e-10 of the peak scale.
    if (v.sum() < 0.0) v = -v;
    double peak = v.cwiseAbs().maxCoeff();
    if (v.minCoeff() < -1e-10 * peak)
        throw std::runtime_error("top_eigenpair: eigenfunction not positive");
    for (int64_t i = 0; i < v.size(); ++i) v[i] = std::max(v[i], 0.0);
    // normalize in the lattice L2 pairing
    double scale = std::sqrt(std::pow(double(H.box.n), -H.box.d)) * v.norm();
    v /= scale;
    EigenPair out;
    out.lambda1 = lambda;
    out.e1 = Field(H.box, 0.0);
    for (int64_t i = 0; i < H.dim(); ++i) out.e1[H.sites[size_t(i)]] = v[i];
    return out;
}

} // namespace detail

inline EigenPair top_eigenpair(const DirichletHamiltonian& H,
                               EigenMethod method = EigenMethod::automatic,
                               int max_iters = 10000, double rel_resid = 1e-8) {
    if (method == EigenMethod::automatic)
        method = H.dim() <= 4096 ? EigenMethod::dense : EigenMethod::power_iteration;
    if (method == EigenMethod::dense) {
        if (H.dim() > 4096)
            throw std::invalid_argument("top_eigenpair: dense solve limited to dim <= 4096");
        Eigen::MatrixXd A = Eigen::MatrixXd(H.matrix);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
        if (es.info() != Eigen::Success) throw std::runtime_error("dense eigensolve failed");
        int64_t last = H.dim() - 1;
        return detail::finalize_eigenpair(H, es.eigenvalues()[last],
                                          es.eigenvectors().col(last));
    }
    // Shifted power iteration on H + sigma I (entrywise nonnegative, so the
    // iterate stays in the positive cone of the ground state), refined by
    // inverse iteration on sigma' I - H with sigma' just above the Rayleigh
    // quotient once the gap becomes the bottleneck.
    double max_abs_diag = 0.0;
    for (int64_t i = 0; i < H.dim(); ++i)
        max_abs_diag = std::max(max_abs_diag, std::abs(H.matrix.coeff(i, i) +
                                                       2.0 * H.box.d * H.box.n * H.box.n));
    double sigma = 4.0 * H.box.d * H.box.n * H.box.n + max_abs_diag;
    Eigen::VectorXd v = Eigen::VectorXd::Ones(H.dim());
    v.normalize();
    double lambda = 0.0, resid = 0.0;
    auto update = [&]() {
        Eigen::VectorXd Hv = H.matrix * v;
        lambda = v.dot(Hv);
        resid = (Hv - lambda * v).norm();
        return resid <= rel_resid * std::abs(lambda) + 1e-10;
    };
    int warmup = std::min(max_iters, 400);
    for (int it = 0; it < warmup; ++it) {
        Eigen::VectorXd w = H.matrix * v + sigma * v;
        v = w.normalized();
        if (update()) return detail::finalize_eigenpair(H, lambda, v);
    }
    Eigen::SparseMatrix<double> eye(H.dim(), H.dim());
    eye.setIdentity();
    for (int round = 0; round < 20; ++round) {
        update();
        double shift = lambda + std::max(2.0 * resid, 1e-8 * (1.0 + std::abs(lambda)));
        Eigen::SparseMatrix<double> A = shift * eye - H.matrix;
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
        if (solver.info() != Eigen::Success)
            throw std::runtime_error("top_eigenpair: shift-invert factorization failed");
        for (int k = 0; k < 50; ++k) {
            Eigen::VectorXd w = solver.solve(v);
            v = w.normalized();
            if (update()) return detail::finalize_eigenpair(H, lambda, v);
        }
    }
    throw std::runtime_error("top_eigenpair: power iteration did not converge");
}

// ------------------------------------------------------------ growth study

struct GrowthRow {
    uint64_t seed = 0;
    int L = 0;
    double lambda1 = 0.0;
    double normalized = 0.0;  // lambda1 / (log L)^{2/3} in d=1, / log L in d=2
};

struct GrowthReport {
    std::vector<GrowthRow> rows;
    std::vector<double> median_normalized;  // per L, in L_grid order
    std::vector<int> L_grid;
    bool monotone_per_seed = true;
};

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// One environment per seed, sampled on the largest box and restricted to the
// nested sub-boxes, so domain monotonicity holds path by path.
inline GrowthReport growth_study(Dist dist, std::vector<int> L_grid, int n, int seeds,
                                 int d, uint64_t base_seed = 1,
                                 EigenMethod method = EigenMethod::automatic) {
    if (L_grid.empty()) throw std::invalid_argument("growth_study: empty L grid");
    std::sort(L_grid.begin(), L_grid.end());
    GrowthReport rep;
    rep.L_grid = L_grid;
    int Lmax = L_grid.back();
    std::vector<std::vector<double>> normalized(L_grid.size());
    for (int sdx = 0; sdx < seeds; ++sdx) {
        EnvironmentSpec spec;
        spec.dist = dist;
        spec.box = Box{d, n, Lmax, Boundary::dirichlet};
        spec.seed = base_seed + uint64_t(sdx);
        Environment env = sample_environment(spec);
        double prev = -std::numeric_limits<double>::infinity();
        for (size_t li = 0; li < L_grid.size(); ++li) {
            int L = L_grid[li];
            EigenPair ep = top_eigenpair(assemble(env, L), method);
            double norm = d == 1 ? ep.lambda1 / std::pow(std::log(double(L)), 2.0 / 3.0)
                                 : ep.lambda1 / std::log(double(L));
            rep.rows.push_back({spec.seed, L, ep.lambda1, norm});
            normalized[li].push_back(norm);
            if (ep.lambda1 < prev - 1e-10) rep.monotone_per_seed = false;
            prev = ep.lambda1;
        }
    }
    for (auto& col : normalized) rep.median_normalized.push_back(median_of(col));
    return rep;
}

// ------------------------------------------------- persistence experiment

struct PersistenceReport {
    EigenPair eigenpair;
    std::vector<double> t_grid;
    // per replica, E(t) = e^{-lambda1 t} <mu^L_t, e1> and the population
    std::vector<std::vector<double>> E;     // [replica][time index]
    std::vector<std::vector<double>> pop;   // [replica][time index]
    std::vector<double> mean_E, se_E;
    double survival_fraction = 0.0;  // P(E(t_end) > 0.1 e1(0)) estimate
    double survival_se = 0.0;
    int aborted_replicas = 0;
};

inline PersistenceReport persistence_experiment(const Environment& env, int L,
                                                const BranchingSpec& spec,
                                                const std::vector<double>& t_grid,
                                                int replicas, uint64_t base_seed,
                                                int64_t population_cap = 10'000'000) {
    PersistenceReport rep;
    rep.t_grid = t_grid;
    rep.eigenpair = top_eigenpair(assemble(env, L));
    double lambda1 = rep.eigenpair.lambda1;
    int64_t N0 = std::max<int64_t>(1, floor_pow(env.box().n, spec.rho));
    std::vector<Field> fields = {rep.eigenpair.e1};
    rep.E.resize(size_t(replicas));
    rep.pop.resize(size_t(replicas));
    for (int r = 0; r < replicas; ++r) {
        RngStream rng(base_seed, uint64_t(r));
        ParticleState st0 = init_state(env.box(), spec.rho);
        try {
            MeasurePath path = killed_simulate(st0, env, spec, L, t_grid, fields, rng, N0,
                                               population_cap);
            rep.pop[size_t(r)] = path.population;
            rep.E[size_t(r)].resize(t_grid.size());
            for (size_t k = 0; k < t_grid.size(); ++k)
                rep.E[size_t(r)][k] = std::exp(-lambda1 * t_grid[k]) * path.values[0][k];
        } catch (const PopulationCapError&) {
            ++rep.aborted_replicas;
            rep.E[size_t(r)].assign(t_grid.size(), std::nan(""));
            rep.pop[size_t(r)].assign(t_grid.size(), std::nan(""));
        }
    }
    size_t K = t_grid.size();
    rep.mean_E.assign(K, 0.0);
    rep.se_E.assign(K, 0.0);
    int good = replicas - rep.aborted_replicas;
    for (size_t k = 0; k < K; ++k) {
        double sum = 0.0, sq = 0.0;
        for (int r = 0; r < replicas; ++r) {
            double x = rep.E[size_t(r)][k];
            if (std::isnan(x)) continue;
            sum += x;
            sq += x * x;
        }
        double mean = sum / good;
        rep.mean_E[k] = mean;
        rep.se_E[k] = std::sqrt(std::max(0.0, sq / good - mean * mean) / good);
    }
    double eps = 0.1 * rep.eigenpair.e1[env.box().origin()];
    int hits = 0;
    for (int r = 0; r < replicas; ++r) {
        double x = rep.E[size_t(r)].back();
        if (!std::isnan(x) && x > eps) ++hits;
    }
    rep.survival_fraction = double(hits) / good;
    rep.survival_se = std::sqrt(rep.survival_fraction * (1.0 - rep.survival_fraction) / good);
    return rep;
}

} // namespace brw
