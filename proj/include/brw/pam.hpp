#pragma once

// Deterministic solvers around the lattice Anderson Hamiltonian
// H^n = Delta^n + xi_e: the semigroup T^n_t = e^{t H^n} (dense spectral
// backend, or Crank-Nicolson stepping for larger boxes), the forced heat
// equation in Duhamel form, the quadratic-variation functional that predicts
// the Monte Carlo variance exactly, and the moment hierarchy, a triangular
// family of forced equations for single-particle moments.

#include "core.hpp"
#include "environment.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <map>
#include <memory>
#include <mutex>
#include <functional>

namespace brw {

enum class BackendKind { dense_expm, crank_nicolson };

struct SemigroupBackend {
    BackendKind kind = BackendKind::dense_expm;
    double dt_factor = 0.25;   // CN: dt = dt_factor / (4 d n^2 + max|xi_e|)
    double tolerance = 1e-8;
};

constexpr int64_t kDenseLimit = 4096;

// H = Delta^n + diag(potential) as a dense symmetric matrix in the site basis
inline Eigen::MatrixXd hamiltonian_dense(const Box& box, const Field& potential) {
    int64_t N = box.sites();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(N, N);
    double n2 = double(box.n) * box.n;
    for (int64_t a = 0; a < N; ++a) {
        H(a, a) = -2.0 * box.d * n2 + potential[a];
        detail::for_neighbors(box, a, [&](int64_t b) {
            if (b >= 0) H(a, b) += n2;
        });
    }
    return H;
}

inline Eigen::SparseMatrix<double> hamiltonian_sparse(const Box& box, const Field& potential) {
    int64_t N = box.sites();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(size_t(N) * (2 * box.d + 1));
    double n2 = double(box.n) * box.n;
    for (int64_t a = 0; a < N; ++a) {
        trip.emplace_back(int(a), int(a), -2.0 * box.d * n2 + potential[a]);
        detail::for_neighbors(box, a, [&](int64_t b) {
            if (b >= 0) trip.emplace_back(int(a), int(b), n2);
        });
    }
    Eigen::SparseMatrix<double> H(N, N);
    H.setFromTriplets(trip.begin(), trip.end());
    return H;
}

// T_t = e^{tH} with cached factorizations; one instance per (box, potential,
// backend), shareable read-only across threads after construction.
class Semigroup {
public:
    Semigroup(const Box& box, const Field& potential, SemigroupBackend backend)
        : box_(box), backend_(backend) {
        box_.validate();
        max_abs_potential_ = sup_norm(potential);
        if (backend.kind == BackendKind::dense_expm) {
            if (box.sites() > kDenseLimit)
                throw std::invalid_argument("dense_expm backend is limited to 4096 sites");
            Eigen::MatrixXd H = hamiltonian_dense(box, potential);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
            if (es.info() != Eigen::Success)
                throw std::runtime_error("dense eigendecomposition failed");
            evecs_ = es.eigenvectors();
            evals_ = es.eigenvalues();
        } else {
            Hs_ = hamiltonian_sparse(box, potential);
        }
    }

    static Semigroup for_environment(const Environment& env, SemigroupBackend backend) {
        return Semigroup(env.box(), env.xi_eff, backend);
    }

    const Box& box() const { return box_; }
    BackendKind kind() const { return backend_.kind; }

    Field apply(const Field& f0, double t) const {
        if (!f0.box.same_geometry(box_))
            throw std::invalid_argument("Semigroup::apply: box mismatch");
        if (t < 0.0) throw std::invalid_argument("Semigroup::apply: t >= 0 required");
        if (t == 0.0) return f0;
        if (backend_.kind == BackendKind::dense_expm) return apply_dense(f0, t);
        return apply_cn(f0, t);
    }

    // eigenbasis access for the dense backend (used by the Duhamel solvers)
    const Eigen::MatrixXd& eigenvectors() const { return evecs_; }
    const Eigen::VectorXd& eigenvalues() const { return evals_; }

    // number of CN applications that produced values below -tolerance from
    // a nonnegative input (positivity is exact for the dense backend)
    int positivity_flags() const { return positivity_flags_; }

    double cn_dt_nominal() const {
        return backend_.dt_factor / (4.0 * box_.d * box_.n * box_.n + max_abs_potential_);
    }

private:
    Field apply_dense(const Field& f0, double t) const {
        Eigen::Map<const Eigen::VectorXd> v(f0.v.data(), f0.size());
        Eigen::VectorXd w = evecs_.transpose() * v;
        w.array() *= (t * evals_.array()).exp();
        Eigen::VectorXd out = evecs_ * w;
        Field res(f0.box);
        Eigen::Map<Eigen::VectorXd>(res.v.data(), res.size()) = out;
        return res;
    }

    Field apply_cn(const Field& f0, double t) const {
        int64_t N = box_.sites();
        int steps = std::max(1, int(std::ceil(t / cn_dt_nominal())));
        double dt = t / steps;
        auto solver = cn_solver(dt);
        bool nonneg_in = true;
        for (double x : f0.v)
            if (x < 0.0) { nonneg_in = false; break; }
        Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(f0.v.data(), N);
        for (int k = 0; k < steps; ++k) {
            Eigen::VectorXd rhs = w + 0.5 * dt * (Hs_ * w);
            w = solver->solve(rhs);
            if (solver->info() != Eigen::Success)
                throw std::runtime_error("crank_nicolson linear solve failed");
        }
        if (nonneg_in && w.minCoeff() < -backend_.tolerance) ++positivity_flags_;
        Field res(f0.box);
        Eigen::Map<Eigen::VectorXd>(res.v.data(), N) = w;
        return res;
    }

    using Factor = Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>;

    std::shared_ptr<Factor> cn_solver(double dt) const {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = cn_cache_.find(dt);
        if (it != cn_cache_.end()) return it->second;
        Eigen::SparseMatrix<double> A = -0.5 * dt * Hs_;
        for (int i = 0; i < A.rows(); ++i) A.coeffRef(i, i) += 1.0;
        auto f = std::make_shared<Factor>();
        f->compute(A);
        if (f->info() != Eigen::Success)
            throw std::runtime_error("crank_nicolson factorization failed");
        cn_cache_[dt] = f;
        return f;
    }

    Box box_;
    SemigroupBackend backend_;
    double max_abs_potential_ = 0.0;
    Eigen::MatrixXd evecs_;
    Eigen::VectorXd evals_;
    Eigen::SparseMatrix<double> Hs_;
    mutable std::mutex mu_;
    mutable std::map<double, std::shared_ptr<Factor>> cn_cache_;
    mutable int positivity_flags_ = 0;
};

inline Field semigroup_apply(const Environment& env, const Field& f0, double t,
                             SemigroupBackend backend) {
    return Semigroup::for_environment(env, backend).apply(f0, t);
}

// ----------------------------------------------------------------- grids

struct TimeGrid {
    double t_end = 1.0;
    int steps = 32;
    std::vector<double> obs_times;

    void validate() const {
        if (t_end <= 0.0 || steps < 1) throw std::invalid_argument("TimeGrid: t_end > 0, steps >= 1");
        double prev = -1.0;
        for (double t : obs_times) {
            if (t < 0.0 || t > t_end + 1e-12 || t <= prev)
                throw std::invalid_argument("TimeGrid: obs_times must be increasing within [0, t_end]");
            prev = t;
        }
    }

    double dt() const { return t_end / steps; }
    double time(int k) const { return t_end * k / steps; }
};

struct FieldPath {
    TimeGrid grid;
    std::vector<Field> values;  // one per grid node, values[k] at grid.time(k)
};

// w(t) = T_t w0 + int_0^t T_{t-s} f(s) ds, forcing integrated by midpoint
// quadrature on the grid. With the dense backend the homogeneous part is
// computed one-shot in the eigenbasis, so a null forcing reproduces
// semigroup_apply bitwise.
inline FieldPath pam_solve(const Semigroup& sg, const Field& w0,
                           const std::function<Field(double)>& forcing, const TimeGrid& grid) {
    grid.validate();
    FieldPath out;
    out.grid = grid;
    out.values.reserve(size_t(grid.steps) + 1);
    double dt = grid.dt();
    if (sg.kind() == BackendKind::dense_expm) {
        const Eigen::MatrixXd& V = sg.eigenvectors();
        const Eigen::VectorXd& lam = sg.eigenvalues();
        int64_t N = w0.size();
        Eigen::VectorXd W = V.transpose() * Eigen::Map<const Eigen::VectorXd>(w0.v.data(), N);
        Eigen::VectorXd A = Eigen::VectorXd::Zero(N);  // Duhamel sum in eigenbasis
        for (int k = 0; k <= grid.steps; ++k) {
            double t = grid.time(k);
            Eigen::VectorXd coeff = (t * lam.array()).exp() * W.array();
            if (forcing) coeff += A;
            Field fk(w0.box);
            Eigen::Map<Eigen::VectorXd>(fk.v.data(), N) = V * coeff;
            out.values.push_back(std::move(fk));
            if (k < grid.steps && forcing) {
                Field src = forcing(t + 0.5 * dt);
                Eigen::VectorXd F = V.transpose() * Eigen::Map<const Eigen::VectorXd>(src.v.data(), N);
                A = ((dt * lam.array()).exp() * A.array() +
                     dt * (0.5 * dt * lam.array()).exp() * F.array()).matrix();
            }
        }
    } else {
        Field w = w0;
        out.values.push_back(w);
        for (int k = 0; k < grid.steps; ++k) {
            double t = grid.time(k);
            Field next = sg.apply(w, dt);
            if (forcing) {
                Field src = sg.apply(forcing(t + 0.5 * dt), 0.5 * dt);
                for (int64_t a = 0; a < next.size(); ++a) next[a] += dt * src[a];
            }
            w = std::move(next);
            out.values.push_back(w);
        }
    }
    return out;
}

// int_0^t T_r( n^{-rho} * [jump carre du champ of T_{t-r} phi
//                          + |xi_e| (T_{t-r} phi)^2] )(0) dr
// by composite Simpson. This equals the variance of the measure observable
// <mu_t, phi> for the particle system when n^rho is an integer.
inline double variance_functional(const Environment& env, const Field& phi, double t,
                                  double rho, SemigroupBackend backend,
                                  int subintervals = 64) {
    if (t <= 0.0) throw std::invalid_argument("variance_functional: t > 0");
    if (subintervals < 64) subintervals = 64;
    if (subintervals % 2 != 0) ++subintervals;
    Semigroup sg = Semigroup::for_environment(env, backend);
    double nrho = std::pow(double(env.box().n), -rho);
    int64_t o = env.box().origin();
    double h = t / subintervals;
    auto integrand = [&](double r) {
        Field psi = sg.apply(phi, t - r);
        Field g = carre_du_champ(psi);
        for (int64_t a = 0; a < g.size(); ++a)
            g[a] = nrho * (g[a] + std::abs(env.xi_eff[a]) * psi[a] * psi[a]);
        return sg.apply(g, r)[o];
    };
    double acc = integrand(0.0) + integrand(t);
    for (int i = 1; i < subintervals; ++i)
        acc += (i % 2 == 1 ? 4.0 : 2.0) * integrand(h * i);
    return acc * h / 3.0;
}

// Moment hierarchy: m^1(t) = T_t phi and, for p >= 2,
//   d/dt m^p = H^n m^p + n^{-rho} (xi_e)_+ sum_{i=1}^{p-1} C(p,i) m^i m^{p-i}
// with m^p(0) = n^{rho(1-p)} |phi|^p. Against the counting pairing,
// E_x[(u_1(t), phi)^p] = n^{rho(p-1)} m^p(t, x) for one initial particle.
struct MomentHierarchy {
    TimeGrid grid;
    std::vector<FieldPath> levels;  // levels[p-1] is m^p

    const Field& at(int p, int k) const { return levels[size_t(p - 1)].values[size_t(k)]; }
    const Field& final(int p) const { return levels[size_t(p - 1)].values.back(); }
};

inline MomentHierarchy moment_hierarchy(const Environment& env, const Field& phi, int p_max,
                                        double rho, const TimeGrid& grid,
                                        SemigroupBackend backend) {
    if (p_max < 1 || p_max > 4)
        throw std::invalid_argument("moment_hierarchy: p_max must be in 1..4");
    grid.validate();
    Semigroup sg = Semigroup::for_environment(env, backend);
    double nrho = std::pow(double(env.box().n), -rho);
    MomentHierarchy out;
    out.grid = grid;
    out.levels.push_back(pam_solve(sg, phi, nullptr, grid));
    auto binom = [](int p, int i) {
        double b = 1.0;
        for (int j = 0; j < i; ++j) b = b * (p - j) / (j + 1);
        return b;
    };
    for (int p = 2; p <= p_max; ++p) {
        // source known on grid nodes from the lower levels; linear in between
        std::vector<Field> src(size_t(grid.steps) + 1, Field(env.box()));
        for (int k = 0; k <= grid.steps; ++k) {
            Field& s = src[size_t(k)];
            for (int i = 1; i <= p - 1; ++i) {
                double c = binom(p, i);
                const Field& a = out.at(i, k);
                const Field& b = out.at(p - i, k);
                for (int64_t x = 0; x < s.size(); ++x) s[x] += c * a[x] * b[x];
            }
            for (int64_t x = 0; x < s.size(); ++x)
                s[x] *= nrho * std::max(env.xi_eff[x], 0.0);
        }
        Field m0(env.box());
        double init_scale = std::pow(double(env.box().n), rho * (1.0 - p));
        for (int64_t x = 0; x < m0.size(); ++x)
            m0[x] = init_scale * std::pow(std::abs(phi[x]), double(p));
        double dt = grid.dt();
        auto forcing = [&](double t) {
            int k = std::min(int(t / dt), grid.steps - 1);
            double w = (t - grid.time(k)) / dt;
            Field f(env.box());
            const Field& lo = src[size_t(k)];
            const Field& hi = src[size_t(k + 1)];
            for (int64_t x = 0; x < f.size(); ++x) f[x] = (1.0 - w) * lo[x] + w * hi[x];
            return f;
        };
        out.levels.push_back(pam_solve(sg, m0, forcing, grid));
    }
    return out;
}

} // namespace brw
