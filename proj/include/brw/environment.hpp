#pragma once

// Random potential on the lattice: i.i.d. site values xi(x) = n^{d/2} Phi
// for a centered unit-variance Phi, the effective potential xi_e = xi - c_n
// in d=2, and the renormalization constant c_n itself (a quadrature over the
// discrete torus that grows like log n).

#include "core.hpp"
#include "rng.hpp"

#include <fstream>
#include <cstring>
#include <cmath>

namespace brw {

enum class Dist { rademacher, centered_uniform, two_point };

inline const char* dist_name(Dist d) {
    switch (d) {
        case Dist::rademacher: return "rademacher";
        case Dist::centered_uniform: return "centered_uniform";
        case Dist::two_point: return "two_point";
    }
    return "?";
}

inline Dist dist_from_name(const std::string& s) {
    if (s == "rademacher") return Dist::rademacher;
    if (s == "centered_uniform") return Dist::centered_uniform;
    if (s == "two_point") return Dist::two_point;
    throw std::invalid_argument("unknown distribution: " + s);
}

struct EnvironmentSpec {
    Dist dist = Dist::rademacher;
    double two_point_p = 0.5;  // P(Phi = positive atom), used by two_point only
    Box box;
    uint64_t seed = 0;

    void validate() const {
        box.validate();
        if (dist == Dist::two_point && (two_point_p <= 0.0 || two_point_p >= 1.0))
            throw std::invalid_argument("two_point distribution needs p in (0,1)");
    }

    // nu = E[Phi_+], analytic per distribution
    double nu() const {
        switch (dist) {
            case Dist::rademacher: return 0.5;
            case Dist::centered_uniform: return std::sqrt(3.0) / 4.0;
            case Dist::two_point: return std::sqrt(two_point_p * (1.0 - two_point_p));
        }
        return 0.0;
    }
};

// the smooth spectral cutoff: 0 on (-1/8,1/8)^d, 1 outside (-1/4,1/4)^d,
// smoothstep of the sup-norm in between
inline double chi_cutoff(double k0, double k1 = 0.0) {
    double a = std::max(std::abs(k0), std::abs(k1));
    return smoothstep((a - 0.125) * 8.0);
}

// Fourier multiplier of -Delta^n: l^n(k) = 4 n^2 sum_i sin^2(pi k_i / n)
inline double laplace_multiplier(int d, int n, double k0, double k1 = 0.0) {
    double s0 = std::sin(M_PI * k0 / n);
    double acc = s0 * s0;
    if (d == 2) {
        double s1 = std::sin(M_PI * k1 / n);
        acc += s1 * s1;
    }
    return 4.0 * double(n) * n * acc;
}

namespace detail {

// midpoint rule for kappa_n over [-n/2,n/2)^2 with m points per side;
// integrand is even in each coordinate, so sum one quadrant
inline double kappa_quadrature(int n, int64_t m) {
    double h = double(n) / double(m);
    double acc = 0.0;
    int64_t half = m / 2;
    for (int64_t i = 0; i < half; ++i) {
        double kx = (double(i) + 0.5) * h;
        for (int64_t j = 0; j < half; ++j) {
            double ky = (double(j) + 0.5) * h;
            double c = chi_cutoff(kx, ky);
            if (c == 0.0) continue;
            acc += c / laplace_multiplier(2, n, kx, ky);
        }
    }
    return 4.0 * acc * h * h;
}

} // namespace detail

// kappa_n = int_{T^2_n} chi(k) / l^n(k) dk, d=2 only. Starts from a grid of
// (8n)^2 points and doubles the resolution until the relative change drops
// below rel_tol; the last change is the error estimate.
inline double renormalization_constant(int d, int n, double rel_tol = 1e-4,
                                       double* error_estimate = nullptr) {
    if (d != 2) throw std::invalid_argument("renormalization_constant: defined for d=2 only");
    if (n < 1) throw std::invalid_argument("renormalization_constant: n >= 1");
    int64_t m = int64_t(8) * n;
    double prev = detail::kappa_quadrature(n, m);
    for (int ref = 0; ref < 6; ++ref) {
        m *= 2;
        double cur = detail::kappa_quadrature(n, m);
        double change = std::abs(cur - prev);
        prev = cur;
        if (change < rel_tol * std::abs(cur)) {
            if (error_estimate) *error_estimate = change;
            return cur;
        }
    }
    if (error_estimate) *error_estimate = -1.0;
    return prev;
}

struct Environment {
    EnvironmentSpec spec;
    Field xi;      // sampled potential, magnitude n^{d/2}
    Field xi_eff;  // xi - c_n in d=2, xi in d=1
    double c_n = 0.0;
    double nu = 0.0;

    const Box& box() const { return spec.box; }
};

inline double sample_phi(Dist dist, double p, RngStream& rng) {
    double u = rng.u01();
    switch (dist) {
        case Dist::rademacher:
            return u < 0.5 ? -1.0 : 1.0;
        case Dist::centered_uniform:
            return (2.0 * u - 1.0) * std::sqrt(3.0);
        case Dist::two_point: {
            double a = std::sqrt((1.0 - p) / p);
            double b = -std::sqrt(p / (1.0 - p));
            return u < p ? a : b;
        }
    }
    return 0.0;
}

// stream tag separating environment draws from particle/noise draws
constexpr uint64_t kEnvStream = 0x656E7669726F6E00ull;

inline Environment sample_environment(const EnvironmentSpec& spec) {
    spec.validate();
    Environment env;
    env.spec = spec;
    env.nu = spec.nu();
    env.xi = Field(spec.box);
    double scale = std::pow(double(spec.box.n), spec.box.d / 2.0);
    RngStream rng(spec.seed, kEnvStream);
    for (int64_t a = 0; a < env.xi.size(); ++a)
        env.xi[a] = scale * sample_phi(spec.dist, spec.two_point_p, rng);
    env.c_n = spec.box.d == 2 ? renormalization_constant(2, spec.box.n) : 0.0;
    env.xi_eff = env.xi;
    if (spec.box.d == 2)
        for (auto& x : env.xi_eff.v) x -= env.c_n;
    return env;
}

// ------------------------------------------------------------ persistence
//
// Flat binary layout: u32 d, u32 n, u32 M, u64 seed, u32 dist tag,
// f64 two_point parameter, then the site values as f64 row-major.

inline void write_environment_binary(const Environment& env, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    auto put_u32 = [&](uint32_t x) { out.write(reinterpret_cast<const char*>(&x), 4); };
    auto put_u64 = [&](uint64_t x) { out.write(reinterpret_cast<const char*>(&x), 8); };
    auto put_f64 = [&](double x) { out.write(reinterpret_cast<const char*>(&x), 8); };
    put_u32(uint32_t(env.box().d));
    put_u32(uint32_t(env.box().n));
    put_u32(uint32_t(env.box().M));
    put_u64(env.spec.seed);
    put_u32(uint32_t(env.spec.dist));
    put_f64(env.spec.two_point_p);
    for (double x : env.xi.v) put_f64(x);
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline Environment read_environment_binary(const std::string& path,
                                           Boundary boundary = Boundary::periodic) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    auto get_u32 = [&]() { uint32_t x; in.read(reinterpret_cast<char*>(&x), 4); return x; };
    auto get_u64 = [&]() { uint64_t x; in.read(reinterpret_cast<char*>(&x), 8); return x; };
    auto get_f64 = [&]() { double x; in.read(reinterpret_cast<char*>(&x), 8); return x; };
    EnvironmentSpec spec;
    spec.box.d = int(get_u32());
    spec.box.n = int(get_u32());
    spec.box.M = int(get_u32());
    spec.box.boundary = boundary;
    spec.seed = get_u64();
    spec.dist = Dist(get_u32());
    spec.two_point_p = get_f64();
    spec.validate();
    Environment env;
    env.spec = spec;
    env.nu = spec.nu();
    env.xi = Field(spec.box);
    for (auto& x : env.xi.v) x = get_f64();
    if (!in) throw std::runtime_error("truncated environment file: " + path);
    env.c_n = spec.box.d == 2 ? renormalization_constant(2, spec.box.n) : 0.0;
    env.xi_eff = env.xi;
    if (spec.box.d == 2)
        for (auto& x : env.xi_eff.v) x -= env.c_n;
    return env;
}

inline void write_environment_csv(const Environment& env, std::ostream& out) {
    out << "ix,iy,x0,x1,xi,xi_eff\n";
    const Box& b = env.box();
    int s = b.side();
    char line[160];
    for (int64_t a = 0; a < env.xi.size(); ++a) {
        int ix = b.d == 1 ? int(a) : int(a % s);
        int iy = b.d == 1 ? 0 : int(a / s);
        std::snprintf(line, sizeof line, "%d,%d,%.17g,%.17g,%.17g,%.17g\n", ix, iy,
                      b.coord(ix), b.d == 2 ? b.coord(iy) : 0.0, env.xi[a], env.xi_eff[a]);
        out << line;
    }
}

} // namespace brw
