#pragma once

#include <brw/core.hpp>
#include <brw/environment.hpp>
#include <brw/rng.hpp>
#include <brw/stats.hpp>

#include <catch_amalgamated.hpp>

namespace testutil {

inline brw::Box box1d(int n, int M, brw::Boundary b = brw::Boundary::periodic) {
    return brw::Box{1, n, M, b};
}

inline brw::Box box2d(int n, int M, brw::Boundary b = brw::Boundary::periodic) {
    return brw::Box{2, n, M, b};
}

inline brw::Environment env_for(const brw::Box& box, uint64_t seed,
                                brw::Dist dist = brw::Dist::rademacher) {
    brw::EnvironmentSpec spec;
    spec.dist = dist;
    spec.box = box;
    spec.seed = seed;
    return brw::sample_environment(spec);
}

// a zero-potential environment on the given box
inline brw::Environment zero_env(const brw::Box& box) {
    brw::Environment env;
    env.spec.box = box;
    env.spec.seed = 0;
    env.nu = 0.5;
    env.c_n = 0.0;
    env.xi = brw::Field(box, 0.0);
    env.xi_eff = brw::Field(box, 0.0);
    return env;
}

// random smooth-ish field from a handful of low Fourier modes
inline brw::Field random_smooth_field(const brw::Box& box, uint64_t seed) {
    brw::RngStream rng(seed, 99);
    double a1 = rng.normal(), a2 = rng.normal(), a3 = rng.normal(), a4 = rng.normal();
    return brw::make_field(box, [&](std::array<double, 2> x) {
        double tau = 2.0 * M_PI / box.M;
        double v = a1 * std::cos(tau * x[0]) + a2 * std::sin(2.0 * tau * x[0]);
        if (box.d == 2) v += a3 * std::cos(tau * x[1]) + a4 * std::sin(tau * (x[0] + x[1]));
        return v;
    });
}

inline brw::Field random_rough_field(const brw::Box& box, uint64_t seed) {
    brw::RngStream rng(seed, 98);
    brw::Field f(box);
    for (auto& x : f.v) x = rng.normal();
    return f;
}

inline double max_abs_diff(const brw::Field& a, const brw::Field& b) {
    double m = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline brw::Field bump(const brw::Box& box) {
    return brw::make_field(box, [&](std::array<double, 2> x) {
        double r2 = x[0] * x[0] + (box.d == 2 ? x[1] * x[1] : 0.0);
        return std::exp(-2.0 * r2);
    });
}

} // namespace testutil
