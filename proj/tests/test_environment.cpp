#include "helpers.hpp"

#include <brw/environment.hpp>

#include <cstdio>

using namespace brw;
using namespace testutil;

TEST_CASE("sampled values live on the rescaled support", "[environment]") {
    Environment env = env_for(box1d(4, 4), 5);
    for (double x : env.xi.v) CHECK((x == 2.0 || x == -2.0));  // n^{1/2} = 2
    CHECK(env.nu == 0.5);
    CHECK(env.c_n == 0.0);
    CHECK(max_abs_diff(env.xi, env.xi_eff) == 0.0);

    EnvironmentSpec us;
    us.dist = Dist::centered_uniform;
    us.box = box1d(4, 4);
    us.seed = 6;
    Environment uenv = sample_environment(us);
    CHECK_THAT(uenv.nu, Catch::Matchers::WithinAbs(std::sqrt(3.0) / 4.0, 1e-15));
    for (double x : uenv.xi.v) CHECK(std::abs(x) <= 2.0 * std::sqrt(3.0) + 1e-12);

    EnvironmentSpec tp;
    tp.dist = Dist::two_point;
    tp.two_point_p = 0.2;
    tp.box = box1d(4, 4);
    tp.seed = 7;
    Environment tenv = sample_environment(tp);
    CHECK_THAT(tenv.nu, Catch::Matchers::WithinAbs(0.4, 1e-15));
    double a = 2.0 * std::sqrt(0.8 / 0.2), b = -2.0 * std::sqrt(0.2 / 0.8);
    for (double x : tenv.xi.v)
        CHECK((std::abs(x - a) < 1e-12 || std::abs(x - b) < 1e-12));
}

TEST_CASE("same seed bitwise identical", "[environment]") {
    Environment a = env_for(box2d(4, 8), 99);
    Environment b = env_for(box2d(4, 8), 99);
    CHECK(a.xi.v == b.xi.v);
    Environment c = env_for(box2d(4, 8), 100);
    CHECK(a.xi.v != c.xi.v);
}

TEST_CASE("empirical mean and variance over a large box", "[environment]") {
    // ~1e6 sites: |mean| < 3/sqrt(N), |var - 1| < 3 se
    EnvironmentSpec spec;
    spec.dist = Dist::rademacher;
    spec.box = box2d(32, 32);
    spec.seed = 1234;
    Environment env = sample_environment(spec);
    double scale = std::pow(32.0, -1.0);  // n^{-d/2}, d=2
    double N = double(env.xi.size());
    double sum = 0.0, sq = 0.0, plus = 0.0;
    for (double x : env.xi.v) {
        double phi = x * scale;
        sum += phi;
        sq += phi * phi;
        plus += std::max(phi, 0.0);
    }
    CHECK(std::abs(sum / N) < 3.0 / std::sqrt(N));
    CHECK(std::abs(sq / N - 1.0) < 3.0 / std::sqrt(N));  // var(Phi^2)=... bounded by 1 for rademacher
    CHECK(std::abs(plus / N - env.nu) < 3.0 * 0.5 / std::sqrt(N));
}

TEST_CASE("chi cutoff", "[environment]") {
    CHECK(chi_cutoff(0.0, 0.0) == 0.0);
    CHECK(chi_cutoff(0.1, 0.05) == 0.0);   // inside (-1/8,1/8)^2
    CHECK(chi_cutoff(0.3, 0.0) == 1.0);    // outside (-1/4,1/4)^2
    CHECK(chi_cutoff(0.0, 0.26) == 1.0);
    CHECK_THAT(chi_cutoff(3.0 / 16.0, 0.1), Catch::Matchers::WithinAbs(0.5, 1e-12));
    // monotone in the sup norm
    double prev = -1.0;
    for (int i = 0; i <= 100; ++i) {
        double v = chi_cutoff(0.3 * i / 100.0, 0.0);
        CHECK(v >= prev - 1e-15);
        prev = v;
    }
}

TEST_CASE("renormalization constant growth", "[environment]") {
    CHECK_THROWS_AS(renormalization_constant(1, 8), std::invalid_argument);
    double prev = 0.0;
    for (int n : {4, 8, 16, 32}) {
        double err = 0.0;
        double k = renormalization_constant(2, n, 1e-4, &err);
        CHECK(k > 0.0);
        CHECK(k > prev);
        CHECK(err >= 0.0);
        CHECK(err < 1e-4 * k);
        prev = k;
    }
}

TEST_CASE("renormalization constant asymptotics", "[environment][slow]") {
    // high-resolution oracle: the increment kappa_{2n} - kappa_n approaches
    // log(2)/(2 pi) = 0.110318 (the multiplier behaves like 4 pi^2 |k|^2 at
    // small k, so each dyadic shell contributes the same logarithmic mass)
    const double limit = std::log(2.0) / (2.0 * M_PI);
    double k64 = renormalization_constant(2, 64);
    double k128 = renormalization_constant(2, 128);
    double k256 = renormalization_constant(2, 256);
    CHECK(std::abs((k128 - k64) - limit) < 0.01 * limit);
    CHECK(std::abs((k256 - k128) - limit) < 0.01 * limit);
    // kappa_n / log n drift below 5% between n=128 and n=256
    double r128 = k128 / std::log(128.0), r256 = k256 / std::log(256.0);
    CHECK(std::abs(r256 - r128) / r128 < 0.05);
    // scaled constant small and decreasing: n^{-d/2} c_n
    CHECK(k64 / 64.0 <= 0.2);
    CHECK(k128 / 128.0 < k64 / 64.0);
}

TEST_CASE("binary round trip", "[environment]") {
    Environment env = env_for(box2d(4, 4), 77);
    std::string path = "/tmp/brw_env_test.bin";
    write_environment_binary(env, path);
    Environment back = read_environment_binary(path);
    CHECK(back.xi.v == env.xi.v);
    CHECK(back.spec.seed == env.spec.seed);
    CHECK(back.spec.dist == env.spec.dist);
    CHECK_THAT(back.c_n, Catch::Matchers::WithinRel(env.c_n, 1e-14));
    std::remove(path.c_str());
}
