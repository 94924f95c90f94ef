#include "helpers.hpp"

#include <brw/pam.hpp>

#include <unsupported/Eigen/MatrixFunctions>

using namespace brw;
using namespace testutil;

TEST_CASE("semigroup at t=0 and mass conservation", "[pam]") {
    Box box = box1d(4, 4);
    Environment env = env_for(box, 5);
    Field f = random_rough_field(box, 1);
    SemigroupBackend be;
    Field same = semigroup_apply(env, f, 0.0, be);
    CHECK(max_abs_diff(same, f) == 0.0);

    // zero potential conserves mass on the periodic box
    Environment zero = zero_env(box);
    Field one(box, 1.0);
    Field ft = semigroup_apply(zero, f, 0.7, be);
    CHECK_THAT(lattice_pair(ft, one), Catch::Matchers::WithinAbs(lattice_pair(f, one), 1e-8));
}

TEST_CASE("backend cross-validation", "[pam]") {
    Box box = box1d(4, 4);
    Environment env = env_for(box, 17);
    Field f = bump(box);
    SemigroupBackend dense;
    SemigroupBackend cn;
    cn.kind = BackendKind::crank_nicolson;
    Field a = semigroup_apply(env, f, 0.5, dense);
    Field b_default = semigroup_apply(env, f, 0.5, cn);
    CHECK(max_abs_diff(a, b_default) < 1e-5);
    cn.dt_factor = 0.1;
    Semigroup cn_sg = Semigroup::for_environment(env, cn);
    Field b = cn_sg.apply(f, 0.5);
    CHECK(max_abs_diff(a, b) < 1e-6);
    CHECK(cn_sg.positivity_flags() == 0);  // nonnegative input stayed nonnegative
}

TEST_CASE("dense backend against Pade matrix exponential", "[pam]") {
    Box box = box1d(4, 4);
    Environment env = env_for(box, 23);
    Eigen::MatrixXd H = hamiltonian_dense(box, env.xi_eff);
    double t = 0.4;
    Eigen::MatrixXd E = (t * H).exp();
    Field f = random_rough_field(box, 3);
    Field got = semigroup_apply(env, f, t, SemigroupBackend{});
    Eigen::VectorXd want = E * Eigen::Map<const Eigen::VectorXd>(f.v.data(), f.size());
    for (int64_t i = 0; i < f.size(); ++i)
        CHECK_THAT(got[i], Catch::Matchers::WithinAbs(want[i], 1e-8));
}

TEST_CASE("semigroup property and positivity", "[pam]") {
    Box box = box1d(4, 4);
    Environment env = env_for(box, 29);
    Semigroup sg = Semigroup::for_environment(env, SemigroupBackend{});
    Field f = bump(box);
    Field two_step = sg.apply(sg.apply(f, 0.3), 0.2);
    Field one_step = sg.apply(f, 0.5);
    CHECK(max_abs_diff(two_step, one_step) < 1e-8);
    for (int64_t a = 0; a < one_step.size(); ++a) CHECK(one_step[a] >= -1e-12);
}

TEST_CASE("dirichlet domination", "[pam]") {
    Box per = box1d(4, 4, Boundary::periodic);
    Box dir = box1d(4, 4, Boundary::dirichlet);
    Environment env_p = env_for(per, 31);
    Environment env_d = env_p;
    env_d.spec.box = dir;
    env_d.xi.box = dir;
    env_d.xi_eff.box = dir;
    Field f = bump(per);
    Field fd = f;
    fd.box = dir;
    SemigroupBackend be;
    Field tp = semigroup_apply(env_p, f, 0.5, be);
    Field td = semigroup_apply(env_d, fd, 0.5, be);
    for (int64_t a = 0; a < tp.size(); ++a) CHECK(td[a] <= tp[a] + 1e-10);
}

TEST_CASE("dense limit enforced", "[pam]") {
    Box box = box2d(32, 4);  // 128^2 = 16384 > 4096
    Environment env = env_for(box, 1);
    CHECK_THROWS_AS(Semigroup::for_environment(env, SemigroupBackend{}),
                    std::invalid_argument);
}

TEST_CASE("forced heat equation", "[pam]") {
    Box box = box1d(4, 4);
    Environment env = env_for(box, 37);
    Semigroup sg = Semigroup::for_environment(env, SemigroupBackend{});
    Field w0 = bump(box);
    TimeGrid grid{0.5, 32, {}};

    // no forcing reduces to the plain semigroup, bitwise on the dense path
    FieldPath hom = pam_solve(sg, w0, nullptr, grid);
    Field direct = sg.apply(w0, 0.5);
    CHECK(hom.values.back().v == direct.v);

    // constant forcing from zero initial data: w(t) ~ t g for small t
    Environment zero = zero_env(box);
    Semigroup sgz = Semigroup::for_environment(zero, SemigroupBackend{});
    Field g = bump(box);
    TimeGrid small{0.01, 8, {}};
    FieldPath forced = pam_solve(sgz, Field(box, 0.0), [&](double) { return g; }, small);
    for (int64_t a = 0; a < g.size(); ++a)
        CHECK_THAT(forced.values.back()[a],
                   Catch::Matchers::WithinAbs(0.01 * g[a], 0.01 * 0.01 * 2.0));

    // lattice Dirac start keeps unit mass under zero potential
    Field dirac(box);
    dirac[box.origin()] = double(box.n);  // n^d with d=1
    FieldPath dp = pam_solve(sgz, dirac, nullptr, TimeGrid{0.5, 16, {}});
    Field one(box, 1.0);
    CHECK_THAT(lattice_pair(dp.values.back(), one), Catch::Matchers::WithinAbs(1.0, 1e-8));
}

TEST_CASE("duhamel quadrature refinement converges", "[pam]") {
    Box box = box1d(4, 4);
    Environment env = env_for(box, 41);
    Semigroup sg = Semigroup::for_environment(env, SemigroupBackend{});
    auto forcing = [&](double t) {
        Field f = bump(box);
        for (auto& x : f.v) x *= std::sin(3.0 * t);
        return f;
    };
    FieldPath coarse = pam_solve(sg, bump(box), forcing, TimeGrid{0.5, 32, {}});
    FieldPath fine = pam_solve(sg, bump(box), forcing, TimeGrid{0.5, 64, {}});
    CHECK(max_abs_diff(coarse.values.back(), fine.values.back()) < 1e-4);
}

TEST_CASE("variance functional basics", "[pam]") {
    Box box = box1d(4, 4);
    Environment env = env_for(box, 43);
    SemigroupBackend be;
    CHECK(variance_functional(env, Field(box, 0.0), 0.5, 0.5, be) == 0.0);
    // linear in n^{-rho}: doubling rho divides by n^{rho}
    Field phi = bump(box);
    double v1 = variance_functional(env, phi, 0.5, 0.5, be);
    double v2 = variance_functional(env, phi, 0.5, 1.5, be);
    CHECK_THAT(v2 * std::pow(4.0, 1.0), Catch::Matchers::WithinRel(v1, 1e-10));
    CHECK_THROWS_AS(variance_functional(env, phi, 0.0, 0.5, be), std::invalid_argument);
}

TEST_CASE("moment hierarchy base case and positivity", "[pam]") {
    Box box = box1d(4, 4);
    Environment env = env_for(box, 47);
    Field phi = bump(box);
    TimeGrid grid{0.5, 64, {}};
    SemigroupBackend be;
    MomentHierarchy mh = moment_hierarchy(env, phi, 3, 0.5, grid, be);

    // m^1 = T_t phi, bitwise on the dense path
    Semigroup sg = Semigroup::for_environment(env, be);
    CHECK(mh.final(1).v == sg.apply(phi, 0.5).v);

    // nonnegative phi with nonpositive potential: all levels finite, nonnegative
    Environment neg = env;
    for (auto& x : neg.xi_eff.v) x = -std::abs(x);
    MomentHierarchy mneg = moment_hierarchy(neg, phi, 4, 0.5, grid, be);
    for (int p = 1; p <= 4; ++p) {
        CHECK(mneg.final(p).all_finite());
        for (double x : mneg.final(p).v) CHECK(x >= -1e-12);
    }
    // with zero source (xi_+ = 0), m^2 evolves the initial |phi|^2 linearly:
    // m^2(t) = T_t (n^{-rho} phi^2)
    Field m20(box);
    for (int64_t a = 0; a < m20.size(); ++a)
        m20[a] = std::pow(4.0, -0.5) * phi[a] * phi[a];
    Semigroup sgn = Semigroup::for_environment(neg, be);
    CHECK(max_abs_diff(mneg.final(2), sgn.apply(m20, 0.5)) < 1e-12);
    CHECK_THROWS_AS(moment_hierarchy(env, phi, 5, 0.5, grid, be), std::invalid_argument);
}
