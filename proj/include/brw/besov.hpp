#pragma once

// Littlewood-Paley analysis on the lattice: dyadic blocks, weighted Besov
// norms, paraproducts, the commutator C1, and the enhanced-potential pair
// (X^n, renormalized resonant product) that drives the d=2 theory.
//
// The dyadic profiles are built from one C^2 smoothstep: with
// S(r) = 1 - smoothstep(8(r - 3/8)) (radial, 1 on [0,3/8], 0 from 1/2 on),
// set chi_lp(k) = S(|k|) and rho_j(k) = S(2^{-(j+1)}|k|) - S(2^{-j}|k|).
// The telescoping makes the partition of unity exact in floating point,
// rho is supported in the annulus 3/8 <= |k| <= 1 with a plateau on
// [1/2, 3/4], and the top block for scale n absorbs the tail.

#include "core.hpp"
#include "environment.hpp"
#include "fourier.hpp"

#include <limits>

namespace brw {

namespace detail {

inline double lp_profile_S(double r) {
    return 1.0 - smoothstep((r - 0.375) * 8.0);
}

} // namespace detail

struct DyadicPartition {
    int j_n = 0;  // smallest j whose annulus leaves n[-1/2,1/2]^d

    explicit DyadicPartition(int n) {
        j_n = 0;
        while (std::exp2(j_n) <= 0.5 * n) ++j_n;
    }

    int block_count() const { return j_n + 2; }  // j = -1, 0, ..., j_n

    // profile of block j at |k| = r; j = j_n is the tail 1 - sum_{j<j_n}
    double profile(int j, double r) const {
        if (j < -1 || j > j_n) throw std::out_of_range("DyadicPartition: block index");
        if (j == -1) return detail::lp_profile_S(r);
        if (j == j_n) return 1.0 - detail::lp_profile_S(std::ldexp(r, -j_n));
        return detail::lp_profile_S(std::ldexp(r, -(j + 1))) - detail::lp_profile_S(std::ldexp(r, -j));
    }
};

inline Field lp_block(const Field& f, int j, const DyadicPartition& part) {
    if (j < -1 || j > part.j_n) throw std::out_of_range("lp_block: j out of range");
    return apply_multiplier(f, [&](double k0, double k1) {
        return part.profile(j, std::hypot(k0, k1));
    });
}

// all blocks at once (one forward FFT, one inverse per block)
inline std::vector<Field> lp_blocks(const Field& f, const DyadicPartition& part) {
    Spectrum base = fourier_forward(f);
    std::vector<Field> out;
    out.reserve(size_t(part.block_count()));
    Spectrum work(f.box);
    for (int j = -1; j <= part.j_n; ++j) {
        for (int64_t a = 0; a < int64_t(base.v.size()); ++a) {
            auto k = base.k_of(a);
            work.v[size_t(a)] = base.v[size_t(a)] * part.profile(j, std::hypot(k[0], k[1]));
        }
        out.push_back(fourier_inverse(work));
    }
    return out;
}

struct BesovParams {
    double alpha = 0.0;
    double p = std::numeric_limits<double>::infinity();
    double q = std::numeric_limits<double>::infinity();
    WeightSpec weight;

    void validate() const {
        auto ok = [](double e) {
            return e == 1.0 || e == 2.0 || e == std::numeric_limits<double>::infinity();
        };
        if (!ok(p) || !ok(q))
            throw std::invalid_argument("BesovParams: only p,q in {1,2,inf} are supported");
    }
};

// || z f ||_{L^p} with the n^{-d} site weight
inline double weighted_lp(const Field& f, const Field& z, double p) {
    double scale = std::pow(double(f.box.n), -f.box.d);
    if (p == std::numeric_limits<double>::infinity()) {
        double m = 0.0;
        for (int64_t a = 0; a < f.size(); ++a) m = std::max(m, std::abs(z[a] * f[a]));
        return m;
    }
    double acc = 0.0;
    for (int64_t a = 0; a < f.size(); ++a) {
        double t = std::abs(z[a] * f[a]);
        acc += p == 1.0 ? t : t * t;
    }
    acc *= scale;
    return p == 1.0 ? acc : std::sqrt(acc);
}

inline double besov_norm(const Field& f, const BesovParams& params, const DyadicPartition& part) {
    params.validate();
    Field z = weight_field(f.box, params.weight);
    auto blocks = lp_blocks(f, part);
    double acc = 0.0;
    for (int j = -1; j <= part.j_n; ++j) {
        double term = std::exp2(double(j) * params.alpha) * weighted_lp(blocks[size_t(j + 1)], z, params.p);
        if (params.q == std::numeric_limits<double>::infinity())
            acc = std::max(acc, term);
        else
            acc += params.q == 1.0 ? term : term * term;
    }
    if (params.q == std::numeric_limits<double>::infinity()) return acc;
    return params.q == 1.0 ? acc : std::sqrt(acc);
}

// f <. g  = sum_{1 <= i <= j_n} (sum_{j < i-1} block_j f) * block_i g
// f (.) g = sum_{|i-j| <= 1} block_i f * block_j g
// and f*g = f<.g + f(.)g + g<.f pointwise, exactly up to FFT roundoff.
inline Field paraproduct(const Field& f, const Field& g) {
    require_same_box(f, g, "paraproduct");
    DyadicPartition part(f.box.n);
    auto bf = lp_blocks(f, part);
    auto bg = lp_blocks(g, part);
    Field out(f.box);
    Field low(f.box);  // running sum_{j < i-1} block_j f
    for (int i = 1; i <= part.j_n; ++i) {
        // blocks strictly below i-1: add block (i-2)
        for (int64_t a = 0; a < low.size(); ++a) low[a] += bf[size_t(i - 2 + 1)][a];
        const Field& gi = bg[size_t(i + 1)];
        for (int64_t a = 0; a < out.size(); ++a) out[a] += low[a] * gi[a];
    }
    return out;
}

inline Field resonant(const Field& f, const Field& g) {
    require_same_box(f, g, "resonant");
    DyadicPartition part(f.box.n);
    auto bf = lp_blocks(f, part);
    auto bg = lp_blocks(g, part);
    Field out(f.box);
    for (int i = -1; i <= part.j_n; ++i)
        for (int j = std::max(-1, i - 1); j <= std::min(part.j_n, i + 1); ++j)
            for (int64_t a = 0; a < out.size(); ++a)
                out[a] += bf[size_t(i + 1)][a] * bg[size_t(j + 1)][a];
    return out;
}

// C1(f, g, h) = (f <. g) (.) h - f * (g (.) h)
inline Field commutator_c1(const Field& f, const Field& g, const Field& h) {
    Field lhs = resonant(paraproduct(f, g), h);
    Field gh = resonant(g, h);
    for (int64_t a = 0; a < lhs.size(); ++a) lhs[a] -= f[a] * gh[a];
    return lhs;
}

// d=2 enhancement: X solves -Delta^n X = chi(D) xi (zero where chi vanishes),
// and the renormalized resonant product is X (.) xi - c_n.
struct Enhancement {
    Field X;
    Field resonant_product;  // X (.) xi, before subtracting c_n
    Field resonant_renorm;   // X (.) xi - c_n
};

inline Enhancement pam_enhancement(const Environment& env) {
    if (env.box().d != 2) throw std::invalid_argument("pam_enhancement: d=2 only");
    const Box& box = env.box();
    Enhancement out;
    out.X = apply_multiplier(env.xi, [&](double k0, double k1) {
        double c = chi_cutoff(k0, k1);
        if (c == 0.0) return 0.0;
        return c / laplace_multiplier(2, box.n, k0, k1);
    });
    out.resonant_product = resonant(out.X, env.xi);
    out.resonant_renorm = out.resonant_product;
    for (auto& x : out.resonant_renorm.v) x -= env.c_n;
    return out;
}

// Piecewise-multilinear interpolation onto the lattice refined by an integer
// factor (periodic in each coordinate). Stands in for an extension operator
// when comparing fields across scales.
inline Field refine_multilinear(const Field& f, int factor) {
    if (factor < 1) throw std::invalid_argument("refine_multilinear: factor >= 1");
    Box fine = f.box;
    fine.n *= factor;
    fine.validate();
    Field out(fine);
    int s = f.box.side(), S = fine.side();
    auto coarse = [&](int i) { return ((i % s) + s) % s; };
    if (f.box.d == 1) {
        for (int I = 0; I < S; ++I) {
            int i0 = I / factor;
            double t = double(I % factor) / factor;
            out[I] = (1 - t) * f[coarse(i0)] + t * f[coarse(i0 + 1)];
        }
    } else {
        for (int J = 0; J < S; ++J) {
            int j0 = J / factor;
            double u = double(J % factor) / factor;
            for (int I = 0; I < S; ++I) {
                int i0 = I / factor;
                double t = double(I % factor) / factor;
                double f00 = f[f.box.flat(coarse(i0), coarse(j0))];
                double f10 = f[f.box.flat(coarse(i0 + 1), coarse(j0))];
                double f01 = f[f.box.flat(coarse(i0), coarse(j0 + 1))];
                double f11 = f[f.box.flat(coarse(i0 + 1), coarse(j0 + 1))];
                out[fine.flat(I, J)] =
                    (1 - u) * ((1 - t) * f00 + t * f10) + u * ((1 - t) * f01 + t * f11);
            }
        }
    }
    return out;
}

} // namespace brw
