#pragma once

// Lattice Fourier transforms on the periodic box. Conventions:
//   F_n(f)(k)    = n^{-d} sum_x f(x) e^{-2 pi i <x,k>}
//   F_n^{-1}(g)(x) = M^{-d} sum_{k in dual grid} g(k) e^{+2 pi i <x,k>}
// with the dual grid k = j/M, j integer in [-s/2, s/2) per coordinate.
// Round trip is the identity; <f,f>_n = M^{-d} sum_k |F_n f(k)|^2.
//
// Storage uses FFT index order q in [0,s): the frequency offset is
// j = q for q < s/2 and j = q - s otherwise. Because sites sit at
// x = (a - s/2)/n, plain DFT output picks up a (-1)^(sum j) phase that we
// fold in here so the returned spectrum matches the definition above.

#include "core.hpp"

#include <complex>
#include <mutex>
#include <map>
#include <fftw3.h>

namespace brw {

struct Spectrum {
    Box box;
    std::vector<std::complex<double>> v;

    Spectrum() = default;
    explicit Spectrum(const Box& b) : box(b), v(size_t(b.sites())) {}

    // frequency offset j of FFT index q
    int freq(int q) const {
        int s = box.side();
        return q < s / 2 ? q : q - s;
    }

    // k-vector of flat index
    std::array<double, 2> k_of(int64_t a) const {
        int s = box.side();
        if (box.d == 1) return {double(freq(int(a))) / box.M, 0.0};
        return {double(freq(int(a % s))) / box.M, double(freq(int(a / s))) / box.M};
    }
};

namespace detail {

// FFTW plans are cached per (d, s, sign); planning is serialized, execution
// on caller-owned buffers is thread-safe.
class FftPlans {
public:
    static FftPlans& instance() {
        static FftPlans p;
        return p;
    }

    fftw_plan get(int d, int s, int sign) {
        std::lock_guard<std::mutex> lock(mu_);
        auto key = std::make_tuple(d, s, sign);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        std::vector<std::complex<double>> tmp(d == 1 ? size_t(s) : size_t(s) * s);
        fftw_complex* buf = reinterpret_cast<fftw_complex*>(tmp.data());
        fftw_plan plan = d == 1
            ? fftw_plan_dft_1d(s, buf, buf, sign, FFTW_ESTIMATE)
            : fftw_plan_dft_2d(s, s, buf, buf, sign, FFTW_ESTIMATE);
        plans_[key] = plan;
        return plan;
    }

private:
    FftPlans() = default;
    std::mutex mu_;
    std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

inline int parity_of_index(const Box& box, int64_t a) {
    int s = box.side();
    if (box.d == 1) return int(a) & 1;
    return (int(a % s) + int(a / s)) & 1;
}

} // namespace detail

inline Spectrum fourier_forward(const Field& f) {
    if (f.box.boundary != Boundary::periodic)
        throw std::invalid_argument("fourier_forward: spectral ops need a periodic box");
    Spectrum out(f.box);
    for (int64_t a = 0; a < f.size(); ++a) out.v[size_t(a)] = f[a];
    fftw_plan plan = detail::FftPlans::instance().get(f.box.d, f.box.side(), FFTW_FORWARD);
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(out.v.data()),
                     reinterpret_cast<fftw_complex*>(out.v.data()));
    double scale = std::pow(double(f.box.n), -f.box.d);
    for (int64_t a = 0; a < f.size(); ++a) {
        double ph = detail::parity_of_index(f.box, a) ? -scale : scale;
        out.v[size_t(a)] *= ph;
    }
    return out;
}

inline Field fourier_inverse(const Spectrum& spec) {
    std::vector<std::complex<double>> work(spec.v.size());
    for (int64_t a = 0; a < int64_t(spec.v.size()); ++a) {
        double ph = detail::parity_of_index(spec.box, a) ? -1.0 : 1.0;
        work[size_t(a)] = ph * spec.v[size_t(a)];
    }
    fftw_plan plan = detail::FftPlans::instance().get(spec.box.d, spec.box.side(), FFTW_BACKWARD);
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(work.data()),
                     reinterpret_cast<fftw_complex*>(work.data()));
    Field out(spec.box);
    double scale = std::pow(double(spec.box.M), -spec.box.d);
    for (int64_t a = 0; a < out.size(); ++a) out[a] = scale * work[size_t(a)].real();
    return out;
}

// apply a real Fourier multiplier m(k)
template <typename M>
Field apply_multiplier(const Field& f, M&& mult) {
    Spectrum s = fourier_forward(f);
    for (int64_t a = 0; a < int64_t(s.v.size()); ++a) {
        auto k = s.k_of(a);
        s.v[size_t(a)] *= mult(k[0], k[1]);
    }
    return fourier_inverse(s);
}

} // namespace brw
