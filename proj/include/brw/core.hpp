#pragma once

// Lattice geometry and fields. The computational domain is the box
// [-M/2, M/2)^d intersected with the scaled lattice (1/n)Z^d, so there are
// s = M*n sites per side at spacing 1/n. Boundary handling is either a
// periodic wrap or a zero exterior (dirichlet).

#include <vector>
#include <array>
#include <string>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <algorithm>

namespace brw {

enum class Boundary { periodic, dirichlet };

constexpr int64_t kMaxSites = int64_t(1) << 22;

struct Box {
    int d = 1;          // dimension, 1 or 2
    int n = 1;          // lattice scale: spacing 1/n
    int M = 4;          // physical side length, positive even integer
    Boundary boundary = Boundary::periodic;

    int side() const { return M * n; }
    int64_t sites() const {
        int64_t s = side();
        return d == 1 ? s : s * s;
    }

    void validate() const {
        if (d != 1 && d != 2) throw std::invalid_argument("Box: d must be 1 or 2");
        if (n < 1) throw std::invalid_argument("Box: n must be >= 1");
        if (M < 2 || M % 2 != 0) throw std::invalid_argument("Box: M must be a positive even integer");
        int s = side();
        if (s % 2 != 0 || s < 4) throw std::invalid_argument("Box: sites per side must be even and >= 4");
        if (sites() > kMaxSites) throw std::invalid_argument("Box: site count exceeds dense-array limit");
    }

    // integer offsets j in [-s/2, s/2), site coordinate x = j/n
    int offset_of_index(int a) const { return a - side() / 2; }
    int index_of_offset(int j) const { return j + side() / 2; }

    double coord(int a) const { return double(offset_of_index(a)) / n; }

    // flat index: (iy, ix) row-major for d=2, ix fastest
    int64_t flat(int ix, int iy = 0) const {
        return d == 1 ? ix : int64_t(iy) * side() + ix;
    }

    // site of the origin x = 0
    int64_t origin() const {
        int c = index_of_offset(0);
        return d == 1 ? c : flat(c, c);
    }

    bool same_geometry(const Box& o) const {
        return d == o.d && n == o.n && M == o.M;
    }
};

struct Field {
    Box box;
    std::vector<double> v;

    Field() = default;
    explicit Field(const Box& b, double fill = 0.0) : box(b), v(size_t(b.sites()), fill) {}

    double& operator[](int64_t i) { return v[size_t(i)]; }
    double operator[](int64_t i) const { return v[size_t(i)]; }
    int64_t size() const { return int64_t(v.size()); }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

inline void require_same_box(const Field& f, const Field& g, const char* what) {
    if (!f.box.same_geometry(g.box))
        throw std::invalid_argument(std::string(what) + ": box mismatch");
}

// Build a field from x -> value
template <typename F>
Field make_field(const Box& box, F&& fn) {
    Field out(box);
    int s = box.side();
    if (box.d == 1) {
        for (int ix = 0; ix < s; ++ix) out[ix] = fn(std::array<double, 2>{box.coord(ix), 0.0});
    } else {
        for (int iy = 0; iy < s; ++iy)
            for (int ix = 0; ix < s; ++ix)
                out[box.flat(ix, iy)] = fn(std::array<double, 2>{box.coord(ix), box.coord(iy)});
    }
    return out;
}

namespace detail {

// Visit the 2d nearest neighbors of flat index a. The callback receives the
// neighbor flat index, or -1 when the neighbor lies outside a dirichlet box.
template <typename F>
inline void for_neighbors(const Box& box, int64_t a, F&& cb) {
    int s = box.side();
    bool per = box.boundary == Boundary::periodic;
    if (box.d == 1) {
        int ix = int(a);
        if (ix + 1 < s) cb(a + 1); else cb(per ? int64_t(0) : int64_t(-1));
        if (ix - 1 >= 0) cb(a - 1); else cb(per ? int64_t(s - 1) : int64_t(-1));
    } else {
        int ix = int(a % s), iy = int(a / s);
        if (ix + 1 < s) cb(a + 1); else cb(per ? a - (s - 1) : int64_t(-1));
        if (ix - 1 >= 0) cb(a - 1); else cb(per ? a + (s - 1) : int64_t(-1));
        if (iy + 1 < s) cb(a + s); else cb(per ? int64_t(ix) : int64_t(-1));
        if (iy - 1 >= 0) cb(a - s); else cb(per ? int64_t(s - 1) * s + ix : int64_t(-1));
    }
}

} // namespace detail

// Delta^n f(x) = n^2 sum over nearest neighbors of (f(y) - f(x));
// exterior values count as 0 in dirichlet mode.
inline Field discrete_laplacian(const Field& f) {
    Field out(f.box);
    double n2 = double(f.box.n) * f.box.n;
    for (int64_t a = 0; a < f.size(); ++a) {
        double acc = 0.0;
        detail::for_neighbors(f.box, a, [&](int64_t b) {
            acc += (b >= 0 ? f[b] : 0.0) - f[a];
        });
        out[a] = n2 * acc;
    }
    return out;
}

// Forward differences (grad^n f)_i(x) = n (f(x + e_i/n) - f(x)), one field
// per coordinate.
inline std::vector<Field> discrete_gradient(const Field& f) {
    const Box& box = f.box;
    int s = box.side();
    bool per = box.boundary == Boundary::periodic;
    double n = box.n;
    std::vector<Field> out;
    for (int dim = 0; dim < box.d; ++dim) out.emplace_back(box);
    for (int64_t a = 0; a < f.size(); ++a) {
        int ix = box.d == 1 ? int(a) : int(a % s);
        int iy = box.d == 1 ? 0 : int(a / s);
        {
            double fw = (ix + 1 < s) ? f[a + 1] : (per ? f[a - (s - 1)] : 0.0);
            out[0][a] = n * (fw - f[a]);
        }
        if (box.d == 2) {
            double fw = (iy + 1 < s) ? f[a + s] : (per ? f[int64_t(ix)] : 0.0);
            out[1][a] = n * (fw - f[a]);
        }
    }
    return out;
}

// Carre du champ of the walk generator: n^2 sum over the 2d neighbors of
// (f(y) - f(x))^2, exterior values 0 in dirichlet mode. This is
// Delta^n(f^2) - 2 f Delta^n f and is the exact jump-variance weight of the
// simulated process, which forward differences alone are not.
inline Field carre_du_champ(const Field& f) {
    Field out(f.box);
    double n2 = double(f.box.n) * f.box.n;
    for (int64_t a = 0; a < f.size(); ++a) {
        double acc = 0.0;
        detail::for_neighbors(f.box, a, [&](int64_t b) {
            double dd = (b >= 0 ? f[b] : 0.0) - f[a];
            acc += dd * dd;
        });
        out[a] = n2 * acc;
    }
    return out;
}

// <f, g>_n = n^{-d} sum_x f(x) g(x)
inline double lattice_pair(const Field& f, const Field& g) {
    require_same_box(f, g, "lattice_pair");
    double acc = 0.0;
    for (int64_t a = 0; a < f.size(); ++a) acc += f[a] * g[a];
    return acc * std::pow(double(f.box.n), -f.box.d);
}

// counting pairing (f, g) = sum_x f(x) g(x), no n^{-d}
inline double counting_pair(const Field& f, const Field& g) {
    require_same_box(f, g, "counting_pair");
    double acc = 0.0;
    for (int64_t a = 0; a < f.size(); ++a) acc += f[a] * g[a];
    return acc;
}

// ---------------------------------------------------------------- weights

enum class WeightKind { polynomial, exponential };

struct WeightSpec {
    WeightKind kind = WeightKind::polynomial;
    double parameter = 0.0;  // a >= 0 for p(a), any real l for e(l)
    double sigma = 0.5;      // exponent in |x|^sigma, in (0,1)

    void validate() const {
        if (kind == WeightKind::polynomial && parameter < 0)
            throw std::invalid_argument("WeightSpec: polynomial weight needs a >= 0");
        if (sigma <= 0.0 || sigma >= 1.0)
            throw std::invalid_argument("WeightSpec: sigma must lie in (0,1)");
    }

    double operator()(double abs_x) const {
        if (kind == WeightKind::polynomial) return std::pow(1.0 + abs_x, -parameter);
        return std::exp(-parameter * std::pow(abs_x, sigma));
    }
};

inline Field weight_field(const Box& box, const WeightSpec& spec) {
    spec.validate();
    return make_field(box, [&](std::array<double, 2> x) {
        double r = box.d == 1 ? std::abs(x[0]) : std::hypot(x[0], x[1]);
        return spec(r);
    });
}

// C^2 smoothstep: 0 for t<=0, 1 for t>=1, t^3(10-15t+6t^2) in between.
// Shared by the spectral cutoff and the dyadic partition profiles.
inline double smoothstep(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

inline double sup_norm(const Field& f) {
    double m = 0.0;
    for (double x : f.v) m = std::max(m, std::abs(x));
    return m;
}

inline double oscillation(const Field& f) {
    auto [lo, hi] = std::minmax_element(f.v.begin(), f.v.end());
    return *hi - *lo;
}

} // namespace brw
