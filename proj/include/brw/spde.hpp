#pragma once

// Explicit Euler-Maruyama integrator for the d=1 density equation
//   d mu = (Delta^n + xi_e) mu dt + sqrt(kappa mu) dW,
// discretized per site as
//   mu' = mu + dt (Delta^n mu + xi_e mu) + sqrt(kappa max(mu,0) dt/dx) N(0,1)
// with negatives clipped to zero (the clipped mass is tracked). The Dirac
// initial datum is the density n * indicator(0). Observables use the same
// MeasurePath schema as the particle system, with total mass in the
// population column.

#include "core.hpp"
#include "environment.hpp"
#include "particle.hpp"
#include "rng.hpp"

namespace brw {

struct SpdeConfig {
    double kappa = 1.0;
    double dt = 0.0;           // must satisfy dt <= 0.25 dx^2
    double clip_floor = 0.0;
    uint64_t noise_seed = 0;

    void validate(const Box& box) const {
        if (box.d != 1) throw std::invalid_argument("SpdeConfig: d=1 only");
        if (kappa < 0.0) throw std::invalid_argument("SpdeConfig: kappa >= 0");
        double dx = 1.0 / box.n;
        if (dt <= 0.0 || dt > 0.25 * dx * dx + 1e-15)
            throw std::invalid_argument("SpdeConfig: need 0 < dt <= 0.25 dx^2");
    }
};

struct SpdeStepError : std::runtime_error {
    int step;
    explicit SpdeStepError(int k)
        : std::runtime_error("spde_step produced NaN at step " + std::to_string(k)), step(k) {}
};

struct SpdeStats {
    double clipped_mass = 0.0;  // total |clipped| in lattice mass units
    double total_mass_steps = 0.0;
    int steps = 0;

    double clip_fraction() const {
        return total_mass_steps > 0.0 ? clipped_mass / total_mass_steps : 0.0;
    }
};

inline Field spde_step(const Field& mu, const Environment& env, const SpdeConfig& cfg,
                       RngStream& rng, SpdeStats* stats = nullptr) {
    cfg.validate(mu.box);
    const Box& box = mu.box;
    double dx = 1.0 / box.n;
    Field lap = discrete_laplacian(mu);
    Field out(box);
    double noise_scale = std::sqrt(cfg.kappa * cfg.dt / dx);
    double clipped = 0.0;
    for (int64_t a = 0; a < mu.size(); ++a) {
        double drift = lap[a] + env.xi_eff[a] * mu[a];
        double val = mu[a] + cfg.dt * drift +
                     noise_scale * std::sqrt(std::max(mu[a], 0.0)) * rng.normal();
        if (val < cfg.clip_floor) {
            clipped += cfg.clip_floor - val;
            val = cfg.clip_floor;
        }
        out[a] = val;
    }
    if (stats) {
        stats->clipped_mass += clipped * dx;
        double mass = 0.0;
        for (double x : out.v) mass += x;
        stats->total_mass_steps += mass * dx;
        ++stats->steps;
    }
    return out;
}

inline Field spde_dirac_start(const Box& box) {
    Field mu(box);
    mu[box.origin()] = double(box.n);
    return mu;
}

// one path, recording lattice-pair observables at the requested times
inline MeasurePath spde_simulate(const Environment& env, const SpdeConfig& cfg,
                                 const std::vector<double>& obs_times,
                                 const std::vector<Field>& test_fields, RngStream& rng,
                                 SpdeStats* stats = nullptr) {
    cfg.validate(env.box());
    Field mu = spde_dirac_start(env.box());
    MeasurePath path;
    path.values.resize(test_fields.size());
    double t = 0.0;
    int k = 0;
    auto record = [&](double at) {
        path.times.push_back(at);
        path.population.push_back(lattice_pair(mu, Field(env.box(), 1.0)));
        for (size_t f = 0; f < test_fields.size(); ++f)
            path.values[f].push_back(lattice_pair(mu, test_fields[f]));
    };
    for (double target : obs_times) {
        while (t + cfg.dt <= target + 1e-12) {
            mu = spde_step(mu, env, cfg, rng, stats);
            if (!mu.all_finite()) throw SpdeStepError(k);
            t += cfg.dt;
            ++k;
        }
        record(target);
    }
    return path;
}

} // namespace brw
