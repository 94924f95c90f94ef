#pragma once

// Exact event-driven simulation of the branching random walk in random
// environment. Per particle at x the channels are: jump to each of the 2d
// neighbors at rate n^2, birth at rate (xi_e)_+(x), death at rate
// (xi_e)_-(x), and in offspring mode replacement of one particle by k at
// rate n^rho p_k (k = 1 is a no-op and is excluded from the event rate).
//
// Site rates live in a binary indexed tree, so sampling the next event and
// updating after it are O(log sites). A hard population cap guards against
// supercritical islands (growth there is genuine, not a bug).

#include "core.hpp"
#include "environment.hpp"
#include "rng.hpp"

#include <map>
#include <optional>

namespace brw {

enum class BranchingMode { binary, offspring };

struct BranchingSpec {
    BranchingMode mode = BranchingMode::binary;
    double rho = 0.0;
    std::vector<double> offspring_probs;  // p_0, p_1, p_2, ... (offspring mode)

    void validate() const {
        if (rho < 0.0) throw std::invalid_argument("BranchingSpec: rho >= 0");
        if (mode == BranchingMode::offspring) {
            if (offspring_probs.empty())
                throw std::invalid_argument("BranchingSpec: offspring mode needs probabilities");
            double sum = 0.0, mean = 0.0;
            for (size_t k = 0; k < offspring_probs.size(); ++k) {
                if (offspring_probs[k] < 0.0)
                    throw std::invalid_argument("BranchingSpec: negative offspring probability");
                sum += offspring_probs[k];
                mean += double(k) * offspring_probs[k];
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw std::invalid_argument("BranchingSpec: offspring probabilities must sum to 1");
            if (std::abs(mean - 1.0) > 1e-12)
                throw std::invalid_argument("BranchingSpec: offspring mean must be 1 (critical)");
        }
    }

    // variance of the offspring distribution, Psi''(1)
    double sigma2() const {
        if (mode != BranchingMode::offspring) return 0.0;
        double s = 0.0;
        for (size_t k = 0; k < offspring_probs.size(); ++k)
            s += double(k) * double(k - 1) * offspring_probs[k];
        return s;
    }
};

// floor(n^rho) with a guard against 1.9999... artifacts of pow
inline int64_t floor_pow(int n, double rho) {
    return int64_t(std::floor(std::pow(double(n), rho) + 1e-12));
}

struct ParticleState {
    Box box;
    std::vector<int64_t> counts;
    int64_t population = 0;
    double time = 0.0;

    explicit ParticleState(const Box& b) : box(b), counts(size_t(b.sites()), 0) {}

    // sparse view, zero-count entries omitted
    std::map<int64_t, int64_t> occupation() const {
        std::map<int64_t, int64_t> occ;
        for (int64_t a = 0; a < int64_t(counts.size()); ++a)
            if (counts[size_t(a)] > 0) occ[a] = counts[size_t(a)];
        return occ;
    }
};

inline ParticleState init_state(const Box& box, double rho) {
    ParticleState st(box);
    int64_t n0 = floor_pow(box.n, rho);
    st.counts[size_t(box.origin())] = n0;
    st.population = n0;
    return st;
}

struct PopulationCapError : std::runtime_error {
    PopulationCapError(int64_t pop, double t)
        : std::runtime_error("population cap exceeded: " + std::to_string(pop) +
                             " at t=" + std::to_string(t)) {}
};

enum class EventType { jump, birth, death, offspring, killed };

struct EventRecord {
    double time = 0.0;
    EventType type = EventType::jump;
    int64_t site = 0;
    int delta_population = 0;
};

namespace detail {

class Fenwick {
public:
    explicit Fenwick(int64_t n) : n_(n), tree_(size_t(n) + 1, 0.0) {}

    void add(int64_t i, double delta) {
        for (int64_t k = i + 1; k <= n_; k += k & -k) tree_[size_t(k)] += delta;
    }

    double total() const {
        double acc = 0.0;
        for (int64_t k = n_; k > 0; k -= k & -k) acc += tree_[size_t(k)];
        return acc;
    }

    // smallest index with prefix sum > u; u in [0, total)
    int64_t search(double u) const {
        int64_t pos = 0;
        int64_t mask = 1;
        while (mask * 2 <= n_) mask *= 2;
        for (; mask > 0; mask /= 2) {
            int64_t next = pos + mask;
            if (next <= n_ && tree_[size_t(next)] <= u) {
                u -= tree_[size_t(next)];
                pos = next;
            }
        }
        return std::min(pos, n_ - 1);
    }

private:
    int64_t n_;
    std::vector<double> tree_;
};

} // namespace detail

// Event engine for one path. The optional kill side length L (even, <= M)
// removes particles whose jump lands outside the open box (-L/2, L/2)^d;
// a dirichlet box kills at its own edge even without L.
class BrwEngine {
public:
    BrwEngine(ParticleState state, const Environment& env, const BranchingSpec& spec,
              std::optional<int> kill_L = std::nullopt, int64_t population_cap = 10'000'000)
        : st_(std::move(state)), env_(&env), spec_(spec), cap_(population_cap),
          rates_(st_.box.sites()) {
        spec.validate();
        if (!st_.box.same_geometry(env.box()))
            throw std::invalid_argument("BrwEngine: state/environment box mismatch");
        if (kill_L) {
            if (*kill_L % 2 != 0 || *kill_L > st_.box.M || *kill_L < 2)
                throw std::invalid_argument("BrwEngine: kill box side must be even, 2 <= L <= M");
            kill_offset_ = *kill_L * st_.box.n / 2;  // kill when |j| >= this
        } else if (st_.box.boundary == Boundary::dirichlet) {
            // full-box dirichlet: every stored site is alive, jumps leaving
            // the stored box remove the particle (matches the zero-exterior
            // Hamiltonian on the full box)
            kill_at_box_edge_ = true;
        }
        const Box& b = st_.box;
        jump_rate_total_ = 2.0 * b.d * double(b.n) * b.n;
        offspring_rate_ = 0.0;
        if (spec_.mode == BranchingMode::offspring) {
            double p1 = spec_.offspring_probs.size() > 1 ? spec_.offspring_probs[1] : 0.0;
            offspring_rate_ = std::pow(double(b.n), spec_.rho) * (1.0 - p1);
        }
        weights_.resize(size_t(b.sites()));
        for (int64_t a = 0; a < b.sites(); ++a) {
            weights_[size_t(a)] =
                jump_rate_total_ + std::abs(env.xi_eff[a]) + offspring_rate_;
            if (st_.counts[size_t(a)] > 0) {
                if (kill_offset_ && !inside_kill_box(a))
                    throw std::invalid_argument("BrwEngine: initial support outside kill box");
                rates_.add(a, st_.counts[size_t(a)] * weights_[size_t(a)]);
            }
        }
    }

    const ParticleState& state() const { return st_; }

    // advance by one event; returns nothing when the state is absorbing
    std::optional<EventRecord> step(RngStream& rng) {
        if (st_.population == 0) return std::nullopt;
        if (st_.population > cap_) throw PopulationCapError(st_.population, st_.time);
        double total = rates_.total();
        st_.time += rng.exponential(total);
        int64_t x = pick_site(rng.u01() * total);
        double u = rng.u01() * weights_[size_t(x)];
        EventRecord rec;
        rec.time = st_.time;
        rec.site = x;
        const Box& b = st_.box;
        double n2 = double(b.n) * b.n;
        if (u < jump_rate_total_) {
            int dir = std::min(int(u / n2), 2 * b.d - 1);
            auto [target, alive] = jump_target(x, dir);
            change_count(x, -1);
            if (alive) {
                change_count(target, +1);
                rec.type = EventType::jump;
                rec.site = target;
                rec.delta_population = 0;
            } else {
                rec.type = EventType::killed;
                rec.delta_population = -1;
            }
        } else if (u < jump_rate_total_ + std::max(env_->xi_eff[x], 0.0)) {
            change_count(x, +1);
            rec.type = EventType::birth;
            rec.delta_population = +1;
        } else if (u < jump_rate_total_ + std::abs(env_->xi_eff[x])) {
            change_count(x, -1);
            rec.type = EventType::death;
            rec.delta_population = -1;
        } else {
            int k = sample_offspring(rng);
            change_count(x, k - 1);
            rec.type = EventType::offspring;
            rec.delta_population = k - 1;
        }
        return rec;
    }

    // run until target_time, no recording
    void run_until(double target_time, RngStream& rng) {
        while (st_.population > 0) {
            double total = rates_.total();
            if (total <= 0.0) break;
            // peek the waiting time; commit only if the event precedes target
            double tau = rng.exponential(total);
            if (st_.time + tau > target_time) {
                st_.time = target_time;
                return;
            }
            if (st_.population > cap_) throw PopulationCapError(st_.population, st_.time);
            st_.time += tau;
            execute_event(rng);
        }
        st_.time = target_time;
    }

private:
    // Fenwick search plus a guard against landing on an empty site through
    // floating-point roundoff in the incremental rate updates
    int64_t pick_site(double u) const {
        int64_t x = rates_.search(u);
        if (st_.counts[size_t(x)] > 0) return x;
        for (int64_t k = 1; k < int64_t(st_.counts.size()); ++k) {
            if (x + k < int64_t(st_.counts.size()) && st_.counts[size_t(x + k)] > 0) return x + k;
            if (x - k >= 0 && st_.counts[size_t(x - k)] > 0) return x - k;
        }
        throw std::logic_error("BrwEngine: no occupied site found");
    }

    void execute_event(RngStream& rng) {
        double total = rates_.total();
        int64_t x = pick_site(rng.u01() * total);
        double u = rng.u01() * weights_[size_t(x)];
        const Box& b = st_.box;
        double n2 = double(b.n) * b.n;
        if (u < jump_rate_total_) {
            int dir = std::min(int(u / n2), 2 * b.d - 1);
            auto [target, alive] = jump_target(x, dir);
            change_count(x, -1);
            if (alive) change_count(target, +1);
        } else if (u < jump_rate_total_ + std::max(env_->xi_eff[x], 0.0)) {
            change_count(x, +1);
        } else if (u < jump_rate_total_ + std::abs(env_->xi_eff[x])) {
            change_count(x, -1);
        } else {
            int k = sample_offspring(rng);
            change_count(x, k - 1);
        }
    }

    int sample_offspring(RngStream& rng) {
        // conditioned on k != 1
        double p1 = spec_.offspring_probs.size() > 1 ? spec_.offspring_probs[1] : 0.0;
        double u = rng.u01() * (1.0 - p1);
        double acc = 0.0;
        for (size_t k = 0; k < spec_.offspring_probs.size(); ++k) {
            if (k == 1) continue;
            acc += spec_.offspring_probs[k];
            if (u < acc) return int(k);
        }
        return int(spec_.offspring_probs.size()) - 1;
    }

    bool inside_kill_box(int64_t a) const {
        const Box& b = st_.box;
        int s = b.side();
        int jx = (b.d == 1 ? int(a) : int(a % s)) - s / 2;
        if (std::abs(jx) >= kill_offset_) return false;
        if (b.d == 2) {
            int jy = int(a / s) - s / 2;
            if (std::abs(jy) >= kill_offset_) return false;
        }
        return true;
    }

    // target site of a jump in direction dir; alive=false when the particle
    // leaves the kill region (or a dirichlet box edge)
    std::pair<int64_t, bool> jump_target(int64_t a, int dir) const {
        const Box& b = st_.box;
        int s = b.side();
        int ix = b.d == 1 ? int(a) : int(a % s);
        int iy = b.d == 1 ? 0 : int(a / s);
        int jx = ix, jy = iy;
        switch (dir) {
            case 0: jx = ix + 1; break;
            case 1: jx = ix - 1; break;
            case 2: jy = iy + 1; break;
            case 3: jy = iy - 1; break;
        }
        bool wrapped = false;
        auto wrap = [&](int i) {
            if (i < 0) { wrapped = true; return i + s; }
            if (i >= s) { wrapped = true; return i - s; }
            return i;
        };
        jx = wrap(jx);
        jy = wrap(jy);
        int64_t t = b.d == 1 ? jx : b.flat(jx, jy);
        if (kill_at_box_edge_ && wrapped) return {t, false};
        if (kill_offset_ && (wrapped || !inside_kill_box(t))) return {t, false};
        return {t, true};
    }

    void change_count(int64_t a, int64_t delta) {
        st_.counts[size_t(a)] += delta;
        st_.population += delta;
        rates_.add(a, double(delta) * weights_[size_t(a)]);
    }

    ParticleState st_;
    const Environment* env_;
    BranchingSpec spec_;
    int64_t cap_;
    detail::Fenwick rates_;
    std::vector<double> weights_;
    double jump_rate_total_ = 0.0;
    double offspring_rate_ = 0.0;
    int kill_offset_ = 0;          // explicit kill box: kill when |j| >= this
    bool kill_at_box_edge_ = false;
};

// Time series of measure observables <mu_t, phi> = normalizer^{-1} sum u phi
// for each test field, plus the population.
struct MeasurePath {
    std::vector<double> times;
    std::vector<std::vector<double>> values;  // [field][time index]
    std::vector<double> population;
};

inline MeasurePath simulate_path_engine(BrwEngine& engine, int64_t normalizer,
                                        const std::vector<double>& obs_times,
                                        const std::vector<Field>& test_fields,
                                        RngStream& rng) {
    if (normalizer < 1) throw std::invalid_argument("simulate_path: normalizer >= 1");
    for (size_t i = 1; i < obs_times.size(); ++i)
        if (obs_times[i] < obs_times[i - 1])
            throw std::invalid_argument("simulate_path: obs_times must be sorted");
    MeasurePath path;
    path.values.resize(test_fields.size());
    for (double t : obs_times) {
        engine.run_until(t, rng);
        const ParticleState& st = engine.state();
        path.times.push_back(t);
        path.population.push_back(double(st.population));
        for (size_t f = 0; f < test_fields.size(); ++f) {
            double acc = 0.0;
            for (int64_t a = 0; a < int64_t(st.counts.size()); ++a)
                if (st.counts[size_t(a)] != 0) acc += double(st.counts[size_t(a)]) * test_fields[f][a];
            path.values[f].push_back(acc / double(normalizer));
        }
    }
    return path;
}

inline MeasurePath simulate_path(const ParticleState& state0, const Environment& env,
                                 const BranchingSpec& spec, const std::vector<double>& obs_times,
                                 const std::vector<Field>& test_fields, RngStream& rng,
                                 int64_t normalizer = 0, int64_t population_cap = 10'000'000) {
    BrwEngine engine(state0, env, spec, std::nullopt, population_cap);
    if (normalizer == 0) normalizer = std::max<int64_t>(1, floor_pow(env.box().n, spec.rho));
    return simulate_path_engine(engine, normalizer, obs_times, test_fields, rng);
}

inline MeasurePath killed_simulate(const ParticleState& state0, const Environment& env,
                                   const BranchingSpec& spec, int L,
                                   const std::vector<double>& obs_times,
                                   const std::vector<Field>& test_fields, RngStream& rng,
                                   int64_t normalizer = 0, int64_t population_cap = 10'000'000) {
    BrwEngine engine(state0, env, spec, L, population_cap);
    if (normalizer == 0) normalizer = std::max<int64_t>(1, floor_pow(env.box().n, spec.rho));
    return simulate_path_engine(engine, normalizer, obs_times, test_fields, rng);
}

} // namespace brw
