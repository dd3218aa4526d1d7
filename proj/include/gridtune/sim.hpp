#pragma once

// Monte Carlo checks: Euler-Maruyama estimate of lim E[y^T y] under unit
// white noise, and deterministic delayed-feedback impulse responses.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <thread>
#include <vector>

#include "gridtune/delay.hpp"
#include "gridtune/errors.hpp"
#include "gridtune/lyap.hpp"
#include "gridtune/netmodel.hpp"

namespace gridtune {

/// Counter-based generator: output k of stream s is splitmix64(key(s) + k * phi).
/// Streams are independent of scheduling, so parallel runs reproduce exactly.
class CounterRng {
  public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(mix(seed ^ mix(stream + 0x632BE59BD9B4E019ULL))) {}

    std::uint64_t next_u64() { return mix(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

    /// Uniform in (0, 1].
    double next_uniform() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    /// Standard normal via Box-Muller.
    double next_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(next_uniform()));
        const double t = 2.0 * std::numbers::pi * next_uniform();
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

struct SimConfig {
    double dt = 1e-3;
    double horizon = 200.0;
    double burn_in = 50.0;
    std::size_t n_trajectories = 64;
    std::uint64_t seed = 1;
    unsigned threads = 0;  // 0: hardware concurrency
};

struct SimResult {
    double empirical_h2_squared = std::numeric_limits<double>::quiet_NaN();
    double std_error = std::numeric_limits<double>::quiet_NaN();
    bool diverged = false;
    std::size_t samples_per_trajectory = 0;
};

inline void validate_sim_config(const SimConfig& c) {
    if (!(c.dt > 0.0)) throw InputError("sim.dt must be positive");
    if (!(c.horizon > 0.0)) throw InputError("sim.horizon must be positive");
    if (!(c.burn_in >= 0.0) || !(c.burn_in < c.horizon)) throw InputError("sim.burn_in must lie in [0, horizon)");
    if (c.n_trajectories == 0) throw InputError("sim.n_trajectories must be positive");
}

/// Euler-Maruyama dx = A x dt + B dW on the deflated model, x(0) = 0.
inline SimResult simulate_sde(const StateSpaceModel& model, const SimConfig& config) {
    validate_sim_config(config);
    const DeflatedModel red = deflate_zero_mode(model);
    const auto N = red.A.rows();
    const Complex rightmost = rightmost_eigenvalue(red.A);
    if (!(rightmost.real() < -kDefaultHurwitzMargin))
        throw StabilityError("model is not stable after zero-mode deflation", rightmost);
    const Eigen::VectorXcd eig = red.A.eigenvalues();
    const double fastest = eig.cwiseAbs().maxCoeff();
    if (fastest > 0.0 && config.dt > 0.1 / fastest)
        throw InputError("sim.dt exceeds 0.1 x fastest time constant of the model");

    const auto steps = static_cast<std::size_t>(std::llround(config.horizon / config.dt));
    const auto burn = static_cast<std::size_t>(std::llround(config.burn_in / config.dt));
    SimResult result;
    result.samples_per_trajectory = steps - burn;

    if (red.B.isZero(0.0)) {
        result.empirical_h2_squared = 0.0;
        result.std_error = 0.0;
        return result;
    }

    const Matrix step_A = Matrix::Identity(N, N) + red.A * config.dt;
    const Matrix step_B = red.B * std::sqrt(config.dt);
    const Matrix& C = red.C;
    const auto inputs = red.B.cols();

    const std::size_t K = config.n_trajectories;
    std::vector<double> means(K, 0.0);
    std::vector<char> diverged(K, 0);

    auto run = [&](std::size_t k) {
        CounterRng rng(config.seed, k);
        Vector x = Vector::Zero(N), next(N), w(inputs);
        CompensatedSum acc;
        for (std::size_t t = 1; t <= steps; ++t) {
            for (Eigen::Index j = 0; j < inputs; ++j) w(j) = rng.next_normal();
            next.noalias() = step_A * x;
            next.noalias() += step_B * w;
            x.swap(next);
            if (t > burn) acc.add((C * x).squaredNorm());
            if ((t & 1023) == 0 && !(x.squaredNorm() < 1e24)) {
                diverged[k] = 1;
                return;
            }
        }
        means[k] = acc.value() / static_cast<double>(steps - burn);
    };

    unsigned workers = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, K));
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t k = w; k < K; k += workers) run(k);
        });
    for (auto& th : pool) th.join();

    if (std::any_of(diverged.begin(), diverged.end(), [](char c) { return c != 0; })) {
        result.diverged = true;
        return result;
    }
    CompensatedSum total;
    for (double m : means) total.add(m);
    const double mean = total.value() / static_cast<double>(K);
    result.empirical_h2_squared = mean;
    if (K > 1) {
        CompensatedSum sq;
        for (double m : means) sq.add((m - mean) * (m - mean));
        result.std_error = std::sqrt(sq.value() / static_cast<double>(K - 1) / static_cast<double>(K));
    } else {
        result.std_error = std::numeric_limits<double>::infinity();
    }
    return result;
}

// =============================================================================
// Delayed feedback
// =============================================================================

struct DelaySimOptions {
    double dt = 1e-3;
    double horizon = 100.0;
    double window_fraction = 0.2;  // trailing window inspected for growth
    std::size_t windows = 5;
};

struct DelaySimResult {
    bool diverged = false;
    double peak = 0.0;  // max |omega'| over modes and time
    double dt_used = 0.0;
};

/// Impulse response of every mode with omega'(0) = 1 and zero history; the
/// controller sees omega'(t - tau) from a ring buffer. Integrated with Heun's
/// method on a step that divides tau exactly. Diverged iff the peak |omega'|
/// grows strictly across consecutive sub-windows of the trailing window, or
/// the state blows up.
inline DelaySimResult simulate_delayed(std::span<const double> lambdas, double m, double d,
                                       const ControllerConfig& config, double tau,
                                       const DelaySimOptions& opt = {}) {
    validate_controller(config);
    if (std::holds_alternative<VirtualInertia>(config))
        throw DomainError("delayed simulation requires a proper controller");
    if (!(tau >= 0.0)) throw DomainError("delay must be nonnegative");
    if (!(opt.dt > 0.0) || !(opt.horizon > 0.0)) throw InputError("dt and horizon must be positive");
    if (opt.windows < 2) throw InputError("need at least two windows");

    std::size_t delay_steps = 0;
    double dt = opt.dt;
    if (tau > 0.0) {
        delay_steps = static_cast<std::size_t>(std::ceil(tau / opt.dt - 1e-9));
        dt = tau / static_cast<double>(delay_steps);
    }
    const auto steps = static_cast<std::size_t>(std::ceil(opt.horizon / dt));
    const auto window_start = static_cast<std::size_t>(
        std::floor(static_cast<double>(steps) * (1.0 - opt.window_fraction)));

    // Controller: x = z - nu * w_d, z' = delta (nu - r) w_d - delta z.
    // Constant gain a: x = -a * w_d (z unused).
    double nu = 0.0, delta = 0.0, r = 0.0;
    bool constant_gain = true;
    double gain = 0.0;
    if (const auto* c = std::get_if<Droop>(&config)) {
        gain = c->r_r_inv;
    } else {
        const auto& id = std::get<IDroop>(config);
        if (id.delta == 0.0)
            gain = id.nu;
        else if (std::isinf(id.delta))
            gain = id.r_r_inv;
        else {
            constant_gain = false;
            nu = id.nu;
            delta = id.delta;
            r = id.r_r_inv;
        }
    }

    DelaySimResult out;
    out.dt_used = dt;
    const std::size_t window_len = std::max<std::size_t>(1, (steps - window_start) / opt.windows);

    struct State {
        double theta, omega, z;
    };
    for (double lambda : detail::unique_lambdas_desc(lambdas)) {
        auto deriv = [&](const State& s, double omega_d) {
            const double x = constant_gain ? -gain * omega_d : s.z - nu * omega_d;
            State ds{};
            ds.theta = s.omega;
            ds.omega = (-d * s.omega - lambda * s.theta + x) / m;
            ds.z = constant_gain ? 0.0 : delta * (nu - r) * omega_d - delta * s.z;
            return ds;
        };
        // history[k] = omega at step k; omega = 0 for t < 0.
        std::vector<double> history(delay_steps + 1, 0.0);
        auto delayed = [&](std::size_t k) -> double {
            if (k < delay_steps) return 0.0;
            return history[(k - delay_steps) % history.size()];
        };
        State s{0.0, 1.0, 0.0};
        history[0] = s.omega;
        std::vector<double> peaks(opt.windows, 0.0);
        for (std::size_t k = 0; k < steps; ++k) {
            const double wd0 = delayed(k);
            const State k1 = deriv(s, wd0);
            const State pred{s.theta + dt * k1.theta, s.omega + dt * k1.omega, s.z + dt * k1.z};
            const double wd1 = delay_steps == 0 ? pred.omega : delayed(k + 1);
            const State k2 = deriv(pred, wd1);
            s.theta += 0.5 * dt * (k1.theta + k2.theta);
            s.omega += 0.5 * dt * (k1.omega + k2.omega);
            s.z += 0.5 * dt * (k1.z + k2.z);
            history[(k + 1) % history.size()] = s.omega;

            const double mag = std::abs(s.omega);
            if (!std::isfinite(mag) || mag > 1e12) {
                out.diverged = true;
                out.peak = std::numeric_limits<double>::infinity();
                return out;
            }
            out.peak = std::max(out.peak, mag);
            if (k + 1 >= window_start) {
                const std::size_t w = std::min(opt.windows - 1, (k + 1 - window_start) / window_len);
                peaks[w] = std::max(peaks[w], mag);
            }
        }
        bool growing = true;
        for (std::size_t w = 1; w < opt.windows; ++w)
            if (!(peaks[w] > peaks[w - 1])) growing = false;
        if (growing) out.diverged = true;
    }
    return out;
}

}  // namespace gridtune
