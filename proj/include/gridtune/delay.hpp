#pragma once

// Delay robustness of homogeneous networks. Each mode lambda_i contributes the
// loop L_i(s) = s c(s) e^{-s tau} / (m s^2 + d s + lambda_i); the network is
// stable iff every L_i has zero winding number about -1.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "gridtune/errors.hpp"
#include "gridtune/netmodel.hpp"

namespace gridtune {

enum class DelayMethod { closed_form_delta0, closed_form_delta_inf, bisection };

inline const char* to_string(DelayMethod m) {
    switch (m) {
        case DelayMethod::closed_form_delta0: return "closed_form_delta0";
        case DelayMethod::closed_form_delta_inf: return "closed_form_delta_inf";
        case DelayMethod::bisection: return "bisection";
    }
    return "unknown";
}

struct DelayReport {
    double tau_rob = std::numeric_limits<double>::infinity();
    DelayMethod method = DelayMethod::bisection;
    /// Largest unit-gain frequency of the worst mode; NaN when the loop gain
    /// never reaches one.
    double crossover_frequency = std::numeric_limits<double>::quiet_NaN();
    /// m pi / (2 sqrt(a^2 + 2 m lambda_n)); NaN when c(s) is not a constant gain a.
    double lower_bound = std::numeric_limits<double>::quiet_NaN();
    /// Constant high-frequency gain a when it exists, else NaN.
    double effective_gain = std::numeric_limits<double>::quiet_NaN();
};

struct WindingOptions {
    double points_per_decade = 40.0;
    double omega_min = 1e-4;
    double omega_max = 1e4;
    double max_phase_step = 0.1;   // rad
    int max_depth = 60;
    double marginal_tol = 1e-9;    // |1 + L| below this is a marginal crossing
};

struct BisectionOptions {
    double tau_max = 1e3;
    double tolerance = 1e-6;
    double d_floor = 1e-9;  // substituted for d == 0
    WindingOptions winding{};
};

namespace detail {

/// Controller value used inside the loop. delta = 0 and delta = +inf are the
/// constant-gain limits nu and r_r_inv.
inline Complex loop_controller(const ControllerConfig& config, Complex s) {
    if (const auto* c = std::get_if<IDroop>(&config)) {
        if (c->delta == 0.0) return c->nu;
        if (std::isinf(c->delta)) return c->r_r_inv;
    }
    return controller_transfer(config, s);
}

/// sup_w |c(jw)|; +inf for the improper virtual inertia law.
inline double controller_peak(const ControllerConfig& config) {
    if (const auto* c = std::get_if<Droop>(&config)) return c->r_r_inv;
    if (std::holds_alternative<VirtualInertia>(config)) return std::numeric_limits<double>::infinity();
    const auto& c = std::get<IDroop>(config);
    if (c.delta == 0.0) return c.nu;
    if (std::isinf(c.delta)) return c.r_r_inv;
    return std::max(c.nu, c.r_r_inv);
}

inline Complex rational_loop(double lambda, double m, double d, const ControllerConfig& config, double omega) {
    const Complex s(0.0, omega);
    const Complex c = loop_controller(config, s);
    if (lambda == 0.0) return c / (m * s + d);
    return s * c / (m * s * s + d * s + lambda);
}

inline std::vector<double> log_grid(double lo, double hi, double per_decade) {
    std::vector<double> g;
    const double decades = std::log10(hi / lo);
    const auto count = static_cast<std::size_t>(std::ceil(decades * per_decade));
    g.reserve(count + 1);
    for (std::size_t k = 0; k <= count; ++k)
        g.push_back(lo * std::pow(10.0, decades * static_cast<double>(k) / static_cast<double>(count)));
    return g;
}

inline std::vector<double> unique_lambdas_desc(std::span<const double> lambdas) {
    std::vector<double> v(lambdas.begin(), lambdas.end());
    std::sort(v.begin(), v.end(), std::greater<>());
    std::vector<double> out;
    for (double l : v)
        if (out.empty() || std::abs(out.back() - l) > 1e-12 * std::max(1.0, std::abs(l))) out.push_back(l);
    return out;
}

class WindingAccumulator {
  public:
    WindingAccumulator(double lambda, double m, double d, const ControllerConfig& config, double tau,
                       const WindingOptions& opt)
        : lambda_(lambda), m_(m), d_(d), config_(config), tau_(tau), opt_(opt) {}

    struct Sample {
        double omega;
        Complex rational;
        Complex loop;
    };

    Sample sample(double omega) const {
        const Complex r = rational_loop(lambda_, m_, d_, config_, omega);
        return {omega, r, r * std::polar(1.0, -omega * tau_)};
    }

    void check(const Sample& s) const {
        if (std::abs(1.0 + s.loop) < opt_.marginal_tol)
            throw MarginalStabilityError("Nyquist locus passes through -1");
    }

    // Accumulates arg(1 + L) from a to b, subdividing as needed.
    void integrate(const Sample& a, const Sample& b, int depth) {
        if (depth < opt_.max_depth && needs_split(a, b)) {
            const Sample mid = sample(0.5 * (a.omega + b.omega));
            check(mid);
            integrate(a, mid, depth + 1);
            integrate(mid, b, depth + 1);
            return;
        }
        phase_ += std::arg((1.0 + b.loop) / (1.0 + a.loop));
    }

    void add_phase(double p) { phase_ += p; }
    double phase() const { return phase_; }

  private:
    bool needs_split(const Sample& a, const Sample& b) const {
        const double width = b.omega - a.omega;
        if (width <= 1e-15 * std::max(1.0, b.omega)) return false;
        const double peak = std::max(std::abs(a.loop), std::abs(b.loop));
        if (std::abs(std::arg((1.0 + b.loop) / (1.0 + a.loop))) > opt_.max_phase_step) return true;
        if (peak >= 0.25 && width * tau_ > opt_.max_phase_step) return true;
        if (peak >= 0.05) {
            if (std::abs(a.rational) == 0.0 || std::abs(b.rational) == 0.0) return true;
            const Complex ratio = b.rational / a.rational;
            if (std::abs(std::arg(ratio)) > opt_.max_phase_step) return true;
            if (std::abs(std::log(std::abs(ratio))) > opt_.max_phase_step) return true;
        }
        return false;
    }

    double lambda_, m_, d_;
    const ControllerConfig& config_;
    double tau_;
    const WindingOptions& opt_;
    double phase_ = 0.0;
};

}  // namespace detail

/// L(jw) = jw c(jw) e^{-jw tau} / (m (jw)^2 + d jw + lambda). The lambda = 0
/// loop is evaluated in its cancelled form c e^{-s tau} / (m s + d).
inline Complex loop_transfer(double lambda, double m, double d, const ControllerConfig& config,
                             double tau, double omega) {
    if (!(d > 0.0)) throw DomainError("loop transfer requires d > 0");
    if (!(m > 0.0)) throw DomainError("loop transfer requires m > 0");
    validate_controller(config);
    return detail::rational_loop(lambda, m, d, config, omega) * std::polar(1.0, -omega * tau);
}

/// Net clockwise encirclements of -1 by L(jw), w in (-inf, inf).
inline int winding_number(double lambda, double m, double d, const ControllerConfig& config,
                          double tau, const WindingOptions& opt = {}) {
    if (!(d > 0.0)) throw DomainError("winding number requires d > 0");
    if (!(m > 0.0)) throw DomainError("winding number requires m > 0");
    if (!(tau >= 0.0)) throw DomainError("delay must be nonnegative");
    validate_controller(config);
    const double cmax = detail::controller_peak(config);
    if (std::isinf(cmax)) throw DomainError("winding number requires a proper, stable controller");
    if (lambda < 0.0) throw DomainError("Laplacian eigenvalues must be nonnegative");

    // Beyond omega_tail, |L| <= 1/2 so 1 + L cannot wind around the origin.
    const double omega_tail = (cmax + std::sqrt(cmax * cmax + m * lambda)) / m;
    const double top = std::max(opt.omega_max, 2.0 * omega_tail);
    std::vector<double> grid{0.0};
    for (double w : detail::log_grid(opt.omega_min, top, opt.points_per_decade)) grid.push_back(w);
    if (lambda > 0.0) grid.push_back(std::sqrt(lambda / m));
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    detail::WindingAccumulator acc(lambda, m, d, config, tau, opt);
    auto prev = acc.sample(grid.front());
    acc.check(prev);
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const auto cur = acc.sample(grid[k]);
        acc.check(cur);
        acc.integrate(prev, cur, 0);
        prev = cur;
    }
    // Tail: 1 + L returns to +1 without encircling the origin.
    acc.add_phase(-std::arg(1.0 + prev.loop));
    // The w < 0 half is the mirror image and contributes the same phase
    // change, so the full contour accumulates twice the half-axis value.
    const double turns = -(2.0 * acc.phase()) / (2.0 * std::numbers::pi);
    return static_cast<int>(std::lround(turns));
}

/// Stable iff every distinct mode has zero winding number.
inline bool is_stable_with_delay(std::span<const double> lambdas, double m, double d,
                                 const ControllerConfig& config, double tau,
                                 const WindingOptions& opt = {}) {
    for (double lambda : detail::unique_lambdas_desc(lambdas))
        if (winding_number(lambda, m, d, config, tau, opt) != 0) return false;
    return true;
}

/// Constant loop gain a in the delta = 0 (a = nu) and delta -> inf or droop
/// (a = r_r_inv) regimes.
inline std::optional<std::pair<double, DelayMethod>> constant_gain_regime(const ControllerConfig& config) {
    if (const auto* c = std::get_if<Droop>(&config)) return std::pair{c->r_r_inv, DelayMethod::closed_form_delta_inf};
    if (const auto* c = std::get_if<IDroop>(&config)) {
        if (c->delta == 0.0) return std::pair{c->nu, DelayMethod::closed_form_delta0};
        if (std::isinf(c->delta)) return std::pair{c->r_r_inv, DelayMethod::closed_form_delta_inf};
    }
    return std::nullopt;
}

/// Largest unit-gain frequency of s a / (m s^2 + d s + lambda).
inline double omega_n(double x, double lambda, double m) {
    return std::sqrt(std::sqrt(x * x + 2.0 * x * lambda / m) + x + lambda / m);
}

inline double tau_rob_lower_bound(double a, double lambda_n, double m) {
    return m * std::numbers::pi / (2.0 * std::sqrt(a * a + 2.0 * m * lambda_n));
}

/// Closed-form delay robustness in the two constant-gain regimes; +inf when
/// a <= d.
inline DelayReport tau_rob_closed(double lambda_n, double m, double d, const ControllerConfig& config) {
    validate_controller(config);
    if (!(m > 0.0) || !(d >= 0.0)) throw DomainError("closed-form delay robustness requires m > 0, d >= 0");
    const auto regime = constant_gain_regime(config);
    if (!regime) throw DomainError("closed-form delay robustness covers only delta = 0 and delta -> inf");
    const auto [a, method] = *regime;
    DelayReport r;
    r.method = method;
    r.effective_gain = a;
    r.lower_bound = tau_rob_lower_bound(a, lambda_n, m);
    if (a <= d) return r;  // tau_rob = +inf, no crossover
    const double x = (a * a - d * d) / (2.0 * m * m);
    r.crossover_frequency = omega_n(x, lambda_n, m);
    r.tau_rob = std::acos(-d / a) / r.crossover_frequency;
    return r;
}

/// Peak of |L(jw)| over w >= 0 for one mode.
inline double peak_loop_gain(double lambda, double m, double d, const ControllerConfig& config) {
    if (auto regime = constant_gain_regime(config)) return regime->first / d;
    const double cmax = detail::controller_peak(config);
    const double tail = (cmax + std::sqrt(cmax * cmax + m * lambda)) / m;
    auto grid = detail::log_grid(1e-6, std::max(1e4, 4.0 * tail), 200.0);
    if (lambda > 0.0) grid.push_back(std::sqrt(lambda / m));
    double best = std::abs(detail::rational_loop(lambda, m, d, config, 0.0));
    for (double w : grid) best = std::max(best, std::abs(detail::rational_loop(lambda, m, d, config, w)));
    return best;
}

/// Largest w with |L(jw)| = 1, if any.
inline std::optional<double> gain_crossover(double lambda, double m, double d, const ControllerConfig& config) {
    const double cmax = detail::controller_peak(config);
    const double tail = (cmax + std::sqrt(cmax * cmax + m * lambda)) / m;
    auto grid = detail::log_grid(1e-6, std::max(1e4, 4.0 * tail), 200.0);
    if (lambda > 0.0) grid.push_back(std::sqrt(lambda / m));
    std::sort(grid.begin(), grid.end());
    auto gain = [&](double w) { return std::abs(detail::rational_loop(lambda, m, d, config, w)) - 1.0; };
    for (std::size_t k = grid.size() - 1; k > 0; --k) {
        if (gain(grid[k - 1]) >= 0.0 && gain(grid[k]) < 0.0) {
            double lo = grid[k - 1], hi = grid[k];
            for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
                const double mid = 0.5 * (lo + hi);
                (gain(mid) >= 0.0 ? lo : hi) = mid;
            }
            return 0.5 * (lo + hi);
        }
    }
    if (gain(grid.front()) >= 0.0) return grid.front();
    return std::nullopt;
}

/// Numeric delay robustness: bracket growth by doubling from 1 s, then
/// bisection on the winding-number stability verdict.
inline DelayReport tau_rob_bisection(std::span<const double> lambdas, double m, double d,
                                     const ControllerConfig& config, const BisectionOptions& opt = {}) {
    if (lambdas.empty()) throw InputError("no eigenvalues supplied");
    if (!(d >= 0.0)) throw DomainError("d must be nonnegative");
    validate_controller(config);
    const double d_eff = d > 0.0 ? d : opt.d_floor;

    auto stable = [&](double tau) {
        try {
            return is_stable_with_delay(lambdas, m, d_eff, config, tau, opt.winding);
        } catch (const MarginalStabilityError&) {
            return false;
        }
    };

    DelayReport r;
    r.method = DelayMethod::bisection;
    const double lambda_n = *std::max_element(lambdas.begin(), lambdas.end());
    if (auto regime = constant_gain_regime(config)) {
        r.effective_gain = regime->first;
        r.lower_bound = tau_rob_lower_bound(regime->first, lambda_n, m);
    }
    double best_cross = -1.0;
    for (double lambda : detail::unique_lambdas_desc(lambdas))
        if (auto w = gain_crossover(lambda, m, d_eff, config)) best_cross = std::max(best_cross, *w);
    if (best_cross > 0.0) r.crossover_frequency = best_cross;

    if (!stable(0.0)) throw StabilityError("network is unstable without delay");

    double lo = 0.0;
    double hi = std::min(1.0, opt.tau_max);
    while (stable(hi)) {
        lo = hi;
        if (hi >= opt.tau_max) {
            double peak = 0.0;
            for (double lambda : detail::unique_lambdas_desc(lambdas))
                peak = std::max(peak, peak_loop_gain(lambda, m, d_eff, config));
            if (peak <= 1.0 + 1e-12) {
                r.tau_rob = std::numeric_limits<double>::infinity();
                r.crossover_frequency = std::numeric_limits<double>::quiet_NaN();
                return r;
            }
            throw Error("delay robustness exceeds the bracket cap tau_max");
        }
        hi = std::min(2.0 * hi, opt.tau_max);
    }
    while (hi - lo > opt.tolerance) {
        const double mid = 0.5 * (lo + hi);
        (stable(mid) ? lo : hi) = mid;
    }
    r.tau_rob = 0.5 * (lo + hi);
    return r;
}

}  // namespace gridtune
