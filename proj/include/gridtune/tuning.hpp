#pragma once

// iDroop tuning: optimal high-frequency gain, the improvement interval over
// droop, lead/lag classification, and parameter sweeps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gridtune/closedform.hpp"
#include "gridtune/delay.hpp"
#include "gridtune/errors.hpp"

namespace gridtune {

/// nu* = -d + sqrt(d^2 + (k_p / k_w)^2), the minimizer of g(nu) on nu >= 0.
inline double optimal_nu(double d, double k_p, double k_w) {
    if (!(k_w > 0.0))
        throw UnboundedOptimumError(
            "k_w = 0: g(nu) decreases for all nu; choose nu as large as other constraints allow");
    const double ratio = k_p / k_w;
    return -d + std::sqrt(d * d + ratio * ratio);
}

/// (k_p / k_w)^2 - (2 r d + r^2). Positive: lead regime. Negative: lag.
inline double threshold_gap(double d, double r_r_inv, double k_p, double k_w) {
    const double threshold = 2.0 * r_r_inv * d + r_r_inv * r_r_inv;
    if (k_w == 0.0) return k_p > 0.0 ? std::numeric_limits<double>::infinity() : -threshold;
    const double ratio = k_p / k_w;
    return ratio * ratio - threshold;
}

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
    bool lower_closed = false;
    bool upper_closed = false;
    bool empty = true;

    bool contains(double x, double slack = 1e-12) const {
        if (empty) return false;
        const bool above = lower_closed ? x >= lower : x > lower + slack;
        const bool below = upper_closed ? x <= upper : x < upper - slack;
        return above && below;
    }
};

namespace detail {
inline bool degenerate_gap(double gap, double d, double r_r_inv) {
    return std::abs(gap) <= 1e-12 * std::max(1.0, 2.0 * r_r_inv * d + r_r_inv * r_r_inv);
}
}  // namespace detail

/// Set of nu with alpha1 > 0, i.e. iDroop strictly beats droop for every
/// delta >= 0. Open between the roots nu1 = r and
/// nu2 = ((k_p/k_w)^2 - r d) / (d + r), clipped to nu >= 0.
inline Interval improvement_interval(double d, double r_r_inv, double k_p, double k_w) {
    Interval out;
    const double gap = threshold_gap(d, r_r_inv, k_p, k_w);
    if (detail::degenerate_gap(gap, d, r_r_inv)) return out;
    const double nu1 = r_r_inv;
    double nu2;
    if (k_w == 0.0) {
        nu2 = k_p > 0.0 ? std::numeric_limits<double>::infinity() : -r_r_inv * d / (d + r_r_inv);
    } else {
        const double ratio = k_p / k_w;
        nu2 = (ratio * ratio - r_r_inv * d) / (d + r_r_inv);
    }
    out.empty = false;
    if (nu1 < nu2) {
        out.lower = nu1;
        out.upper = nu2;
    } else {
        out.upper = nu1;
        if (nu2 < 0.0) {
            out.lower = 0.0;
            out.lower_closed = true;
        } else {
            out.lower = nu2;
        }
    }
    return out;
}

/// The bracket [nu*, r) or (r, nu*] stated with the optimum as the closed end.
inline Interval optimum_bracket(double d, double r_r_inv, double k_p, double k_w) {
    Interval out;
    const double gap = threshold_gap(d, r_r_inv, k_p, k_w);
    if (detail::degenerate_gap(gap, d, r_r_inv) || k_w == 0.0) return out;
    const double nu_star = optimal_nu(d, k_p, k_w);
    out.empty = false;
    if (nu_star < r_r_inv) {
        out = {nu_star, r_r_inv, true, false, false};
    } else {
        out = {r_r_inv, nu_star, false, true, false};
    }
    return out;
}

enum class Regime { lead, lag, degenerate };

inline const char* to_string(Regime r) {
    switch (r) {
        case Regime::lead: return "lead";
        case Regime::lag: return "lag";
        case Regime::degenerate: return "degenerate";
    }
    return "unknown";
}

/// lead when nu* > r (power disturbances dominate), lag when nu* < r.
inline Regime classify_regime(double d, double r_r_inv, double k_p, double k_w) {
    const double gap = threshold_gap(d, r_r_inv, k_p, k_w);
    if (detail::degenerate_gap(gap, d, r_r_inv)) return Regime::degenerate;
    return gap > 0.0 ? Regime::lead : Regime::lag;
}

struct TuningOptions {
    double delta_rec = 1e-3;  // deployable stand-in for the delta -> 0 optimum
    double nu_max = 1e3;      // cap used when k_w = 0 makes nu* unbounded
};

struct TuningReport {
    double nu_star = 0.0;
    bool nu_capped = false;
    Interval interval;
    Regime regime = Regime::degenerate;
    double h2_at_optimum = 0.0;      // closed form at (nu*, delta = 0)
    double delta_rec = 0.0;
    double h2_at_delta_rec = 0.0;    // closed form at (nu*, delta_rec)
    double h2_droop = 0.0;
    double threshold_gap = 0.0;
};

inline TuningReport tune(std::span<const double> lambdas, double m, double d, double r_r_inv,
                         double k_p, double k_w, const TuningOptions& opt = {}) {
    if (lambdas.empty()) throw InputError("no eigenvalues supplied");
    TuningReport r;
    r.threshold_gap = threshold_gap(d, r_r_inv, k_p, k_w);
    r.regime = classify_regime(d, r_r_inv, k_p, k_w);
    r.interval = improvement_interval(d, r_r_inv, k_p, k_w);
    if (k_w > 0.0) {
        r.nu_star = optimal_nu(d, k_p, k_w);
    } else {
        r.nu_star = opt.nu_max;
        r.nu_capped = true;
    }
    const auto n = lambdas.size();
    r.h2_at_optimum = g_of_nu(n, m, d, k_p, k_w, r.nu_star);
    r.delta_rec = opt.delta_rec;
    r.h2_at_delta_rec = h2_idroop(lambdas, m, d, r_r_inv, r.nu_star, opt.delta_rec, k_p, k_w);
    r.h2_droop = h2_droop(n, m, d, r_r_inv, k_p, k_w);
    return r;
}

// =============================================================================
// Sweeps
// =============================================================================

enum class SweepAxis { nu, delta, kp_over_kw, lambda_n };

inline const char* to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::nu: return "nu";
        case SweepAxis::delta: return "delta";
        case SweepAxis::kp_over_kw: return "k_p_over_k_w";
        case SweepAxis::lambda_n: return "lambda_n";
    }
    return "unknown";
}

struct SweepPoint {
    std::vector<double> lambdas;
    double m, d, r_r_inv, nu, delta, k_p, k_w;
};

struct SweepRow {
    double value;
    double h2_idroop;
    double h2_droop;
    double tau_rob_delta0;       // closed form with a = nu
    double tau_rob_lower_bound;  // m pi / (2 sqrt(nu^2 + 2 m lambda_n))
};

inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
    std::vector<double> g;
    if (count == 1) return {lo};
    for (std::size_t k = 0; k < count; ++k)
        g.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1));
    return g;
}

inline std::vector<double> logspace(double lo, double hi, std::size_t count) {
    std::vector<double> g;
    if (count == 1) return {lo};
    const double a = std::log10(lo), b = std::log10(hi);
    for (std::size_t k = 0; k < count; ++k)
        g.push_back(std::pow(10.0, a + (b - a) * static_cast<double>(k) / static_cast<double>(count - 1)));
    return g;
}

inline std::vector<SweepRow> sweep(SweepAxis axis, std::span<const double> grid, const SweepPoint& fixed) {
    if (grid.empty()) throw InputError("sweep grid is empty");
    if (fixed.lambdas.empty()) throw InputError("sweep requires at least one eigenvalue");
    const bool increasing = std::is_sorted(grid.begin(), grid.end(), std::less_equal<>());
    const bool decreasing = std::is_sorted(grid.begin(), grid.end(), std::greater_equal<>());
    if (grid.size() > 1 && !increasing && !decreasing) throw InputError("sweep grid must be strictly monotone");
    for (double v : grid)
        if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("sweep values must be finite and nonnegative");

    const double lambda_n0 = *std::max_element(fixed.lambdas.begin(), fixed.lambdas.end());
    if (axis == SweepAxis::lambda_n && !(lambda_n0 > 0.0))
        throw InputError("lambda_n sweep needs a network with at least two buses");
    if (axis == SweepAxis::kp_over_kw && !(fixed.k_w > 0.0))
        throw InputError("k_p/k_w sweep needs k_w > 0");

    std::vector<SweepRow> rows;
    rows.reserve(grid.size());
    for (double v : grid) {
        SweepPoint p = fixed;
        switch (axis) {
            case SweepAxis::nu: p.nu = v; break;
            case SweepAxis::delta: p.delta = v; break;
            case SweepAxis::kp_over_kw: p.k_p = v * p.k_w; break;
            case SweepAxis::lambda_n:
                for (double& l : p.lambdas) l *= v / lambda_n0;
                break;
        }
        const double lambda_n = *std::max_element(p.lambdas.begin(), p.lambdas.end());
        SweepRow row{};
        row.value = v;
        row.h2_idroop = h2_idroop(p.lambdas, p.m, p.d, p.r_r_inv, p.nu, p.delta, p.k_p, p.k_w);
        row.h2_droop = h2_droop(p.lambdas.size(), p.m, p.d, p.r_r_inv, p.k_p, p.k_w);
        row.tau_rob_delta0 = tau_rob_closed(lambda_n, p.m, p.d, IDroop{p.nu, 0.0, p.r_r_inv}).tau_rob;
        row.tau_rob_lower_bound = tau_rob_lower_bound(p.nu, lambda_n, p.m);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace gridtune
