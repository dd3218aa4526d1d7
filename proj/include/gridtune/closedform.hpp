#pragma once

// Closed-form H2 norms for homogeneous networks.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <variant>
#include <vector>

#include "gridtune/errors.hpp"
#include "gridtune/lyap.hpp"
#include "gridtune/netmodel.hpp"

namespace gridtune {

/// Droop control: n [k_p^2 + (r k_w)^2] / (2 m (d + r)).
inline double h2_droop(std::size_t n, double m, double d, double r_r_inv, double k_p, double k_w) {
    const double rk = r_r_inv * k_w;
    return static_cast<double>(n) * (k_p * k_p + rk * rk) / (2.0 * m * (d + r_r_inv));
}

/// iDroop at delta = 0: g(nu) = n (k_p^2 + nu^2 k_w^2) / (2 m (d + nu)).
inline double g_of_nu(std::size_t n, double m, double d, double k_p, double k_w, double nu) {
    const double nk = nu * k_w;
    return static_cast<double>(n) * (k_p * k_p + nk * nk) / (2.0 * m * (d + nu));
}

/// Coefficients of f(delta) = n a5 + sum_i a1 delta^2 / (a2 delta^2 + a3 delta + a4(lambda_i)).
struct AlphaCoefficients {
    double alpha1;
    double alpha2;
    double alpha3;
    double alpha5;
    double d_plus_nu;  // alpha4(lambda) = 2 (d + nu) lambda

    double alpha4(double lambda) const { return 2.0 * d_plus_nu * lambda; }
};

inline AlphaCoefficients alpha_coefficients(double m, double d, double r_r_inv, double nu,
                                            double k_p, double k_w) {
    const double kw2 = k_w * k_w;
    const double power_term = (k_p * k_p + nu * nu * kw2) / (d + nu);
    AlphaCoefficients a{};
    a.alpha1 = (nu - r_r_inv) * (power_term - (nu + r_r_inv) * kw2);
    a.alpha2 = 2.0 * m * (d + r_r_inv);
    a.alpha3 = 2.0 * (d + nu) * (d + r_r_inv);
    a.alpha5 = power_term / (2.0 * m);
    a.d_plus_nu = d + nu;
    return a;
}

/// Per-mode iDroop contributions in the order of `lambdas`.
inline std::vector<double> h2_idroop_modes(std::span<const double> lambdas, double m, double d,
                                           double r_r_inv, double nu, double delta, double k_p,
                                           double k_w) {
    const double kw2 = k_w * k_w;
    const double power_term = (k_p * k_p + nu * nu * kw2) / (d + nu);
    const double base = power_term / (2.0 * m);
    std::vector<double> out;
    out.reserve(lambdas.size());
    if (delta == 0.0) {
        out.assign(lambdas.size(), base);
        return out;
    }
    const double numer_coeff = (nu - r_r_inv) * (power_term - (nu + r_r_inv) * kw2);
    for (double lambda : lambdas) {
        double term;
        if (std::isinf(delta)) {
            // delta^2 / (2[(d+nu+m delta) delta (d+r)]) -> 1 / (2 m (d + r))
            term = numer_coeff / (2.0 * m * (d + r_r_inv));
        } else {
            const double den = 2.0 * ((d + nu + m * delta) * delta * (d + r_r_inv) + (d + nu) * lambda);
            term = delta * delta * numer_coeff / den;
        }
        out.push_back(base + term);
    }
    return out;
}

/// Squared H2 norm of iDroop summed over all modes. Returns g(nu) exactly at
/// delta = 0 and the droop value at delta = +inf.
inline double h2_idroop(std::span<const double> lambdas, double m, double d, double r_r_inv,
                        double nu, double delta, double k_p, double k_w) {
    if (delta == 0.0) return g_of_nu(lambdas.size(), m, d, k_p, k_w, nu);
    CompensatedSum s;
    for (double v : h2_idroop_modes(lambdas, m, d, r_r_inv, nu, delta, k_p, k_w)) s.add(v);
    return s.value();
}

/// The same quantity through the alpha parametrization.
inline double f_of_delta(std::span<const double> lambdas, const AlphaCoefficients& a, double delta) {
    CompensatedSum s;
    s.add(static_cast<double>(lambdas.size()) * a.alpha5);
    if (delta == 0.0) return s.value();
    for (double lambda : lambdas) {
        if (std::isinf(delta))
            s.add(a.alpha1 / a.alpha2);
        else
            s.add(a.alpha1 * delta * delta /
                  (a.alpha2 * delta * delta + a.alpha3 * delta + a.alpha4(lambda)));
    }
    return s.value();
}

inline double f_of_delta(std::span<const double> lambdas, double m, double d, double r_r_inv,
                         double nu, double k_p, double k_w, double delta) {
    return f_of_delta(lambdas, alpha_coefficients(m, d, r_r_inv, nu, k_p, k_w), delta);
}

enum class Monotonicity { increasing, decreasing, flat };

inline const char* to_string(Monotonicity m) {
    switch (m) {
        case Monotonicity::increasing: return "increasing";
        case Monotonicity::decreasing: return "decreasing";
        case Monotonicity::flat: return "flat";
    }
    return "unknown";
}

/// Direction of f(delta) on delta > 0, decided by the sign of alpha1.
inline Monotonicity delta_monotonicity(const AlphaCoefficients& a, double flat_tol = 1e-12) {
    if (std::abs(a.alpha1) <= flat_tol) return Monotonicity::flat;
    return a.alpha1 > 0.0 ? Monotonicity::increasing : Monotonicity::decreasing;
}

/// Closed-form H2 for any controller on a homogeneous network.
inline H2Report h2_closed_form(std::span<const double> lambdas, const SystemParams& params,
                               const ControllerConfig& config) {
    validate_controller(config);
    const UniformParams p = params.uniform_values();
    H2Report r;
    r.method = H2Method::closed_form;
    const auto n = lambdas.size();
    if (const auto* c = std::get_if<Droop>(&config)) {
        r.per_mode = std::vector<double>(n, h2_droop(1, p.m, p.d, c->r_r_inv, p.k_p, p.k_w));
        r.squared_norm = h2_droop(n, p.m, p.d, c->r_r_inv, p.k_p, p.k_w);
    } else if (const auto* c = std::get_if<VirtualInertia>(&config)) {
        if (p.k_w > 0.0) {
            r.squared_norm = std::numeric_limits<double>::infinity();
        } else {
            // Added inertia m + nu with droop gain r.
            r.per_mode = std::vector<double>(n, h2_droop(1, p.m + c->nu, p.d, c->r_r_inv, p.k_p, 0.0));
            r.squared_norm = h2_droop(n, p.m + c->nu, p.d, c->r_r_inv, p.k_p, 0.0);
        }
    } else {
        const auto& id = std::get<IDroop>(config);
        r.per_mode = h2_idroop_modes(lambdas, p.m, p.d, id.r_r_inv, id.nu, id.delta, p.k_p, p.k_w);
        r.squared_norm = h2_idroop(lambdas, p.m, p.d, id.r_r_inv, id.nu, id.delta, p.k_p, p.k_w);
    }
    return r;
}

}  // namespace gridtune
