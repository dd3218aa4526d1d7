#pragma once

// Linearized power network: swing-equation buses coupled through a
// susceptance-weighted Laplacian, with grid-connected inverters running
// droop, virtual inertia or iDroop control.
//
// Units: per-unit power on a common base, frequency in rad/s, time in s.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gridtune/errors.hpp"

namespace gridtune {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Complex = std::complex<double>;

inline constexpr std::size_t kMaxBuses = 200;

// =============================================================================
// Topology
// =============================================================================

struct Line {
    std::size_t from;
    std::size_t to;
    double susceptance;
};

class NetworkTopology {
  public:
    NetworkTopology(std::size_t n_buses, std::vector<Line> lines)
        : n_(n_buses), lines_(std::move(lines)) {
        validate();
    }

    std::size_t size() const noexcept { return n_; }
    const std::vector<Line>& lines() const noexcept { return lines_; }

    static NetworkTopology path(std::size_t n, double b = 1.0) {
        std::vector<Line> lines;
        for (std::size_t i = 0; i + 1 < n; ++i) lines.push_back({i, i + 1, b});
        return {n, std::move(lines)};
    }

    static NetworkTopology ring(std::size_t n, double b = 1.0) {
        if (n < 3) return path(n, b);
        std::vector<Line> lines;
        for (std::size_t i = 0; i < n; ++i) lines.push_back({i, (i + 1) % n, b});
        return {n, std::move(lines)};
    }

    static NetworkTopology complete(std::size_t n, double b = 1.0) {
        std::vector<Line> lines;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) lines.push_back({i, j, b});
        return {n, std::move(lines)};
    }

    static NetworkTopology star(std::size_t n, double b = 1.0) {
        std::vector<Line> lines;
        for (std::size_t i = 1; i < n; ++i) lines.push_back({0, i, b});
        return {n, std::move(lines)};
    }

  private:
    void validate() const {
        if (n_ == 0) throw ConstructionError("network must have at least one bus");
        if (n_ > kMaxBuses)
            throw ConstructionError("network has " + std::to_string(n_) + " buses; at most " +
                                    std::to_string(kMaxBuses) + " supported");
        std::set<std::pair<std::size_t, std::size_t>> seen;
        for (const auto& l : lines_) {
            if (l.from >= n_ || l.to >= n_)
                throw ConstructionError("line (" + std::to_string(l.from) + "," +
                                        std::to_string(l.to) + ") references a missing bus");
            if (l.from == l.to)
                throw ConstructionError("self loop at bus " + std::to_string(l.from));
            if (!(l.susceptance > 0.0) || !std::isfinite(l.susceptance))
                throw ConstructionError("line (" + std::to_string(l.from) + "," +
                                        std::to_string(l.to) +
                                        ") must have finite positive susceptance");
            auto key = std::minmax(l.from, l.to);
            if (!seen.insert(key).second)
                throw ConstructionError("duplicate line (" + std::to_string(key.first) + "," +
                                        std::to_string(key.second) + ")");
        }
        // Union-find connectivity check.
        std::vector<std::size_t> parent(n_);
        std::iota(parent.begin(), parent.end(), std::size_t{0});
        auto find = [&](std::size_t x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        std::size_t components = n_;
        for (const auto& l : lines_) {
            auto a = find(l.from), b = find(l.to);
            if (a != b) {
                parent[a] = b;
                --components;
            }
        }
        if (components != 1)
            throw ConstructionError("network is disconnected (" + std::to_string(components) +
                                    " components)");
    }

    std::size_t n_;
    std::vector<Line> lines_;
};

/// Susceptance-weighted Laplacian: L_ij = -b_ij, L_ii = sum of incident b.
inline Matrix build_laplacian(const NetworkTopology& topology) {
    const auto n = static_cast<Eigen::Index>(topology.size());
    Matrix L = Matrix::Zero(n, n);
    for (const auto& l : topology.lines()) {
        const auto i = static_cast<Eigen::Index>(l.from);
        const auto j = static_cast<Eigen::Index>(l.to);
        L(i, j) -= l.susceptance;
        L(j, i) -= l.susceptance;
        L(i, i) += l.susceptance;
        L(j, j) += l.susceptance;
    }
    return L;
}

// =============================================================================
// Parameters
// =============================================================================

/// Scalar view of a homogeneous parameter set.
struct UniformParams {
    double m;
    double d;
    double k_p;
    double k_w;
};

/// Per-bus inertia m, damping d, disturbance intensity k_p and frequency
/// measurement noise intensity k_w.
class SystemParams {
  public:
    SystemParams(Vector m, Vector d, Vector k_p, Vector k_w)
        : m_(std::move(m)), d_(std::move(d)), k_p_(std::move(k_p)), k_w_(std::move(k_w)) {
        validate();
    }

    static SystemParams uniform(std::size_t n, double m, double d, double k_p, double k_w) {
        const auto N = static_cast<Eigen::Index>(n);
        return {Vector::Constant(N, m), Vector::Constant(N, d), Vector::Constant(N, k_p),
                Vector::Constant(N, k_w)};
    }

    std::size_t size() const noexcept { return static_cast<std::size_t>(m_.size()); }
    const Vector& m() const noexcept { return m_; }
    const Vector& d() const noexcept { return d_; }
    const Vector& k_p() const noexcept { return k_p_; }
    const Vector& k_w() const noexcept { return k_w_; }

    bool is_homogeneous() const {
        auto constant = [](const Vector& v) {
            return v.size() == 0 || (v.array() == v(0)).all();
        };
        return constant(m_) && constant(d_) && constant(k_p_) && constant(k_w_);
    }

    UniformParams uniform_values() const {
        if (!is_homogeneous())
            throw HomogeneityError("operation requires homogeneous bus parameters");
        return {m_(0), d_(0), k_p_(0), k_w_(0)};
    }

  private:
    void validate() const {
        const auto n = m_.size();
        if (n == 0) throw InputError("parameters must cover at least one bus");
        if (d_.size() != n || k_p_.size() != n || k_w_.size() != n)
            throw InputError("parameter vectors must all have one entry per bus");
        if (!(m_.array() > 0.0).all() || !m_.allFinite())
            throw InputError("inertia m must be positive");
        if (!(d_.array() > 0.0).all() || !d_.allFinite())
            throw InputError("damping d must be positive");
        if (!(k_p_.array() >= 0.0).all() || !k_p_.allFinite())
            throw InputError("k_p must be nonnegative");
        if (!(k_w_.array() >= 0.0).all() || !k_w_.allFinite())
            throw InputError("k_w must be nonnegative");
    }

    Vector m_, d_, k_p_, k_w_;
};

// =============================================================================
// Controllers
// =============================================================================

struct Droop {
    double r_r_inv;
};

struct VirtualInertia {
    double nu;
    double r_r_inv;
};

/// c(s) = (nu s + delta r_r_inv) / (s + delta). delta = +inf is the droop
/// limit; delta = 0 is the constant high-frequency gain nu away from s = 0.
struct IDroop {
    double nu;
    double delta;
    double r_r_inv;
};

using ControllerConfig = std::variant<Droop, VirtualInertia, IDroop>;

inline void validate_controller(const ControllerConfig& config) {
    std::visit(
        [](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            if (!(c.r_r_inv > 0.0) || !std::isfinite(c.r_r_inv))
                throw InputError("droop gain r_r_inv must be finite and positive");
            if constexpr (!std::is_same_v<T, Droop>) {
                if (!(c.nu >= 0.0) || !std::isfinite(c.nu))
                    throw InputError("nu must be finite and nonnegative");
            }
            if constexpr (std::is_same_v<T, IDroop>) {
                if (!(c.delta >= 0.0)) throw InputError("delta must be nonnegative");
            }
        },
        config);
}

inline std::string controller_name(const ControllerConfig& config) {
    switch (config.index()) {
        case 0: return "droop";
        case 1: return "virtual_inertia";
        default: return "idroop";
    }
}

inline double droop_gain(const ControllerConfig& config) {
    return std::visit([](const auto& c) { return c.r_r_inv; }, config);
}

/// Controller transfer function c(s).
inline Complex controller_transfer(const ControllerConfig& config, Complex s) {
    validate_controller(config);
    if (const auto* c = std::get_if<Droop>(&config)) return c->r_r_inv;
    if (const auto* c = std::get_if<VirtualInertia>(&config)) return c->nu * s + c->r_r_inv;
    const auto& c = std::get<IDroop>(config);
    if (std::isinf(c.delta)) return c.r_r_inv;
    const Complex den = s + c.delta;
    if (std::abs(den) <= 1e-15 * std::max(1.0, c.delta))
        throw DomainError("iDroop transfer function evaluated at its pole s = -delta");
    return (c.nu * s + c.delta * c.r_r_inv) / den;
}

/// Bus transfer p(s) = (m s + d)^-1 (1 + c(s) / (m s + d))^-1 from power
/// imbalance to frequency deviation.
inline Complex bus_transfer(double m, double d, const ControllerConfig& config, Complex s) {
    const Complex swing = m * s + d;
    if (std::abs(swing) == 0.0) throw DomainError("swing dynamics evaluated at their pole");
    const Complex g = 1.0 / swing;
    const Complex loop = 1.0 + controller_transfer(config, s) * g;
    if (std::abs(loop) <= 1e-15) throw DomainError("bus transfer evaluated at a closed-loop pole");
    return g / loop;
}

// =============================================================================
// State-space model
// =============================================================================

/// x' = A x + B w, y = C x with x = (theta, omega[, z]) and w = (w_p, w_w).
struct StateSpaceModel {
    Matrix A;
    Matrix B;
    Matrix C;
    Matrix laplacian;
    std::size_t n_buses = 0;
    std::size_t states_per_bus = 0;  // 2 without controller state, 3 for iDroop
    std::vector<std::string> state_labels;
    std::vector<std::string> input_labels;
};

namespace detail {

inline std::vector<std::string> labels(std::initializer_list<const char*> blocks, std::size_t n) {
    std::vector<std::string> out;
    for (const char* b : blocks)
        for (std::size_t i = 0; i < n; ++i) out.push_back(std::string(b) + "[" + std::to_string(i) + "]");
    return out;
}

// theta' = omega, M omega' = -L theta - (D + R) omega + K_p w_p - R K_w w_w
inline StateSpaceModel assemble_static_gain(const Matrix& L, const Vector& m, const Vector& d,
                                            const Vector& k_p, const Vector& k_w, double gain) {
    const auto n = L.rows();
    const Vector m_inv = m.cwiseInverse();
    StateSpaceModel model;
    model.n_buses = static_cast<std::size_t>(n);
    model.states_per_bus = 2;
    model.laplacian = L;
    model.A = Matrix::Zero(2 * n, 2 * n);
    model.A.block(0, n, n, n).setIdentity();
    model.A.block(n, 0, n, n) = -(m_inv.asDiagonal() * L);
    model.A.block(n, n, n, n) = (-(m_inv.array() * (d.array() + gain))).matrix().asDiagonal();
    model.B = Matrix::Zero(2 * n, 2 * n);
    model.B.block(n, 0, n, n) = (m_inv.array() * k_p.array()).matrix().asDiagonal();
    model.B.block(n, n, n, n) = (-gain * m_inv.array() * k_w.array()).matrix().asDiagonal();
    model.C = Matrix::Zero(n, 2 * n);
    model.C.block(0, n, n, n).setIdentity();
    model.state_labels = labels({"theta", "omega"}, model.n_buses);
    model.input_labels = labels({"w_p", "w_w"}, model.n_buses);
    return model;
}

}  // namespace detail

/// Closed-loop model, states [theta; omega; z]. iDroop uses the z = x + K_nu omega
/// realization so no frequency derivative is measured. Droop and
/// noise-free virtual inertia use the reduced (theta, omega) realization.
inline StateSpaceModel assemble_state_space(const NetworkTopology& topology,
                                            const SystemParams& params,
                                            const ControllerConfig& config) {
    validate_controller(config);
    if (params.size() != topology.size())
        throw InputError("parameter vectors do not match the number of buses");
    const Matrix L = build_laplacian(topology);
    const auto n = L.rows();

    if (const auto* c = std::get_if<Droop>(&config))
        return detail::assemble_static_gain(L, params.m(), params.d(), params.k_p(), params.k_w(),
                                            c->r_r_inv);
    if (const auto* c = std::get_if<VirtualInertia>(&config)) {
        if ((params.k_w().array() > 0.0).any())
            throw UnboundedNoiseError(
                "virtual inertia differentiates the noisy frequency measurement; H2 is unbounded");
        const Vector m_eff = params.m().array() + c->nu;
        return detail::assemble_static_gain(L, m_eff, params.d(), params.k_p(), params.k_w(),
                                            c->r_r_inv);
    }

    const auto& c = std::get<IDroop>(config);
    if (!(c.delta > 0.0) || std::isinf(c.delta))
        throw DomainError("state-space assembly requires a finite delta > 0");

    const Vector m_inv = params.m().cwiseInverse();
    const double a2 = c.nu - c.r_r_inv;
    StateSpaceModel model;
    model.n_buses = static_cast<std::size_t>(n);
    model.states_per_bus = 3;
    model.laplacian = L;
    model.A = Matrix::Zero(3 * n, 3 * n);
    model.A.block(0, n, n, n).setIdentity();
    model.A.block(n, 0, n, n) = -(m_inv.asDiagonal() * L);
    model.A.block(n, n, n, n) =
        (-(m_inv.array() * (params.d().array() + c.nu))).matrix().asDiagonal();
    model.A.block(n, 2 * n, n, n) = m_inv.asDiagonal();
    model.A.block(2 * n, n, n, n) = Matrix::Identity(n, n) * (c.delta * a2);
    model.A.block(2 * n, 2 * n, n, n) = Matrix::Identity(n, n) * (-c.delta);

    model.B = Matrix::Zero(3 * n, 2 * n);
    model.B.block(n, 0, n, n) = (m_inv.array() * params.k_p().array()).matrix().asDiagonal();
    model.B.block(n, n, n, n) =
        (-c.nu * m_inv.array() * params.k_w().array()).matrix().asDiagonal();
    model.B.block(2 * n, n, n, n) = (c.delta * a2 * params.k_w().array()).matrix().asDiagonal();

    model.C = Matrix::Zero(n, 3 * n);
    model.C.block(0, n, n, n).setIdentity();
    model.state_labels = detail::labels({"theta", "omega", "z"}, model.n_buses);
    model.input_labels = detail::labels({"w_p", "w_w"}, model.n_buses);
    return model;
}

/// G(s) = C (sI - A)^-1 B.
inline Eigen::MatrixXcd frequency_response(const StateSpaceModel& model, Complex s) {
    const auto N = model.A.rows();
    Eigen::MatrixXcd M = s * Eigen::MatrixXcd::Identity(N, N) - model.A.cast<Complex>();
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(M);
    Eigen::MatrixXcd X = lu.solve(model.B.cast<Complex>());
    return model.C.cast<Complex>() * X;
}

}  // namespace gridtune
