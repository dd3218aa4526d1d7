#pragma once

// Modal decoupling of homogeneous networks: L = U diag(lambda) U^T splits the
// closed-loop model into n independent subsystems, one per eigenvalue.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <vector>

#include "gridtune/errors.hpp"
#include "gridtune/netmodel.hpp"

namespace gridtune {

inline constexpr double kDefaultZeroEigenvalueTol = 1e-9;

struct ModalDecomposition {
    Vector lambdas;  // ascending
    Matrix U;        // columns are orthonormal eigenvectors
    double zero_tol = kDefaultZeroEigenvalueTol;

    std::size_t size() const noexcept { return static_cast<std::size_t>(lambdas.size()); }
    std::size_t zero_modes() const {
        return static_cast<std::size_t>((lambdas.array().abs() < zero_tol).count());
    }
    std::vector<double> eigenvalues() const { return {lambdas.data(), lambdas.data() + lambdas.size()}; }
};

/// Symmetric eigendecomposition with ascending eigenvalues and a fixed sign
/// convention: the first component of each eigenvector whose magnitude
/// exceeds 1e-12 is positive.
inline ModalDecomposition eigendecompose(const Matrix& L, double zero_tol = kDefaultZeroEigenvalueTol) {
    if (L.rows() != L.cols() || L.rows() == 0) throw InputError("Laplacian must be square and nonempty");
    const double asym = (L - L.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-9) throw InputError("Laplacian is not symmetric (max |L - L^T| = " + std::to_string(asym) + ")");

    Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (L + L.transpose()));
    if (solver.info() != Eigen::Success) throw InputError("eigendecomposition failed");

    ModalDecomposition out;
    out.lambdas = solver.eigenvalues();
    out.U = solver.eigenvectors();
    out.zero_tol = zero_tol;
    // Snap the structural zero eigenvalue so downstream formulas see exactly 0.
    for (Eigen::Index k = 0; k < out.lambdas.size(); ++k)
        if (std::abs(out.lambdas(k)) < 1e-10 * std::max(1.0, out.lambdas.cwiseAbs().maxCoeff()))
            out.lambdas(k) = 0.0;
    for (Eigen::Index k = 0; k < out.U.cols(); ++k) {
        for (Eigen::Index r = 0; r < out.U.rows(); ++r) {
            if (std::abs(out.U(r, k)) > 1e-12) {
                if (out.U(r, k) < 0.0) out.U.col(k) *= -1.0;
                break;
            }
        }
    }
    return out;
}

/// One decoupled subsystem. For iDroop the state is (theta', omega', z');
/// for static-gain controllers it is (theta', omega').
struct ModalSubsystem {
    double lambda = 0.0;
    Matrix A;
    Matrix B;
    Matrix C;
    bool zero_mode = false;  // theta' unobservable; deflate before solving

    /// Drops the unobservable angle state of the zero mode.
    ModalSubsystem deflated() const {
        if (!zero_mode) return *this;
        const auto N = A.rows();
        ModalSubsystem r;
        r.lambda = lambda;
        r.A = A.bottomRightCorner(N - 1, N - 1);
        r.B = B.bottomRows(N - 1);
        r.C = C.rightCols(N - 1);
        r.zero_mode = false;
        return r;
    }
};

/// Builds one subsystem per eigenvalue for a homogeneous network.
inline std::vector<ModalSubsystem> modal_subsystems(const ModalDecomposition& decomp,
                                                    const SystemParams& params,
                                                    const ControllerConfig& config) {
    validate_controller(config);
    const UniformParams p = params.uniform_values();
    if (params.size() != decomp.size()) throw InputError("parameter count does not match decomposition");

    std::vector<ModalSubsystem> out;
    out.reserve(decomp.size());
    for (Eigen::Index k = 0; k < decomp.lambdas.size(); ++k) {
        ModalSubsystem sub;
        sub.lambda = decomp.lambdas(k);
        sub.zero_mode = std::abs(sub.lambda) < decomp.zero_tol;
        if (const auto* c = std::get_if<IDroop>(&config)) {
            if (!(c->delta > 0.0) || std::isinf(c->delta))
                throw DomainError("modal subsystems require a finite delta > 0");
            const double a2 = c->nu - c->r_r_inv;
            sub.A = Matrix::Zero(3, 3);
            sub.A << 0.0, 1.0, 0.0,
                     -sub.lambda / p.m, -(p.d + c->nu) / p.m, 1.0 / p.m,
                     0.0, c->delta * a2, -c->delta;
            sub.B = Matrix::Zero(3, 2);
            sub.B << 0.0, 0.0,
                     p.k_p / p.m, -c->nu * p.k_w / p.m,
                     0.0, c->delta * a2 * p.k_w;
            sub.C = Matrix::Zero(1, 3);
            sub.C << 0.0, 1.0, 0.0;
        } else {
            double m = p.m;
            double gain = 0.0;
            if (const auto* dr = std::get_if<Droop>(&config)) {
                gain = dr->r_r_inv;
            } else {
                const auto& vi = std::get<VirtualInertia>(config);
                if (p.k_w > 0.0)
                    throw UnboundedNoiseError("virtual inertia with measurement noise has unbounded H2 norm");
                m += vi.nu;
                gain = vi.r_r_inv;
            }
            sub.A = Matrix::Zero(2, 2);
            sub.A << 0.0, 1.0,
                     -sub.lambda / m, -(p.d + gain) / m;
            sub.B = Matrix::Zero(2, 2);
            sub.B << 0.0, 0.0,
                     p.k_p / m, -gain * p.k_w / m;
            sub.C = Matrix::Zero(1, 2);
            sub.C << 0.0, 1.0;
        }
        out.push_back(std::move(sub));
    }
    return out;
}

}  // namespace gridtune
