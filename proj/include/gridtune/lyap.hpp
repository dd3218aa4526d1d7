#pragma once

// Numeric H2 norms: tr(B^T X B) with X the observability Gramian,
// A^T X + X A + C^T C = 0, solved by the Bartels-Stewart method on the real
// Schur form of A.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdio>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gridtune/errors.hpp"
#include "gridtune/netmodel.hpp"
#include "gridtune/spectral.hpp"

namespace gridtune {

inline constexpr double kDefaultHurwitzMargin = 1e-9;

enum class H2Method { closed_form, lyapunov_modal, lyapunov_full, monte_carlo };

inline const char* to_string(H2Method m) {
    switch (m) {
        case H2Method::closed_form: return "closed_form";
        case H2Method::lyapunov_modal: return "lyapunov_modal";
        case H2Method::lyapunov_full: return "lyapunov_full";
        case H2Method::monte_carlo: return "monte_carlo";
    }
    return "unknown";
}

struct H2Report {
    double squared_norm = 0.0;
    std::optional<std::vector<double>> per_mode;
    H2Method method = H2Method::lyapunov_full;
    std::size_t deflated_modes = 0;
};

/// Neumaier-compensated summation.
class CompensatedSum {
  public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            c_ += (sum_ - t) + x;
        else
            c_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + c_; }

  private:
    double sum_ = 0.0;
    double c_ = 0.0;
};

namespace detail {

struct SchurBlock {
    Eigen::Index offset;
    Eigen::Index size;
};

inline std::vector<SchurBlock> schur_blocks(const Matrix& T) {
    std::vector<SchurBlock> blocks;
    const auto N = T.rows();
    for (Eigen::Index i = 0; i < N;) {
        if (i + 1 < N && T(i + 1, i) != 0.0) {
            blocks.push_back({i, 2});
            i += 2;
        } else {
            blocks.push_back({i, 1});
            i += 1;
        }
    }
    return blocks;
}

inline std::vector<Complex> block_eigenvalues(const Matrix& T, const SchurBlock& b) {
    if (b.size == 1) return {Complex(T(b.offset, b.offset), 0.0)};
    const double a = T(b.offset, b.offset), bb = T(b.offset, b.offset + 1);
    const double c = T(b.offset + 1, b.offset), d = T(b.offset + 1, b.offset + 1);
    const double mean = 0.5 * (a + d);
    const double disc = 0.25 * (a - d) * (a - d) + bb * c;
    if (disc >= 0.0) return {Complex(mean + std::sqrt(disc), 0.0), Complex(mean - std::sqrt(disc), 0.0)};
    return {Complex(mean, std::sqrt(-disc)), Complex(mean, -std::sqrt(-disc))};
}

// Solves T^T Y + Y T = F for upper quasi-triangular T.
inline Matrix solve_quasi_triangular(const Matrix& T, const Matrix& F,
                                     const std::vector<SchurBlock>& blocks) {
    const auto N = T.rows();
    Matrix Y = Matrix::Zero(N, N);
    for (const auto& bl : blocks) {
        for (const auto& bk : blocks) {
            const auto rk = bk.offset, p = bk.size;
            const auto cl = bl.offset, q = bl.size;
            Matrix rhs = F.block(rk, cl, p, q);
            if (rk > 0) rhs.noalias() -= T.block(0, rk, rk, p).transpose() * Y.block(0, cl, rk, q);
            if (cl > 0) rhs.noalias() -= Y.block(rk, 0, p, cl) * T.block(0, cl, cl, q);
            const Matrix Tk = T.block(rk, rk, p, p);
            const Matrix Tl = T.block(cl, cl, q, q);
            if (p == 1 && q == 1) {
                Y(rk, cl) = rhs(0, 0) / (Tk(0, 0) + Tl(0, 0));
                continue;
            }
            // (I_q kron Tk^T + Tl^T kron I_p) vec(Y_kl) = vec(rhs)
            const auto pq = p * q;
            Matrix K = Matrix::Zero(pq, pq);
            for (Eigen::Index j = 0; j < q; ++j)
                K.block(j * p, j * p, p, p) += Tk.transpose();
            for (Eigen::Index j = 0; j < q; ++j)
                for (Eigen::Index i = 0; i < q; ++i)
                    K.block(j * p, i * p, p, p) += Tl(i, j) * Matrix::Identity(p, p);
            Eigen::Map<const Vector> b(rhs.data(), pq);
            Vector y = K.fullPivLu().solve(b);
            Y.block(rk, cl, p, q) = Eigen::Map<const Matrix>(y.data(), p, q);
        }
    }
    return Y;
}

}  // namespace detail

/// Spectral abscissa (largest real part of the eigenvalues) and the
/// eigenvalue attaining it.
inline Complex rightmost_eigenvalue(const Matrix& A) {
    if (A.rows() == 0) return Complex(-std::numeric_limits<double>::infinity(), 0.0);
    Eigen::RealSchur<Matrix> schur(A, /*computeU=*/false);
    const Matrix& T = schur.matrixT();
    Complex worst(-std::numeric_limits<double>::infinity(), 0.0);
    for (const auto& b : detail::schur_blocks(T))
        for (auto ev : detail::block_eigenvalues(T, b))
            if (ev.real() > worst.real()) worst = ev;
    return worst;
}

/// Solves A^T X + X A + rhs = 0 for Hurwitz A.
inline Matrix solve_lyapunov(const Matrix& A, const Matrix& rhs,
                             double hurwitz_margin = kDefaultHurwitzMargin) {
    if (A.rows() != A.cols() || rhs.rows() != A.rows() || rhs.cols() != A.cols())
        throw InputError("solve_lyapunov: dimension mismatch");
    const auto N = A.rows();
    if (N == 0) return Matrix(0, 0);

    Eigen::RealSchur<Matrix> schur(A);
    if (schur.info() != Eigen::Success) throw InputError("real Schur decomposition failed");
    const Matrix& T = schur.matrixT();
    const Matrix& U = schur.matrixU();
    const auto blocks = detail::schur_blocks(T);
    for (const auto& b : blocks) {
        for (auto ev : detail::block_eigenvalues(T, b)) {
            if (!(ev.real() < -hurwitz_margin)) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "matrix is not Hurwitz: eigenvalue %.6g%+.6gi", ev.real(), ev.imag());
                throw StabilityError(buf, ev);
            }
        }
    }

    const Matrix Ut = U.transpose();
    Matrix X = U * detail::solve_quasi_triangular(T, -(Ut * rhs * U), blocks) * Ut;
    X = 0.5 * (X + X.transpose()).eval();

    // One step of iterative refinement on the residual.
    const Matrix residual = A.transpose() * X + X * A + rhs;
    if (residual.norm() > 1e-13 * (1.0 + rhs.norm())) {
        Matrix dX = U * detail::solve_quasi_triangular(T, -(Ut * residual * U), blocks) * Ut;
        X += 0.5 * (dX + dX.transpose());
    }
    return X;
}

/// Observability Gramian X: A^T X + X A = -C^T C.
inline Matrix observability_gramian(const Matrix& A, const Matrix& C,
                                    double hurwitz_margin = kDefaultHurwitzMargin) {
    return solve_lyapunov(A, C.transpose() * C, hurwitz_margin);
}

/// ||G||_H2^2 = tr(B^T X B).
inline double h2_squared(const Matrix& A, const Matrix& B, const Matrix& C,
                         double hurwitz_margin = kDefaultHurwitzMargin) {
    if (B.size() == 0 || B.isZero(0.0)) {
        const Complex ev = rightmost_eigenvalue(A);
        if (!(ev.real() < -hurwitz_margin)) throw StabilityError("matrix is not Hurwitz", ev);
        return 0.0;
    }
    const Matrix X = observability_gramian(A, C, hurwitz_margin);
    return std::max(0.0, (B.transpose() * X * B).trace());
}

/// Squared H2 norm of each modal subsystem; the zero-eigenvalue mode is
/// reduced to its observable (omega', z') part first.
inline H2Report h2_numeric_modal(const std::vector<ModalSubsystem>& subsystems,
                                 double hurwitz_margin = kDefaultHurwitzMargin) {
    H2Report report;
    report.method = H2Method::lyapunov_modal;
    std::vector<double> per_mode;
    per_mode.reserve(subsystems.size());
    CompensatedSum total;
    for (const auto& sub : subsystems) {
        const ModalSubsystem s = sub.deflated();
        if (sub.zero_mode) ++report.deflated_modes;
        const double v = h2_squared(s.A, s.B, s.C, hurwitz_margin);
        per_mode.push_back(v);
        total.add(v);
    }
    report.squared_norm = total.value();
    report.per_mode = std::move(per_mode);
    return report;
}

/// Model with the absolute-angle mode removed.
struct DeflatedModel {
    Matrix A;
    Matrix B;
    Matrix C;
    std::size_t deflated_modes = 0;
};

/// Rotates the theta and omega blocks into the Laplacian eigenbasis and drops
/// the theta component along span{1}. The dropped direction is invariant
/// under A and invisible to C, so the input-output map is unchanged.
inline DeflatedModel deflate_zero_mode(const StateSpaceModel& model,
                                       double zero_tol = kDefaultZeroEigenvalueTol) {
    const auto n = static_cast<Eigen::Index>(model.n_buses);
    const auto N = model.A.rows();
    const ModalDecomposition dec = eigendecompose(model.laplacian, zero_tol);

    std::vector<Eigen::Index> keep;
    for (Eigen::Index k = 0; k < n; ++k)
        if (std::abs(dec.lambdas(k)) >= zero_tol) keep.push_back(k);
    const auto kept = static_cast<Eigen::Index>(keep.size());

    Matrix P = Matrix::Zero(N - (n - kept), N);
    for (Eigen::Index r = 0; r < kept; ++r) P.block(r, 0, 1, n) = dec.U.col(keep[r]).transpose();
    P.block(kept, n, n, n) = dec.U.transpose();
    if (model.states_per_bus == 3) P.block(kept + n, 2 * n, n, n).setIdentity();

    DeflatedModel out;
    out.A = P * model.A * P.transpose();
    out.B = P * model.B;
    out.C = model.C * P.transpose();
    out.deflated_modes = static_cast<std::size_t>(n - kept);
    return out;
}

/// Full-model H2 norm; handles heterogeneous parameters.
inline H2Report h2_numeric_full(const StateSpaceModel& model,
                                double hurwitz_margin = kDefaultHurwitzMargin,
                                double zero_tol = kDefaultZeroEigenvalueTol) {
    const DeflatedModel red = deflate_zero_mode(model, zero_tol);
    H2Report report;
    report.method = H2Method::lyapunov_full;
    report.deflated_modes = red.deflated_modes;
    report.squared_norm = h2_squared(red.A, red.B, red.C, hurwitz_margin);
    return report;
}

/// Assembles and solves, short-circuiting virtual inertia with measurement
/// noise to +infinity.
inline H2Report h2_numeric(const NetworkTopology& topology, const SystemParams& params,
                           const ControllerConfig& config,
                           double hurwitz_margin = kDefaultHurwitzMargin,
                           double zero_tol = kDefaultZeroEigenvalueTol) {
    if (std::holds_alternative<VirtualInertia>(config) && (params.k_w().array() > 0.0).any()) {
        H2Report r;
        r.method = H2Method::lyapunov_full;
        r.squared_norm = std::numeric_limits<double>::infinity();
        return r;
    }
    return h2_numeric_full(assemble_state_space(topology, params, config), hurwitz_margin, zero_tol);
}

}  // namespace gridtune
