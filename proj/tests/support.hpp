#pragma once

// Shared helpers for the test suite: seeded random instances and
// independent reference solvers.

#include <Eigen/Dense>

#include <cstddef>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "gridtune/netmodel.hpp"

namespace testkit {

using gridtune::Matrix;

class Random {
  public:
    explicit Random(std::uint64_t seed) : gen_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
    std::size_t integer(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(gen_);
    }
    bool coin(double p) { return uniform(0.0, 1.0) < p; }

  private:
    std::mt19937_64 gen_;
};

/// Random spanning tree plus extra edges, susceptances in [0.5, 2].
inline gridtune::NetworkTopology random_topology(Random& rng, std::size_t n, double extra = 0.2) {
    std::vector<gridtune::Line> lines;
    std::set<std::pair<std::size_t, std::size_t>> used;
    for (std::size_t k = 1; k < n; ++k) {
        const std::size_t j = rng.integer(0, k - 1);
        lines.push_back({j, k, rng.uniform(0.5, 2.0)});
        used.insert({j, k});
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (!used.count({i, j}) && rng.coin(extra)) lines.push_back({i, j, rng.uniform(0.5, 2.0)});
    return {n, std::move(lines)};
}

/// Solves A^T X + X A + Q = 0 through the vectorized Kronecker system.
inline Matrix kron_lyapunov(const Matrix& A, const Matrix& Q) {
    const auto N = A.rows();
    const Matrix I = Matrix::Identity(N, N);
    Matrix K = Matrix::Zero(N * N, N * N);
    const Matrix At = A.transpose();
    // vec(A^T X) = (I kron A^T) vec X, vec(X A) = (A^T kron I) vec X
    for (Eigen::Index i = 0; i < N; ++i) {
        K.block(i * N, i * N, N, N) += At;
        for (Eigen::Index j = 0; j < N; ++j) K.block(i * N, j * N, N, N) += At(i, j) * I;
    }
    Eigen::Map<const Eigen::VectorXd> q(Q.data(), N * N);
    const Eigen::VectorXd x = K.fullPivLu().solve(-q);
    return Eigen::Map<const Matrix>(x.data(), N, N);
}

struct Reduced {
    Matrix A, B, C;
};

/// Removes the common-angle mode by measuring angles relative to bus 0.
inline Reduced grounded(const gridtune::StateSpaceModel& m) {
    const auto n = static_cast<Eigen::Index>(m.n_buses);
    const auto N = m.A.rows();
    Matrix S = Matrix::Zero(N - 1, N), R = Matrix::Zero(N, N - 1);
    for (Eigen::Index i = 1; i < n; ++i) {
        S(i - 1, 0) = -1.0;
        S(i - 1, i) = 1.0;
        R(i, i - 1) = 1.0;
    }
    for (Eigen::Index k = n; k < N; ++k) {
        S(k - 1, k) = 1.0;
        R(k, k - 1) = 1.0;
    }
    return {S * m.A * R, S * m.B, m.C * R};
}

/// Squared H2 norm by the Kronecker solve on the grounded model.
inline double h2_oracle(const gridtune::StateSpaceModel& m) {
    const Reduced r = grounded(m);
    const Matrix X = kron_lyapunov(r.A, r.C.transpose() * r.C);
    return (r.B.transpose() * X * r.B).trace();
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

}  // namespace testkit
