#include <gtest/gtest.h>

#include "gridtune/spectral.hpp"
#include "support.hpp"

using namespace gridtune;

TEST(Spectral, PathGraphSpectrum) {
    const auto dec = eigendecompose(build_laplacian(NetworkTopology::path(2)));
    ASSERT_EQ(dec.size(), 2u);
    EXPECT_EQ(dec.lambdas(0), 0.0);
    EXPECT_NEAR(dec.lambdas(1), 2.0, 1e-14);
    EXPECT_EQ(dec.zero_modes(), 1u);
}

TEST(Spectral, CompleteGraphSpectrum) {
    const auto dec = eigendecompose(build_laplacian(NetworkTopology::complete(6)));
    EXPECT_EQ(dec.lambdas(0), 0.0);
    for (Eigen::Index k = 1; k < 6; ++k) EXPECT_NEAR(dec.lambdas(k), 6.0, 1e-12);
}

TEST(Spectral, ReconstructsLaplacianWithOrthonormalBasis) {
    testkit::Random rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto n = rng.integer(1, 25);
        const Matrix L = build_laplacian(testkit::random_topology(rng, n));
        const auto dec = eigendecompose(L);
        const Matrix& U = dec.U;
        EXPECT_LE((U.transpose() * U - Matrix::Identity(n, n)).norm(), 1e-12);
        EXPECT_LE((U * dec.lambdas.asDiagonal() * U.transpose() - L).norm(), 1e-11 * std::max(1.0, L.norm()));
        for (Eigen::Index k = 1; k < dec.lambdas.size(); ++k) EXPECT_GE(dec.lambdas(k), dec.lambdas(k - 1));
        EXPECT_EQ(dec.zero_modes(), 1u);
        // Sign convention: first significant entry of every vector is positive.
        for (Eigen::Index k = 0; k < U.cols(); ++k) {
            Eigen::Index i = 0;
            while (std::abs(U(i, k)) <= 1e-12) ++i;
            EXPECT_GT(U(i, k), 0.0);
        }
    }
}

TEST(Spectral, RejectsAsymmetricInput) {
    Matrix L(2, 2);
    L << 1, -1, -0.5, 1;
    EXPECT_THROW(eigendecompose(L), InputError);
}

TEST(Spectral, ModalSubsystemsHaveSumOfEigenvalueStructure) {
    const auto dec = eigendecompose(build_laplacian(NetworkTopology::path(2)));
    const auto params = SystemParams::uniform(2, 1.0, 1.0, 1.0, 1.0);
    const auto subs = modal_subsystems(dec, params, IDroop{2.0, 1.0, 1.0});
    ASSERT_EQ(subs.size(), 2u);
    EXPECT_TRUE(subs[0].zero_mode);
    EXPECT_FALSE(subs[1].zero_mode);
    EXPECT_DOUBLE_EQ(subs[1].A(1, 0), -2.0);
    EXPECT_EQ(subs[0].deflated().A.rows(), 2);
    EXPECT_THROW(modal_subsystems(dec, SystemParams(Vector::Ones(2), Vector::LinSpaced(2, 1, 2), Vector::Ones(2),
                                                    Vector::Ones(2)),
                                  Droop{1.0}),
                 HomogeneityError);
    EXPECT_THROW(modal_subsystems(dec, params, VirtualInertia{1.0, 1.0}), UnboundedNoiseError);
}

TEST(Spectral, ModalTransferMatchesFullModel) {
    // U^T G(s) U is diagonal with the modal transfer functions on the diagonal.
    testkit::Random rng(5);
    const auto topo = testkit::random_topology(rng, 6, 0.4);
    const auto params = SystemParams::uniform(6, 1.2, 0.8, 0.7, 0.3);
    const IDroop c{1.5, 2.0, 0.9};
    const auto model = assemble_state_space(topo, params, c);
    const auto dec = eigendecompose(model.laplacian);
    const auto subs = modal_subsystems(dec, params, c);
    const Complex s(0.1, 1.3);
    const Eigen::MatrixXcd G = frequency_response(model, s);
    const Eigen::MatrixXcd Gp = dec.U.transpose().cast<Complex>() * G.leftCols(6) * dec.U.cast<Complex>();
    for (Eigen::Index k = 0; k < 6; ++k) {
        StateSpaceModel one;
        one.A = subs[k].A;
        one.B = subs[k].B;
        one.C = subs[k].C;
        const auto gk = frequency_response(one, s);
        EXPECT_LE(std::abs(Gp(k, k) - gk(0, 0)), 1e-10);
        for (Eigen::Index j = 0; j < 6; ++j)
            if (j != k) EXPECT_LE(std::abs(Gp(k, j)), 1e-10);
    }
}
