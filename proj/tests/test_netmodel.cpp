#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "gridtune/netmodel.hpp"
#include "support.hpp"

using namespace gridtune;

TEST(Topology, RejectsMalformedNetworks) {
    EXPECT_THROW(NetworkTopology(0, {}), ConstructionError);
    EXPECT_THROW(NetworkTopology(kMaxBuses + 1, {}), ConstructionError);
    EXPECT_THROW(NetworkTopology(2, {{0, 0, 1.0}}), ConstructionError);
    EXPECT_THROW(NetworkTopology(2, {{0, 2, 1.0}}), ConstructionError);
    EXPECT_THROW(NetworkTopology(2, {{0, 1, 0.0}}), ConstructionError);
    EXPECT_THROW(NetworkTopology(2, {{0, 1, -1.0}}), ConstructionError);
    EXPECT_THROW(NetworkTopology(2, {{0, 1, std::numeric_limits<double>::infinity()}}), ConstructionError);
    EXPECT_THROW(NetworkTopology(2, {{0, 1, 1.0}, {1, 0, 2.0}}), ConstructionError);
    EXPECT_THROW(NetworkTopology(3, {{0, 1, 1.0}}), ConstructionError);
    EXPECT_NO_THROW(NetworkTopology(1, {}));
}

TEST(Topology, FactoriesBuildConnectedGraphs) {
    EXPECT_EQ(NetworkTopology::path(5).lines().size(), 4u);
    EXPECT_EQ(NetworkTopology::ring(5).lines().size(), 5u);
    EXPECT_EQ(NetworkTopology::complete(5).lines().size(), 10u);
    EXPECT_EQ(NetworkTopology::star(5).lines().size(), 4u);
}

TEST(Laplacian, SymmetricWithZeroRowSums) {
    testkit::Random rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto topo = testkit::random_topology(rng, rng.integer(1, 15));
        const Matrix L = build_laplacian(topo);
        EXPECT_LE((L - L.transpose()).norm(), 0.0);
        EXPECT_LE(L.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
        for (Eigen::Index i = 0; i < L.rows(); ++i)
            for (Eigen::Index j = 0; j < L.cols(); ++j)
                if (i != j) EXPECT_LE(L(i, j), 0.0);
    }
}

TEST(Laplacian, TwoBusLine) {
    const Matrix L = build_laplacian(NetworkTopology::path(2, 1.5));
    EXPECT_DOUBLE_EQ(L(0, 0), 1.5);
    EXPECT_DOUBLE_EQ(L(0, 1), -1.5);
    EXPECT_DOUBLE_EQ(L(1, 1), 1.5);
}

TEST(Params, Validation) {
    EXPECT_THROW(SystemParams::uniform(2, -1.0, 1.0, 1.0, 1.0), InputError);
    EXPECT_THROW(SystemParams::uniform(2, 1.0, 0.0, 1.0, 1.0), InputError);
    EXPECT_THROW(SystemParams::uniform(2, 1.0, 1.0, -1.0, 1.0), InputError);
    EXPECT_THROW(SystemParams::uniform(2, 1.0, 1.0, 1.0, -1.0), InputError);
    const auto p = SystemParams::uniform(3, 1.0, 2.0, 0.0, 0.5);
    EXPECT_TRUE(p.is_homogeneous());
    EXPECT_DOUBLE_EQ(p.uniform_values().d, 2.0);
    const SystemParams h(Vector::Ones(2), Vector::LinSpaced(2, 1.0, 2.0), Vector::Ones(2), Vector::Ones(2));
    EXPECT_FALSE(h.is_homogeneous());
    EXPECT_THROW(h.uniform_values(), HomogeneityError);
}

TEST(Controller, TransferFunctionLimits) {
    const IDroop c{2.0, 0.5, 1.0};
    EXPECT_NEAR(std::abs(controller_transfer(c, Complex(0.0, 0.0)) - 1.0), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(controller_transfer(c, Complex(0.0, 1e9)) - 2.0), 0.0, 1e-8);
    EXPECT_EQ(controller_transfer(IDroop{2.0, std::numeric_limits<double>::infinity(), 1.0}, Complex(0, 3)),
              Complex(1.0, 0.0));
    EXPECT_THROW(controller_transfer(c, Complex(-0.5, 0.0)), DomainError);
    EXPECT_EQ(controller_transfer(VirtualInertia{2.0, 1.0}, Complex(0.0, 3.0)), Complex(1.0, 6.0));
    EXPECT_THROW(validate_controller(Droop{0.0}), InputError);
    EXPECT_THROW(validate_controller(IDroop{-1.0, 1.0, 1.0}), InputError);
    EXPECT_THROW(validate_controller(IDroop{1.0, -1.0, 1.0}), InputError);
}

TEST(StateSpace, SingleBusMatchesBusTransfer) {
    // Input w_p enters scaled by k_p, so G_p(s) = k_p p(s).
    const auto topo = NetworkTopology(1, {});
    const auto params = SystemParams::uniform(1, 1.3, 0.7, 0.9, 0.4);
    for (const ControllerConfig cfg : {ControllerConfig{Droop{1.1}}, ControllerConfig{IDroop{2.0, 0.8, 1.1}}}) {
        const auto model = assemble_state_space(topo, params, cfg);
        for (double w : {0.1, 1.0, 7.0}) {
            const Complex s(0.0, w);
            const auto G = frequency_response(model, s);
            const Complex p = bus_transfer(1.3, 0.7, cfg, s);
            EXPECT_LE(std::abs(G(0, 0) - 0.9 * p), 1e-12);
            // Noise passes through the controller: -k_w c(s) p(s).
            EXPECT_LE(std::abs(G(0, 1) + 0.4 * controller_transfer(cfg, s) * p), 1e-12);
        }
    }
}

TEST(StateSpace, DimensionsAndErrors) {
    const auto topo = NetworkTopology::ring(4);
    const auto params = SystemParams::uniform(4, 1.0, 1.0, 1.0, 1.0);
    const auto m = assemble_state_space(topo, params, IDroop{1.0, 1.0, 1.0});
    EXPECT_EQ(m.A.rows(), 12);
    EXPECT_EQ(m.B.cols(), 8);
    EXPECT_EQ(m.C.rows(), 4);
    EXPECT_EQ(m.state_labels.size(), 12u);
    EXPECT_EQ(assemble_state_space(topo, params, Droop{1.0}).A.rows(), 8);
    EXPECT_THROW(assemble_state_space(topo, params, VirtualInertia{1.0, 1.0}), UnboundedNoiseError);
    EXPECT_NO_THROW(assemble_state_space(topo, SystemParams::uniform(4, 1, 1, 1, 0), VirtualInertia{1.0, 1.0}));
    EXPECT_THROW(assemble_state_space(topo, params, IDroop{1.0, 0.0, 1.0}), DomainError);
    EXPECT_THROW(assemble_state_space(topo, SystemParams::uniform(3, 1, 1, 1, 1), Droop{1.0}), InputError);
}
