#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace qksd;
using qksd::testing::max_abs;

TEST(Diagonalize, SingleZ) {
  const oracle::Spectrum sp = oracle::diagonalize(parse_hamiltonian("1 Z"));
  ASSERT_EQ(sp.eigenvalues.size(), 2);
  EXPECT_DOUBLE_EQ(sp.eigenvalues[0], -1.0);
  EXPECT_DOUBLE_EQ(sp.eigenvalues[1], 1.0);
}

TEST(Diagonalize, DiagonalTwoQubitSpectrum) {
  const PauliSum h = parse_hamiltonian("1 ZI\n1 IZ\n0.5 ZZ");
  const oracle::Spectrum sp = oracle::diagonalize(h);
  const std::vector<double> expected{-1.5, -0.5, -0.5, 2.5};
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(sp.eigenvalues[k], expected[static_cast<std::size_t>(k)], 1e-14);
  // Diagonal entries identify the basis states: |00> carries 2.5, |11> carries -1.5.
  const CMatrix d = qksd::testing::kron_dense(h);
  EXPECT_DOUBLE_EQ(d(0, 0).real(), 2.5);
  EXPECT_DOUBLE_EQ(d(1, 1).real(), -0.5);
  EXPECT_DOUBLE_EQ(d(2, 2).real(), -0.5);
  EXPECT_DOUBLE_EQ(d(3, 3).real(), -1.5);
}

TEST(Diagonalize, EigenpairResiduals) {
  std::mt19937_64 rng(6);
  const PauliSum h = qksd::testing::random_hamiltonian(6, 30, rng);
  const oracle::Spectrum sp = oracle::diagonalize(h);
  for (Eigen::Index k = 1; k < sp.eigenvalues.size(); ++k) EXPECT_LE(sp.eigenvalues[k - 1], sp.eigenvalues[k]);
  for (Eigen::Index k = 0; k < sp.eigenvalues.size(); ++k) {
    const CVector v = sp.eigenvectors.col(k);
    EXPECT_LT((qksd::apply(h, v) - sp.eigenvalues[k] * v).norm(), 1e-9);
  }
}

TEST(Diagonalize, HeisenbergChainAgainstPowerIteration) {
  const PauliSum h = models::heisenberg_xxz(10, 1.0);
  const double dense = oracle::diagonalize(h).ground();
  const double power = oracle::power_iteration_ground(h, 20000);
  EXPECT_NEAR(dense, power, 1e-8);
}

TEST(Diagonalize, RespectsDenseLimit) {
  EXPECT_THROW(oracle::diagonalize(models::tfim(5, 1.0, 1.0), 4), DimensionError);
}

TEST(Spectrum, NearestAndState) {
  const oracle::Spectrum sp = oracle::diagonalize(parse_hamiltonian("1 ZI\n1 IZ\n0.5 ZZ"));
  EXPECT_DOUBLE_EQ(sp.nearest(2.0), 2.5);
  EXPECT_DOUBLE_EQ(sp.nearest(-1.1), -1.5);
  EXPECT_NEAR(std::abs(sp.state(2, 0)[3]), 1.0, 1e-14);
}

TEST(DirectElement, EstimatorExamples) {
  const PauliSum z = parse_hamiltonian("1 Z");
  const StateVector plus = StateVector::normalized(1, CVector::Ones(2));
  EXPECT_NEAR(std::abs(oracle::direct_element(z, plus, plus, 1, 0.5) - 0.87758256189037276), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(oracle::direct_element(z, plus, plus, 2, 0.5) - 0.54030230586813977), 0.0, 1e-14);
  const PauliSum h = parse_hamiltonian("1 ZI\n1 IZ");
  const StateVector s11 = basis_state(2, "11");
  EXPECT_NEAR(std::abs(oracle::direct_element(h, s11, s11, 1, 0.2) - std::exp(0.4 * kI)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(oracle::direct_element(h, s11, s11, 0, 0.2) - 1.0), 0.0, 1e-14);
}

// Spectral and scaling-and-squaring propagation agree on random six-qubit instances.
TEST(OracleProperty, TwoPropagationRoutesAgree) {
  std::mt19937_64 rng(66);
  std::uniform_int_distribution<int> steps(0, 5);
  for (int trial = 0; trial < 8; ++trial) {
    const PauliSum h = qksd::testing::random_hamiltonian(6, 20, rng);
    const StateVector a = qksd::testing::random_state(6, rng);
    const StateVector b = qksd::testing::random_state(6, rng);
    const int n = steps(rng);
    const cplx spectral = oracle::direct_element(h, a, b, n, 0.3);
    const cplx pade = oracle::expm_element(h, a, b, n, 0.3);
    EXPECT_NEAR(std::abs(spectral - pade), 0.0, 1e-10) << trial;
  }
}

TEST(OracleProperty, ExpmIsUnitaryAndMatchesPropagator) {
  std::mt19937_64 rng(67);
  const PauliSum h = qksd::testing::random_hamiltonian(5, 15, rng);
  const CMatrix u = oracle::expm_propagator(h, 1.3);
  EXPECT_LT(max_abs(u.adjoint() * u - CMatrix::Identity(32, 32)), 1e-11);
  const SpectralPropagator p(h);
  const StateVector s = qksd::testing::random_state(5, rng);
  EXPECT_LT((u * s.amplitudes() - evolve(p, s, 1.3).amplitudes()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(PowerIteration, TwoQubitGround) {
  EXPECT_NEAR(oracle::power_iteration_ground(parse_hamiltonian("0.3 ZZ\n0.2 XX\n0.1 IZ"), 4000),
              oracle::diagonalize(parse_hamiltonian("0.3 ZZ\n0.2 XX\n0.1 IZ")).ground(), 1e-9);
}
