#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace qksd;
using qksd::testing::max_abs;

namespace {

const StateVector kPlus = StateVector::normalized(1, CVector::Ones(2));

RunConfig z_config(PencilKind kind, int m_max) {
  RunConfig cfg;
  cfg.method = kind;
  cfg.tau = 0.5;
  cfg.m_max = m_max;
  cfg.stop_variance = 0.0;
  cfg.shift = ShiftPolicy::none;
  return cfg;
}

/// Normalized state supported on the eigenvectors with the given indices.
StateVector eigen_mixture(const SpectralPropagator& p, const std::vector<Eigen::Index>& idx, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  CVector c = CVector::Zero(p.eigenvectors().cols());
  for (auto k : idx) c[k] = {1.0 + std::abs(g(rng)), g(rng)};
  return StateVector::normalized(p.n_qubits(), p.eigenvectors() * c);
}

}  // namespace

TEST(RunMethod, ZTwoSteps) {
  const ConvergenceTrace t = run_method(z_config(PencilKind::KDM_U, 2), parse_hamiltonian("1 Z"), kPlus);
  ASSERT_EQ(t.steps.size(), 2u);
  EXPECT_NEAR(t.steps[1].energy, -1.0, 1e-9);
  EXPECT_NEAR(t.steps[1].delta_e, 0.0, 1e-9);
  EXPECT_DOUBLE_EQ(t.oracle_ground, -1.0);
}

TEST(RunMethod, SingleStepRayleighQuotient) {
  std::mt19937_64 rng(2);
  const PauliSum h = qksd::testing::random_hamiltonian(3, 9, rng);
  const StateVector phi = qksd::testing::random_state(3, rng);
  RunConfig cfg;
  cfg.method = PencilKind::KDM_H;
  cfg.m_max = 1;
  for (auto policy : {ShiftPolicy::none, ShiftPolicy::hf, ShiftPolicy::mid_spectrum}) {
    cfg.shift = policy;
    const ConvergenceTrace t = run_method(cfg, h, phi);
    ASSERT_EQ(t.steps.size(), 1u);
    EXPECT_NEAR(t.steps[0].energy, expectation(h, phi), 1e-12);
  }
}

TEST(RunMethod, DftFilterTraceMatchesKrylovTrace) {
  const PauliSum h = models::tfim(4, 1.0, 0.8);
  const StateVector phi = models::plus_state(4);
  RunConfig cfg;
  cfg.m_max = 8;
  cfg.stop_variance = 0.0;
  cfg.svd_threshold = 1e-10;
  const ConvergenceTrace k = run_method(cfg, h, phi);
  cfg.method = PencilKind::FDM_U;
  cfg.grid_mode = GridMode::dft;
  const ConvergenceTrace f = run_method(cfg, h, phi);
  ASSERT_EQ(k.steps.size(), f.steps.size());
  for (std::size_t i = 0; i < k.steps.size(); ++i) {
    EXPECT_NEAR(k.steps[i].energy, f.steps[i].energy, 1e-8) << i;
    EXPECT_EQ(k.steps[i].ledger, f.steps[i].ledger);
  }
}

TEST(RunMethod, LedgerGrowsAndTotalsMatchSteps) {
  const PauliSum h = models::tfim(5, 1.0, 1.0);
  RunConfig cfg;
  cfg.m_max = 7;
  cfg.stop_variance = 0.0;
  const ConvergenceTrace t = run_method(cfg, h, models::plus_state(5));
  ASSERT_EQ(t.steps.size(), 7u);
  for (std::size_t i = 1; i < t.steps.size(); ++i) {
    EXPECT_GE(t.steps[i].ledger.total_calls(), t.steps[i - 1].ledger.total_calls());
  }
  EXPECT_EQ(t.ledger().total_calls(), 7u);
  EXPECT_EQ(t.ledger().calls_in(LedgerCategory::F_U_extra), 1u);

  cfg.method = PencilKind::KDM_H;
  const ConvergenceTrace th = run_method(cfg, h, models::plus_state(5));
  // Shifting by the (absent) identity coefficient leaves L = 2N - 1 terms.
  EXPECT_EQ(th.ledger().total_calls(), 9u * 7u + 6u);
}

TEST(PredictedCalls, MatchesTraceLedgers) {
  const PauliSum h = models::tfim(4, 1.0, 1.0);
  for (auto kind : {PencilKind::KDM_U, PencilKind::KDM_H, PencilKind::FDM_U, PencilKind::FDM_H}) {
    for (auto path : {HamiltonianPath::commuting, HamiltonianPath::non_commuting}) {
      for (bool hv : {false, true}) {
        RunConfig cfg;
        cfg.method = kind;
        cfg.m_max = 5;
        cfg.stop_variance = 0.0;
        cfg.h_path = path;
        cfg.h_variance = hv;
        cfg.window = std::pair{-6.0, 0.0};
        cfg.j_count = 3;
        const ConvergenceTrace t = run_method(cfg, h, models::plus_state(4));
        const CallPrediction pred = predicted_calls(kind, t.n_terms_measured, 5, path, hv);
        EXPECT_EQ(t.ledger().total_calls(), pred.value) << kind_name(kind) << " " << pred.formula;
      }
    }
  }
  EXPECT_EQ(predicted_calls(PencilKind::KDM_U, 15, 8, HamiltonianPath::commuting, false).value, 8u);
  EXPECT_EQ(predicted_calls(PencilKind::KDM_H, 15, 8, HamiltonianPath::commuting, false).value, 127u);
  EXPECT_EQ(predicted_calls(PencilKind::KDM_H, 15, 8, HamiltonianPath::non_commuting, false).value, 967u);
}

TEST(RunMethod, StopsEarlyOnVariance) {
  std::mt19937_64 rng(5);
  const PauliSum h = qksd::testing::random_hamiltonian(3, 8, rng);
  const SpectralPropagator p(h);
  const StateVector phi = eigen_mixture(p, {0, 3}, rng);
  RunConfig cfg;
  cfg.m_max = 8;
  cfg.tau = 0.3;
  const ConvergenceTrace t = run_method(cfg, h, phi);
  EXPECT_TRUE(t.stopped_early);
  EXPECT_EQ(t.steps.size(), 2u);
  EXPECT_LT(t.last().variance, 1e-8);
}

TEST(RunMethod, FailuresAreRecordedPerStep) {
  RunConfig cfg = z_config(PencilKind::KDM_U, 3);
  cfg.svd_threshold = 2.0;  // nothing can be retained
  const ConvergenceTrace t = run_method(cfg, parse_hamiltonian("1 Z"), kPlus);
  ASSERT_EQ(t.steps.size(), 3u);
  for (const auto& s : t.steps) {
    EXPECT_FALSE(s.ok);
    EXPECT_FALSE(s.message.empty());
  }
}

TEST(RunMethod, SampledRunsAreSeedDeterministic) {
  const PauliSum h = models::tfim(4, 1.0, 1.0);
  RunConfig cfg;
  cfg.m_max = 5;
  cfg.stop_variance = 0.0;
  cfg.estimator = EstimatorBackend::hadamard;
  cfg.shot = ShotModel::sampled(10000, 42);
  const ConvergenceTrace a = run_method(cfg, h, models::plus_state(4));
  const ConvergenceTrace b = run_method(cfg, h, models::plus_state(4));
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    EXPECT_EQ(a.steps[i].energy, b.steps[i].energy);
    EXPECT_EQ(a.steps[i].ledger.total_shots(), b.steps[i].ledger.total_shots());
  }
  EXPECT_DOUBLE_EQ(a.svd_threshold, 0.1);
  cfg.shot = ShotModel::sampled(10000, 43);
  const ConvergenceTrace c = run_method(cfg, h, models::plus_state(4));
  EXPECT_NE(a.steps.back().energy, c.steps.back().energy);
}

TEST(RunConfig, ValidationErrors) {
  RunConfig cfg;
  cfg.tau = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.m_max = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.method = PencilKind::FDM_H;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.window = std::pair{1.0, 0.0};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.shot = ShotModel::sampled(100, 1);
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(WindowPreset, RelativeToReference) {
  const auto n = window_preset("narrow", -8.0);
  EXPECT_DOUBLE_EQ(n.first, -8.3);
  EXPECT_DOUBLE_EQ(n.second, -7.8);
  const auto w = window_preset("wide", -8.0);
  EXPECT_DOUBLE_EQ(w.first, -28.0);
  EXPECT_DOUBLE_EQ(w.second, 12.0);
  EXPECT_THROW(window_preset("medium", 0.0), ConfigError);
}

TEST(Variance, SingleStepPlusUnderZ) {
  CMatrix s(1, 1), f(1, 1);
  s << 1.0;
  f << std::cos(0.5);
  CVector c(1);
  c << 3.0;  // rescaled internally
  EXPECT_NEAR(variance(f, s, c), std::pow(std::sin(0.5), 2), 1e-15);
  EXPECT_NEAR(variance(f, s, c), 0.22984884706593015, 1e-15);
  EXPECT_THROW(variance(f, s, CVector::Zero(1)), SolverError);
}

TEST(Variance, EigenvectorOfInvariantSubspaceIsZero) {
  std::mt19937_64 rng(8);
  const PauliSum h = qksd::testing::random_hamiltonian(3, 8, rng);
  const SpectralPropagator p(h);
  const StateVector phi = eigen_mixture(p, {1, 4, 6}, rng);
  CallLedger ledger;
  KdmOptions opt;
  opt.with_unitary = true;
  const SubspacePencil pen = build_kdm(PencilKind::KDM_U, h, p, phi, 3, 0.4, Estimator::direct(), ledger, opt);
  const GEigSolution sol = solve(pen);
  for (Eigen::Index k = 0; k < sol.coefficients.cols(); ++k) EXPECT_NEAR(variance(pen, sol.coefficients.col(k)), 0.0, 1e-10);
}

TEST(Variance, RandomCoefficientsInUnitInterval) {
  std::mt19937_64 rng(9);
  const PauliSum h = qksd::testing::random_hamiltonian(4, 10, rng);
  const SpectralPropagator p(h);
  CallLedger ledger;
  const SubspacePencil pen =
      build_kdm(PencilKind::KDM_U, h, p, qksd::testing::random_state(4, rng), 5, 0.3, Estimator::direct(), ledger);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    CVector c(5);
    for (auto& x : c) x = {g(rng), g(rng)};
    const double v = variance(pen, c);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Hyperopt, SingleCandidate) {
  RunConfig cfg;
  cfg.m_max = 6;
  const PauliSum h = models::tfim(4, 1.0, 1.0);
  const HyperoptResult r = hyperopt(cfg, h, models::plus_state(4), {{-6.0, 0.0, 4}});
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.best, 0u);
  EXPECT_TRUE(r.rows[0].ok);
  EXPECT_THROW(hyperopt(cfg, h, models::plus_state(4), {}), ConfigError);
}

TEST(Hyperopt, SharesOneSetOfMeasurements) {
  RunConfig cfg;
  cfg.m_max = 6;
  const PauliSum h = models::tfim(4, 1.0, 1.0);
  const HyperoptResult one = hyperopt(cfg, h, models::plus_state(4), {{-6.0, 0.0, 4}});
  const HyperoptResult many =
      hyperopt(cfg, h, models::plus_state(4), {{-6.0, 0.0, 4}, {-5.0, -1.0, 3}, {-30.0, 10.0, 6}, {-4.0, -3.0, 2}});
  EXPECT_EQ(one.ledger, many.ledger);
  EXPECT_EQ(many.ledger.total_calls(), 6u);
}

TEST(Hyperopt, TieBreakPrefersSmallerJThenNarrowerWindow) {
  // Every grid spans the same invariant subspace, so all variances vanish and only the tie-break decides.
  std::mt19937_64 rng(12);
  const PauliSum h = qksd::testing::random_hamiltonian(3, 8, rng);
  const SpectralPropagator p(h);
  const StateVector phi = eigen_mixture(p, {0}, rng);
  RunConfig cfg;
  cfg.m_max = 4;
  cfg.tau = 0.3;
  const HyperoptResult r = hyperopt(cfg, h, phi, {{-3.0, 3.0, 3}, {-3.0, 3.0, 2}, {-1.0, 1.0, 2}, {-2.0, 2.0, 4}});
  for (const auto& row : r.rows) EXPECT_NEAR(row.variance, 0.0, 1e-10);
  EXPECT_EQ(r.best, 2u);
}

TEST(Hyperopt, DftGridIsNeverWorseOnInvariantData) {
  std::mt19937_64 rng(13);
  const PauliSum h = qksd::testing::random_hamiltonian(3, 8, rng);
  const SpectralPropagator p(h);
  const StateVector phi = eigen_mixture(p, {0, 2, 5, 7}, rng);
  RunConfig cfg;
  cfg.m_max = 5;
  cfg.tau = 0.3;
  cfg.shift = ShiftPolicy::none;
  const double spacing = 2.0 * kPi / (cfg.m_max * cfg.tau);
  std::vector<FilterCandidate> cands{{0.0, (cfg.m_max - 1) * spacing, cfg.m_max}};
  for (int j = 1; j < cfg.m_max; ++j) cands.push_back({-3.0, 3.0, j});
  const HyperoptResult r = hyperopt(cfg, h, phi, cands);
  ASSERT_TRUE(r.rows[0].ok);
  for (std::size_t i = 1; i < r.rows.size(); ++i) {
    if (r.rows[i].ok) {
      EXPECT_LE(r.rows[0].variance, r.rows[i].variance + 1e-10) << i;
    }
  }
}

TEST(Excited, ExactEigenstateConvergesImmediately) {
  const PauliSum h = models::heisenberg_xxz(3, 0.5);
  const oracle::Spectrum sp = oracle::diagonalize(h);
  RunConfig cfg;
  cfg.m_max = 3;
  const std::vector<StateVector> states{sp.state(3, 2), sp.state(3, 5)};
  const auto results = excited_run(cfg, h, states, 2);
  ASSERT_EQ(results.size(), 2u);
  EXPECT_NEAR(results[0].trace.steps[0].energy, sp.eigenvalues[2], 1e-10);
  EXPECT_NEAR(results[1].trace.steps[0].energy, sp.eigenvalues[5], 1e-10);
  EXPECT_NEAR(results[1].delta_e, 0.0, 1e-10);
}

TEST(Excited, DimerSingletNotTriplet) {
  const PauliSum h = models::heisenberg_xxz(2, 1.0);
  RunConfig cfg;
  cfg.m_max = 3;
  const auto results = excited_run(cfg, h, {models::singlet_ansatz(2, "01", "10"), basis_state(2, "01")});
  EXPECT_NEAR(results[0].assigned_energy, -3.0, 1e-12);
  EXPECT_NEAR(results[0].delta_e, 0.0, 1e-9);
  // |01> mixes singlet and the m = 0 triplet; the lowest retained level is still the singlet.
  EXPECT_NEAR(results[1].trace.last().energy, -3.0, 1e-9);
}

TEST(Excited, TargetOutsideSectorIsAbsent) {
  // |00> is a triplet member: the singlet never enters the retained spectrum.
  const PauliSum h = models::heisenberg_xxz(2, 1.0);
  RunConfig cfg;
  cfg.m_max = 3;
  const auto results = excited_run(cfg, h, {basis_state(2, "00")});
  ASSERT_TRUE(results[0].ok);
  EXPECT_NEAR(results[0].assigned_energy, 1.0, 1e-12);
  EXPECT_GT(std::abs(results[0].trace.last().energy + 3.0), 1.0);
}

TEST(Excited, FailuresStayLocal) {
  const PauliSum h = models::heisenberg_xxz(2, 1.0);
  RunConfig cfg;
  cfg.m_max = 2;
  const auto results = excited_run(cfg, h, {models::singlet_ansatz(2, "01", "10"), basis_state(3, "000")});
  EXPECT_TRUE(results[0].ok);
  EXPECT_FALSE(results[1].ok);
}

TEST(ParallelMap, OrderAndErrors) {
  const auto out = parallel_map(10, [](std::size_t i) { return static_cast<int>(i * i); }, 3);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], static_cast<int>(i * i));
  EXPECT_THROW(parallel_map(
                   4,
                   [](std::size_t i) {
                     if (i == 2) throw SolverError("boom");
                     return 0;
                   },
                   2),
               SolverError);
}

// Once m reaches the dimension of the invariant subspace the error vanishes.
TEST(WorkflowProperty, ExactOnceInvariantSubspaceIsSpanned) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 6; ++trial) {
    const PauliSum h = qksd::testing::random_hamiltonian(4, 10, rng);
    const SpectralPropagator p(h);
    const int d = 2 + trial % 3;
    std::vector<Eigen::Index> idx;
    for (int k = 0; k < d; ++k) idx.push_back(3 * k + trial % 2);
    const StateVector phi = eigen_mixture(p, idx, rng);
    for (auto kind : {PencilKind::KDM_U, PencilKind::KDM_H}) {
      RunConfig cfg;
      cfg.method = kind;
      cfg.m_max = d + 2;
      cfg.tau = 0.2;
      cfg.stop_variance = 0.0;
      cfg.svd_threshold = 1e-10;
      cfg.h_variance = true;
      const ConvergenceTrace t = run_method(cfg, h, phi, ReferenceMode::nearest);
      for (const auto& s : t.steps) {
        if (s.m < d) continue;
        ASSERT_TRUE(s.ok) << s.message;
        EXPECT_NEAR(s.energy, p.energies()[idx[0]], 1e-8) << trial << " m=" << s.m;
      }
    }
  }
}

TEST(WorkflowProperty, VarianceNonIncreasingBeforeTruncation) {
  // Ritz-vector variance is not monotone in general (it rises for random instances and for
  // starting states far above the ground level), so the check runs on the TFIM chains.
  struct Case {
    PauliSum h;
    StateVector phi;
  };
  std::vector<Case> cases;
  for (int n : {4, 6, 8}) {
    for (double g : {0.5, 1.0, 1.5}) cases.push_back({models::tfim(n, 1.0, g), models::plus_state(n)});
  }
  for (std::size_t c = 0; c < cases.size(); ++c) {
    RunConfig cfg;
    cfg.m_max = 10;
    cfg.stop_variance = 0.0;
    const ConvergenceTrace t = run_method(cfg, cases[c].h, cases[c].phi);
    for (std::size_t i = 1; i < t.steps.size(); ++i) {
      if (t.steps[i].retained_rank < t.steps[i].m) break;
      EXPECT_LE(t.steps[i].variance, t.steps[i - 1].variance + 1e-10) << c << " m=" << t.steps[i].m;
    }
  }
}

// Transformed and directly built filter pencils give the same trace energies.
TEST(WorkflowProperty, FilterTraceMatchesDirectFilterPencils) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 4; ++trial) {
    const PauliSum h = qksd::testing::random_hamiltonian(3, 8, rng);
    const StateVector phi = qksd::testing::random_state(3, rng);
    RunConfig cfg;
    cfg.method = PencilKind::FDM_U;
    cfg.m_max = 10;
    cfg.j_count = 4;
    cfg.window = std::pair{-3.0, 1.0};
    cfg.stop_variance = 0.0;
    cfg.svd_threshold = 1e-8;
    cfg.shift = ShiftPolicy::none;
    const ConvergenceTrace t = run_method(cfg, h, phi);
    const SpectralPropagator p(h);
    for (const auto& s : t.steps) {
      if (s.m < cfg.j_count) continue;
      const SubspacePencil ref = oracle::direct_fdm_pencil(PencilKind::FDM_U, h, p, phi,
                                                           FilterGrid::uniform(-3.0, 1.0, 4), s.m, cfg.tau);
      const double e = select_ground(solve(ref, 1e-8), ref).energy;
      EXPECT_NEAR(s.energy, e, 1e-8) << trial << " m=" << s.m;
    }
  }
}
