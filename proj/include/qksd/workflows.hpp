#pragma once

// End-to-end drivers: convergence traces, the variance monitor, filter-window
// search, and independent excited-state runs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qksd/core.hpp"
#include "qksd/estimators.hpp"
#include "qksd/geig.hpp"
#include "qksd/hamiltonian.hpp"
#include "qksd/statevec.hpp"
#include "qksd/subspace.hpp"

namespace qksd {

enum class ShiftPolicy { none, hf, mid_spectrum };
enum class GridMode { window, dft };
enum class ReferenceMode { ground, nearest };

struct RunConfig {
  PencilKind method = PencilKind::KDM_U;
  double tau = 0.1;
  int m_max = 10;
  GridMode grid_mode = GridMode::window;
  std::optional<std::pair<double, double>> window;  // absolute energies
  int j_count = 5;
  EstimatorBackend estimator = EstimatorBackend::direct;
  ShotModel shot = ShotModel::exact();
  MfeOptions mfe;
  /// Relative SVD cutoff; <= 0 selects 1e-12 (exact) or 10/sqrt(shots) (sampled).
  double svd_threshold = 0.0;
  GeigBackend geig_backend = GeigBackend::svd_regularized;
  ShiftPolicy shift = ShiftPolicy::mid_spectrum;
  double stop_variance = 1e-8;
  HamiltonianPath h_path = HamiltonianPath::commuting;
  bool h_variance = false;

  void validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be positive");
    if (m_max < 1) throw ConfigError("m_max must be >= 1");
    if (is_filter_kind(method) && grid_mode == GridMode::window) {
      if (!window) throw ConfigError("FDM methods need a filter window or grid = dft");
      if (!(window->first < window->second)) throw ConfigError("filter window needs E_min < E_max");
      if (j_count < 1) throw ConfigError("J must be >= 1");
    }
    if (estimator == EstimatorBackend::direct && shot.is_sampled()) {
      throw ConfigError("the direct estimator is the ideal device; use hadamard or mfe with shots");
    }
  }

  double effective_threshold() const {
    if (svd_threshold > 0.0) return svd_threshold;
    return shot.is_sampled() ? 10.0 * shot.noise_scale() : 1e-12;
  }
};

/// Narrow [E_ref - 0.3, E_ref + 0.2] and wide [E_ref - 20, E_ref + 20] windows (Hartree).
inline std::pair<double, double> window_preset(std::string_view name, double e_ref) {
  if (name == "narrow") return {e_ref - 0.3, e_ref + 0.2};
  if (name == "wide") return {e_ref - 20.0, e_ref + 20.0};
  throw ConfigError("unknown window preset '" + std::string(name) + "'");
}

inline double expectation(const PauliSum& h, const StateVector& s) {
  return std::real(s.amplitudes().dot(qksd::apply(h, s.amplitudes())));
}

/// Energy zero used for the propagated Hamiltonian. mid_spectrum takes the centre of
/// the bound c_I +- sum |h_i| (the identity coefficient).
inline double compute_shift(ShiftPolicy policy, const PauliSum& h, const StateVector& phi_o) {
  switch (policy) {
    case ShiftPolicy::none: return 0.0;
    case ShiftPolicy::hf: return expectation(h, phi_o);
    case ShiftPolicy::mid_spectrum: return h.coefficient(std::string(static_cast<std::size_t>(h.n_qubits()), 'I'));
  }
  return 0.0;
}

/// Half-width of the spectral bound sum_{non-identity} |h_i|.
inline double spectral_half_width(const PauliSum& h) {
  double w = 0.0;
  for (const auto& t : h.terms()) {
    if (!t.string.is_identity()) w += std::abs(t.coefficient);
  }
  return w;
}

struct VarianceResult {
  double value = 0.0;
  bool clamped = false;
};

/// Var[e^{-iH tau}] = 1 - |c^dagger F_U c|^2 with c rescaled so that c^dagger S c = 1.
inline VarianceResult variance_detailed(const CMatrix& f_unitary, const CMatrix& s, const CVector& c) {
  const double norm = std::real(c.dot(s * c));
  if (!(norm > 0.0)) throw SolverError("variance: coefficient vector has zero norm");
  const double overlap = std::norm(c.dot(f_unitary * c)) / (norm * norm);
  VarianceResult r{1.0 - overlap, false};
  if (r.value < 0.0 || r.value > 1.0) {
    if (r.value < -1e-10 || r.value > 1.0 + 1e-10) log::warn("variance " + std::to_string(r.value) + " clamped to [0,1]");
    r.value = std::clamp(r.value, 0.0, 1.0);
    r.clamped = true;
  }
  return r;
}

inline double variance(const CMatrix& f_unitary, const CMatrix& s, const CVector& c) {
  return variance_detailed(f_unitary, s, c).value;
}

inline double variance(const SubspacePencil& p, const CVector& c) {
  if (!p.f_unitary) throw SolverError("pencil carries no e^{-iH tau} matrix");
  return variance(*p.f_unitary, p.S, c);
}

struct TraceStep {
  int m = 0;
  bool ok = true;
  std::string message;
  double energy = std::numeric_limits<double>::quiet_NaN();
  double delta_e = std::numeric_limits<double>::quiet_NaN();
  double reference = std::numeric_limits<double>::quiet_NaN();  // oracle level delta_e is measured against
  double kappa = std::numeric_limits<double>::quiet_NaN();
  bool kappa_infinite = false;
  double variance = std::numeric_limits<double>::quiet_NaN();
  int retained_rank = 0;
  cplx eigenvalue;
  LedgerSnapshot ledger;
};

struct ConvergenceTrace {
  PencilKind method = PencilKind::KDM_U;
  int n_qubits = 0;
  std::size_t n_terms = 0;
  std::size_t n_terms_measured = 0;  // terms of the shifted Hamiltonian the F_H elements run over
  HamiltonianPath h_path = HamiltonianPath::commuting;
  bool h_variance = false;
  double tau = 0.0;
  double shift = 0.0;
  double oracle_ground = 0.0;
  ReferenceMode reference_mode = ReferenceMode::ground;
  double svd_threshold = 0.0;
  bool stopped_early = false;
  std::vector<TraceStep> steps;
  std::vector<std::string> warnings;

  const TraceStep& last() const { return steps.back(); }
  LedgerSnapshot ledger() const { return steps.empty() ? LedgerSnapshot{} : steps.back().ledger; }
};

/// Shared per-run state: shifted Hamiltonian, its exact propagator and the estimator.
struct Session {
  double shift = 0.0;
  PauliSum shifted;
  SpectralPropagator prop;
  Estimator estimator;
  RVector oracle_energies;  // absolute

  Session(const RunConfig& cfg, const PauliSum& h, const StateVector& phi_o)
      : shift(compute_shift(cfg.shift, h, phi_o)), shifted(h.shifted(shift)), prop(shifted) {
    if (phi_o.n_qubits() != h.n_qubits()) throw DimensionError("initial state and Hamiltonian qubit counts differ");
    oracle_energies = prop.energies().array() + shift;
    estimator.backend = cfg.estimator;
    estimator.shot = cfg.shot;
    estimator.mfe_options = cfg.mfe;
    if (cfg.estimator == EstimatorBackend::mfe) {
      estimator.mfe = MfeContext::vacuum(shifted, number_operator(h.n_qubits()));
    }
  }

  double reference_energy(ReferenceMode mode, double e) const {
    if (mode == ReferenceMode::ground) return oracle_energies.minCoeff();
    double best = oracle_energies[0];
    for (Eigen::Index k = 1; k < oracle_energies.size(); ++k) {
      if (std::abs(oracle_energies[k] - e) < std::abs(best - e)) best = oracle_energies[k];
    }
    return best;
  }
};

namespace detail {

inline FilterGrid grid_for(const RunConfig& cfg, int m, double shift) {
  if (cfg.grid_mode == GridMode::dft) return FilterGrid::dft(m, cfg.tau, shift);
  return FilterGrid::uniform(cfg.window->first, cfg.window->second, cfg.j_count);
}

/// Solves one pencil and fills the step's diagnostics.
inline void evaluate_step(const RunConfig& cfg, const Session& session, const SubspacePencil& pencil,
                          ReferenceMode mode, TraceStep& step) {
  const GEigSolution sol = solve(pencil, cfg.effective_threshold(), cfg.geig_backend);
  step.kappa = sol.condition_number;
  step.kappa_infinite = sol.condition_infinite;
  step.retained_rank = sol.retained_rank;
  const GroundSelection g = select_ground_indexed(sol, is_unitary_kind(pencil.kind), pencil.tau, pencil.energy_shift);
  step.energy = g.estimate.energy;
  step.eigenvalue = g.estimate.source;
  step.reference = session.reference_energy(mode, step.energy);
  step.delta_e = std::abs(step.energy - step.reference);
  if (pencil.f_unitary) {
    step.variance = variance(*pencil.f_unitary, pencil.S, sol.coefficients.col(static_cast<Eigen::Index>(g.index)));
  }
}

}  // namespace detail

/// Grows the pencil one time step at a time up to m_max, reusing every measured
/// correlation; stops once the variance falls below cfg.stop_variance.
/// Solver failures are recorded per step and the run continues.
inline ConvergenceTrace run_method(const RunConfig& cfg, const PauliSum& h, const StateVector& phi_o,
                                   ReferenceMode mode = ReferenceMode::ground) {
  cfg.validate();
  const Session session(cfg, h, phi_o);
  const auto& prop = session.prop;
  const auto& est = session.estimator;
  CallLedger ledger;

  ConvergenceTrace trace;
  trace.method = cfg.method;
  trace.n_qubits = h.n_qubits();
  trace.n_terms = h.size();
  trace.n_terms_measured = session.shifted.size();
  trace.h_path = cfg.h_path;
  trace.h_variance = cfg.h_variance;
  trace.tau = cfg.tau;
  trace.shift = session.shift;
  trace.oracle_ground = session.oracle_energies.minCoeff();
  trace.reference_mode = mode;
  trace.svd_threshold = cfg.effective_threshold();

  const bool unitary = is_unitary_kind(cfg.method);
  const bool need_cm = unitary || cfg.h_variance;
  const PencilKind kdm_kind = unitary ? PencilKind::KDM_U : PencilKind::KDM_H;
  const double bound = spectral_half_width(h) + std::abs(compute_shift(ShiftPolicy::mid_spectrum, h, phi_o) - session.shift);
  if (unitary && bound >= kPi / cfg.tau) {
    trace.warnings.push_back("spectral bound exceeds the Nyquist interval; eigenvalues may alias");
  }

  std::vector<cplx> c{cplx{1.0, 0.0}};
  std::vector<cplx> g;
  CMatrix f_pairs;

  for (int m = 1; m <= cfg.m_max; ++m) {
    TraceStep step;
    step.m = m;
    try {
      const int c_needed = need_cm ? m : m - 1;
      while (static_cast<int>(c.size()) <= c_needed) {
        const int n = static_cast<int>(c.size());
        const auto cat = (n == cfg.m_max && need_cm) ? LedgerCategory::F_U_extra : LedgerCategory::overlap_C_n;
        c.push_back(correlation(prop, phi_o, n, cfg.tau, est, ledger, cat));
      }
      const std::vector<cplx> c_view(c.begin(), c.begin() + c_needed + 1);
      SubspacePencil kdm;
      if (unitary) {
        kdm = assemble_kdm(kdm_kind, m, cfg.tau, session.shift, c_view);
      } else if (cfg.h_path == HamiltonianPath::commuting) {
        if (static_cast<int>(g.size()) < m) {
          auto more = hamiltonian_correlations(session.shifted, prop, phi_o, static_cast<int>(g.size()), m, cfg.tau,
                                               est, ledger);
          g.insert(g.end(), more.begin(), more.end());
        }
        kdm = assemble_kdm(kdm_kind, m, cfg.tau, session.shift, c_view, g);
      } else {
        f_pairs.conservativeResize(m, m);
        std::vector<std::pair<int, int>> pairs;
        for (int n = 0; n < m; ++n) pairs.emplace_back(n, m - 1);
        for (int n = 0; n + 1 < m; ++n) pairs.emplace_back(m - 1, n);
        hamiltonian_pairs(session.shifted, prop, phi_o, cfg.tau, pairs, est, ledger, f_pairs);
        kdm = assemble_kdm(kdm_kind, m, cfg.tau, session.shift, c_view);
        kdm.F = f_pairs;
      }
      const SubspacePencil pencil =
          is_filter_kind(cfg.method) ? build_fdm(kdm, detail::grid_for(cfg, m, session.shift)) : kdm;
      detail::evaluate_step(cfg, session, pencil, mode, step);
    } catch (const Error& e) {
      step.ok = false;
      step.message = e.what();
    }
    step.ledger = ledger.snapshot();
    trace.steps.push_back(step);
    if (step.ok && step.variance < cfg.stop_variance) {
      trace.stopped_early = m < cfg.m_max;
      break;
    }
  }
  return trace;
}

/// Runs fn(i) for i in [0, count) on up to `workers` threads; results keep index order.
template <typename Fn>
auto parallel_map(std::size_t count, Fn fn, unsigned workers = 0) {
  using R = decltype(fn(std::size_t{0}));
  std::vector<std::optional<R>> slots(count);
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
  std::vector<std::exception_ptr> errors(count);
  auto body = [&](unsigned w) {
    for (std::size_t i = w; i < count; i += workers) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    body(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body, w);
    for (auto& t : pool) t.join();
  }
  std::vector<R> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

struct FilterCandidate {
  double e_min = 0.0;
  double e_max = 0.0;
  int j_count = 1;
};

struct HyperoptRow {
  FilterCandidate candidate;
  bool ok = true;
  std::string message;
  double energy = std::numeric_limits<double>::quiet_NaN();
  double delta_e = std::numeric_limits<double>::quiet_NaN();
  double variance = std::numeric_limits<double>::quiet_NaN();
  double kappa = std::numeric_limits<double>::quiet_NaN();
  int retained_rank = 0;
};

struct HyperoptResult {
  std::vector<HyperoptRow> rows;
  std::size_t best = 0;
  LedgerSnapshot ledger;  // spent once, shared by every candidate
  double oracle_ground = 0.0;
};

/// Exhaustive search over filter windows and J on a single set of measured KDM data at
/// M = base.m_max. Scored by the variance of the selected ground vector; ties (1e-12)
/// go to smaller J, then the narrower window.
inline HyperoptResult hyperopt(const RunConfig& base, const PauliSum& h, const StateVector& phi_o,
                               const std::vector<FilterCandidate>& candidates) {
  if (candidates.empty()) throw ConfigError("hyperopt needs at least one candidate");
  RunConfig cfg = base;
  cfg.method = is_unitary_kind(base.method) ? PencilKind::FDM_U : PencilKind::FDM_H;
  cfg.grid_mode = GridMode::window;
  cfg.window = std::pair{candidates.front().e_min, candidates.front().e_max};
  cfg.validate();
  const Session session(cfg, h, phi_o);
  CallLedger ledger;
  KdmOptions opt;
  opt.h_path = cfg.h_path;
  opt.with_unitary = true;
  const PencilKind kdm_kind = is_unitary_kind(cfg.method) ? PencilKind::KDM_U : PencilKind::KDM_H;
  const SubspacePencil kdm = build_kdm(kdm_kind, session.shifted, session.prop, phi_o, cfg.m_max, cfg.tau,
                                       session.estimator, ledger, opt, session.shift);

  HyperoptResult result;
  result.ledger = ledger.snapshot();
  result.oracle_ground = session.oracle_energies.minCoeff();
  for (const auto& cand : candidates) {
    HyperoptRow row;
    row.candidate = cand;
    try {
      const SubspacePencil fdm = build_fdm(kdm, FilterGrid::uniform(cand.e_min, cand.e_max, cand.j_count));
      TraceStep step;
      detail::evaluate_step(cfg, session, fdm, ReferenceMode::ground, step);
      row.energy = step.energy;
      row.delta_e = step.delta_e;
      row.variance = step.variance;
      row.kappa = step.kappa;
      row.retained_rank = step.retained_rank;
    } catch (const Error& e) {
      row.ok = false;
      row.message = e.what();
    }
    result.rows.push_back(row);
  }

  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const auto& r = result.rows[i];
    if (!r.ok) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = result.rows[*best];
    const double dv = r.variance - b.variance;
    bool better = dv < -1e-12;
    if (std::abs(dv) <= 1e-12) {
      if (r.candidate.j_count != b.candidate.j_count) {
        better = r.candidate.j_count < b.candidate.j_count;
      } else {
        better = (r.candidate.e_max - r.candidate.e_min) < (b.candidate.e_max - b.candidate.e_min);
      }
    }
    if (better) best = i;
  }
  if (!best) throw SolverError("every hyperopt candidate failed to solve");
  result.best = *best;
  return result;
}

struct CallPrediction {
  std::string formula;
  std::uint64_t value = 0;
};

/// Element calls a trace of M steps should log: M for U kinds; L M + (M - 1) for H kinds on
/// the commuting path and L M^2 + (M - 1) otherwise, plus C_M when the H-kind variance is on.
/// Filter kinds reuse the Krylov data and share the Krylov counts.
inline CallPrediction predicted_calls(PencilKind kind, std::uint64_t l, std::uint64_t m, HamiltonianPath path,
                                      bool h_variance) {
  if (m == 0) return {"0", 0};
  if (is_unitary_kind(kind)) return {"M", m};
  const std::uint64_t extra = h_variance ? 1 : 0;
  const std::string tail = h_variance ? " + M" : " + (M - 1)";
  if (path == HamiltonianPath::commuting) return {"L*M" + tail, l * m + (m - 1) + extra};
  return {"L*M^2" + tail, l * m * m + (m - 1) + extra};
}

struct ExcitedResult {
  bool ok = true;
  std::string message;
  ConvergenceTrace trace;
  double assigned_energy = std::numeric_limits<double>::quiet_NaN();  // nearest oracle eigenvalue
  double delta_e = std::numeric_limits<double>::quiet_NaN();
};

/// One independent run per ansatz; errors stay local to their ansatz.
inline std::vector<ExcitedResult> excited_run(const RunConfig& cfg, const PauliSum& h,
                                              const std::vector<StateVector>& ansatz_states, unsigned workers = 0) {
  return parallel_map(
      ansatz_states.size(),
      [&](std::size_t i) {
        ExcitedResult r;
        try {
          r.trace = run_method(cfg, h, ansatz_states[i], ReferenceMode::nearest);
          const TraceStep* last_ok = nullptr;
          for (const auto& s : r.trace.steps)
            if (s.ok) last_ok = &s;
          if (!last_ok) throw SolverError("no step solved");
          r.assigned_energy = last_ok->reference;
          r.delta_e = last_ok->delta_e;
        } catch (const Error& e) {
          r.ok = false;
          r.message = e.what();
        }
        return r;
      },
      workers);
}

}  // namespace qksd
