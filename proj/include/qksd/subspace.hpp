#pragma once

// Krylov (KDM) and filter (FDM) subspace pencils.
//
// Krylov basis |phi_n> = e^{-i n H tau}|phi_o>, n = 0..M-1, so
//   S[n][n']   = C_{n'-n},      C_{-m} = conj(C_m)
//   F_U[n][n'] = C_{n'-n+1}
//   F_H[n][n'] = G_{n'-n},      G_m = <phi_o| H e^{-i m H tau} |phi_o>, G_{-m} = conj(G_m)
// Filter basis |phi_j> = sum_n e^{-i n (H - E_j) tau}|phi_o> = sum_n W[n][j] |phi_n>
// with W[n][j] = e^{+i n E_j tau}, giving F_J = W^dagger F_K W and S_J = W^dagger S_K W.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qksd/core.hpp"
#include "qksd/estimators.hpp"
#include "qksd/hamiltonian.hpp"
#include "qksd/statevec.hpp"

namespace qksd {

enum class PencilKind { KDM_H, KDM_U, FDM_H, FDM_U };

inline constexpr std::string_view kind_name(PencilKind k) {
  switch (k) {
    case PencilKind::KDM_H: return "KDM_H";
    case PencilKind::KDM_U: return "KDM_U";
    case PencilKind::FDM_H: return "FDM_H";
    case PencilKind::FDM_U: return "FDM_U";
  }
  return "?";
}

inline PencilKind parse_kind(std::string_view s) {
  if (s == "KDM_H") return PencilKind::KDM_H;
  if (s == "KDM_U") return PencilKind::KDM_U;
  if (s == "FDM_H") return PencilKind::FDM_H;
  if (s == "FDM_U") return PencilKind::FDM_U;
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

/// True when f(H) = e^{-iH tau}.
inline constexpr bool is_unitary_kind(PencilKind k) { return k == PencilKind::KDM_U || k == PencilKind::FDM_U; }
inline constexpr bool is_filter_kind(PencilKind k) { return k == PencilKind::FDM_H || k == PencilKind::FDM_U; }

/// Filter energies in absolute units.
struct FilterGrid {
  double e_min = 0.0;
  double e_max = 0.0;
  std::vector<double> energies;

  std::size_t size() const { return energies.size(); }

  /// J points spread uniformly over [e_min, e_max], endpoints included. A single
  /// point sits at the window midpoint.
  static FilterGrid uniform(double e_min, double e_max, int j_count) {
    if (!(e_min < e_max)) throw ConfigError("filter window needs E_min < E_max");
    if (j_count < 1) throw ConfigError("filter grid needs J >= 1");
    FilterGrid g{e_min, e_max, {}};
    if (j_count == 1) {
      g.energies.push_back(0.5 * (e_min + e_max));
      return g;
    }
    for (int j = 0; j < j_count; ++j) g.energies.push_back(e_min + (e_max - e_min) * j / (j_count - 1));
    return g;
  }

  /// E_j = offset + 2 pi j / (M tau), j = 0..M-1; W is then M times a unitary.
  static FilterGrid dft(int m, double tau, double offset = 0.0) {
    FilterGrid g;
    for (int j = 0; j < m; ++j) g.energies.push_back(offset + 2.0 * kPi * j / (m * tau));
    g.e_min = g.energies.front();
    g.e_max = g.energies.back();
    return g;
  }

  static FilterGrid from_energies(std::vector<double> e) {
    if (e.empty()) throw ConfigError("filter grid needs J >= 1");
    std::sort(e.begin(), e.end());
    FilterGrid g{e.front(), e.back(), std::move(e)};
    return g;
  }
};

struct TransformW {
  CMatrix matrix;  // M x J
  bool is_dft = false;
};

/// W[n][j] = e^{+i n (E_j - shift) tau}; `shift` is the energy zero of the pencil's frame.
inline TransformW build_W(const FilterGrid& grid, int m, double tau, double shift = 0.0) {
  if (m < 1) throw DimensionError("build_W needs M >= 1");
  const auto j_count = static_cast<Eigen::Index>(grid.size());
  TransformW w;
  w.matrix.resize(m, j_count);
  for (Eigen::Index j = 0; j < j_count; ++j) {
    const double e = grid.energies[static_cast<std::size_t>(j)] - shift;
    for (Eigen::Index n = 0; n < m; ++n) w.matrix(n, j) = std::exp(kI * (static_cast<double>(n) * e * tau));
  }
  if (j_count == m) {
    // DFT grid: energies equal 2 pi j / (M tau) modulo 2 pi / tau, in any order.
    std::vector<bool> hit(static_cast<std::size_t>(m), false);
    bool dft = true;
    for (Eigen::Index j = 0; j < j_count && dft; ++j) {
      const double e = grid.energies[static_cast<std::size_t>(j)] - shift;
      const double slot = e * m * tau / (2.0 * kPi);
      const double r = std::round(slot);
      if (std::abs(slot - r) > 1e-9) {
        dft = false;
        break;
      }
      const auto idx = static_cast<std::size_t>(((static_cast<long long>(r) % m) + m) % m);
      if (hit[idx]) dft = false;
      hit[idx] = true;
    }
    w.is_dft = dft;
  }
  return w;
}

struct SubspacePencil {
  CMatrix F;
  CMatrix S;
  PencilKind kind = PencilKind::KDM_U;
  double tau = 0.0;
  int steps = 0;  // M
  double energy_shift = 0.0;
  std::optional<FilterGrid> grid;
  /// Matrix of e^{-iH tau} in the same basis; equals F for U kinds. Feeds the variance monitor.
  std::optional<CMatrix> f_unitary;
  std::vector<std::string> warnings;

  Eigen::Index dimension() const { return S.rows(); }
};

/// Hermitian Toeplitz matrix T[n][n'] = c(n' - n) with c(-m) = conj(c(m)).
inline CMatrix hermitian_toeplitz(const std::vector<cplx>& c, int m) {
  CMatrix t(m, m);
  for (int n = 0; n < m; ++n) {
    for (int np = 0; np < m; ++np) {
      const int d = np - n;
      t(n, np) = d >= 0 ? c[static_cast<std::size_t>(d)] : std::conj(c[static_cast<std::size_t>(-d)]);
    }
  }
  return t;
}

/// F_U[n][n'] = C_{n'-n+1}; needs C_0..C_M.
inline CMatrix shifted_toeplitz(const std::vector<cplx>& c, int m) {
  CMatrix t(m, m);
  for (int n = 0; n < m; ++n) {
    for (int np = 0; np < m; ++np) {
      const int d = np - n + 1;
      t(n, np) = d >= 0 ? c[static_cast<std::size_t>(d)] : std::conj(c[static_cast<std::size_t>(-d)]);
    }
  }
  return t;
}

enum class HamiltonianPath {
  commuting,     // Toeplitz path, L*M term elements
  non_commuting  // every (n, n') pair measured, L*M^2 term elements
};

struct KdmOptions {
  HamiltonianPath h_path = HamiltonianPath::commuting;
  /// H kinds only: also measure C_M (charged to F_U_extra) so f_unitary is available.
  bool with_unitary = false;
};

namespace detail {

inline std::uint64_t term_key(std::size_t term, int a, int b) {
  return (std::uint64_t{1} << 40) | (static_cast<std::uint64_t>(term) << 24) |
         (static_cast<std::uint64_t>(a) << 12) | static_cast<std::uint64_t>(b);
}

/// <lhs| P e^{-i t H} |rhs> through the estimator; exact under the direct back-end,
/// Hadamard statistics otherwise (P e^{-iHt} leaves the symmetry sector, so MFE does not apply).
inline cplx term_element(const SpectralPropagator& prop, const CVector& p_lhs_eig, const CVector& rhs_eig,
                         double t, const Estimator& est, CallLedger& ledger, std::uint64_t key) {
  ledger.record(LedgerCategory::F_H_element, 1);
  const cplx exact = prop.element(p_lhs_eig, rhs_eig, t);
  if (est.backend == EstimatorBackend::direct) return exact;
  ledger.record(LedgerCategory::hadamard_call, 1,
                est.shot.is_sampled() ? 2 * static_cast<std::uint64_t>(est.shot.shots) : 0);
  if (!est.shot.is_sampled()) return exact;
  const double re = 2.0 * sample_probability((1.0 + exact.real()) / 2.0, est.shot, 8 * key + 4) - 1.0;
  const double im = 2.0 * sample_probability((1.0 + exact.imag()) / 2.0, est.shot, 8 * key + 5) - 1.0;
  return {re, im};
}

}  // namespace detail

/// G_m = sum_i h_i <phi_o| P_i e^{-i m H tau} |phi_o> for m in [m_begin, m_end).
inline std::vector<cplx> hamiltonian_correlations(const PauliSum& h, const SpectralPropagator& prop,
                                                  const StateVector& phi_o, int m_begin, int m_end, double tau,
                                                  const Estimator& est, CallLedger& ledger) {
  const CVector o_eig = prop.to_eigenbasis(phi_o);
  std::vector<cplx> g(static_cast<std::size_t>(std::max(0, m_end - m_begin)), 0.0);
  for (std::size_t i = 0; i < h.terms().size(); ++i) {
    const auto& term = h.terms()[i];
    const CVector p_eig = prop.eigenvectors().adjoint() * qksd::apply(term.string, phi_o.amplitudes());
    for (int m = m_begin; m < m_end; ++m) {
      g[static_cast<std::size_t>(m - m_begin)] +=
          term.coefficient * detail::term_element(prop, p_eig, o_eig, m * tau, est, ledger, detail::term_key(i, m, 0));
    }
  }
  return g;
}

/// F_H[n][n'] = sum_i h_i <phi_n| P_i |phi_n'> for the listed (n, n') pairs, each term
/// element measured separately.
inline void hamiltonian_pairs(const PauliSum& h, const SpectralPropagator& prop, const StateVector& phi_o, double tau,
                              const std::vector<std::pair<int, int>>& pairs, const Estimator& est, CallLedger& ledger,
                              CMatrix& f) {
  const auto m = f.rows();
  std::vector<StateVector> basis;
  std::vector<CVector> basis_eig;
  for (Eigen::Index n = 0; n < m; ++n) {
    basis.push_back(evolve(prop, phi_o, static_cast<double>(n) * tau));
    basis_eig.push_back(prop.to_eigenbasis(basis.back()));
  }
  for (const auto& [n, np] : pairs) f(n, np) = 0.0;
  for (std::size_t i = 0; i < h.terms().size(); ++i) {
    const auto& term = h.terms()[i];
    std::vector<std::optional<CVector>> p_eig(static_cast<std::size_t>(m));
    for (const auto& [n, np] : pairs) {
      auto& bra = p_eig[static_cast<std::size_t>(n)];
      if (!bra) bra = prop.eigenvectors().adjoint() * qksd::apply(term.string, basis[static_cast<std::size_t>(n)].amplitudes());
      f(n, np) += term.coefficient * detail::term_element(prop, *bra, basis_eig[static_cast<std::size_t>(np)], 0.0,
                                                          est, ledger, detail::term_key(i, n, np));
    }
  }
}

/// Assembles a KDM pencil from measured correlation data (no ledger activity).
/// `c` must hold C_0..C_{M-1} (C_0..C_M for U kinds or when f_unitary is wanted);
/// `g` holds G_0..G_{M-1} for the commuting H path.
inline SubspacePencil assemble_kdm(PencilKind kind, int m, double tau, double shift, const std::vector<cplx>& c,
                                   const std::vector<cplx>& g = {}) {
  if (is_filter_kind(kind)) throw ConfigError("assemble_kdm expects a KDM kind");
  SubspacePencil p;
  p.kind = kind;
  p.tau = tau;
  p.steps = m;
  p.energy_shift = shift;
  p.S = hermitian_toeplitz(c, m);
  if (static_cast<int>(c.size()) > m) p.f_unitary = shifted_toeplitz(c, m);
  if (kind == PencilKind::KDM_U) {
    if (!p.f_unitary) throw DimensionError("KDM_U pencil needs C_0..C_M");
    p.F = *p.f_unitary;
  } else if (!g.empty()) {
    p.F = hermitian_toeplitz(g, m);
  }
  return p;
}

/// Builds a KDM pencil through the estimator, charging the ledger per Table I:
/// S costs C_1..C_{M-1}; KDM_U adds C_M; KDM_H adds L*M (commuting) or L*M^2 term elements.
/// `h` must be the Hamiltonian `prop` was built from (shift already applied).
inline SubspacePencil build_kdm(PencilKind kind, const PauliSum& h, const SpectralPropagator& prop,
                                const StateVector& phi_o, int m, double tau, const Estimator& est, CallLedger& ledger,
                                const KdmOptions& opt = {}, double energy_shift = 0.0) {
  if (m < 1) throw DimensionError("build_kdm needs M >= 1");
  if (!(tau > 0.0)) throw DimensionError("build_kdm needs tau > 0");
  if (is_filter_kind(kind)) throw ConfigError("build_kdm builds KDM kinds; use build_fdm for filters");
  if (prop.fingerprint() != fingerprint(h)) throw DimensionError("propagator was built from a different Hamiltonian");

  std::vector<cplx> c{cplx{1.0, 0.0}};
  for (int n = 1; n < m; ++n) c.push_back(correlation(prop, phi_o, n, tau, est, ledger));
  const bool need_cm = kind == PencilKind::KDM_U || opt.with_unitary;
  if (need_cm) c.push_back(correlation(prop, phi_o, m, tau, est, ledger, LedgerCategory::F_U_extra));

  if (kind == PencilKind::KDM_U) return assemble_kdm(kind, m, tau, energy_shift, c);

  if (opt.h_path == HamiltonianPath::commuting) {
    const auto g = hamiltonian_correlations(h, prop, phi_o, 0, m, tau, est, ledger);
    return assemble_kdm(kind, m, tau, energy_shift, c, g);
  }
  SubspacePencil p = assemble_kdm(kind, m, tau, energy_shift, c);
  p.F = CMatrix::Zero(m, m);
  std::vector<std::pair<int, int>> pairs;
  for (int n = 0; n < m; ++n)
    for (int np = 0; np < m; ++np) pairs.emplace_back(n, np);
  hamiltonian_pairs(h, prop, phi_o, tau, pairs, est, ledger, p.F);
  return p;
}

/// FDM pencil from KDM data: F_J = W^dagger F_K W, S_J = W^dagger S_K W. No quantum calls.
inline SubspacePencil build_fdm(const SubspacePencil& kdm, const FilterGrid& grid) {
  if (is_filter_kind(kdm.kind)) throw ConfigError("build_fdm needs a KDM pencil");
  const TransformW w = build_W(grid, kdm.steps, kdm.tau, kdm.energy_shift);
  SubspacePencil p;
  p.kind = kdm.kind == PencilKind::KDM_H ? PencilKind::FDM_H : PencilKind::FDM_U;
  p.tau = kdm.tau;
  p.steps = kdm.steps;
  p.energy_shift = kdm.energy_shift;
  p.grid = grid;
  const CMatrix& wm = w.matrix;
  p.S = wm.adjoint() * kdm.S * wm;
  p.F = wm.adjoint() * kdm.F * wm;
  if (kdm.f_unitary) p.f_unitary = wm.adjoint() * (*kdm.f_unitary) * wm;
  if (static_cast<int>(grid.size()) > kdm.steps) {
    p.warnings.push_back("J = " + std::to_string(grid.size()) + " exceeds M = " + std::to_string(kdm.steps) +
                         "; S_J has rank at most M");
    log::warn(p.warnings.back());
  }
  return p;
}

/// Amplitudes of the filter state sum_n e^{-i n (H - E_j) tau}|phi_o> in the propagator's
/// eigenbasis: c_k (1 - e^{-iM(E_k - E_j)tau}) / (1 - e^{-i(E_k - E_j)tau}).
/// `filter_energy` is in the propagator's frame.
inline CVector filter_state_coefficients(const SpectralPropagator& prop, const StateVector& phi_o,
                                         double filter_energy, int m, double tau) {
  const CVector c = prop.to_eigenbasis(phi_o);
  CVector out(c.size());
  for (Eigen::Index k = 0; k < c.size(); ++k) {
    const double delta = (prop.energies()[k] - filter_energy) * tau;
    const cplx denom = 1.0 - std::exp(-kI * delta);
    cplx factor;
    if (std::abs(denom) < 1e-8) {
      factor = 0.0;
      for (int n = 0; n < m; ++n) factor += std::exp(-kI * (n * delta));
    } else {
      factor = (1.0 - std::exp(-kI * (m * delta))) / denom;
    }
    out[k] = c[k] * factor;
  }
  return out;
}

}  // namespace qksd
