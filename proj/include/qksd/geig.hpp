#pragma once

// Generalized eigenproblem F c = lambda S c for (possibly) ill-conditioned Gram matrices.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#if defined(QKSD_HAVE_LAPACKE)
#include <lapacke.h>
#endif

#include "qksd/core.hpp"
#include "qksd/subspace.hpp"

namespace qksd {

enum class GeigBackend { svd_regularized, generalized_schur };

inline constexpr bool generalized_schur_available() {
#if defined(QKSD_HAVE_LAPACKE)
  return true;
#else
  return false;
#endif
}

struct GEigSolution {
  std::vector<cplx> eigenvalues;
  CMatrix coefficients;  // columns, normalized to c^dagger S c = 1
  std::vector<double> residuals;  // ||F c - lambda S c|| / (||F|| ||c||)
  RVector singular_values;        // of S, descending
  double condition_number = 0.0;
  bool condition_infinite = false;
  /// sigma_min <= dimension * eps * sigma_max: S is singular to working precision.
  bool numerically_singular = false;
  int retained_rank = 0;
  int dimension = 0;
  double svd_threshold = 0.0;
  bool unitary = false;
  GeigBackend backend = GeigBackend::svd_regularized;
};

namespace detail {

inline void condition_of(const RVector& sv, GEigSolution& out) {
  out.singular_values = sv;
  const double smax = sv.size() ? sv[0] : 0.0;
  const double smin = sv.size() ? sv[sv.size() - 1] : 0.0;
  if (smin < 1e-300) {
    out.condition_infinite = true;
    out.condition_number = std::numeric_limits<double>::infinity();
  } else {
    out.condition_number = smax / smin;
  }
  const double eps = std::numeric_limits<double>::epsilon();
  out.numerically_singular = out.condition_infinite || smin <= static_cast<double>(sv.size()) * eps * smax;
}

inline void finish(const CMatrix& f, const CMatrix& s, GEigSolution& out) {
  const double fnorm = f.norm();
  out.residuals.clear();
  for (Eigen::Index k = 0; k < out.coefficients.cols(); ++k) {
    const CVector c = out.coefficients.col(k);
    const CVector r = f * c - out.eigenvalues[static_cast<std::size_t>(k)] * (s * c);
    const double scale = fnorm * c.norm();
    out.residuals.push_back(scale > 0 ? r.norm() / scale : r.norm());
  }
}

/// Orders eigenpairs by energy: real part for H kinds, -arg(lambda) for U kinds.
inline void sort_pairs(GEigSolution& out) {
  std::vector<std::size_t> idx(out.eigenvalues.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto key = [&](std::size_t i) {
    const cplx l = out.eigenvalues[i];
    return out.unitary ? std::atan2(-l.imag(), l.real()) : l.real();
  };
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return key(a) < key(b); });
  std::vector<cplx> ev;
  CMatrix cm(out.coefficients.rows(), out.coefficients.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    ev.push_back(out.eigenvalues[idx[k]]);
    cm.col(static_cast<Eigen::Index>(k)) = out.coefficients.col(static_cast<Eigen::Index>(idx[k]));
  }
  out.eigenvalues = std::move(ev);
  out.coefficients = std::move(cm);
}

}  // namespace detail

/// Solves F c = lambda S c.
///
/// svd_regularized: S = U Sigma U^dagger (S is Hermitian PSD, so its eigendecomposition is
/// its SVD); singular values below svd_threshold * sigma_max are dropped, and the
/// projected operator Sigma_r^{-1/2} U_r^dagger F U_r Sigma_r^{-1/2} is diagonalized.
/// generalized_schur: complex QZ (LAPACK zggev); infinite eigenvalues (|beta| below the
/// threshold relative to the largest |beta|) are discarded.
inline GEigSolution solve(const CMatrix& f_in, const CMatrix& s_in, bool unitary, double svd_threshold = 1e-12,
                          GeigBackend backend = GeigBackend::svd_regularized) {
  if (f_in.rows() != f_in.cols() || s_in.rows() != s_in.cols() || f_in.rows() != s_in.rows()) {
    throw SolverError("pencil matrices must be square and of equal size");
  }
  if (f_in.rows() == 0) throw SolverError("empty pencil");
  const double asym = (s_in - s_in.adjoint()).cwiseAbs().maxCoeff();
  const double s_scale = std::max(1.0, s_in.cwiseAbs().maxCoeff());
  if (asym > 1e-8 * s_scale) throw SolverError("overlap matrix is not Hermitian (asymmetry " + std::to_string(asym) + ")");
  const CMatrix s = 0.5 * (s_in + s_in.adjoint());

  GEigSolution out;
  out.dimension = static_cast<int>(s.rows());
  out.svd_threshold = svd_threshold;
  out.unitary = unitary;
  out.backend = backend;

  Eigen::SelfAdjointEigenSolver<CMatrix> es(s);
  if (es.info() != Eigen::Success) throw SolverError("overlap eigendecomposition failed");
  const RVector lam = es.eigenvalues();  // ascending
  RVector sv = lam.cwiseAbs();
  std::sort(sv.data(), sv.data() + sv.size(), std::greater<>());
  detail::condition_of(sv, out);
  const double smax = sv[0];
  if (smax <= 0.0) throw SolverError("overlap matrix is zero");

  if (backend == GeigBackend::svd_regularized) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index k = lam.size() - 1; k >= 0; --k) {
      if (lam[k] > svd_threshold * smax) keep.push_back(k);
    }
    if (keep.empty()) throw SolverError("no singular values retained");
    const auto r = static_cast<Eigen::Index>(keep.size());
    CMatrix x(s.rows(), r);
    for (Eigen::Index i = 0; i < r; ++i) x.col(i) = es.eigenvectors().col(keep[i]) / std::sqrt(lam[keep[i]]);
    const CMatrix a = x.adjoint() * f_in * x;
    out.retained_rank = static_cast<int>(r);
    if (!unitary) {
      Eigen::SelfAdjointEigenSolver<CMatrix> ea(0.5 * (a + a.adjoint()));
      if (ea.info() != Eigen::Success) throw SolverError("projected eigenproblem failed");
      for (Eigen::Index k = 0; k < r; ++k) out.eigenvalues.emplace_back(ea.eigenvalues()[k], 0.0);
      out.coefficients = x * ea.eigenvectors();
    } else {
      Eigen::ComplexEigenSolver<CMatrix> ea(a);
      if (ea.info() != Eigen::Success) throw SolverError("projected eigenproblem failed");
      for (Eigen::Index k = 0; k < r; ++k) out.eigenvalues.push_back(ea.eigenvalues()[k]);
      CMatrix y = ea.eigenvectors();
      for (Eigen::Index k = 0; k < r; ++k) y.col(k).normalize();
      out.coefficients = x * y;
    }
  } else {
#if defined(QKSD_HAVE_LAPACKE)
    const auto n = static_cast<lapack_int>(s.rows());
    CMatrix a = f_in;
    CMatrix b = s;
    CVector alpha(n), beta(n);
    CMatrix vr(n, n);
    const lapack_int info = LAPACKE_zggev(
        LAPACK_COL_MAJOR, 'N', 'V', n, reinterpret_cast<lapack_complex_double*>(a.data()), n,
        reinterpret_cast<lapack_complex_double*>(b.data()), n, reinterpret_cast<lapack_complex_double*>(alpha.data()),
        reinterpret_cast<lapack_complex_double*>(beta.data()), nullptr, n,
        reinterpret_cast<lapack_complex_double*>(vr.data()), n);
    if (info != 0) throw SolverError("zggev failed with info " + std::to_string(info));
    const double bmax = beta.cwiseAbs().maxCoeff();
    std::vector<Eigen::Index> keep;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (std::abs(beta[k]) > svd_threshold * bmax) keep.push_back(k);
    }
    if (keep.empty()) throw SolverError("no finite generalized eigenvalues");
    out.retained_rank = static_cast<int>(keep.size());
    out.coefficients.resize(n, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) {
      cplx lambda = alpha[keep[i]] / beta[keep[i]];
      if (!unitary) lambda = {lambda.real(), 0.0};
      out.eigenvalues.push_back(lambda);
      CVector c = vr.col(keep[i]);
      const double norm = std::real(c.dot(s * c));
      c /= norm > 0.0 ? std::sqrt(norm) : c.norm();
      out.coefficients.col(static_cast<Eigen::Index>(i)) = c;
    }
#else
    throw SolverError("generalized_schur backend unavailable (built without LAPACKE)");
#endif
  }
  detail::sort_pairs(out);
  detail::finish(f_in, s, out);
  return out;
}

inline GEigSolution solve(const SubspacePencil& p, double svd_threshold = 1e-12,
                          GeigBackend backend = GeigBackend::svd_regularized) {
  return solve(p.F, p.S, is_unitary_kind(p.kind), svd_threshold, backend);
}

struct EnergyEstimate {
  double energy = 0.0;
  int branch = 0;
  cplx source;
  bool unitary = false;
  /// |lambda| - 1 for unitary kinds (zero on the unit circle).
  double modulus_defect = 0.0;
};

/// Band |lambda| must fall in for a U-kind eigenvalue to be considered physical.
inline constexpr double kModulusBandLow = 0.5;
inline constexpr double kModulusBandHigh = 1.5;

/// theta = atan2(-Im lambda, Re lambda) in (-pi, pi]; E = (theta + 2 pi j)/tau + shift.
inline EnergyEstimate unwrap_energy(cplx lambda, double tau, double shift = 0.0, int branch = 0) {
  if (!(tau > 0.0)) throw DimensionError("unwrap_energy needs tau > 0");
  if (lambda == cplx{0.0, 0.0}) throw SolverError("cannot unwrap a zero eigenvalue");
  double theta = std::atan2(-lambda.imag(), lambda.real());
  if (theta == -kPi) theta = kPi;
  EnergyEstimate e;
  e.energy = (theta + 2.0 * kPi * branch) / tau + shift;
  e.branch = branch;
  e.source = lambda;
  e.unitary = true;
  e.modulus_defect = std::abs(lambda) - 1.0;
  const double mod = std::abs(lambda);
  if (mod < kModulusBandLow || mod > kModulusBandHigh) {
    log::warn("eigenvalue modulus " + std::to_string(mod) + " outside the [0.5, 1.5] sanity band");
  }
  return e;
}

struct GroundSelection {
  EnergyEstimate estimate;
  std::size_t index = 0;  // column in GEigSolution::coefficients
};

/// Lowest energy of the retained spectrum: minimum real part for H kinds; minimum
/// unwrapped (branch j) energy for U kinds, restricted to the modulus sanity band when
/// any eigenvalue falls inside it.
inline GroundSelection select_ground_indexed(const GEigSolution& sol, bool unitary, double tau, double shift = 0.0,
                                             int branch = 0) {
  if (sol.eigenvalues.empty()) throw SolverError("empty spectrum");
  GroundSelection best;
  bool found = false;
  if (!unitary) {
    for (std::size_t k = 0; k < sol.eigenvalues.size(); ++k) {
      const double e = sol.eigenvalues[k].real() + shift;
      if (!found || e < best.estimate.energy) {
        best.estimate = {e, 0, sol.eigenvalues[k], false, 0.0};
        best.index = k;
        found = true;
      }
    }
    return best;
  }
  bool any_in_band = false;
  for (auto l : sol.eigenvalues) {
    const double mod = std::abs(l);
    any_in_band = any_in_band || (mod >= kModulusBandLow && mod <= kModulusBandHigh);
  }
  for (std::size_t k = 0; k < sol.eigenvalues.size(); ++k) {
    const cplx l = sol.eigenvalues[k];
    const double mod = std::abs(l);
    if (mod == 0.0) continue;
    if (any_in_band && (mod < kModulusBandLow || mod > kModulusBandHigh)) continue;
    double theta = std::atan2(-l.imag(), l.real());
    if (theta == -kPi) theta = kPi;
    const double e = (theta + 2.0 * kPi * branch) / tau + shift;
    if (!found || e < best.estimate.energy) {
      best.estimate = {e, branch, l, true, mod - 1.0};
      best.index = k;
      found = true;
    }
  }
  if (!found) throw SolverError("no usable eigenvalue");
  if (!any_in_band) log::warn("no U-kind eigenvalue inside the modulus sanity band");
  return best;
}

inline EnergyEstimate select_ground(const GEigSolution& sol, PencilKind kind, double tau, double shift = 0.0) {
  return select_ground_indexed(sol, is_unitary_kind(kind), tau, shift).estimate;
}

inline EnergyEstimate select_ground(const GEigSolution& sol, const SubspacePencil& p) {
  return select_ground(sol, p.kind, p.tau, p.energy_shift);
}

}  // namespace qksd
