#pragma once

// Brute-force ground truth built on dense linear algebra.

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "qksd/core.hpp"
#include "qksd/hamiltonian.hpp"
#include "qksd/statevec.hpp"
#include "qksd/subspace.hpp"

namespace qksd::oracle {

struct Spectrum {
  RVector eigenvalues;  // ascending
  CMatrix eigenvectors;

  double ground() const { return eigenvalues[0]; }

  /// Eigenvalue closest to e.
  double nearest(double e) const {
    double best = eigenvalues[0];
    for (Eigen::Index k = 1; k < eigenvalues.size(); ++k) {
      if (std::abs(eigenvalues[k] - e) < std::abs(best - e)) best = eigenvalues[k];
    }
    return best;
  }

  StateVector state(int n_qubits, Eigen::Index k) const {
    return StateVector::normalized(n_qubits, eigenvectors.col(k));
  }
};

inline Spectrum diagonalize(const PauliSum& h, int dense_limit = kDefaultDenseLimit) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(to_dense(h, dense_limit));
  if (es.info() != Eigen::Success) throw SolverError("dense diagonalization failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

/// Exact <phi_i| e^{-i n H tau} |phi_j> through the spectral decomposition.
inline cplx direct_element(const PauliSum& h, const StateVector& phi_i, const StateVector& phi_j, int n, double tau,
                           int dense_limit = kDefaultDenseLimit) {
  const Spectrum sp = diagonalize(h, dense_limit);
  const CVector a = sp.eigenvectors.adjoint() * phi_i.amplitudes();
  const CVector b = sp.eigenvectors.adjoint() * phi_j.amplitudes();
  cplx acc = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    acc += std::conj(a[k]) * std::exp(-kI * (n * tau) * sp.eigenvalues[k]) * b[k];
  }
  return acc;
}

/// e^{-iHt} by scaling and squaring (Pade); independent of the spectral route.
inline CMatrix expm_propagator(const PauliSum& h, double t, int dense_limit = kDefaultDenseLimit) {
  const CMatrix a = (-kI * t) * to_dense(h, dense_limit);
  return a.exp();
}

inline cplx expm_element(const PauliSum& h, const StateVector& phi_i, const StateVector& phi_j, int n, double tau) {
  return phi_i.amplitudes().dot(expm_propagator(h, n * tau) * phi_j.amplitudes());
}

/// Filter-basis pencil built from explicitly propagated filter states
/// |phi_j> = sum_n e^{-i n (H - E_j) tau}|phi_o>; `h` is the Hamiltonian `prop` was built from
/// and grid energies are absolute (frame offset `shift`).
inline SubspacePencil direct_fdm_pencil(PencilKind kind, const PauliSum& h, const SpectralPropagator& prop,
                                        const StateVector& phi_o, const FilterGrid& grid, int m, double tau,
                                        double shift = 0.0) {
  const auto j_count = static_cast<Eigen::Index>(grid.size());
  const auto dim = phi_o.dimension();
  CMatrix states(dim, j_count);
  std::vector<StateVector> krylov;
  for (int n = 0; n < m; ++n) krylov.push_back(evolve(prop, phi_o, n * tau));
  for (Eigen::Index j = 0; j < j_count; ++j) {
    const double e = grid.energies[static_cast<std::size_t>(j)] - shift;
    CVector acc = CVector::Zero(dim);
    for (int n = 0; n < m; ++n) acc += std::exp(kI * (n * e * tau)) * krylov[static_cast<std::size_t>(n)].amplitudes();
    states.col(j) = acc;
  }
  CMatrix u_states(dim, j_count);
  CMatrix h_states(dim, j_count);
  for (Eigen::Index j = 0; j < j_count; ++j) {
    CVector c = prop.eigenvectors().adjoint() * states.col(j);
    for (Eigen::Index k = 0; k < c.size(); ++k) c[k] *= std::exp(-kI * prop.energies()[k] * tau);
    u_states.col(j) = prop.eigenvectors() * c;
    h_states.col(j) = qksd::apply(h, CVector(states.col(j)));
  }
  SubspacePencil p;
  p.kind = kind;
  p.tau = tau;
  p.steps = m;
  p.energy_shift = shift;
  p.grid = grid;
  p.S = states.adjoint() * states;
  p.f_unitary = states.adjoint() * u_states;
  p.F = is_unitary_kind(kind) ? *p.f_unitary : CMatrix(states.adjoint() * h_states);
  return p;
}

/// Ground energy by shifted power iteration on (c I - H), using only H|v> products.
inline double power_iteration_ground(const PauliSum& h, int iterations, std::uint64_t seed = 7) {
  double bound = 0.0;
  for (const auto& t : h.terms()) bound += std::abs(t.coefficient);
  const auto dim = static_cast<Eigen::Index>(h.dimension());
  CVector v(dim);
  std::uint64_t state = seed;
  for (Eigen::Index i = 0; i < dim; ++i) {
    state = mix_seed(state, static_cast<std::uint64_t>(i));
    v[i] = cplx(static_cast<double>(state >> 11) / 9007199254740992.0 - 0.5, 0.0);
  }
  v.normalize();
  for (int it = 0; it < iterations; ++it) {
    v = bound * v - qksd::apply(h, v);
    v.normalize();
  }
  return std::real(v.dot(qksd::apply(h, v)));
}

}  // namespace qksd::oracle
