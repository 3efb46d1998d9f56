#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Eigenvalues>

#include "qksd/core.hpp"
#include "qksd/hamiltonian.hpp"

namespace qksd {

/// Normalized dense state of N qubits; amplitude index bit q is qubit q.
class StateVector {
 public:
  StateVector() = default;

  /// Throws DimensionError unless the amplitudes have 2^N entries and unit norm (1e-10).
  StateVector(int n_qubits, CVector amplitudes) : n_qubits_(n_qubits), amps_(std::move(amplitudes)) {
    check_size();
    const double norm2 = amps_.squaredNorm();
    if (std::abs(norm2 - 1.0) > 1e-10) {
      throw DimensionError("state is not normalized (|a|^2 = " + std::to_string(norm2) + ")");
    }
  }

  /// Normalizes arbitrary nonzero amplitudes.
  static StateVector normalized(int n_qubits, const CVector& amplitudes) {
    const double n = amplitudes.norm();
    if (n == 0.0) throw DimensionError("cannot normalize the zero vector");
    return StateVector(n_qubits, amplitudes / n, Unchecked{});
  }

  int n_qubits() const { return n_qubits_; }
  Eigen::Index dimension() const { return amps_.size(); }
  const CVector& amplitudes() const { return amps_; }
  cplx operator[](Eigen::Index i) const { return amps_[i]; }

 private:
  struct Unchecked {};
  StateVector(int n_qubits, CVector amplitudes, Unchecked) : n_qubits_(n_qubits), amps_(std::move(amplitudes)) {
    check_size();
  }
  void check_size() const {
    if (n_qubits_ <= 0 || n_qubits_ > 30) throw DimensionError("unsupported qubit count");
    if (amps_.size() != (Eigen::Index{1} << n_qubits_)) throw DimensionError("amplitude count is not 2^N");
  }

  friend StateVector evolve_unchecked(int, CVector);

  int n_qubits_ = 0;
  CVector amps_;
};

inline StateVector evolve_unchecked(int n_qubits, CVector amps) {
  const double norm2 = amps.squaredNorm();
  if (std::abs(norm2 - 1.0) > 1e-8) {
    log::warn("normalization drift " + std::to_string(norm2 - 1.0) + " after evolution; renormalizing");
    amps /= std::sqrt(norm2);
  }
  return StateVector(n_qubits, std::move(amps), StateVector::Unchecked{});
}

/// Computational basis state from a bitstring written with qubit 0 rightmost.
inline StateVector basis_state(int n_qubits, std::string_view bits) {
  if (static_cast<int>(bits.size()) != n_qubits) {
    throw DimensionError("bitstring length " + std::to_string(bits.size()) + " != " + std::to_string(n_qubits));
  }
  std::uint64_t index = 0;
  for (char c : bits) {
    if (c != '0' && c != '1') throw DimensionError(std::string("invalid bit '") + c + "'");
    index = (index << 1) | static_cast<std::uint64_t>(c == '1');
  }
  CVector a = CVector::Zero(Eigen::Index{1} << n_qubits);
  a[static_cast<Eigen::Index>(index)] = 1.0;
  return StateVector(n_qubits, std::move(a));
}

inline StateVector basis_state(int n_qubits, std::uint64_t index) {
  CVector a = CVector::Zero(Eigen::Index{1} << n_qubits);
  if (index >= static_cast<std::uint64_t>(a.size())) throw DimensionError("basis index out of range");
  a[static_cast<Eigen::Index>(index)] = 1.0;
  return StateVector(n_qubits, std::move(a));
}

inline cplx inner(const StateVector& a, const StateVector& b) {
  if (a.n_qubits() != b.n_qubits()) throw DimensionError("inner: qubit counts differ");
  return a.amplitudes().dot(b.amplitudes());
}

/// (|a> + |b>)/sqrt(2) for orthogonal inputs; a nonzero overlap means the two
/// states are not in distinct symmetry sectors.
inline StateVector superpose(const StateVector& a, const StateVector& b, cplx weight_a = 1.0) {
  if (a.n_qubits() != b.n_qubits()) throw DimensionError("superpose: qubit counts differ");
  if (std::abs(inner(a, b)) > 1e-10) throw SymmetryError("superpose: states are not orthogonal");
  return StateVector::normalized(a.n_qubits(), weight_a * a.amplitudes() + b.amplitudes());
}

/// Exact e^{-iHt} through a one-time dense eigendecomposition H = V diag(E) V^dagger.
class SpectralPropagator {
 public:
  explicit SpectralPropagator(const PauliSum& h, int dense_limit = kDefaultDenseLimit)
      : n_qubits_(h.n_qubits()), fingerprint_(qksd::fingerprint(h)) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(to_dense(h, dense_limit));
    if (es.info() != Eigen::Success) throw SolverError("Hamiltonian eigendecomposition failed");
    energies_ = es.eigenvalues();
    vectors_ = es.eigenvectors();
  }

  int n_qubits() const { return n_qubits_; }
  std::uint64_t fingerprint() const { return fingerprint_; }
  const RVector& energies() const { return energies_; }
  const CMatrix& eigenvectors() const { return vectors_; }

  /// Amplitudes of a state in the energy eigenbasis, V^dagger |s>.
  CVector to_eigenbasis(const StateVector& s) const {
    check(s);
    return vectors_.adjoint() * s.amplitudes();
  }

  /// <a| e^{-iHt} |b> without forming the evolved state.
  cplx element(const CVector& a_eig, const CVector& b_eig, double t) const {
    cplx acc = 0.0;
    for (Eigen::Index k = 0; k < energies_.size(); ++k) {
      acc += std::conj(a_eig[k]) * std::exp(-kI * energies_[k] * t) * b_eig[k];
    }
    return acc;
  }

  void check(const StateVector& s) const {
    if (s.n_qubits() != n_qubits_) throw DimensionError("state and propagator qubit counts differ");
  }

 private:
  int n_qubits_;
  std::uint64_t fingerprint_;
  RVector energies_;
  CMatrix vectors_;
};

/// V diag(e^{-iE_k t}) V^dagger |s>; the global phase is kept.
inline StateVector evolve(const SpectralPropagator& p, const StateVector& s, double t,
                          std::optional<std::uint64_t> expected_fingerprint = std::nullopt) {
  if (expected_fingerprint && *expected_fingerprint != p.fingerprint()) {
    throw DimensionError("propagator was built from a different Hamiltonian");
  }
  if (t == 0.0) return s;
  CVector c = p.to_eigenbasis(s);
  for (Eigen::Index k = 0; k < c.size(); ++k) c[k] *= std::exp(-kI * p.energies()[k] * t);
  return evolve_unchecked(s.n_qubits(), p.eigenvectors() * c);
}

}  // namespace qksd
