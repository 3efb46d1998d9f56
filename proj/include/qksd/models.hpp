#pragma once

// Built-in spin models and reference/ansatz states for desk-scale runs.

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

#include "qksd/core.hpp"
#include "qksd/hamiltonian.hpp"
#include "qksd/statevec.hpp"

namespace qksd::models {

namespace detail {

inline std::string place(int n, std::initializer_list<std::pair<int, char>> ops) {
  std::string s(static_cast<std::size_t>(n), 'I');
  for (auto [q, c] : ops) s[static_cast<std::size_t>(n - 1 - q)] = c;
  return s;
}

}  // namespace detail

/// Open-chain transverse-field Ising model -J sum Z_i Z_{i+1} - g sum X_i (L = 2N - 1).
inline PauliSum tfim(int n, double coupling, double field) {
  if (n < 1) throw DimensionError("tfim needs N >= 1");
  if (!std::isfinite(coupling) || !std::isfinite(field)) throw DimensionError("tfim parameters must be finite");
  PauliSum h(n);
  for (int i = 0; i + 1 < n; ++i) h.add(-coupling, detail::place(n, {{i, 'Z'}, {i + 1, 'Z'}}));
  for (int i = 0; i < n; ++i) h.add(-field, detail::place(n, {{i, 'X'}}));
  return h;
}

/// Open-chain XXZ model sum (X_i X_{i+1} + Y_i Y_{i+1} + Delta Z_i Z_{i+1}); conserves total Z.
inline PauliSum heisenberg_xxz(int n, double anisotropy) {
  if (n < 2) throw DimensionError("heisenberg_xxz needs N >= 2");
  if (!std::isfinite(anisotropy)) throw DimensionError("anisotropy must be finite");
  PauliSum h(n);
  for (int i = 0; i + 1 < n; ++i) {
    h.add(1.0, detail::place(n, {{i, 'X'}, {i + 1, 'X'}}));
    h.add(1.0, detail::place(n, {{i, 'Y'}, {i + 1, 'Y'}}));
    h.add(anisotropy, detail::place(n, {{i, 'Z'}, {i + 1, 'Z'}}));
  }
  return h;
}

/// |0>^(N-eta) (x) |1>^eta: the eta lowest-index qubits occupied.
inline StateVector hartree_fock_state(int n, int eta) {
  if (eta < 0 || eta > n) throw DimensionError("hartree_fock_state needs 0 <= eta <= N");
  const std::uint64_t index = (std::uint64_t{1} << eta) - 1;
  return basis_state(n, index);
}

/// Product state |+>^N.
inline StateVector plus_state(int n) {
  const auto dim = Eigen::Index{1} << n;
  return StateVector::normalized(n, CVector::Ones(dim));
}

/// (|a> - |b>)/sqrt(2) for distinct bit patterns of equal Hamming weight.
inline StateVector singlet_ansatz(int n, std::string_view pattern_a, std::string_view pattern_b) {
  const StateVector a = basis_state(n, pattern_a);
  const StateVector b = basis_state(n, pattern_b);
  if (pattern_a == pattern_b) throw SymmetryError("singlet_ansatz needs distinct patterns");
  const auto weight = [](std::string_view s) { return std::count(s.begin(), s.end(), '1'); };
  if (weight(pattern_a) != weight(pattern_b)) {
    throw SymmetryError("singlet_ansatz patterns differ in particle number");
  }
  return StateVector::normalized(n, a.amplitudes() - b.amplitudes());
}

/// Two-determinant singlet-type starting states for a 12 spin-orbital system
/// (alternating alpha/beta ordering, orbital energy increasing right to left).
inline constexpr std::pair<std::string_view, std::string_view> kTwelveQubitSingletPatterns[4] = {
    {"000110111111", "001001111111"},
    {"000111101111", "001011011111"},
    {"010010111111", "100001111111"},
    {"010011101111", "100011011111"},
};

enum class Family { tfim, heisenberg_xxz, file };

struct ModelSpec {
  Family family = Family::tfim;
  int n_qubits = 2;
  double coupling = 1.0;    // TFIM J
  double field = 1.0;       // TFIM g
  double anisotropy = 1.0;  // XXZ Delta
  std::string path;         // Hamiltonian file for Family::file
};

}  // namespace qksd::models
