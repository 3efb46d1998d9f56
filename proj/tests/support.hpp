#pragma once

// Shared fixtures for the test suites: random instances and a Kronecker-product
// dense builder that shares no code with the library's bit-mask path.

#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "qksd/qksd.hpp"

namespace qksd::testing {

inline CMatrix pauli_matrix(char c) {
  CMatrix m(2, 2);
  switch (c) {
    case 'I': m << 1, 0, 0, 1; break;
    case 'X': m << 0, 1, 1, 0; break;
    case 'Y': m << 0, -kI, kI, 0; break;
    case 'Z': m << 1, 0, 0, -1; break;
    default: throw std::invalid_argument("bad Pauli letter");
  }
  return m;
}

// Leftmost text letter is the most significant tensor factor, so qubit 0 is the rightmost.
inline CMatrix kron_string(const std::string& letters) {
  CMatrix acc = CMatrix::Identity(1, 1);
  for (char c : letters) {
    CMatrix next = Eigen::kroneckerProduct(acc, pauli_matrix(c)).eval();
    acc = next;
  }
  return acc;
}

inline CMatrix kron_dense(const PauliSum& h) {
  const auto dim = static_cast<Eigen::Index>(h.dimension());
  CMatrix m = CMatrix::Zero(dim, dim);
  for (const auto& t : h.terms()) m += t.coefficient * kron_string(t.string.text());
  return m;
}

inline std::string random_string(int n, std::mt19937_64& rng, const char* alphabet = "IXYZ", int letters = 4) {
  std::uniform_int_distribution<int> pick(0, letters - 1);
  std::string s(static_cast<std::size_t>(n), 'I');
  for (auto& c : s) c = alphabet[pick(rng)];
  return s;
}

inline PauliSum random_hamiltonian(int n, int terms, std::mt19937_64& rng) {
  std::normal_distribution<double> coeff(0.0, 1.0);
  PauliSum h(n);
  for (int i = 0; i < terms; ++i) h.add(coeff(rng), PauliString(random_string(n, rng)));
  return h;
}

/// Particle-conserving: diagonal Z terms plus hopping pairs (XX + YY) and their
/// ZZ-dressed versions, so the sum commutes with the number operator.
inline PauliSum random_number_conserving(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> coeff(0.0, 1.0);
  PauliSum h(n);
  for (int i = 0; i < 2 * n; ++i) h.add(coeff(rng), PauliString(random_string(n, rng, "IZ", 2)));
  for (int p = 0; p < n; ++p) {
    for (int q = p + 1; q < n; ++q) {
      const double t = coeff(rng);
      std::string xx(static_cast<std::size_t>(n), 'I');
      std::string yy(static_cast<std::size_t>(n), 'I');
      xx[static_cast<std::size_t>(n - 1 - p)] = 'X';
      xx[static_cast<std::size_t>(n - 1 - q)] = 'X';
      yy[static_cast<std::size_t>(n - 1 - p)] = 'Y';
      yy[static_cast<std::size_t>(n - 1 - q)] = 'Y';
      h.add(t, PauliString(xx));
      h.add(t, PauliString(yy));
    }
  }
  return h;
}

inline StateVector random_state(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  CVector a(Eigen::Index{1} << n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = {g(rng), g(rng)};
  return StateVector::normalized(n, a);
}

/// Random state supported on basis states of Hamming weight `weight`.
inline StateVector random_sector_state(int n, int weight, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  CVector a = CVector::Zero(Eigen::Index{1} << n);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (__builtin_popcountll(static_cast<unsigned long long>(i)) == weight) a[i] = {g(rng), g(rng)};
  }
  return StateVector::normalized(n, a);
}

inline double max_abs(const CMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

/// Silences library warnings for the lifetime of the guard and counts them.
class WarningCapture {
 public:
  WarningCapture() {
    previous_ = log::set_sink([this](const std::string& m) { messages.push_back(m); });
  }
  ~WarningCapture() { log::set_sink(previous_); }
  std::vector<std::string> messages;

 private:
  log::Sink previous_;
};

}  // namespace qksd::testing
