#pragma once

// N-qubit Pauli-sum operators.
//
// Qubit order convention (used everywhere in the library): in text form the
// rightmost letter acts on qubit 0, and qubit q corresponds to bit q of a
// computational-basis index. "XZ" is X on qubit 1 and Z on qubit 0.

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qksd/core.hpp"

namespace qksd {

class PauliString {
 public:
  PauliString() = default;

  /// Builds from text such as "XIZY"; throws DimensionError on foreign letters.
  explicit PauliString(std::string_view letters) : text_(letters) {
    if (text_.empty()) throw DimensionError("empty Pauli string");
    if (text_.size() > 63) throw DimensionError("Pauli strings are limited to 63 qubits");
    for (std::size_t pos = 0; pos < text_.size(); ++pos) {
      const char c = text_[pos];
      const auto q = static_cast<int>(text_.size() - 1 - pos);
      switch (c) {
        case 'I': break;
        case 'X': x_ |= bit(q); break;
        case 'Z': z_ |= bit(q); break;
        case 'Y':
          x_ |= bit(q);
          z_ |= bit(q);
          ++n_y_;
          break;
        default:
          throw DimensionError(std::string("invalid Pauli letter '") + c + "'");
      }
    }
  }

  static PauliString identity(int n_qubits) { return PauliString(std::string(n_qubits, 'I')); }

  int n_qubits() const { return static_cast<int>(text_.size()); }
  const std::string& text() const { return text_; }
  char axis(int qubit) const { return text_[text_.size() - 1 - qubit]; }

  /// Bit mask of qubits carrying X or Y (bit flips).
  std::uint64_t x_mask() const { return x_; }
  /// Bit mask of qubits carrying Z or Y (phase flips).
  std::uint64_t z_mask() const { return z_; }

  bool is_diagonal() const { return x_ == 0; }
  bool is_identity() const { return x_ == 0 && z_ == 0; }

  bool commutes_with(const PauliString& other) const {
    const auto overlap = std::popcount((x_ & other.z_) ^ (z_ & other.x_));
    return overlap % 2 == 0;
  }

  /// P|b> = phase(b) |b ^ x_mask>.
  cplx phase_on(std::uint64_t basis_index) const {
    static constexpr cplx kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    int power = n_y_ % 4;
    if (std::popcount(basis_index & z_) % 2 == 1) power += 2;
    return kIPow[power % 4];
  }

  /// Product this*other = phase * P.
  std::pair<cplx, PauliString> multiply(const PauliString& other) const {
    if (other.n_qubits() != n_qubits()) throw DimensionError("Pauli product of mismatched lengths");
    cplx phase{1.0, 0.0};
    std::string out(text_.size(), 'I');
    for (std::size_t pos = 0; pos < text_.size(); ++pos) {
      const auto [ph, letter] = single_product(text_[pos], other.text_[pos]);
      phase *= ph;
      out[pos] = letter;
    }
    return {phase, PauliString(out)};
  }

  friend bool operator==(const PauliString& a, const PauliString& b) { return a.text_ == b.text_; }
  friend bool operator<(const PauliString& a, const PauliString& b) { return a.text_ < b.text_; }

 private:
  static std::uint64_t bit(int q) { return std::uint64_t{1} << q; }

  static std::pair<cplx, char> single_product(char a, char b) {
    if (a == 'I') return {1.0, b};
    if (b == 'I') return {1.0, a};
    if (a == b) return {1.0, 'I'};
    // XY = iZ, YZ = iX, ZX = iY and the reversed orders pick up -i.
    const std::string cyc = "XYZ";
    const auto ia = cyc.find(a);
    const auto ib = cyc.find(b);
    const char c = cyc[3 - ia - ib];
    const bool forward = (ib == (ia + 1) % 3);
    return {forward ? kI : -kI, c};
  }

  std::string text_;
  std::uint64_t x_ = 0;
  std::uint64_t z_ = 0;
  int n_y_ = 0;
};

struct PauliTerm {
  double coefficient = 0.0;
  PauliString string;
};

/// H = sum_i h_i P_i with real h_i. Duplicate strings are merged on construction,
/// keeping the position of the first occurrence.
class PauliSum {
 public:
  PauliSum() = default;

  explicit PauliSum(int n_qubits) : n_qubits_(n_qubits) {
    if (n_qubits <= 0) throw DimensionError("qubit count must be positive");
  }

  PauliSum(int n_qubits, const std::vector<PauliTerm>& terms) : PauliSum(n_qubits) {
    for (const auto& t : terms) add(t.coefficient, t.string);
  }

  void add(double coefficient, const PauliString& s) {
    if (!std::isfinite(coefficient)) throw DimensionError("non-finite coefficient for " + s.text());
    if (s.n_qubits() != n_qubits_) {
      throw DimensionError("Pauli string " + s.text() + " has length " + std::to_string(s.n_qubits()) +
                           ", expected " + std::to_string(n_qubits_));
    }
    if (auto it = index_.find(s.text()); it != index_.end()) {
      terms_[it->second].coefficient += coefficient;
      return;
    }
    index_.emplace(s.text(), terms_.size());
    terms_.push_back({coefficient, s});
  }

  void add(double coefficient, std::string_view letters) { add(coefficient, PauliString(letters)); }

  int n_qubits() const { return n_qubits_; }
  /// Number of distinct Pauli terms (L).
  std::size_t size() const { return terms_.size(); }
  const std::vector<PauliTerm>& terms() const { return terms_; }

  /// Coefficient of a string, zero when absent.
  double coefficient(std::string_view letters) const {
    auto it = index_.find(std::string(letters));
    return it == index_.end() ? 0.0 : terms_[it->second].coefficient;
  }

  /// H - shift * I.
  PauliSum shifted(double shift) const {
    PauliSum out = *this;
    if (shift != 0.0) out.add(-shift, PauliString::identity(n_qubits_));
    return out;
  }

  std::uint64_t dimension() const { return std::uint64_t{1} << n_qubits_; }

 private:
  int n_qubits_ = 0;
  std::vector<PauliTerm> terms_;
  std::unordered_map<std::string, std::size_t> index_;
};

using PauliSumHamiltonian = PauliSum;
/// Conserved quantity expressed as a Pauli sum (e.g. particle number in I/Z strings).
using SymmetryOperator = PauliSum;

/// Parses the line format "<real coefficient> <pauli letters>", '#' starts a comment.
inline PauliSum parse_hamiltonian(std::string_view text) {
  std::vector<std::pair<double, std::string>> raw;
  std::size_t width = 0;
  int line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string coef_tok, letters, extra;
    if (!(fields >> coef_tok)) continue;
    if (!(fields >> letters)) throw ParseError(line_no, "expected '<coefficient> <pauli letters>'");
    if (fields >> extra) throw ParseError(line_no, "unexpected trailing token '" + extra + "'");

    if (coef_tok.find_first_of("ij(") != std::string::npos && coef_tok.find("inf") == std::string::npos) {
      throw ParseError(line_no, "complex coefficients are not supported: '" + coef_tok + "'");
    }
    double coef = 0.0;
    const char* first = coef_tok.data();
    const char* last = first + coef_tok.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, coef);
    if (ec != std::errc() || ptr != last) throw ParseError(line_no, "malformed coefficient '" + coef_tok + "'");
    if (!std::isfinite(coef)) throw ParseError(line_no, "non-finite coefficient '" + coef_tok + "'");
    if (letters.find_first_not_of("IXYZ") != std::string::npos) {
      throw ParseError(line_no, "invalid Pauli string '" + letters + "'");
    }
    if (width == 0) {
      width = letters.size();
    } else if (letters.size() != width) {
      throw ParseError(line_no, "Pauli string length " + std::to_string(letters.size()) +
                                    " differs from earlier length " + std::to_string(width));
    }
    raw.emplace_back(coef, std::move(letters));
  }
  if (raw.empty()) throw ParseError(line_no, "no Hamiltonian terms found");
  PauliSum h(static_cast<int>(width));
  for (const auto& [c, s] : raw) h.add(c, s);
  return h;
}

/// Serializes with round-trip precision; parse(serialize(h)) reproduces h exactly.
inline std::string serialize(const PauliSum& h) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (const auto& t : h.terms()) out << t.coefficient << ' ' << t.string.text() << '\n';
  return out.str();
}

/// Applies a Pauli sum to a dense vector in O(L * 2^N).
inline CVector apply(const PauliSum& h, const CVector& v) {
  if (static_cast<std::uint64_t>(v.size()) != h.dimension()) throw DimensionError("vector size does not match 2^N");
  CVector out = CVector::Zero(v.size());
  for (const auto& t : h.terms()) {
    const auto xm = t.string.x_mask();
    for (std::uint64_t b = 0; b < h.dimension(); ++b) {
      out[static_cast<Eigen::Index>(b ^ xm)] += t.coefficient * t.string.phase_on(b) * v[static_cast<Eigen::Index>(b)];
    }
  }
  return out;
}

inline CVector apply(const PauliString& p, const CVector& v) {
  CVector out(v.size());
  const auto xm = p.x_mask();
  for (std::uint64_t b = 0; b < static_cast<std::uint64_t>(v.size()); ++b) {
    out[static_cast<Eigen::Index>(b ^ xm)] = p.phase_on(b) * v[static_cast<Eigen::Index>(b)];
  }
  return out;
}

inline CMatrix to_dense(const PauliSum& h, int dense_limit = kDefaultDenseLimit) {
  if (h.n_qubits() > dense_limit) {
    throw DimensionError(std::to_string(h.n_qubits()) + " qubits exceeds the dense limit of " +
                         std::to_string(dense_limit));
  }
  const auto dim = static_cast<Eigen::Index>(h.dimension());
  CMatrix m = CMatrix::Zero(dim, dim);
  for (const auto& t : h.terms()) {
    const auto xm = t.string.x_mask();
    for (std::uint64_t col = 0; col < h.dimension(); ++col) {
      m(static_cast<Eigen::Index>(col ^ xm), static_cast<Eigen::Index>(col)) += t.coefficient * t.string.phase_on(col);
    }
  }
  return m;
}

/// <0...0|H|0...0>: every I/Z string has eigenvalue +1 on the vacuum, the rest vanish.
inline double vacuum_expectation(const PauliSum& h) {
  double e = 0.0;
  for (const auto& t : h.terms()) {
    if (t.string.is_diagonal()) e += t.coefficient;
  }
  return e;
}

/// Symbolic commutator [A, B] as a complex-weighted Pauli sum (zero entries dropped).
inline std::map<std::string, cplx> commutator_terms(const PauliSum& a, const PauliSum& b, double drop = 0.0) {
  std::map<std::string, cplx> acc;
  for (const auto& ta : a.terms()) {
    for (const auto& tb : b.terms()) {
      if (ta.string.commutes_with(tb.string)) continue;
      // Anticommuting pair: [P, Q] = 2 P Q.
      auto [phase, prod] = ta.string.multiply(tb.string);
      acc[prod.text()] += 2.0 * ta.coefficient * tb.coefficient * phase;
    }
  }
  std::erase_if(acc, [drop](const auto& kv) { return std::abs(kv.second) <= drop; });
  return acc;
}

/// True iff [H, S] vanishes; decided exactly in the Pauli algebra with a 1e-10 tolerance
/// on the merged commutator coefficients.
inline bool commutes(const PauliSum& h, const SymmetryOperator& s, double tol = 1e-10) {
  if (h.n_qubits() != s.n_qubits()) throw DimensionError("commutes: qubit counts differ");
  return commutator_terms(h, s, tol).empty();
}

/// Particle number sum_q (I - Z_q)/2 under the Jordan-Wigner occupation encoding.
inline SymmetryOperator number_operator(int n_qubits) {
  SymmetryOperator n(n_qubits);
  n.add(0.5 * n_qubits, PauliString::identity(n_qubits));
  for (int q = 0; q < n_qubits; ++q) {
    std::string s(n_qubits, 'I');
    s[n_qubits - 1 - q] = 'Z';
    n.add(-0.5, s);
  }
  return n;
}

/// Total magnetization sum_q Z_q.
inline SymmetryOperator total_z(int n_qubits) {
  SymmetryOperator n(n_qubits);
  for (int q = 0; q < n_qubits; ++q) {
    std::string s(n_qubits, 'I');
    s[n_qubits - 1 - q] = 'Z';
    n.add(1.0, s);
  }
  return n;
}

/// Stable content hash used to tie propagators to the Hamiltonian they came from.
inline std::uint64_t fingerprint(const PauliSum& h) {
  std::uint64_t acc = 1469598103934665603ULL;
  auto feed = [&acc](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      acc ^= p[i];
      acc *= 1099511628211ULL;
    }
  };
  std::vector<const PauliTerm*> sorted;
  for (const auto& t : h.terms()) sorted.push_back(&t);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->string < b->string; });
  for (const auto* t : sorted) {
    feed(t->string.text().data(), t->string.text().size());
    feed(&t->coefficient, sizeof(double));
  }
  return acc;
}

}  // namespace qksd
