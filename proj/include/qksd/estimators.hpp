#pragma once

// Simulated measurement back-ends for Krylov matrix elements.
//
// Every estimator is a pure function of its inputs and the (seed, key) pair:
// sampled-mode draws come from an RNG stream derived from both, so results do
// not depend on the order in which elements are evaluated.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>

#include "qksd/core.hpp"
#include "qksd/hamiltonian.hpp"
#include "qksd/statevec.hpp"

namespace qksd {

enum class ShotMode { exact, sampled };

struct ShotModel {
  ShotMode mode = ShotMode::exact;
  std::int64_t shots = 0;
  std::uint64_t rng_seed = 0;

  static ShotModel exact() { return {}; }
  static ShotModel sampled(std::int64_t shots, std::uint64_t seed) {
    if (shots <= 0) throw ConfigError("sampled shot model needs a positive shot count");
    return {ShotMode::sampled, shots, seed};
  }
  bool is_sampled() const { return mode == ShotMode::sampled; }
  /// Binomial standard error scale 1/sqrt(shots); zero in exact mode.
  double noise_scale() const { return is_sampled() ? 1.0 / std::sqrt(static_cast<double>(shots)) : 0.0; }
};

enum class LedgerCategory : std::size_t {
  overlap_C_n,
  F_H_element,
  F_U_extra,
  fidelity_F1,
  fidelity_F2,
  fidelity_F3,
  hadamard_call,
};
inline constexpr std::size_t kLedgerCategories = 7;

inline constexpr std::array<std::string_view, kLedgerCategories> kLedgerCategoryNames = {
    "overlap_C_n", "F_H_element", "F_U_extra", "fidelity_F1", "fidelity_F2", "fidelity_F3", "hadamard_call"};

inline constexpr std::string_view category_name(LedgerCategory c) {
  return kLedgerCategoryNames[static_cast<std::size_t>(c)];
}

/// Matrix-element categories; these are the "calls to the quantum computer".
inline constexpr bool is_element_category(LedgerCategory c) {
  return c == LedgerCategory::overlap_C_n || c == LedgerCategory::F_H_element || c == LedgerCategory::F_U_extra;
}

enum class FidelityBackend { swap_test, mirror };

struct LedgerSnapshot {
  std::array<std::uint64_t, kLedgerCategories> calls{};
  std::array<std::uint64_t, kLedgerCategories> shots{};
  std::array<std::uint64_t, 2> fidelity_backend_calls{};

  std::uint64_t calls_in(LedgerCategory c) const { return calls[static_cast<std::size_t>(c)]; }
  std::uint64_t shots_in(LedgerCategory c) const { return shots[static_cast<std::size_t>(c)]; }

  std::uint64_t total_calls() const {
    std::uint64_t n = 0;
    for (std::size_t i = 0; i < kLedgerCategories; ++i) {
      if (is_element_category(static_cast<LedgerCategory>(i))) n += calls[i];
    }
    return n;
  }
  std::uint64_t total_shots() const {
    std::uint64_t n = 0;
    for (auto s : shots) n += s;
    return n;
  }

  friend bool operator==(const LedgerSnapshot&, const LedgerSnapshot&) = default;
};

/// Monotone call/shot counters; safe for concurrent increments.
class CallLedger {
 public:
  CallLedger() = default;
  CallLedger(const CallLedger&) = delete;
  CallLedger& operator=(const CallLedger&) = delete;

  void record(LedgerCategory c, std::uint64_t calls, std::uint64_t shots = 0) {
    const auto i = static_cast<std::size_t>(c);
    calls_[i].fetch_add(calls, std::memory_order_relaxed);
    shots_[i].fetch_add(shots, std::memory_order_relaxed);
  }

  void record_backend(FidelityBackend b) {
    backend_[static_cast<std::size_t>(b)].fetch_add(1, std::memory_order_relaxed);
  }

  LedgerSnapshot snapshot() const {
    LedgerSnapshot s;
    for (std::size_t i = 0; i < kLedgerCategories; ++i) {
      s.calls[i] = calls_[i].load(std::memory_order_relaxed);
      s.shots[i] = shots_[i].load(std::memory_order_relaxed);
    }
    for (std::size_t i = 0; i < 2; ++i) s.fidelity_backend_calls[i] = backend_[i].load(std::memory_order_relaxed);
    return s;
  }

 private:
  std::array<std::atomic<std::uint64_t>, kLedgerCategories> calls_{};
  std::array<std::atomic<std::uint64_t>, kLedgerCategories> shots_{};
  std::array<std::atomic<std::uint64_t>, 2> backend_{};
};

namespace detail {

inline double sample_probability(double p, const ShotModel& shot, std::uint64_t key) {
  p = std::clamp(p, 0.0, 1.0);
  std::mt19937_64 rng(mix_seed(shot.rng_seed, key));
  std::binomial_distribution<std::int64_t> dist(shot.shots, p);
  return static_cast<double>(dist(rng)) / static_cast<double>(shot.shots);
}

inline double sample_fidelity(double exact_f, const ShotModel& shot, CallLedger& ledger, LedgerCategory category,
                              std::uint64_t key, FidelityBackend backend) {
  ledger.record(category, 1, shot.is_sampled() ? static_cast<std::uint64_t>(shot.shots) : 0);
  ledger.record_backend(backend);
  exact_f = std::clamp(exact_f, 0.0, 1.0);
  if (!shot.is_sampled()) return exact_f;
  return sample_probability(exact_f, shot, key);
}

}  // namespace detail

/// |<psi_a|psi_b>|^2. The destructive-SWAP and mirror back-ends share the binomial
/// model; the tag is recorded in the ledger only.
inline double fidelity(const StateVector& psi_a, const StateVector& psi_b, const ShotModel& shot, CallLedger& ledger,
                       LedgerCategory category = LedgerCategory::fidelity_F1, std::uint64_t key = 0,
                       FidelityBackend backend = FidelityBackend::swap_test) {
  return detail::sample_fidelity(std::norm(inner(psi_a, psi_b)), shot, ledger, category, key, backend);
}

/// <phi_i| e^{-i n H tau} |phi_j> from simulated ancilla statistics: the X- and
/// Y-basis outcomes are Bernoulli with p = (1 + Re)/2 and (1 + Im)/2.
inline cplx hadamard_element(const SpectralPropagator& prop, const StateVector& phi_i, const StateVector& phi_j, int n,
                             double tau, const ShotModel& shot, CallLedger& ledger, std::uint64_t key = 0) {
  const cplx exact = prop.element(prop.to_eigenbasis(phi_i), prop.to_eigenbasis(phi_j), n * tau);
  ledger.record(LedgerCategory::hadamard_call, 1, shot.is_sampled() ? 2 * static_cast<std::uint64_t>(shot.shots) : 0);
  if (!shot.is_sampled()) return exact;
  const double re = 2.0 * detail::sample_probability((1.0 + exact.real()) / 2.0, shot, 8 * key + 4) - 1.0;
  const double im = 2.0 * detail::sample_probability((1.0 + exact.imag()) / 2.0, shot, 8 * key + 5) - 1.0;
  return {re, im};
}

enum class SignResolution { three_fidelity, two_fidelity };

/// Reference branch of the multi-fidelity protocol.
class MfeContext {
 public:
  /// Vacuum reference |0...0>. Requires [H, S] = 0 and the vacuum to be an
  /// eigenstate of H, so r_R = 1 and theta_R = -n tau <0|H|0>.
  static MfeContext vacuum(const PauliSum& h, const SymmetryOperator& symmetry) {
    if (!commutes(h, symmetry)) throw SymmetryError("Hamiltonian does not commute with the symmetry operator");
    MfeContext ctx;
    ctx.reference_ = basis_state(h.n_qubits(), std::uint64_t{0});
    ctx.symmetry_ = symmetry;
    ctx.vacuum_energy_ = vacuum_expectation(h);
    const CVector hv = qksd::apply(h, ctx.reference_.amplitudes());
    if ((hv - ctx.vacuum_energy_ * ctx.reference_.amplitudes()).norm() > 1e-10) {
      throw SymmetryError("vacuum is not an eigenstate of the Hamiltonian");
    }
    ctx.is_vacuum_ = true;
    ctx.fingerprint_ = fingerprint(h);
    return ctx;
  }

  /// Arbitrary classically simulable reference; <R|e^{-in H tau}|R> is computed exactly.
  static MfeContext custom(const PauliSum& h, const StateVector& reference, const SymmetryOperator& symmetry) {
    if (!commutes(h, symmetry)) throw SymmetryError("Hamiltonian does not commute with the symmetry operator");
    MfeContext ctx;
    ctx.reference_ = reference;
    ctx.symmetry_ = symmetry;
    ctx.vacuum_energy_ = 0.0;
    ctx.is_vacuum_ = false;
    ctx.fingerprint_ = fingerprint(h);
    return ctx;
  }

  const StateVector& reference() const { return reference_; }
  const SymmetryOperator& symmetry() const { return symmetry_; }
  bool is_vacuum() const { return is_vacuum_; }

  /// r_R e^{i theta_R} = <R| e^{-i n H tau} |R>.
  cplx reference_element(const SpectralPropagator& prop, int n, double tau) const {
    if (is_vacuum_) return std::exp(kI * (-n * tau * vacuum_energy_));
    const CVector r = prop.to_eigenbasis(reference_);
    return prop.element(r, r, n * tau);
  }

  /// (r_R, theta_R); for the vacuum theta_R = -n tau <0|H|0> is returned unwrapped.
  std::pair<double, double> reference_polar(const SpectralPropagator& prop, int n, double tau) const {
    if (is_vacuum_) return {1.0, -n * tau * vacuum_energy_};
    const cplx el = reference_element(prop, n, tau);
    return {std::abs(el), std::arg(el)};
  }

  double vacuum_energy() const { return vacuum_energy_; }

  /// Throws SymmetryError unless |phi> lies outside the reference's symmetry sector.
  void check_target(const StateVector& phi) const {
    if (phi.n_qubits() != reference_.n_qubits()) throw DimensionError("MFE target has wrong qubit count");
    if (std::abs(inner(reference_, phi)) > 1e-10) {
      throw SymmetryError("target state overlaps the reference state (symmetry-sector violation)");
    }
    if (is_vacuum_) return;
    const CVector sr = qksd::apply(symmetry_, reference_.amplitudes());
    const cplx s_ref = reference_.amplitudes().dot(sr);
    const CVector sp = qksd::apply(symmetry_, phi.amplitudes());
    const cplx s_phi = phi.amplitudes().dot(sp);
    const bool definite = (sp - s_phi * phi.amplitudes()).norm() < 1e-8 &&
                          (sr - s_ref * reference_.amplitudes()).norm() < 1e-8;
    if (!definite || std::abs(s_phi - s_ref) < 1e-8) {
      throw SymmetryError("target and reference are not in distinct symmetry sectors");
    }
  }

  std::uint64_t hamiltonian_fingerprint() const { return fingerprint_; }

 private:
  StateVector reference_;
  SymmetryOperator symmetry_;
  double vacuum_energy_ = 0.0;
  bool is_vacuum_ = true;
  std::uint64_t fingerprint_ = 0;
};

struct MfeOptions {
  SignResolution sign = SignResolution::three_fidelity;
  FidelityBackend backend = FidelityBackend::swap_test;
  double f1_floor = 1e-12;
  double clamp_margin = 0.05;
};

struct MfeOutcome {
  cplx value;
  double f1 = 0.0;
  double f2 = 0.0;
  double f3 = 0.0;
  double reference_amplitude = 1.0;
  double reference_phase = 0.0;
  bool phase_undefined = false;
  bool clamped = false;
};

namespace detail {

inline double clamp_cosine(double arg, double margin, bool& clamped) {
  if (std::abs(arg) <= 1.0) return arg;
  if (std::abs(arg) > 1.0 + margin) {
    throw EstimationError("arccos argument " + std::to_string(arg) + " outside [-1, 1]; excessive shot noise");
  }
  clamped = true;
  return std::clamp(arg, -1.0, 1.0);
}

}  // namespace detail

/// Multi-fidelity estimate of <phi_i| e^{-i n H tau} |phi_j> = r e^{i theta}:
///   F1 = |<phi_i|U|phi_j>|^2,  F2 = |<(R+phi_i)/sqrt2| U |(R+phi_j)/sqrt2>|^2,
///   r = sqrt(F1),  theta = +-arccos((4F2 - F1 - r_R^2) / (2 r_R sqrt F1)) + theta_R.
/// F3, the same overlap with the reference branch multiplied by i, measures
/// sin(theta - theta_R) and fixes the arccos branch.
inline MfeOutcome mfe_element_detailed(const MfeContext& ctx, const SpectralPropagator& prop, const StateVector& phi_i,
                                       const StateVector& phi_j, int n, double tau, const ShotModel& shot,
                                       CallLedger& ledger, std::uint64_t key = 0, const MfeOptions& opt = {}) {
  if (prop.fingerprint() != ctx.hamiltonian_fingerprint()) {
    throw DimensionError("MFE context and propagator come from different Hamiltonians");
  }
  ctx.check_target(phi_i);
  ctx.check_target(phi_j);
  const StateVector& ref = ctx.reference();
  const double t = n * tau;

  const CVector ei = prop.to_eigenbasis(phi_i);
  const CVector ej = prop.to_eigenbasis(phi_j);
  const CVector bra_sup = prop.to_eigenbasis(superpose(ref, phi_i));
  const CVector ket_sup = prop.to_eigenbasis(superpose(ref, phi_j));

  MfeOutcome out;
  out.f1 = detail::sample_fidelity(std::norm(prop.element(ei, ej, t)), shot, ledger, LedgerCategory::fidelity_F1,
                                   8 * key + 1, opt.backend);
  out.f2 = detail::sample_fidelity(std::norm(prop.element(bra_sup, ket_sup, t)), shot, ledger,
                                   LedgerCategory::fidelity_F2, 8 * key + 2, opt.backend);
  if (opt.sign == SignResolution::three_fidelity) {
    const CVector ket_sup_i = prop.to_eigenbasis(superpose(ref, phi_j, kI));
    out.f3 = detail::sample_fidelity(std::norm(prop.element(bra_sup, ket_sup_i, t)), shot, ledger,
                                     LedgerCategory::fidelity_F3, 8 * key + 3, opt.backend);
  }

  const auto [ref_amp, ref_phase] = ctx.reference_polar(prop, n, tau);
  out.reference_amplitude = ref_amp;
  out.reference_phase = ref_phase;

  const double r = std::sqrt(out.f1);
  if (out.f1 < opt.f1_floor) {
    out.phase_undefined = true;
    out.value = 0.0;
    return out;
  }
  const double rr = out.reference_amplitude;
  const double denom = 2.0 * rr * r;
  const double cos_arg = detail::clamp_cosine((4.0 * out.f2 - out.f1 - rr * rr) / denom, opt.clamp_margin, out.clamped);
  double rel = std::acos(cos_arg);
  if (opt.sign == SignResolution::three_fidelity) {
    // With both quadratures known, atan2 avoids the arccos ill-conditioning near 0 and pi.
    const double sin_arg = detail::clamp_cosine((4.0 * out.f3 - out.f1 - rr * rr) / denom, opt.clamp_margin, out.clamped);
    rel = std::atan2(sin_arg, cos_arg);
  }
  out.value = std::polar(r, rel + out.reference_phase);
  return out;
}

inline cplx mfe_element(const MfeContext& ctx, const SpectralPropagator& prop, const StateVector& phi_i,
                        const StateVector& phi_j, int n, double tau, const ShotModel& shot, CallLedger& ledger,
                        std::uint64_t key = 0, const MfeOptions& opt = {}) {
  return mfe_element_detailed(ctx, prop, phi_i, phi_j, n, tau, shot, ledger, key, opt).value;
}

enum class EstimatorBackend { direct, hadamard, mfe };

/// Back-end selection used by the pencil builders.
struct Estimator {
  EstimatorBackend backend = EstimatorBackend::direct;
  ShotModel shot = ShotModel::exact();
  std::optional<MfeContext> mfe;
  MfeOptions mfe_options;

  static Estimator direct() { return {}; }
};

/// One matrix element through the selected back-end, charged as one call to `category`.
/// The direct back-end is the ideal device and ignores the shot model.
inline cplx estimate_element(const SpectralPropagator& prop, const StateVector& phi_i, const StateVector& phi_j, int n,
                             double tau, const Estimator& est, CallLedger& ledger, LedgerCategory category,
                             std::uint64_t key) {
  ledger.record(category, 1);
  switch (est.backend) {
    case EstimatorBackend::direct:
      return prop.element(prop.to_eigenbasis(phi_i), prop.to_eigenbasis(phi_j), n * tau);
    case EstimatorBackend::hadamard:
      return hadamard_element(prop, phi_i, phi_j, n, tau, est.shot, ledger, key);
    case EstimatorBackend::mfe:
      if (!est.mfe) throw ConfigError("mfe estimator requires an MfeContext");
      return mfe_element(*est.mfe, prop, phi_i, phi_j, n, tau, est.shot, ledger, key, est.mfe_options);
  }
  throw ConfigError("unknown estimator back-end");
}

/// C_n(tau) = <phi_o| e^{-i n H tau} |phi_o>. C_0 = 1 costs nothing.
inline cplx correlation(const SpectralPropagator& prop, const StateVector& phi_o, int n, double tau,
                        const Estimator& est, CallLedger& ledger,
                        LedgerCategory category = LedgerCategory::overlap_C_n) {
  if (n < 0) throw DimensionError("correlation step must be non-negative");
  if (n == 0) return 1.0;
  return estimate_element(prop, phi_o, phi_o, n, tau, est, ledger, category, static_cast<std::uint64_t>(n));
}

/// Overload with an explicit shot model (Hadamard statistics when sampled).
inline cplx correlation(const SpectralPropagator& prop, const StateVector& phi_o, int n, double tau,
                        const ShotModel& shot, CallLedger& ledger) {
  Estimator est;
  est.backend = shot.is_sampled() ? EstimatorBackend::hadamard : EstimatorBackend::direct;
  est.shot = shot;
  return correlation(prop, phi_o, n, tau, est, ledger);
}

}  // namespace qksd
