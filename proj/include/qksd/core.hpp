#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qksd {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

inline constexpr cplx kI{0.0, 1.0};
inline constexpr double kPi = 3.14159265358979323846;

/// Largest qubit count for which dense 2^N x 2^N matrices are built.
inline constexpr int kDefaultDenseLimit = 14;

/// Energy error bar used for convergence reporting (Hartree).
inline constexpr double kChemicalAccuracy = 1.59e-3;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(int line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class SymmetryError : public Error {
 public:
  using Error::Error;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

namespace log {

using Sink = std::function<void(const std::string&)>;

inline Sink& sink_storage() {
  static Sink s = [](const std::string& msg) { std::cerr << "qksd warning: " << msg << '\n'; };
  return s;
}

inline std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

/// Replace the warning sink; returns the previous one.
inline Sink set_sink(Sink s) {
  std::lock_guard lock(sink_mutex());
  Sink old = std::move(sink_storage());
  sink_storage() = std::move(s);
  return old;
}

inline void warn(const std::string& msg) {
  std::lock_guard lock(sink_mutex());
  if (sink_storage()) sink_storage()(msg);
}

}  // namespace log

// splitmix64 finalizer; used to derive independent RNG streams from (seed, key).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (key + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace qksd
