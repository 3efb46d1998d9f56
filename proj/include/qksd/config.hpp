#pragma once

// Flat `key = value` configuration with [section] headers.
//
// Every key has a registered default; unknown sections or keys are rejected. The
// resolved view (defaults plus file plus overrides) is what output headers embed.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qksd/core.hpp"
#include "qksd/hamiltonian.hpp"
#include "qksd/models.hpp"
#include "qksd/statevec.hpp"
#include "qksd/workflows.hpp"

namespace qksd::config {

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Ordered by section then key; this order is the output header order.
inline const std::vector<std::pair<std::string, std::string>>& defaults() {
  static const std::vector<std::pair<std::string, std::string>> table = {
      {"model.family", "tfim"},
      {"model.n", "8"},
      {"model.coupling", "1"},
      {"model.field", "1"},
      {"model.anisotropy", "1"},
      {"model.path", ""},
      {"state.kind", "plus"},
      {"state.eta", "0"},
      {"state.bits", ""},
      {"state.pattern_a", ""},
      {"state.pattern_b", ""},
      {"method.kind", "KDM_U"},
      {"method.tau", "0.1"},
      {"method.m_max", "10"},
      {"method.grid", "window"},
      {"method.window", "narrow"},
      {"method.e_min", "0"},
      {"method.e_max", "0"},
      {"method.j", "5"},
      {"method.svd_threshold", "0"},
      {"method.geig_backend", "svd_regularized"},
      {"method.shift", "mid_spectrum"},
      {"method.stop_variance", "1e-08"},
      {"method.h_path", "commuting"},
      {"method.h_variance", "false"},
      {"method.reference", "ground"},
      {"estimator.backend", "direct"},
      {"estimator.mode", "exact"},
      {"estimator.shots", "0"},
      {"estimator.seed", "1"},
      {"estimator.sign", "three_fidelity"},
      {"estimator.fidelity_backend", "swap_test"},
      {"output.dir", "out"},
      {"output.prefix", "run"},
      {"sweep.parameter", "model.field"},
      {"sweep.values", ""},
      {"hyperopt.candidates", "narrow:3,narrow:4,narrow:5,wide:6,wide:7,wide:8"},
      {"run.workers", "1"},
      {"run.dense_limit", "14"},
  };
  return table;
}

}  // namespace detail

class Config {
 public:
  Config() {
    for (const auto& [k, v] : detail::defaults()) values_[k] = v;
  }

  /// Parses file text. '#' or ';' start comments; keys before any [section] are an error.
  static Config parse(std::string_view text) {
    Config c;
    std::string section;
    int line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
      const auto end = text.find('\n', start);
      std::string line(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
      ++line_no;
      start = end == std::string_view::npos ? text.size() + 1 : end + 1;
      if (const auto hash = line.find_first_of("#;"); hash != std::string::npos) line.erase(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ParseError(line_no, "unterminated section header");
        section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
        if (!c.has_section(section)) throw ParseError(line_no, "unknown section [" + section + "]");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError(line_no, "expected key = value");
      if (section.empty()) throw ParseError(line_no, "key outside of any [section]");
      const std::string key = section + "." + detail::trim(std::string_view(line).substr(0, eq));
      try {
        c.set(key, detail::trim(std::string_view(line).substr(eq + 1)));
      } catch (const ConfigError& e) {
        throw ParseError(line_no, e.what());
      }
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    Config c = parse(ss.str());
    // File-relative data paths follow the config file, not the working directory.
    const std::filesystem::path data = c.get("model.path");
    if (!data.empty() && data.is_relative()) {
      c.set("model.path", (std::filesystem::path(path).parent_path() / data).lexically_normal().string());
    }
    return c;
  }

  /// Applies `section.key=value`.
  void apply_override(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError("override must be section.key=value");
    set(detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
  }

  void set(const std::string& key, std::string value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second = std::move(value);
  }

  const std::string& get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
  }

  double real(const std::string& key) const {
    const std::string& s = get(key);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected a number, got '" + s + "'");
    }
    if (used != s.size() || !std::isfinite(v)) throw ConfigError(key + ": expected a finite number, got '" + s + "'");
    return v;
  }

  std::int64_t integer(const std::string& key) const {
    const std::string& s = get(key);
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &used);
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected an integer, got '" + s + "'");
    }
    if (used != s.size()) throw ConfigError(key + ": expected an integer, got '" + s + "'");
    return v;
  }

  bool boolean(const std::string& key) const {
    const std::string& s = get(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + s + "'");
  }

  /// Every key in registration order with its resolved value.
  std::vector<std::pair<std::string, std::string>> resolved() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [k, _] : detail::defaults()) out.emplace_back(k, values_.at(k));
    return out;
  }

  /// The resolved config as '# key = value' lines.
  std::string header(std::string_view prefix = "# ") const {
    std::string out;
    for (const auto& [k, v] : resolved()) out += std::string(prefix) + k + " = " + v + "\n";
    return out;
  }

 private:
  bool has_section(const std::string& s) const {
    for (const auto& [k, _] : detail::defaults())
      if (k.compare(0, s.size() + 1, s + ".") == 0) return true;
    return false;
  }

  std::map<std::string, std::string> values_;
};

inline PauliSum build_hamiltonian(const Config& c) {
  const std::string& family = c.get("model.family");
  const auto n = static_cast<int>(c.integer("model.n"));
  if (family == "tfim") return models::tfim(n, c.real("model.coupling"), c.real("model.field"));
  if (family == "heisenberg_xxz") return models::heisenberg_xxz(n, c.real("model.anisotropy"));
  if (family == "file") {
    const std::string& path = c.get("model.path");
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open Hamiltonian file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_hamiltonian(ss.str());
  }
  throw ConfigError("model.family must be tfim, heisenberg_xxz or file");
}

inline StateVector build_state(const Config& c, int n_qubits) {
  const std::string& kind = c.get("state.kind");
  if (kind == "plus") return models::plus_state(n_qubits);
  if (kind == "zero") return basis_state(n_qubits, std::uint64_t{0});
  if (kind == "hf") return models::hartree_fock_state(n_qubits, static_cast<int>(c.integer("state.eta")));
  if (kind == "bits") return basis_state(n_qubits, c.get("state.bits"));
  if (kind == "singlet") return models::singlet_ansatz(n_qubits, c.get("state.pattern_a"), c.get("state.pattern_b"));
  throw ConfigError("state.kind must be plus, zero, hf, bits or singlet");
}

inline ReferenceMode reference_mode(const Config& c) {
  const std::string& r = c.get("method.reference");
  if (r == "ground") return ReferenceMode::ground;
  if (r == "nearest") return ReferenceMode::nearest;
  throw ConfigError("method.reference must be ground or nearest");
}

/// Window bounds from the preset name relative to <phi_o|H|phi_o>, or explicit bounds.
inline std::pair<double, double> resolve_window(const std::string& name, const Config& c, double e_ref) {
  if (name == "custom") return {c.real("method.e_min"), c.real("method.e_max")};
  return window_preset(name, e_ref);
}

inline RunConfig build_run_config(const Config& c, const PauliSum& h, const StateVector& phi_o) {
  RunConfig r;
  try {
    r.method = parse_kind(c.get("method.kind"));
  } catch (const Error& e) {
    throw ConfigError(std::string("method.kind: ") + e.what());
  }
  r.tau = c.real("method.tau");
  r.m_max = static_cast<int>(c.integer("method.m_max"));
  const std::string& grid = c.get("method.grid");
  if (grid == "window") {
    r.grid_mode = GridMode::window;
  } else if (grid == "dft") {
    r.grid_mode = GridMode::dft;
  } else {
    throw ConfigError("method.grid must be window or dft");
  }
  r.j_count = static_cast<int>(c.integer("method.j"));
  if (is_filter_kind(r.method) && r.grid_mode == GridMode::window) {
    r.window = resolve_window(c.get("method.window"), c, expectation(h, phi_o));
  }
  r.svd_threshold = c.real("method.svd_threshold");
  const std::string& gb = c.get("method.geig_backend");
  if (gb == "svd_regularized") {
    r.geig_backend = GeigBackend::svd_regularized;
  } else if (gb == "generalized_schur") {
    r.geig_backend = GeigBackend::generalized_schur;
  } else {
    throw ConfigError("method.geig_backend must be svd_regularized or generalized_schur");
  }
  const std::string& shift = c.get("method.shift");
  if (shift == "none") {
    r.shift = ShiftPolicy::none;
  } else if (shift == "hf") {
    r.shift = ShiftPolicy::hf;
  } else if (shift == "mid_spectrum") {
    r.shift = ShiftPolicy::mid_spectrum;
  } else {
    throw ConfigError("method.shift must be none, hf or mid_spectrum");
  }
  r.stop_variance = c.real("method.stop_variance");
  const std::string& path = c.get("method.h_path");
  if (path == "commuting") {
    r.h_path = HamiltonianPath::commuting;
  } else if (path == "non_commuting") {
    r.h_path = HamiltonianPath::non_commuting;
  } else {
    throw ConfigError("method.h_path must be commuting or non_commuting");
  }
  r.h_variance = c.boolean("method.h_variance");

  const std::string& backend = c.get("estimator.backend");
  if (backend == "direct") {
    r.estimator = EstimatorBackend::direct;
  } else if (backend == "hadamard") {
    r.estimator = EstimatorBackend::hadamard;
  } else if (backend == "mfe") {
    r.estimator = EstimatorBackend::mfe;
  } else {
    throw ConfigError("estimator.backend must be direct, hadamard or mfe");
  }
  const std::string& mode = c.get("estimator.mode");
  const auto seed = static_cast<std::uint64_t>(c.integer("estimator.seed"));
  if (mode == "exact") {
    r.shot = ShotModel::exact();
    r.shot.rng_seed = seed;
  } else if (mode == "sampled") {
    r.shot = ShotModel::sampled(c.integer("estimator.shots"), seed);
  } else {
    throw ConfigError("estimator.mode must be exact or sampled");
  }
  const std::string& sign = c.get("estimator.sign");
  if (sign == "three_fidelity") {
    r.mfe.sign = SignResolution::three_fidelity;
  } else if (sign == "two_fidelity") {
    r.mfe.sign = SignResolution::two_fidelity;
  } else {
    throw ConfigError("estimator.sign must be three_fidelity or two_fidelity");
  }
  const std::string& fb = c.get("estimator.fidelity_backend");
  if (fb == "swap_test") {
    r.mfe.backend = FidelityBackend::swap_test;
  } else if (fb == "mirror") {
    r.mfe.backend = FidelityBackend::mirror;
  } else {
    throw ConfigError("estimator.fidelity_backend must be swap_test or mirror");
  }
  r.validate();
  return r;
}

/// "narrow:3,wide:6,custom:-2:1:4" -> filter candidates; custom carries explicit bounds.
inline std::vector<FilterCandidate> hyperopt_candidates(const Config& c, double e_ref) {
  std::vector<FilterCandidate> out;
  for (const auto& item : detail::split(c.get("hyperopt.candidates"), ',')) {
    if (item.empty()) continue;
    const auto parts = detail::split(item, ':');
    FilterCandidate f;
    try {
      if (parts.size() == 2 && (parts[0] == "narrow" || parts[0] == "wide")) {
        std::tie(f.e_min, f.e_max) = window_preset(parts[0], e_ref);
        f.j_count = std::stoi(parts[1]);
      } else if (parts.size() == 4 && parts[0] == "custom") {
        f.e_min = std::stod(parts[1]);
        f.e_max = std::stod(parts[2]);
        f.j_count = std::stoi(parts[3]);
      } else {
        throw ConfigError("bad hyperopt candidate '" + item + "'");
      }
    } catch (const std::invalid_argument&) {
      throw ConfigError("bad hyperopt candidate '" + item + "'");
    }
    if (f.j_count < 1 || !(f.e_min < f.e_max)) throw ConfigError("bad hyperopt candidate '" + item + "'");
    out.push_back(f);
  }
  if (out.empty()) throw ConfigError("hyperopt.candidates is empty");
  return out;
}

/// Sweep axis as kept strings: a comma list "0.2,0.4" or a range "a:b:count" (inclusive).
inline std::vector<std::string> sweep_values(const Config& c) {
  const std::string& axis = c.get("sweep.values");
  if (axis.empty()) throw ConfigError("sweep.values is empty");
  if (axis.find(':') != std::string::npos) {
    const auto parts = detail::split(axis, ':');
    if (parts.size() != 3) throw ConfigError("sweep range must be start:stop:count");
    double a = 0.0, b = 0.0;
    long count = 0;
    try {
      a = std::stod(parts[0]);
      b = std::stod(parts[1]);
      count = std::stol(parts[2]);
    } catch (const std::exception&) {
      throw ConfigError("sweep range must be start:stop:count");
    }
    if (!std::isfinite(a) || !std::isfinite(b) || count < 1) throw ConfigError("sweep range values must be finite");
    std::vector<std::string> out;
    for (long i = 0; i < count; ++i) {
      const double x = count == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1);
      std::ostringstream ss;
      ss.precision(15);
      ss << x;
      out.push_back(ss.str());
    }
    return out;
  }
  auto out = detail::split(axis, ',');
  for (const auto& v : out)
    if (v.empty()) throw ConfigError("empty value in sweep.values");
  return out;
}

}  // namespace qksd::config
