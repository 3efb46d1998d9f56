#pragma once

// JSON and CSV views of ledgers, pencils, solutions and traces.
//
// Complex matrices are stored row-major as [[re, im], ...] rows. Non-finite reals
// are written as the strings "inf", "-inf" or "nan" so the output stays valid JSON.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "qksd/estimators.hpp"
#include "qksd/geig.hpp"
#include "qksd/subspace.hpp"
#include "qksd/workflows.hpp"

namespace qksd::io {

using json = nlohmann::json;

inline json real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

inline double real_from(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nan") return std::nan("");
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
    throw ConfigError("unexpected string '" + s + "' for a real value");
  }
  return j.get<double>();
}

inline json complex_pair(cplx z) { return json::array({real(z.real()), real(z.imag())}); }

inline json matrix(const CMatrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_pair(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline CMatrix matrix_from(const json& rows) {
  const auto n_rows = static_cast<Eigen::Index>(rows.size());
  const auto n_cols = n_rows ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  CMatrix m(n_rows, n_cols);
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(row.size()) != n_cols) throw ConfigError("ragged matrix in JSON");
    for (Eigen::Index c = 0; c < n_cols; ++c) {
      const auto& z = row[static_cast<std::size_t>(c)];
      m(r, c) = {real_from(z[0]), real_from(z[1])};
    }
  }
  return m;
}

inline json ledger(const LedgerSnapshot& s) {
  json out = json::object();
  for (std::size_t i = 0; i < kLedgerCategories; ++i) {
    out[std::string(kLedgerCategoryNames[i])] = {{"calls", s.calls[i]}, {"shots", s.shots[i]}};
  }
  out["total"] = {{"calls", s.total_calls()}, {"shots", s.total_shots()}};
  out["fidelity_backend"] = {{"swap_test", s.fidelity_backend_calls[0]}, {"mirror", s.fidelity_backend_calls[1]}};
  return out;
}

inline LedgerSnapshot ledger_from(const json& j) {
  LedgerSnapshot s;
  for (std::size_t i = 0; i < kLedgerCategories; ++i) {
    const auto& c = j.at(std::string(kLedgerCategoryNames[i]));
    s.calls[i] = c.at("calls").get<std::uint64_t>();
    s.shots[i] = c.at("shots").get<std::uint64_t>();
  }
  if (j.contains("fidelity_backend")) {
    s.fidelity_backend_calls[0] = j["fidelity_backend"].value("swap_test", std::uint64_t{0});
    s.fidelity_backend_calls[1] = j["fidelity_backend"].value("mirror", std::uint64_t{0});
  }
  return s;
}

inline json pencil(const SubspacePencil& p) {
  json out = {{"kind", std::string(kind_name(p.kind))},
              {"tau", p.tau},
              {"steps", p.steps},
              {"energy_shift", p.energy_shift},
              {"F", matrix(p.F)},
              {"S", matrix(p.S)}};
  if (p.f_unitary) out["F_unitary"] = matrix(*p.f_unitary);
  if (p.grid) out["grid"] = {{"e_min", p.grid->e_min}, {"e_max", p.grid->e_max}, {"energies", p.grid->energies}};
  out["warnings"] = p.warnings;
  return out;
}

inline SubspacePencil pencil_from(const json& j) {
  SubspacePencil p;
  p.kind = parse_kind(j.at("kind").get<std::string>());
  p.tau = j.at("tau").get<double>();
  p.steps = j.at("steps").get<int>();
  p.energy_shift = j.value("energy_shift", 0.0);
  p.F = matrix_from(j.at("F"));
  p.S = matrix_from(j.at("S"));
  if (j.contains("F_unitary")) p.f_unitary = matrix_from(j["F_unitary"]);
  if (j.contains("grid")) {
    FilterGrid g;
    g.e_min = j["grid"].at("e_min").get<double>();
    g.e_max = j["grid"].at("e_max").get<double>();
    g.energies = j["grid"].at("energies").get<std::vector<double>>();
    p.grid = g;
  }
  if (j.contains("warnings")) p.warnings = j["warnings"].get<std::vector<std::string>>();
  return p;
}

inline json solution(const GEigSolution& s) {
  json ev = json::array();
  for (auto z : s.eigenvalues) ev.push_back(complex_pair(z));
  json sv = json::array();
  for (Eigen::Index i = 0; i < s.singular_values.size(); ++i) sv.push_back(real(s.singular_values[i]));
  json res = json::array();
  for (double r : s.residuals) res.push_back(real(r));
  return {{"eigenvalues", ev},
          {"coefficients", matrix(s.coefficients)},
          {"residuals", res},
          {"singular_values", sv},
          {"condition_number", real(s.condition_number)},
          {"condition_infinite", s.condition_infinite},
          {"numerically_singular", s.numerically_singular},
          {"retained_rank", s.retained_rank},
          {"dimension", s.dimension},
          {"svd_threshold", s.svd_threshold},
          {"backend", s.backend == GeigBackend::svd_regularized ? "svd_regularized" : "generalized_schur"}};
}

inline json trace(const ConvergenceTrace& t) {
  json steps = json::array();
  for (const auto& s : t.steps) {
    steps.push_back({{"step", s.m},
                     {"ok", s.ok},
                     {"message", s.message},
                     {"energy", real(s.energy)},
                     {"delta_e", real(s.delta_e)},
                     {"reference", real(s.reference)},
                     {"kappa", real(s.kappa)},
                     {"kappa_infinite", s.kappa_infinite},
                     {"variance", real(s.variance)},
                     {"retained_rank", s.retained_rank},
                     {"eigenvalue", complex_pair(s.eigenvalue)},
                     {"calls", s.ledger.total_calls()},
                     {"shots", s.ledger.total_shots()}});
  }
  return {{"method", std::string(kind_name(t.method))},
          {"n_qubits", t.n_qubits},
          {"n_terms", t.n_terms},
          {"n_terms_measured", t.n_terms_measured},
          {"h_path", t.h_path == HamiltonianPath::commuting ? "commuting" : "non_commuting"},
          {"h_variance", t.h_variance},
          {"tau", t.tau},
          {"energy_shift", t.shift},
          {"oracle_ground", t.oracle_ground},
          {"reference_mode", t.reference_mode == ReferenceMode::ground ? "ground" : "nearest"},
          {"svd_threshold", t.svd_threshold},
          {"stopped_early", t.stopped_early},
          {"warnings", t.warnings},
          {"steps", steps},
          {"ledger", ledger(t.ledger())}};
}

/// Shortest decimal form that reads back to the same double.
inline std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

inline constexpr const char* kTraceCsvHeader = "step,energy,delta_e,kappa,variance,retained_rank,calls,shots";

/// One row per step under the fixed column header. Failed steps keep their row with nan
/// values. Lines starting with '#' before the header carry provenance.
inline void write_trace_csv(std::ostream& out, const ConvergenceTrace& t, const std::string& comment_header = {}) {
  out << comment_header;
  out << kTraceCsvHeader << '\n';
  for (const auto& s : t.steps) {
    out << s.m << ',' << format_real(s.energy) << ',' << format_real(s.delta_e) << ','
        << (s.kappa_infinite ? std::string("inf") : format_real(s.kappa)) << ',' << format_real(s.variance) << ','
        << s.retained_rank << ',' << s.ledger.total_calls() << ',' << s.ledger.total_shots() << '\n';
  }
}

}  // namespace qksd::io
