// Batch front-end: run, spectrum, sweep, hyperopt and ledger verbs over a config file.
// Exit codes: 0 ok, 2 configuration or input error, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qksd/config.hpp"
#include "qksd/io.hpp"
#include "qksd/qksd.hpp"

namespace fs = std::filesystem;
using namespace qksd;
using io::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

/// Thrown for user-facing failures that carry their own exit code.
struct CliFailure {
  int code;
  std::string kind;
  std::string message;
};

struct Options {
  std::string config_path;
  std::string output_dir;
  std::vector<std::string> overrides;
};

config::Config load(const Options& o) {
  config::Config c = config::Config::load(o.config_path);
  for (const auto& s : o.overrides) c.apply_override(s);
  if (!o.output_dir.empty()) c.set("output.dir", o.output_dir);
  return c;
}

fs::path output_path(const config::Config& c, const std::string& suffix) {
  const fs::path dir = c.get("output.dir");
  fs::create_directories(dir);
  return dir / (c.get("output.prefix") + suffix);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliFailure{kExitConfig, "io", "cannot write '" + path.string() + "'"};
  out << text;
}

/// Provenance block shared by every output: the resolved config and the seed.
std::string csv_header(const std::string& verb, const config::Config& c) {
  return "# qksd " + verb + "\n# seed = " + c.get("estimator.seed") + "\n" + c.header();
}

json json_header(const std::string& verb, const config::Config& c) {
  json cfg = json::object();
  for (const auto& [k, v] : c.resolved()) cfg[k] = v;
  return {{"verb", verb}, {"config", cfg}, {"seed", c.integer("estimator.seed")}};
}

std::string csv_text(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

struct Problem {
  PauliSum h;
  StateVector phi;
};

Problem build_problem(const config::Config& c) {
  PauliSum h = config::build_hamiltonian(c);
  const auto limit = c.integer("run.dense_limit");
  if (h.n_qubits() > limit) {
    throw ConfigError("model has " + std::to_string(h.n_qubits()) + " qubits, above run.dense_limit = " +
                      std::to_string(limit));
  }
  StateVector phi = config::build_state(c, h.n_qubits());
  return {std::move(h), std::move(phi)};
}

int cmd_run(const Options& o) {
  const config::Config c = load(o);
  const Problem p = build_problem(c);
  const RunConfig cfg = config::build_run_config(c, p.h, p.phi);
  const ConvergenceTrace t = run_method(cfg, p.h, p.phi, config::reference_mode(c));

  std::ostringstream csv;
  io::write_trace_csv(csv, t, csv_header("run", c));
  const fs::path csv_path = output_path(c, "_trace.csv");
  write_file(csv_path, csv.str());
  json j = json_header("run", c);
  j["trace"] = io::trace(t);
  const fs::path json_path = output_path(c, "_trace.json");
  write_file(json_path, j.dump(2) + "\n");

  for (const auto& w : t.warnings) std::cerr << "warning: " << w << "\n";
  const TraceStep& last = t.last();
  std::cout << kind_name(t.method) << " N=" << t.n_qubits << " L=" << t.n_terms << " steps=" << t.steps.size()
            << " E=" << io::format_real(last.energy) << " dE=" << io::format_real(last.delta_e)
            << " var=" << io::format_real(last.variance) << " calls=" << last.ledger.total_calls() << "\n"
            << "wrote " << csv_path.string() << " and " << json_path.string() << "\n";
  if (!last.ok) {
    std::cerr << "final step failed: " << last.message << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_spectrum(const Options& o) {
  const config::Config c = load(o);
  const Problem p = build_problem(c);
  const oracle::Spectrum sp = oracle::diagonalize(p.h, static_cast<int>(c.integer("run.dense_limit")));
  std::string csv = csv_header("spectrum", c) + "index,energy\n";
  json levels = json::array();
  for (Eigen::Index k = 0; k < sp.eigenvalues.size(); ++k) {
    csv += std::to_string(k) + "," + io::format_real(sp.eigenvalues[k]) + "\n";
    levels.push_back(sp.eigenvalues[k]);
  }
  json j = json_header("spectrum", c);
  j["eigenvalues"] = levels;
  j["ground"] = sp.ground();
  j["initial_state_energy"] = expectation(p.h, p.phi);
  write_file(output_path(c, "_spectrum.csv"), csv);
  write_file(output_path(c, "_spectrum.json"), j.dump(2) + "\n");
  std::cout << "levels=" << sp.eigenvalues.size() << " ground=" << io::format_real(sp.ground())
            << " <phi|H|phi>=" << io::format_real(expectation(p.h, p.phi)) << "\n";
  return kExitOk;
}

struct SweepRow {
  std::string value;
  bool ok = false;
  std::string message;
  ConvergenceTrace trace;
};

int cmd_sweep(const Options& o) {
  const config::Config base = load(o);
  const std::string key = base.get("sweep.parameter");
  base.get(key);  // rejects unknown axis keys up front
  const std::vector<std::string> values = config::sweep_values(base);
  const auto workers = static_cast<unsigned>(std::max<std::int64_t>(1, base.integer("run.workers")));

  const auto rows = parallel_map(
      values.size(),
      [&](std::size_t i) {
        SweepRow row;
        row.value = values[i];
        try {
          config::Config c = base;
          c.set(key, values[i]);
          const Problem p = build_problem(c);
          const RunConfig cfg = config::build_run_config(c, p.h, p.phi);
          row.trace = run_method(cfg, p.h, p.phi, config::reference_mode(c));
          row.ok = row.trace.last().ok;
          row.message = row.trace.last().message;
        } catch (const Error& e) {
          row.ok = false;
          row.message = e.what();
        }
        return row;
      },
      workers);

  std::string csv = csv_header("sweep", base) + key +
                    ",ok,energy,delta_e,oracle_ground,kappa,variance,retained_rank,steps,calls,shots,message\n";
  json table = json::array();
  std::size_t good = 0;
  for (const auto& r : rows) {
    good += r.ok ? 1 : 0;
    const bool has = !r.trace.steps.empty();
    const TraceStep last = has ? r.trace.last() : TraceStep{};
    const double ground = has ? r.trace.oracle_ground : std::numeric_limits<double>::quiet_NaN();
    csv += r.value + "," + (r.ok ? "1" : "0") + "," + io::format_real(last.energy) + "," +
           io::format_real(last.delta_e) + "," + io::format_real(ground) + "," +
           (last.kappa_infinite ? std::string("inf") : io::format_real(last.kappa)) + "," +
           io::format_real(last.variance) + "," + std::to_string(last.retained_rank) + "," +
           std::to_string(r.trace.steps.size()) + "," + std::to_string(last.ledger.total_calls()) + "," +
           std::to_string(last.ledger.total_shots()) + "," + csv_text(r.message) + "\n";
    table.push_back({{"value", r.value},
                     {"ok", r.ok},
                     {"message", r.message},
                     {"energy", io::real(last.energy)},
                     {"delta_e", io::real(last.delta_e)},
                     {"oracle_ground", io::real(ground)},
                     {"kappa", io::real(last.kappa)},
                     {"variance", io::real(last.variance)},
                     {"retained_rank", last.retained_rank},
                     {"steps", r.trace.steps.size()},
                     {"calls", last.ledger.total_calls()},
                     {"shots", last.ledger.total_shots()}});
  }
  json j = json_header("sweep", base);
  j["parameter"] = key;
  j["rows"] = table;
  write_file(output_path(base, "_sweep.csv"), csv);
  write_file(output_path(base, "_sweep.json"), j.dump(2) + "\n");
  std::cout << "sweep " << key << ": " << good << " of " << rows.size() << " points solved\n";
  for (const auto& r : rows) {
    if (!r.ok) std::cerr << "point " << key << "=" << r.value << " failed: " << r.message << "\n";
  }
  return good == 0 ? kExitNumerical : kExitOk;
}

int cmd_hyperopt(const Options& o) {
  const config::Config c = load(o);
  const Problem p = build_problem(c);
  const RunConfig cfg = config::build_run_config(c, p.h, p.phi);
  const auto candidates = config::hyperopt_candidates(c, expectation(p.h, p.phi));
  const HyperoptResult r = hyperopt(cfg, p.h, p.phi, candidates);

  std::string csv = csv_header("hyperopt", c) + "index,e_min,e_max,j,ok,energy,delta_e,variance,kappa,retained_rank,best,message\n";
  json rows = json::array();
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    csv += std::to_string(i) + "," + io::format_real(row.candidate.e_min) + "," + io::format_real(row.candidate.e_max) +
           "," + std::to_string(row.candidate.j_count) + "," + (row.ok ? "1" : "0") + "," + io::format_real(row.energy) +
           "," + io::format_real(row.delta_e) + "," + io::format_real(row.variance) + "," + io::format_real(row.kappa) +
           "," + std::to_string(row.retained_rank) + "," + (i == r.best ? "1" : "0") + "," + csv_text(row.message) + "\n";
    rows.push_back({{"e_min", row.candidate.e_min},
                    {"e_max", row.candidate.e_max},
                    {"j", row.candidate.j_count},
                    {"ok", row.ok},
                    {"message", row.message},
                    {"energy", io::real(row.energy)},
                    {"delta_e", io::real(row.delta_e)},
                    {"variance", io::real(row.variance)},
                    {"kappa", io::real(row.kappa)},
                    {"retained_rank", row.retained_rank}});
  }
  json j = json_header("hyperopt", c);
  j["rows"] = rows;
  j["best"] = r.best;
  j["oracle_ground"] = r.oracle_ground;
  j["ledger"] = io::ledger(r.ledger);
  write_file(output_path(c, "_hyperopt.csv"), csv);
  write_file(output_path(c, "_hyperopt.json"), j.dump(2) + "\n");
  const auto& b = r.rows[r.best];
  std::cout << "best window [" << io::format_real(b.candidate.e_min) << ", " << io::format_real(b.candidate.e_max)
            << "] J=" << b.candidate.j_count << " variance=" << io::format_real(b.variance)
            << " dE=" << io::format_real(b.delta_e) << " calls=" << r.ledger.total_calls() << "\n";
  return kExitOk;
}

int cmd_ledger(const Options& o) {
  const config::Config c = load(o);
  const fs::path trace_path = fs::path(c.get("output.dir")) / (c.get("output.prefix") + "_trace.json");
  std::ifstream in(trace_path);
  if (!in) throw CliFailure{kExitConfig, "missing_artifact", "no run trace at '" + trace_path.string() + "'; run first"};
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw CliFailure{kExitConfig, "missing_artifact", "unreadable run trace: " + std::string(e.what())};
  }
  const json& t = doc.at("trace");
  const PencilKind kind = parse_kind(t.at("method").get<std::string>());
  const json& steps = t.at("steps");
  const std::uint64_t m = steps.empty() ? 0 : steps.back().at("step").get<std::uint64_t>();
  const auto l = t.at("n_terms_measured").get<std::uint64_t>();
  const auto path = t.at("h_path").get<std::string>() == "commuting" ? HamiltonianPath::commuting
                                                                      : HamiltonianPath::non_commuting;
  const LedgerSnapshot snap = io::ledger_from(t.at("ledger"));
  const CallPrediction pred = predicted_calls(kind, l, m, path, t.at("h_variance").get<bool>());
  json report = json_header("ledger", c);
  report["method"] = std::string(kind_name(kind));
  report["M"] = m;
  report["L"] = l;
  report["h_path"] = t.at("h_path");
  report["calls"] = snap.total_calls();
  report["shots"] = snap.total_shots();
  report["categories"] = t.at("ledger");
  report["prediction"] = {{"formula", pred.formula}, {"value", pred.value}};
  report["match"] = pred.value == snap.total_calls();
  write_file(output_path(c, "_ledger.json"), report.dump(2) + "\n");
  std::cout << kind_name(kind) << " M=" << m << " L=" << l << " calls=" << snap.total_calls()
            << " predicted " << pred.formula << " = " << pred.value << (report["match"].get<bool>() ? " match" : " MISMATCH")
            << "\n";
  return report["match"].get<bool>() ? kExitOk : kExitNumerical;
}

void structured_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum Krylov subspace diagonalization experiments"};
  app.require_subcommand(1);
  Options opt;
  std::function<int(const Options&)> action;
  const std::vector<std::pair<std::string, std::pair<std::string, int (*)(const Options&)>>> verbs{
      {"run", {"Run the configured method and write the convergence trace", cmd_run}},
      {"spectrum", {"Dense oracle spectrum of the configured model", cmd_spectrum}},
      {"sweep", {"Repeat the run along sweep.parameter", cmd_sweep}},
      {"hyperopt", {"Grid search over filter windows and J on one set of measurements", cmd_hyperopt}},
      {"ledger", {"Compare a finished run's call ledger with the predicted count", cmd_ledger}},
  };
  for (const auto& [name, info] : verbs) {
    CLI::App* sub = app.add_subcommand(name, info.first);
    sub->add_option("-c,--config", opt.config_path, "Config file")->required();
    sub->add_option("-o,--output", opt.output_dir, "Output directory (overrides output.dir)");
    sub->add_option("--set", opt.overrides, "Override as section.key=value (repeatable)");
    auto fn = info.second;
    sub->callback([&action, fn] { action = fn; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    return action(opt);
  } catch (const CliFailure& f) {
    structured_error(f.kind, f.message);
    return f.code;
  } catch (const ParseError& e) {
    structured_error("parse", e.what());
  } catch (const ConfigError& e) {
    structured_error("config", e.what());
  } catch (const DimensionError& e) {
    structured_error("dimension", e.what());
  } catch (const SymmetryError& e) {
    structured_error("symmetry", e.what());
  } catch (const SolverError& e) {
    structured_error("solver", e.what());
    return kExitNumerical;
  } catch (const EstimationError& e) {
    structured_error("estimation", e.what());
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    structured_error("io", e.what());
  }
  return kExitConfig;
}
