#pragma once

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mlabs/benchmarks.hpp"
#include "mlabs/chain.hpp"
#include "mlabs/errors.hpp"
#include "mlabs/hyperparams.hpp"

namespace mlabs {

enum class Task { kFit, kPredict, kClassify, kBenchmark, kCv, kGrid };

inline std::string to_string(Task t) {
  switch (t) {
    case Task::kFit: return "fit";
    case Task::kPredict: return "predict";
    case Task::kClassify: return "classify";
    case Task::kBenchmark: return "benchmark";
    case Task::kCv: return "cv";
    case Task::kGrid: return "grid";
  }
  return "?";
}

/// Hyperparameter candidates searched by the grid command.
struct GridSpec {
  std::vector<std::vector<int>> degree_sets;
  std::vector<int> k_max;
  std::vector<double> expansion;

  std::size_t size() const { return degree_sets.size() * k_max.size() * expansion.size(); }

  /// Point `i` in grid order: S varies slowest, then K_max, then E.
  Hyperparams point(std::size_t i, Hyperparams base) const {
    const std::size_t ne = expansion.size();
    const std::size_t nk = k_max.size();
    base.expansion = expansion[i % ne];
    base.k_max = k_max[(i / ne) % nk];
    base.degrees = degree_sets[i / (ne * nk)];
    return base;
  }
};

/// The full hyperparameter search space: 12 degree sets x 3 K_max x 4 E.
inline GridSpec full_grid() {
  return {{{0}, {1}, {2}, {3}, {0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}, {0, 1, 2}, {0, 1, 2, 3}},
          {1, 2, 3},
          {0.1, 1.0, 2.0, 3.0}};
}

struct RunConfig {
  Task task = Task::kFit;
  std::string data;       // training CSV
  std::string test_data;  // CSV to predict on
  std::string chain;      // chain file (read by predict, written by fit/classify)
  std::string response = "y";
  std::string output = ".";
  Hyperparams hyper;
  // Regression (identity) or classification (probit) for cv and grid.
  Link link = Link::kIdentity;

  // Cross-validation.
  int folds = 5;
  int repeats = 1;

  // Benchmarks.
  std::vector<bench::TestFunction> functions{bench::TestFunction::kRadial};
  std::vector<double> rsnr{5.0};
  int replicates = 5;
  // Use each function's tuned hyperparameters instead of `hyper`.
  bool presets = false;

  // Grid search: folds/repeats from the cv block.
  GridSpec grid = full_grid();

  // Classification boundary export: resolution per axis (0 = off).
  int grid_export = 0;

  // Worker threads for independent fits (0 = hardware concurrency).
  int threads = 0;
};

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

inline double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

inline long long to_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

inline int to_int(const std::string& key, const std::string& v) {
  const long long x = to_integer(key, v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ConfigError(key + ": value out of range");
  }
  return static_cast<int>(x);
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::string strip_braces(std::string s) {
  s = trim(s);
  if (s.size() >= 2 && ((s.front() == '{' && s.back() == '}') || (s.front() == '(' && s.back() == ')'))) {
    s = trim(std::string_view(s).substr(1, s.size() - 2));
  }
  return s;
}

}  // namespace detail

/// "0,2" or "{0,2}" -> {0, 2}.
inline std::vector<int> parse_degree_set(const std::string& key, const std::string& value) {
  std::vector<int> out;
  for (const auto& item : detail::split(detail::strip_braces(value), ',')) out.push_back(detail::to_int(key, item));
  return out;
}

/// Semicolon-separated degree sets: "0; 1; 0,1; 0,1,2,3".
inline std::vector<std::vector<int>> parse_degree_sets(const std::string& key, const std::string& value) {
  std::vector<std::vector<int>> out;
  for (const auto& item : detail::split(value, ';')) out.push_back(parse_degree_set(key, item));
  return out;
}

inline Task parse_task(const std::string& v) {
  for (Task t : {Task::kFit, Task::kPredict, Task::kClassify, Task::kBenchmark, Task::kCv, Task::kGrid}) {
    if (to_string(t) == v) return t;
  }
  throw ConfigError("unknown task '" + v + "'");
}

/// Sets one configuration key. Keys and accepted values are listed in the
/// README; unknown keys are rejected.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  using detail::to_bool;
  using detail::to_double;
  using detail::to_int;
  Hyperparams& h = cfg.hyper;
  const std::string& v = value;
  if (key == "task") {
    cfg.task = parse_task(v);
  } else if (key == "data") {
    cfg.data = v;
  } else if (key == "test_data") {
    cfg.test_data = v;
  } else if (key == "chain") {
    cfg.chain = v;
  } else if (key == "response") {
    cfg.response = v;
  } else if (key == "output") {
    cfg.output = v;
  } else if (key == "link") {
    if (v == "identity") {
      cfg.link = Link::kIdentity;
    } else if (v == "probit") {
      cfg.link = Link::kProbit;
    } else {
      throw ConfigError("link must be identity or probit");
    }
  } else if (key == "degrees") {
    h.degrees = parse_degree_set(key, v);
  } else if (key == "k_max") {
    h.k_max = to_int(key, v);
  } else if (key == "expansion") {
    h.expansion = to_double(key, v);
  } else if (key == "a_gamma") {
    h.a_gamma = to_double(key, v);
  } else if (key == "b_gamma") {
    h.b_gamma = to_double(key, v);
  } else if (key == "r") {
    h.r = to_double(key, v);
  } else if (key == "R") {
    h.R = to_double(key, v);
  } else if (key == "phi") {
    if (v == "var") {
      h.phi.reset();
      h.phi_rule = PhiRule::kVariance;
    } else if (v == "half-range") {
      h.phi.reset();
      h.phi_rule = PhiRule::kHalfRange;
    } else {
      h.phi = to_double(key, v);
    }
  } else if (key == "p_birth") {
    h.p_birth = to_double(key, v);
  } else if (key == "p_death") {
    h.p_death = to_double(key, v);
  } else if (key == "p_relocate") {
    h.p_relocate = to_double(key, v);
  } else if (key == "n_iter") {
    h.n_iter = to_int(key, v);
  } else if (key == "burn_in") {
    h.burn_in = to_int(key, v);
  } else if (key == "thin") {
    h.thin = to_int(key, v);
  } else if (key == "seed") {
    const long long s = detail::to_integer(key, v);
    if (s < 0) throw ConfigError("seed must be non-negative");
    h.seed = static_cast<std::uint64_t>(s);
  } else if (key == "knot_prior") {
    if (v == "proposal") {
      h.knot_prior = KnotPrior::kProposal;
    } else if (v == "uniform") {
      h.knot_prior = KnotPrior::kUniform;
    } else {
      throw ConfigError("knot_prior must be proposal or uniform");
    }
  } else if (key == "birth_coefficient") {
    if (v == "prior") {
      h.birth_coefficient = BirthCoefficient::kPrior;
    } else if (v == "conditional") {
      h.birth_coefficient = BirthCoefficient::kConditional;
    } else {
      throw ConfigError("birth_coefficient must be prior or conditional");
    }
  } else if (key == "a_tau") {
    h.a_tau = to_double(key, v);
  } else if (key == "b_tau") {
    h.b_tau = to_double(key, v);
  } else if (key == "folds") {
    cfg.folds = to_int(key, v);
  } else if (key == "repeats") {
    cfg.repeats = to_int(key, v);
  } else if (key == "functions") {
    cfg.functions.clear();
    for (const auto& name : detail::split(v, ',')) {
      cfg.functions.push_back(bench::parse_test_function(name));
    }
  } else if (key == "rsnr") {
    cfg.rsnr.clear();
    for (const auto& x : detail::split(v, ',')) cfg.rsnr.push_back(to_double(key, x));
  } else if (key == "replicates") {
    cfg.replicates = to_int(key, v);
  } else if (key == "presets") {
    cfg.presets = to_bool(key, v);
  } else if (key == "grid_degrees") {
    cfg.grid.degree_sets = parse_degree_sets(key, v);
  } else if (key == "grid_k_max") {
    cfg.grid.k_max.clear();
    for (const auto& x : detail::split(v, ',')) cfg.grid.k_max.push_back(to_int(key, x));
  } else if (key == "grid_expansion") {
    cfg.grid.expansion.clear();
    for (const auto& x : detail::split(v, ',')) cfg.grid.expansion.push_back(to_double(key, x));
  } else if (key == "grid_export") {
    cfg.grid_export = to_int(key, v);
  } else if (key == "threads") {
    cfg.threads = to_int(key, v);
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

/// Applies "key = value" lines. Blank lines and lines starting with '#' are
/// skipped; later lines override earlier ones.
inline void apply_config(RunConfig& cfg, std::istream& in) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    apply_setting(cfg, key, value);
  }
}

inline void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  apply_config(cfg, in);
}

/// "key=value" override as given on the command line.
inline void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  apply_setting(cfg, detail::trim(std::string_view(assignment).substr(0, eq)),
                detail::trim(std::string_view(assignment).substr(eq + 1)));
}

inline void validate(const RunConfig& cfg) {
  cfg.hyper.validate();
  if (cfg.folds < 2) throw ConfigError("folds must be >= 2");
  if (cfg.repeats < 1) throw ConfigError("repeats must be >= 1");
  if (cfg.replicates < 1) throw ConfigError("replicates must be >= 1");
  if (cfg.threads < 0) throw ConfigError("threads must be >= 0");
  if (cfg.grid_export < 0 || cfg.grid_export == 1) throw ConfigError("grid_export must be 0 or >= 2");
  for (double r : cfg.rsnr) {
    if (!(r > 0.0)) throw ConfigError("rsnr values must be positive");
  }
}

/// Canonical rendering of the hyperparameters as config lines.
inline std::string render_hyper(const Hyperparams& h) {
  std::ostringstream out;
  out.precision(17);
  out << "degrees = ";
  for (std::size_t i = 0; i < h.degrees.size(); ++i) out << (i ? "," : "") << h.degrees[i];
  out << "\nk_max = " << h.k_max << "\nexpansion = " << h.expansion << "\na_gamma = " << h.a_gamma
      << "\nb_gamma = " << h.b_gamma << "\nr = " << h.r << "\nR = " << h.R << "\nphi = ";
  if (h.phi) {
    out << *h.phi;
  } else {
    out << (h.phi_rule == PhiRule::kVariance ? "var" : "half-range");
  }
  out << "\np_birth = " << h.p_birth << "\np_death = " << h.p_death << "\np_relocate = " << h.p_relocate
      << "\nn_iter = " << h.n_iter << "\nburn_in = " << h.burn_in << "\nthin = " << h.thin << "\nseed = " << h.seed
      << "\nknot_prior = " << (h.knot_prior == KnotPrior::kProposal ? "proposal" : "uniform")
      << "\nbirth_coefficient = " << (h.birth_coefficient == BirthCoefficient::kPrior ? "prior" : "conditional")
      << "\na_tau = " << h.a_tau << "\nb_tau = " << h.b_tau << "\n";
  return out.str();
}

}  // namespace mlabs
