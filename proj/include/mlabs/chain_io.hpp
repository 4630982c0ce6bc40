#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlabs/chain.hpp"
#include "mlabs/errors.hpp"
#include "mlabs/model.hpp"

namespace mlabs {

inline constexpr const char* kChainSchema = "mlabs-chain";
inline constexpr int kChainVersion = 1;

/// A chain together with the predictor names it was fitted on.
struct ChainFile {
  Chain chain;
  std::vector<std::string> names;
};

namespace detail {

using nlohmann::json;

inline json state_to_json(const ModelState& s) {
  json atoms = json::array();
  for (const auto& atom : s.atoms) {
    json factors = json::array();
    for (const auto& f : atom.structure.factors()) {
      factors.push_back({{"v", f.variable}, {"k", f.knots.degree()}, {"knots", f.knots.knots()}});
    }
    atoms.push_back({{"beta", atom.coefficient}, {"factors", std::move(factors)}});
  }
  json j = {{"intercept", s.intercept}, {"sigma2", s.sigma2}, {"M", s.levy_mass}, {"atoms", std::move(atoms)}};
  j["tau"] = s.tau ? json(*s.tau) : json(nullptr);
  return j;
}

inline ModelState state_from_json(const json& j) {
  ModelState s;
  s.intercept = j.at("intercept").get<double>();
  s.sigma2 = j.at("sigma2").get<double>();
  s.levy_mass = j.at("M").get<double>();
  if (j.contains("tau") && !j.at("tau").is_null()) s.tau = j.at("tau").get<double>();
  for (const auto& a : j.at("atoms")) {
    std::vector<AtomFactor> factors;
    for (const auto& f : a.at("factors")) {
      factors.push_back({f.at("v").get<int>(), KnotSequence(f.at("k").get<int>(), f.at("knots").get<std::vector<double>>())});
    }
    s.atoms.push_back({AtomStructure(std::move(factors)), a.at("beta").get<double>()});
  }
  return s;
}

}  // namespace detail

/// Writes a header line, then one retained state per line. Doubles are
/// written with round-trip precision.
inline void save_chain(std::ostream& out, const Chain& chain, const std::vector<std::string>& names) {
  if (chain.p != 0 && static_cast<int>(names.size()) != chain.p) {
    throw InputError("chain has " + std::to_string(chain.p) + " predictors but " + std::to_string(names.size()) +
                     " names were given");
  }
  const nlohmann::json header = {{"schema", kChainSchema},
                                 {"version", kChainVersion},
                                 {"link", chain.link == Link::kProbit ? "probit" : "identity"},
                                 {"p", chain.p},
                                 {"names", names},
                                 {"samples", chain.samples.size()}};
  out << header.dump() << '\n';
  for (const auto& s : chain.samples) out << detail::state_to_json(s).dump() << '\n';
  if (!out) throw InputError("failed writing chain");
}

inline void save_chain_file(const std::string& path, const Chain& chain, const std::vector<std::string>& names) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open " + path + " for writing");
  save_chain(out, chain, names);
}

inline ChainFile load_chain(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("chain file is empty");
  ChainFile file;
  int line_no = 1;
  try {
    const auto header = nlohmann::json::parse(line);
    if (header.at("schema").get<std::string>() != kChainSchema) throw InputError("not a chain file");
    const int version = header.at("version").get<int>();
    if (version != kChainVersion) throw InputError("unsupported chain file version " + std::to_string(version));
    const auto link = header.at("link").get<std::string>();
    if (link == "probit") {
      file.chain.link = Link::kProbit;
    } else if (link == "identity") {
      file.chain.link = Link::kIdentity;
    } else {
      throw InputError("unknown link '" + link + "'");
    }
    file.chain.p = header.at("p").get<int>();
    file.names = header.at("names").get<std::vector<std::string>>();
    if (static_cast<int>(file.names.size()) != file.chain.p) throw InputError("chain header names do not match p");
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      ModelState state = detail::state_from_json(nlohmann::json::parse(line));
      for (const auto& atom : state.atoms) {
        if (atom.structure.max_variable() >= file.chain.p) throw InputError("atom references a missing predictor");
      }
      file.chain.samples.push_back(std::move(state));
    }
  } catch (const InputError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed chain file at line " + std::to_string(line_no) + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    // KnotSequence / AtomStructure validation
    throw InputError("invalid state at line " + std::to_string(line_no) + ": " + e.what());
  }
  return file;
}

inline ChainFile load_chain_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open chain file " + path);
  return load_chain(in);
}

}  // namespace mlabs
