#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdbh/lattice.hpp"

namespace qdbh {

using json = nlohmann::json;

struct SolverConfig {
  /// auto | direct | krylov | eigen | evolve | corner
  std::string method = "auto";
  double tol = 1e-8;
  /// Largest Hilbert dimension solved exactly under "auto"; above it the
  /// corner method takes over.
  std::int64_t exact_max_dim = 400;
  std::vector<std::int64_t> m_list{100, 200, 300};
  double corner_tol = 1e-3;
  int leaf_sites = 2;
  double max_discarded_weight = 1.0;
  double evolve_time = 200.0;
  double evolve_dt = 0.0;  ///< <= 0: derived from the spectral radius
};

struct RunConfig {
  std::string name = "run";
  ModelParams model;
  int dimensionality = 1;
  std::vector<std::string> sizes;
  int n_max = 4;
  SolverConfig solver;
  std::vector<double> g_list;
  std::string output_dir;
  int workers = 1;
  std::uint64_t seed = 12345;

  std::vector<std::string> violations() const {
    std::vector<std::string> v;
    for (const auto& s : model.normalized().violations()) v.push_back("model: " + s);
    if (dimensionality != 1 && dimensionality != 2) v.push_back("lattice.dimensionality must be 1 or 2");
    if (sizes.empty()) v.push_back("lattice.sizes is empty");
    for (const auto& s : sizes) {
      try {
        auto g = LatticeGeometry::parse(s, dimensionality);
        (void)g;
      } catch (const std::exception& e) {
        v.push_back(std::string("lattice.sizes: ") + e.what());
      }
    }
    if (n_max < 1) v.push_back("fock.n_max must be >= 1");
    static const std::vector<std::string> methods{"auto", "direct", "krylov", "eigen", "evolve", "corner"};
    if (std::find(methods.begin(), methods.end(), solver.method) == methods.end())
      v.push_back("solver.method '" + solver.method + "' unknown");
    if (!(solver.tol > 0.0)) v.push_back("solver.tol must be > 0");
    if (solver.m_list.empty()) v.push_back("solver.m_list is empty");
    for (std::size_t i = 0; i < solver.m_list.size(); ++i) {
      if (solver.m_list[i] < 1) v.push_back("solver.m_list entries must be >= 1");
      if (i > 0 && solver.m_list[i] <= solver.m_list[i - 1]) v.push_back("solver.m_list must be ascending");
    }
    if (g_list.empty()) v.push_back("sweep.g is empty");
    for (double g : g_list)
      if (!(g >= 0.0)) v.push_back("sweep.g values must be >= 0");
    if (workers < 1) v.push_back("workers must be >= 1");
    return v;
  }

  void validate() const {
    const auto v = violations();
    if (v.empty()) return;
    std::string msg = "invalid configuration (" + std::to_string(v.size()) + " problems):";
    for (const auto& s : v) msg += "\n  - " + s;
    throw ConfigError(msg);
  }

  ModelParams params_at(double g) const {
    ModelParams p = model;
    p.g = g;
    return p.normalized();
  }
};

inline json to_json(const RunConfig& c) {
  json j;
  j["name"] = c.name;
  j["model"] = {{"delta", c.model.delta},   {"u", c.model.u},       {"j", c.model.j_hop},
                {"gamma", c.model.gamma},   {"eta", c.model.eta},   {"resonant_convention", c.model.resonant_convention}};
  j["lattice"] = {{"dimensionality", c.dimensionality}, {"sizes", c.sizes}};
  j["fock"] = {{"n_max", c.n_max}};
  j["solver"] = {{"method", c.solver.method},
                 {"tol", c.solver.tol},
                 {"exact_max_dim", c.solver.exact_max_dim},
                 {"m_list", c.solver.m_list},
                 {"corner_tol", c.solver.corner_tol},
                 {"leaf_sites", c.solver.leaf_sites},
                 {"max_discarded_weight", c.solver.max_discarded_weight},
                 {"evolve_time", c.solver.evolve_time},
                 {"evolve_dt", c.solver.evolve_dt}};
  j["sweep"] = {{"g", c.g_list}};
  j["output_dir"] = c.output_dir;
  j["workers"] = c.workers;
  j["seed"] = c.seed;
  return j;
}

/// Parses a config document; every problem found is reported in one error.
inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  std::vector<std::string> errs;
  auto get = [&](const json& obj, const char* key, auto& dst) {
    if (!obj.contains(key)) return;
    try {
      obj.at(key).get_to(dst);
    } catch (const std::exception& e) {
      errs.push_back(std::string(key) + ": " + e.what());
    }
  };
  get(j, "name", c.name);
  if (j.contains("model")) {
    const auto& m = j["model"];
    get(m, "delta", c.model.delta);
    get(m, "u", c.model.u);
    get(m, "j", c.model.j_hop);
    get(m, "gamma", c.model.gamma);
    get(m, "eta", c.model.eta);
    get(m, "resonant_convention", c.model.resonant_convention);
  } else {
    errs.push_back("missing 'model' section");
  }
  if (j.contains("lattice")) {
    get(j["lattice"], "dimensionality", c.dimensionality);
    get(j["lattice"], "sizes", c.sizes);
  } else {
    errs.push_back("missing 'lattice' section");
  }
  if (j.contains("fock")) get(j["fock"], "n_max", c.n_max);
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    get(s, "method", c.solver.method);
    get(s, "tol", c.solver.tol);
    get(s, "exact_max_dim", c.solver.exact_max_dim);
    get(s, "m_list", c.solver.m_list);
    get(s, "corner_tol", c.solver.corner_tol);
    get(s, "leaf_sites", c.solver.leaf_sites);
    get(s, "max_discarded_weight", c.solver.max_discarded_weight);
    get(s, "evolve_time", c.solver.evolve_time);
    get(s, "evolve_dt", c.solver.evolve_dt);
  }
  if (j.contains("sweep")) get(j["sweep"], "g", c.g_list);
  get(j, "output_dir", c.output_dir);
  get(j, "workers", c.workers);
  get(j, "seed", c.seed);
  if (!errs.empty()) {
    std::string msg = "invalid configuration (" + std::to_string(errs.size()) + " problems):";
    for (const auto& s : errs) msg += "\n  - " + s;
    throw ConfigError(msg);
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

/// FNV-1a 64-bit.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Hash of everything that changes the physics of a point. Sizes and the G
/// list are not included: points are keyed by (hash, size, G) so extending a
/// sweep reuses finished points.
inline std::string config_hash(const RunConfig& c) {
  json j = to_json(c);
  json key = {{"model", j["model"]},
              {"dimensionality", c.dimensionality},
              {"fock", j["fock"]},
              {"solver", j["solver"]},
              {"seed", c.seed}};
  std::ostringstream os;
  os << std::hex << fnv1a(key.dump());
  return os.str();
}

/// Config output_dir, else $QDBH_OUTPUT_DIR, else ./qdbh_out.
inline std::string resolve_output_dir(const RunConfig& c) {
  if (!c.output_dir.empty()) return c.output_dir;
  if (const char* env = std::getenv("QDBH_OUTPUT_DIR"); env && *env) return env;
  return "qdbh_out";
}

}  // namespace qdbh
