#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qdbh/config.hpp"
#include "qdbh/corner.hpp"
#include "qdbh/observables.hpp"

namespace qdbh {

/// One solved (size, G) point.
struct PointRecord {
  std::string hash;
  std::string size;
  int dimensionality = 1;
  int n_sites = 0;
  double length = 0.0;
  double g = 0.0;
  double parity = 0.0;
  double entropy = 0.0;
  double n_per_site = 0.0;
  std::vector<double> densities;
  std::string method;
  std::int64_t m = 0;  ///< corner dimension, 0 for exact solves
  int n_max = 0;
  double residual = 0.0;
  bool converged = false;
  std::string flag;  ///< "", "UNCONVERGED", "NEAR_DEGENERATE" or "FAILED"
  double commutator = 0.0;
  double basis_dim = 0.0;
  double seconds = 0.0;
  std::string error;
  json diagnostics = json::object();

  bool ok() const { return error.empty(); }
};

inline std::string format_g(double g) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", g);
  return buf;
}

inline json to_json(const PointRecord& r) {
  return {{"hash", r.hash},
          {"size", r.size},
          {"dimensionality", r.dimensionality},
          {"n_sites", r.n_sites},
          {"length", r.length},
          {"G_over_gamma", r.g},
          {"parity", r.parity},
          {"entropy", r.entropy},
          {"n_per_site", r.n_per_site},
          {"densities", r.densities},
          {"method", r.method},
          {"M", r.m},
          {"n_max", r.n_max},
          {"residual", r.residual},
          {"converged", r.converged},
          {"flag", r.flag},
          {"commutator", r.commutator},
          {"basis_dim", r.basis_dim},
          {"seconds", r.seconds},
          {"error", r.error},
          {"diagnostics", r.diagnostics}};
}

inline PointRecord record_from_json(const json& j) {
  PointRecord r;
  j.at("hash").get_to(r.hash);
  j.at("size").get_to(r.size);
  j.at("dimensionality").get_to(r.dimensionality);
  j.at("n_sites").get_to(r.n_sites);
  j.at("length").get_to(r.length);
  j.at("G_over_gamma").get_to(r.g);
  j.at("parity").get_to(r.parity);
  j.at("entropy").get_to(r.entropy);
  j.at("n_per_site").get_to(r.n_per_site);
  j.at("densities").get_to(r.densities);
  j.at("method").get_to(r.method);
  j.at("M").get_to(r.m);
  j.at("n_max").get_to(r.n_max);
  j.at("residual").get_to(r.residual);
  j.at("converged").get_to(r.converged);
  j.at("flag").get_to(r.flag);
  j.at("commutator").get_to(r.commutator);
  j.at("basis_dim").get_to(r.basis_dim);
  j.at("seconds").get_to(r.seconds);
  j.at("error").get_to(r.error);
  r.diagnostics = j.value("diagnostics", json::object());
  return r;
}

inline const char* kCsvHeader = "size,G_over_gamma,parity,entropy,n_per_site,method,M,residual,converged";

inline std::string csv_row(const PointRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%s,%lld,%.17g,%d", r.size.c_str(), r.g, r.parity,
                r.entropy, r.n_per_site, r.method.c_str(), static_cast<long long>(r.m), r.residual,
                r.converged ? 1 : 0);
  return buf;
}

/// Parses one CSV row back into the fields the CSV carries.
inline PointRecord parse_csv_row(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) f.push_back(cell);
  if (f.size() != 9) throw Error("csv row has " + std::to_string(f.size()) + " fields, expected 9");
  PointRecord r;
  r.size = f[0];
  r.g = std::stod(f[1]);
  r.parity = std::stod(f[2]);
  r.entropy = std::stod(f[3]);
  r.n_per_site = std::stod(f[4]);
  r.method = f[5];
  r.m = std::stoll(f[6]);
  r.residual = std::stod(f[7]);
  r.converged = f[8] == "1";
  return r;
}

/// Append-only JSONL record file plus a derived CSV view.
class SweepStore {
 public:
  explicit SweepStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
    std::ifstream in(jsonl_path());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        records_.push_back(record_from_json(json::parse(line)));
      } catch (const std::exception&) {
        // a torn last line from an interrupted run is dropped
      }
    }
  }

  std::filesystem::path jsonl_path() const { return dir_ / "records.jsonl"; }
  std::filesystem::path csv_path() const { return dir_ / "points.csv"; }
  const std::filesystem::path& dir() const { return dir_; }

  bool has(const std::string& hash, const std::string& size, double g) const {
    std::lock_guard lock(mu_);
    for (const auto& r : records_)
      if (r.ok() && r.hash == hash && r.size == size && format_g(r.g) == format_g(g)) return true;
    return false;
  }

  void append(const PointRecord& r) {
    std::lock_guard lock(mu_);
    std::ofstream out(jsonl_path(), std::ios::app);
    out << to_json(r).dump() << "\n";
    out.flush();
    records_.push_back(r);
  }

  /// Latest successful record per (hash, size, G); failures only when no
  /// success exists for that key.
  std::vector<PointRecord> records(const std::string& hash = "") const {
    std::lock_guard lock(mu_);
    std::map<std::string, PointRecord> latest;
    for (const auto& r : records_) {
      if (!hash.empty() && r.hash != hash) continue;
      const std::string key = r.hash + "|" + r.size + "|" + format_g(r.g);
      auto it = latest.find(key);
      if (it == latest.end() || r.ok() || !it->second.ok()) latest[key] = r;
    }
    std::vector<PointRecord> out;
    for (auto& [k, v] : latest) out.push_back(v);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return a.n_sites != b.n_sites ? a.n_sites < b.n_sites : (a.size != b.size ? a.size < b.size : a.g < b.g);
    });
    return out;
  }

  void write_csv(const std::string& hash = "") const {
    std::ofstream out(csv_path());
    out << kCsvHeader << "\n";
    for (const auto& r : records(hash))
      if (r.ok()) out << csv_row(r) << "\n";
  }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::vector<PointRecord> records_;
};

namespace detail {

inline void fill_from_observables(PointRecord& r, const ObservableRecord& o) {
  r.parity = o.parity;
  r.entropy = o.entropy;
  r.n_per_site = o.n_per_site;
  r.densities = o.densities;
  r.basis_dim = double(o.basis_dim);
}

inline json corner_diagnostics(const ConvergenceReport& rep) {
  json entries = json::array();
  for (const auto& e : rep.entries)
    entries.push_back({{"M", e.m},
                       {"parity", e.parity},
                       {"entropy", e.entropy},
                       {"parity_drift", e.parity_drift},
                       {"entropy_drift", e.entropy_drift},
                       {"exact", e.exact},
                       {"error", e.error}});
  json steps = json::array();
  if (rep.result)
    for (const auto& s : rep.result->steps)
      steps.push_back({{"shape", s.shape},
                       {"product_dim", s.product_dim},
                       {"requested_dim", s.requested_dim},
                       {"corner_dim", s.corner_dim},
                       {"kept_weight", s.kept_weight},
                       {"discarded_weight", s.discarded_weight},
                       {"residual", s.residual},
                       {"iterations", s.iterations},
                       {"seconds", s.seconds}});
  return {{"convergence", entries}, {"steps", steps}, {"converged_M", rep.converged_m}};
}

}  // namespace detail

/// Solves one (size, G) point with the configured method. Failures are
/// returned in the record, not thrown.
inline PointRecord solve_point(const RunConfig& cfg, const std::string& size, double g) {
  const auto t0 = detail::Clock::now();
  PointRecord r;
  r.hash = config_hash(cfg);
  r.size = size;
  r.dimensionality = cfg.dimensionality;
  r.g = g;
  r.n_max = cfg.n_max;
  try {
    const auto geom = LatticeGeometry::parse(size, cfg.dimensionality);
    r.n_sites = geom.n_sites();
    r.length = geom.linear_size();
    const FockSpace fock(cfg.n_max);
    const ModelParams p = cfg.params_at(g);
    std::string method = cfg.solver.method;
    if (method == "auto") {
      std::int64_t dim = 1;
      for (int s = 0; s < geom.n_sites() && dim <= cfg.solver.exact_max_dim; ++s) dim *= fock.dim();
      method = dim <= cfg.solver.exact_max_dim ? "krylov" : "corner";
    }
    if (method == "corner") {
      CornerOptions copt;
      copt.max_discarded_weight = cfg.solver.max_discarded_weight;
      copt.tol = cfg.solver.tol;
      copt.embedding_cap = 0;
      std::vector<Eigen::Index> ms(cfg.solver.m_list.begin(), cfg.solver.m_list.end());
      auto rep = convergence_sweep(geom, p, fock, ms, cfg.solver.corner_tol, copt, cfg.solver.leaf_sites);
      r.diagnostics = detail::corner_diagnostics(rep);
      if (!rep.result) throw SolverError("corner method failed for every M");
      const auto obs = corner_observables(*rep.result);
      detail::fill_from_observables(r, obs);
      r.method = "corner";
      r.m = rep.result->block.dim();
      r.residual = rep.result->steady.residual;
      r.converged = rep.converged;
      if (!rep.converged) r.flag = "UNCONVERGED";
      r.commutator = parity_commutator(rep.result->block.rho, rep.result->block.parity);
    } else {
      auto liou = vectorize_lindbladian(build_hamiltonian(p, geom, fock), build_jump_operators(p, geom, fock));
      const auto pop = parity_op(fock, geom.n_sites());
      liou.parity = pop.dense().diagonal().real();
      SteadyStateResult ss;
      if (method == "direct") {
        ss = steady_state_direct(liou, cfg.solver.tol);
      } else if (method == "krylov") {
        ss = steady_state_krylov(liou, cfg.solver.tol);
      } else if (method == "eigen") {
        EigenOptions eo;
        eo.seed = cfg.seed;
        ss = steady_state_eigen(liou, cfg.solver.tol, 50, eo);
      } else {
        double dt = cfg.solver.evolve_dt;
        if (dt <= 0.0) dt = 2.0 / (1.1 * spectral_radius_estimate(liou));
        ss.rho = time_evolve(DensityMatrix::basis_state(liou.hilbert_dim, 0), liou, cfg.solver.evolve_time, dt);
        ss.residual = liou.residual(ss.rho);
        ss.method = "evolve";
      }
      std::vector<SparseOperator> ns;
      for (int s = 0; s < geom.n_sites(); ++s) ns.push_back(embed_site_op(number_op(fock), s, geom.n_sites()));
      detail::fill_from_observables(r, evaluate(ss.rho, *liou.parity, ns));
      r.method = ss.method;
      r.residual = ss.residual;
      r.converged = true;
      if (ss.near_degenerate) r.flag = "NEAR_DEGENERATE";
      r.commutator = parity_commutator(ss.rho, *liou.parity);
      r.diagnostics = {{"iterations", ss.iterations}};
      if (ss.gap_estimate) r.diagnostics["gap_estimate"] = *ss.gap_estimate;
    }
  } catch (const std::exception& e) {
    r.error = e.what();
    r.flag = "FAILED";
    r.converged = false;
  }
  r.seconds = detail::seconds_since(t0);
  return r;
}

struct SweepSummary {
  int computed = 0;
  int skipped = 0;
  int failed = 0;
  int unconverged = 0;
  std::string hash;
  std::filesystem::path dir;
};

/// Solves every (size, G) point not already in the store using a pool of
/// `cfg.workers` threads.
inline SweepSummary run_sweep(const RunConfig& cfg, SweepStore& store,
                              const std::function<void(const PointRecord&)>& on_point = {}) {
  cfg.validate();
  SweepSummary sum;
  sum.hash = config_hash(cfg);
  sum.dir = store.dir();
  std::vector<std::pair<std::string, double>> todo;
  for (const auto& size : cfg.sizes)
    for (double g : cfg.g_list) {
      if (store.has(sum.hash, size, g))
        ++sum.skipped;
      else
        todo.emplace_back(size, g);
    }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  auto worker = [&]() {
    for (;;) {
      const std::size_t k = next++;
      if (k >= todo.size()) return;
      PointRecord r = solve_point(cfg, todo[k].first, todo[k].second);
      store.append(r);
      std::lock_guard lock(mu);
      ++sum.computed;
      if (!r.ok()) ++sum.failed;
      if (r.flag == "UNCONVERGED") ++sum.unconverged;
      if (on_point) on_point(r);
    }
  };
  const int n = std::max(1, std::min<int>(cfg.workers, static_cast<int>(todo.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  store.write_csv(sum.hash);
  if (sum.computed > 0 && sum.failed == sum.computed)
    throw SolverError("sweep: all " + std::to_string(sum.failed) + " points failed");
  return sum;
}

}  // namespace qdbh
