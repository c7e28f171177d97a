#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qdbh/analyze.hpp"
#include "qdbh/config.hpp"
#include "qdbh/spin_mapping.hpp"
#include "qdbh/sweep.hpp"
#include "qdbh/validate.hpp"

#ifndef QDBH_PRESET_DIR
#define QDBH_PRESET_DIR "presets"
#endif

namespace fs = std::filesystem;
using namespace qdbh;

namespace {

std::string preset_path(const std::string& name) {
  if (const char* env = std::getenv("QDBH_PRESET_DIR"); env && *env) return std::string(env) + "/" + name + ".json";
  return std::string(QDBH_PRESET_DIR) + "/" + name + ".json";
}

struct ConfigArgs {
  std::string config;
  std::string preset;
  std::vector<std::string> sizes;
  std::vector<double> g;
  int n_max = -1;
  std::string method;
  int workers = -1;
  std::vector<std::int64_t> m_list;
  std::string out;

  void attach(CLI::App* app) {
    auto* c = app->add_option("-c,--config", config, "RunConfig JSON file");
    app->add_option("-p,--preset", preset, "Named preset (fig2, fig3, fig4)")->excludes(c);
    app->add_option("--sizes", sizes, "Override lattice sizes, e.g. 4 or 2x2");
    app->add_option("--g", g, "Override the G/gamma list");
    app->add_option("--n-max", n_max, "Override the Fock cutoff");
    app->add_option("--method", method, "auto|direct|krylov|eigen|evolve|corner");
    app->add_option("--workers", workers, "Worker threads");
    app->add_option("--m-list", m_list, "Override the corner dimensions tried");
    app->add_option("-o,--out", out, "Output directory");
  }

  RunConfig load() const {
    if (config.empty() && preset.empty()) throw ConfigError("give --config FILE or --preset NAME");
    RunConfig c = load_config(config.empty() ? preset_path(preset) : config);
    if (!sizes.empty()) c.sizes = sizes;
    if (!g.empty()) c.g_list = g;
    if (n_max > 0) c.n_max = n_max;
    if (!method.empty()) c.solver.method = method;
    if (workers > 0) c.workers = workers;
    if (!m_list.empty()) c.solver.m_list = m_list;
    if (!out.empty()) c.output_dir = out;
    c.validate();
    return c;
  }
};

int cmd_solve(const ConfigArgs& a) {
  RunConfig c = a.load();
  if (c.sizes.size() != 1 || c.g_list.size() != 1)
    throw ConfigError("solve needs exactly one size and one G (use --sizes and --g)");
  const PointRecord r = solve_point(c, c.sizes[0], c.g_list[0]);
  std::cout << to_json(r).dump(2) << "\n";
  return r.ok() ? 0 : 1;
}

int cmd_sweep(const ConfigArgs& a) {
  RunConfig c = a.load();
  const fs::path dir = fs::path(resolve_output_dir(c)) / c.name;
  SweepStore store(dir);
  auto sum = run_sweep(c, store, [](const PointRecord& r) {
    std::cerr << r.size << " G=" << format_g(r.g) << " parity=" << r.parity << " S=" << r.entropy << " " << r.method
              << (r.m ? " M=" + std::to_string(r.m) : std::string()) << (r.flag.empty() ? "" : " " + r.flag)
              << (r.ok() ? "" : " error: " + r.error) << " (" << r.seconds << " s)\n";
  });
  std::cout << json{{"hash", sum.hash},         {"dir", sum.dir.string()},   {"computed", sum.computed},
                    {"skipped", sum.skipped},   {"failed", sum.failed},      {"unconverged", sum.unconverged}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_analyze(const std::string& store_dir, std::string out, const std::string& hash, const std::string& exps) {
  if (!fs::exists(fs::path(store_dir) / "records.jsonl"))
    throw Error("analyze: no records.jsonl in '" + store_dir + "' (missing input: run 'sweep' first)");
  SweepStore store(store_dir);
  if (out.empty()) out = (fs::path(store_dir) / "analysis").string();
  std::optional<Exponents> e;
  if (exps == "3d") e = Exponents::ising3d();
  if (exps == "2d") e = Exponents::ising2d();
  auto rep = analyze(store, out, hash, e);
  std::cout << json{{"collapse", rep.collapse}, {"entropy_fit", rep.entropy_fit}, {"files", rep.files},
                    {"problems", rep.problems}}
                   .dump(2)
            << "\n";
  return 0;
}

int cmd_validate(double bx, Eigen::Index corner_m) {
  ValidateOptions opt;
  opt.bx_perturbation = bx;
  opt.forced_corner_m = corner_m;
  bool ok = true;
  for (const auto& g : validate_suite(opt)) {
    std::cout << json{{"group", g.name}, {"pass", g.passed}, {"worst", g.worst}, {"bound", g.bound},
                      {"detail", g.detail}}
                     .dump()
              << "\n";
    ok = ok && g.passed;
  }
  return ok ? 0 : 1;
}

struct SpinArgs {
  double alpha2 = -1.0;
  double u = 100, j = 50, g = 2.0;
  int sites = 2;
  int dim = 1;
  int n_max = -1;
  bool estimate = false;
};

int cmd_map_spin(const SpinArgs& s) {
  const ModelParams p = ModelParams::convention(s.u, s.j, s.g);
  json out;
  cplx alpha;
  if (s.estimate || s.alpha2 <= 0.0) {
    const FockSpace fock(s.n_max > 0 ? s.n_max : 30);
    const auto est = estimate_alpha(p, fock);
    alpha = est.alpha;
    out["alpha_estimate"] = {{"re", alpha.real()}, {"im", alpha.imag()}, {"overlap", est.overlap}};
  } else {
    alpha = std::sqrt(s.alpha2);
  }
  const double a2 = std::norm(alpha);
  const auto c = spin_coefficients(alpha, p, s.dim);
  out["coefficients"] = {{"abs_alpha2", a2}, {"A_plus", c.a_plus}, {"A_minus", c.a_minus}, {"B_x", c.b_x},
                         {"B_y", c.b_y},     {"h_z", c.h_z},       {"c_xx", c.c_xx},       {"c_yy", c.c_yy}};
  const auto sc = projection_scalars(c, p);
  out["identity_per_site"] = {{"detuning", sc.detuning}, {"driving", sc.driving}, {"nonlinearity", sc.nonlinearity}};
  const FockSpace fock(s.n_max > 0 ? s.n_max : cat_cutoff(a2) + 8);
  const auto geom = s.dim == 1 ? LatticeGeometry::chain(s.sites) : LatticeGeometry::rectangle(1, s.sites);
  out["mapping"] = {{"sites", s.sites}, {"n_max", fock.n_max}, {"max_deviation", validate_mapping(alpha, p, geom, fock)}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Steady states and finite-size scaling of the quadratically driven dissipative Bose-Hubbard lattice"};
  app.require_subcommand(1);

  ConfigArgs solve_args, sweep_args;
  auto* solve = app.add_subcommand("solve", "Solve a single (size, G) point");
  solve_args.attach(solve);
  auto* sweep = app.add_subcommand("sweep", "Run or resume a G/gamma sweep");
  sweep_args.attach(sweep);

  std::string store_dir, analysis_out, hash, exps = "auto";
  auto* an = app.add_subcommand("analyze", "Crossing point, collapse and entropy-peak fit of a sweep store");
  an->add_option("store", store_dir, "Sweep store directory")->required();
  an->add_option("-o,--out", analysis_out, "Report directory (default STORE/analysis)");
  an->add_option("--hash", hash, "Restrict to one config hash");
  an->add_option("--exponents", exps, "auto|3d|2d")->check(CLI::IsMember({"auto", "3d", "2d"}));

  double bx = 0.0;
  Eigen::Index corner_m = 0;
  auto* val = app.add_subcommand("validate", "Cross-module oracle checks");
  val->add_option("--bx-perturbation", bx, "Mutation: shift B_x before the identity checks");
  val->add_option("--corner-m", corner_m, "Mutation: force a single corner dimension");

  SpinArgs spin;
  auto* ms = app.add_subcommand("map-spin", "Spin-model coefficients and mapping deviation");
  ms->add_option("--alpha2", spin.alpha2, "|alpha|^2 (omit to estimate from the single-site steady state)");
  ms->add_flag("--estimate", spin.estimate, "Estimate alpha from the single-site steady state");
  ms->add_option("--u", spin.u, "U/gamma");
  ms->add_option("--j", spin.j, "J/gamma");
  ms->add_option("--g", spin.g, "G/gamma");
  ms->add_option("--sites", spin.sites, "Number of sites for the mapping check");
  ms->add_option("--dim", spin.dim, "Lattice dimensionality")->check(CLI::IsMember({1, 2}));
  ms->add_option("--n-max", spin.n_max, "Fock cutoff");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*solve) return cmd_solve(solve_args);
    if (*sweep) return cmd_sweep(sweep_args);
    if (*an) return cmd_analyze(store_dir, analysis_out, hash, exps);
    if (*val) return cmd_validate(bx, corner_m);
    if (*ms) return cmd_map_spin(spin);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
