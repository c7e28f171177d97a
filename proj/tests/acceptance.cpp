// Acceptance run: one PASS/FAIL line per criterion, details indented below.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "qdbh/analyze.hpp"
#include "qdbh/validate.hpp"

#ifndef QDBH_PRESET_DIR
#define QDBH_PRESET_DIR "presets"
#endif

using namespace qdbh;

namespace {

constexpr double kLog2 = 0.693147180559945;

struct Outcome {
  bool pass = false;
  std::string summary;
};

// every steady state met during the run, checked by criterion 8
struct SeenState {
  std::string where;
  double parity, entropy, commutator, log_dim;
};
std::vector<SeenState> g_seen;

template <class... A>
void note(const char* fmt, A... args) {
  std::printf("    ");
  std::printf(fmt, args...);
  std::printf("\n");
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void remember(const PointRecord& r) {
  if (!r.ok() || !r.converged) return;
  g_seen.push_back({r.size + " G=" + format_g(r.g), r.parity, r.entropy, r.commutator, std::log(r.basis_dim)});
}

void remember(const std::string& where, const DensityMatrix& rho, const RealVec& parity) {
  double p = 0.0;
  for (Eigen::Index i = 0; i < rho.dim(); ++i) p += parity(i) * rho.matrix()(i, i).real();
  g_seen.push_back({where, p, von_neumann_entropy(rho), parity_commutator(rho, parity), std::log(double(rho.dim()))});
}

Liouvillian model(const ModelParams& p, const LatticeGeometry& geom, const FockSpace& f) {
  auto l = vectorize_lindbladian(build_hamiltonian(p, geom, f), build_jump_operators(p, geom, f));
  l.parity = parity_op(f, geom.n_sites()).dense().diagonal().real();
  return l;
}

// 1. G = 0 and largest-G limits of every preset
Outcome limits() {
  bool ok = true;
  int checked = 0;
  for (const char* name : {"fig2", "fig3", "fig4"}) {
    const auto cfg = load_config(std::string(QDBH_PRESET_DIR) + "/" + name + ".json");
    const double gmax = *std::max_element(cfg.g_list.begin(), cfg.g_list.end());
    for (const auto& size : cfg.sizes) {
      for (double g : {0.0, gmax}) {
        const auto r = solve_point(cfg, size, g);
        remember(r);
        ++checked;
        bool pass;
        if (!r.ok()) {
          pass = false;
          note("%s %s G=%g: error %s", name, size.c_str(), g, r.error.c_str());
        } else {
          if (g == 0.0)
            pass = std::abs(r.parity - 1.0) <= 1e-6 && r.entropy <= 1e-6;
          else
            pass = r.n_sites < 2 || (std::abs(r.entropy - kLog2) <= 0.1 && std::abs(r.parity) <= 0.1);
          note("%s %s G=%g: Pi=%.6f S=%.6f %s M=%lld %s(%.0f s) %s", name, size.c_str(), g, r.parity, r.entropy,
               r.method.c_str(), static_cast<long long>(r.m), r.flag.empty() ? "" : (r.flag + " ").c_str(), r.seconds,
               pass ? "ok" : "VIOLATED");
        }
        ok = ok && pass;
      }
    }
  }
  return {ok, std::to_string(checked) + " limit points across fig2/fig3/fig4"};
}

// 2. direct / eigen / long-time evolution agree on small Hilbert spaces
Outcome solver_agreement() {
  struct Pt {
    int n, nmax;
    double u, j, g;
  };
  const std::vector<Pt> pts{{1, 6, 4, 2, 0.5},  {1, 8, 4, 2, 2.0},  {1, 10, 10, 5, 3.0}, {1, 12, 2, 1, 1.5},
                            {2, 3, 4, 2, 1.0},  {2, 4, 4, 2, 2.0},  {2, 5, 2, 1, 1.0},   {2, 6, 4, 2, 0.5},
                            {3, 2, 4, 2, 1.5},  {3, 3, 2, 1, 1.0},  {4, 2, 4, 2, 1.0},   {2, 9, 2, 1, 0.8}};
  double worst = 0.0;
  for (const auto& pt : pts) {
    const FockSpace f(pt.nmax);
    const auto geom = LatticeGeometry::chain(pt.n);
    const auto liou = model(ModelParams::convention(pt.u, pt.j, pt.g), geom, f);
    const auto a = steady_state_direct(liou);
    const auto b = steady_state_eigen(liou);
    // evolve until successive snapshots stop moving
    const double dt = 2.0 / (1.1 * spectral_radius_estimate(liou));
    DensityMatrix rho = DensityMatrix::basis_state(liou.hilbert_dim, 0);
    double t = 0.0;
    for (; t < 2000.0; t += 20.0) {
      DensityMatrix next = time_evolve(rho, liou, 20.0, dt);
      const double moved = trace_distance(next, rho);
      rho = std::move(next);
      if (moved < 1e-9) break;
    }
    const double d = std::max({trace_distance(a.rho, b.rho), trace_distance(a.rho, rho), trace_distance(b.rho, rho)});
    worst = std::max(worst, d);
    remember("agreement N=" + std::to_string(pt.n), a.rho, *liou.parity);
    note("N=%d n_max=%d D=%lld U=%g G=%g: max pairwise trace distance %.2e (evolved to t=%g)", pt.n, pt.nmax,
         static_cast<long long>(liou.hilbert_dim), pt.u, pt.g, d, t + 20.0);
  }
  return {worst <= 1e-5, std::to_string(pts.size()) + " points, worst " + fmt("%.2e", worst) + " (bound 1e-5)"};
}

// 3. corner method: exact at full M, converging when truncated
Outcome corner_exactness() {
  bool ok = true;
  const FockSpace f(2);
  struct Case {
    LatticeGeometry geom;
    ModelParams p;
    std::vector<Eigen::Index> m_list;
  };
  const std::vector<Case> cases{
      {LatticeGeometry::chain(4), ModelParams::convention(100, 50, 1.8), {8, 12, 16, 24, 32, 45, 60}},
      {LatticeGeometry::rectangle(2, 2), ModelParams::convention(40, 20, 1.5), {10, 15, 20, 31, 45, 60}}};
  for (const auto& c : cases) {
    auto liou = model(c.p, c.geom, f);
    const auto exact = steady_state_krylov(liou, 1e-10).rho;
    remember("exact " + c.geom.label(), exact, *liou.parity);
    const double pe = parity_expectation(exact, parity_op(f, c.geom.n_sites())), se = von_neumann_entropy(exact);
    CornerOptions opt;
    opt.tol = 1e-10;
    const auto full = corner_steady_state(c.geom, c.p, f, MergeSchedule::build(c.geom, 81), opt);
    const auto fo = corner_observables(full);
    remember("corner " + c.geom.label(), full.block.rho, full.block.parity);
    const double dfull = std::max(std::abs(fo.parity - pe), std::abs(fo.entropy - se));
    const auto rep = convergence_sweep(c.geom, c.p, f, c.m_list, 1e-3);
    double dtr = 1.0;
    if (rep.result) {
      const auto to = corner_observables(*rep.result);
      dtr = std::max(std::abs(to.parity - pe), std::abs(to.entropy - se));
    }
    const bool pass = dfull <= 1e-7 && rep.converged && !rep.result->exact && dtr <= 2e-3;
    note("%s: full-M deviation %.2e; truncated converged=%d at M=%lld, deviation %.2e %s", c.geom.label().c_str(),
         dfull, int(rep.converged), static_cast<long long>(rep.converged_m), dtr, pass ? "ok" : "VIOLATED");
    ok = ok && pass;
  }
  return {ok, "1D N=4 and 2x2 at n_max=2 (bounds 1e-7 full, 2e-3 truncated)"};
}

// 4. spin-mapping identities and the numeric annihilation matrix
Outcome sm_identities() {
  auto g = detail::group_sm_identities(0.0);
  auto worst_at = [](int margin) {
    double w = 0.0;
    for (int k = 0; k < 50; ++k) {
      const double a2 = 1e-3 * std::pow(3e4, k / 49.0);
      const cplx alpha = std::sqrt(a2);
      const auto cb = cat_states(alpha, FockSpace(cat_cutoff(a2) + margin));
      const auto c = spin_coefficients(alpha, ModelParams{}, 1);
      Eigen::Matrix2cd want;
      want << 0.0, alpha / 2.0 * (c.b_x - c.b_y), alpha / 2.0 * (c.b_x + c.b_y), 0.0;
      w = std::max(w, (annihilation_on_cats(cb) - want).cwiseAbs().maxCoeff());
    }
    return w;
  };
  const double bare = worst_at(0), worst_a = worst_at(4);
  note("identities: worst relative deviation %.2e (bound 1e-11)", g.worst);
  note("annihilation matrix at the bare cutoff formula: worst deviation %.2e", bare);
  note("annihilation matrix at cutoff + 4: worst deviation %.2e (bound 1e-10)", worst_a);
  return {g.passed && worst_a <= 1e-10, "50 |alpha|^2 in [1e-3, 30]"};
}

// 5. projected Hamiltonian equals H_XY plus identity scalars
Outcome mapping() {
  const auto p = ModelParams::convention(100, 50, 2.0);
  double worst = 0.0;
  for (int n : {1, 2, 3})
    for (double a2 : {0.5, 1.0, 2.0}) {
      const FockSpace f(cat_cutoff(a2) + (n == 3 ? 4 : 8));
      const double d = validate_mapping(std::sqrt(a2), p, LatticeGeometry::chain(n), f);
      note("N=%d |alpha|^2=%g n_max=%d: deviation %.2e", n, a2, f.n_max, d);
      worst = std::max(worst, d);
    }
  return {worst <= 1e-8, "worst " + fmt("%.2e", worst) + " (bound 1e-8)"};
}

// 6. scaling engine on planted data
Outcome scaling_oracle() {
  const Exponents e = Exponents::ising3d();
  ScalingDataset ds;
  ds.exponents = e;
  ds.dimensionality = 2;
  for (double l : {2.0, 3.0, 4.0, 5.0})
    for (int k = 0; k <= 40; ++k) {
      const double g = 0.4 + 1.6 * k / 40.0;
      const double x = (g - 1.2) * std::pow(l, 1.0 / e.nu);
      ds.records.push_back({fmt("%g", l), l, int(l * l), g, (0.6 - 0.5 * std::tanh(0.8 * x)) * std::pow(l, -e.beta / e.nu),
                            0.0, true});
    }
  const auto cr = find_crossing(ds);
  const double good = collapse_quality(ds, 1.2);
  auto wrong = ds;
  wrong.exponents.beta *= 2.0;
  const double bad = collapse_quality(wrong, 1.2);
  note("crossing %.5f +- %.1e (truth 1.2, bound 0.01)", cr.gc, cr.uncertainty);
  note("collapse residual %.3e at truth, %.3e with beta doubled (ratio %.1f, need >= 10)", good, bad, bad / good);
  bool ok = std::abs(cr.gc - 1.2) <= 0.01 && bad >= 10.0 * good;
  for (double kappa : {0.29, 0.44, 0.80}) {
    ScalingDataset es;
    for (int n : {4, 9, 16, 25}) {
      const double smax = 0.3 * std::pow(double(n), kappa), g0 = 1.0 + 0.05 * n;
      for (int k = 0; k <= 30; ++k) {
        const double g = 0.5 + 0.1 * k;
        es.records.push_back({std::to_string(n), std::sqrt(n), n, g, 0.0, smax * (1.0 - 0.4 * (g - g0) * (g - g0)), true});
      }
    }
    const double got = fit_entropy_peak(es).kappa;
    note("kappa planted %.2f recovered %.5f", kappa, got);
    ok = ok && std::abs(got - kappa) <= 0.005;
  }
  return {ok, "crossing, collapse contrast and entropy-peak exponent"};
}

// 7. desk-scale trend, non-binding
Outcome trend() {
  auto cfg = load_config(std::string(QDBH_PRESET_DIR) + "/fig4.json");
  cfg.n_max = 2;
  cfg.sizes = {"2", "3", "4", "5"};
  // at these sizes the curves cross well above the published value, so sweep far enough to see where
  cfg.g_list = {0.5, 1.0, 1.4, 1.8, 2.25, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 10.0, 12.0, 15.0};
  std::vector<PointRecord> recs;
  for (const auto& s : cfg.sizes)
    for (double g : cfg.g_list) {
      recs.push_back(solve_point(cfg, s, g));
      remember(recs.back());
    }
  auto ds = dataset_from_records(recs);
  try {
    const auto cr = find_crossing(ds);
    for (const auto& c : cr.crossings) note("sizes %s/%s cross at G=%.4f", c.size_a.c_str(), c.size_b.c_str(), c.g);
    for (const auto& w : cr.warnings) note("%s", w.c_str());
    const bool in = cr.gc >= 1.2 && cr.gc <= 2.4;
    return {in, "fig4 N=2..5 n_max=2: G_c = " + fmt("%.4f", cr.gc) + " +- " + fmt("%.3f", cr.uncertainty) +
                    " (window [1.2, 2.4]; non-binding)"};
  } catch (const std::exception& e) {
    return {false, std::string("no crossing: ") + e.what() + " (non-binding)"};
  }
}

// 8. symmetry and bounds on every state met above. Solved states are only
// PSD to the solver tolerance, so the bounds get a slack well under it.
Outcome symmetry() {
  constexpr double slack = 1e-9;
  double worst = 0.0, over = 0.0;
  int bad = 0;
  for (const auto& s : g_seen) {
    worst = std::max(worst, s.commutator);
    const double o = std::max({std::abs(s.parity) - 1.0, -s.entropy, s.entropy - s.log_dim, 0.0});
    over = std::max(over, o);
    if (s.commutator > 1e-6 || o > slack) {
      ++bad;
      note("%s: Pi=%.15f S=%.3e commutator %.2e VIOLATED", s.where.c_str(), s.parity, s.entropy, s.commutator);
    }
  }
  return {bad == 0 && !g_seen.empty(), std::to_string(g_seen.size()) + " steady states, worst |[rho,Pi]| " +
                                           fmt("%.2e", worst) + " (bound 1e-6), worst bound overshoot " +
                                           fmt("%.1e", over) + " (slack 1e-9)"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  struct Criterion {
    int id;
    const char* name;
    bool binding;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all{{1, "limits", true, limits},
                                   {2, "solver cross-agreement", true, solver_agreement},
                                   {3, "corner exactness", true, corner_exactness},
                                   {4, "spin-mapping identities", true, sm_identities},
                                   {5, "mapping validation", true, mapping},
                                   {6, "scaling engine oracle", true, scaling_oracle},
                                   {7, "desk-scale trend", false, trend},
                                   {8, "symmetry property", true, symmetry}};
  bool ok = true;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %d (%s): %s [%.0f s]\n", o.pass ? "PASS" : (c.binding ? "FAIL" : "FAIL (non-binding)"),
                c.id, c.name, o.summary.c_str(), secs);
    std::fflush(stdout);
    if (c.binding) ok = ok && o.pass;
  }
  return ok ? 0 : 1;
}
