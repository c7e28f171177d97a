#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "qdbh/corner.hpp"
#include "qdbh/spin_mapping.hpp"

namespace qdbh {

struct ValidateOptions {
  /// Added to B_x before the identity checks (mutation testing).
  double bx_perturbation = 0.0;
  /// When > 0 the corner group runs with this single corner dimension.
  Eigen::Index forced_corner_m = 0;
};

struct GroupResult {
  std::string name;
  bool passed = false;
  double worst = 0.0;
  double bound = 0.0;
  std::string detail;
};

namespace detail {

inline Liouvillian model_liouvillian(const ModelParams& p, const LatticeGeometry& geom, const FockSpace& fock) {
  auto l = vectorize_lindbladian(build_hamiltonian(p, geom, fock), build_jump_operators(p, geom, fock));
  l.parity = parity_op(fock, geom.n_sites()).dense().diagonal().real();
  return l;
}

inline GroupResult group_solver_agreement() {
  GroupResult g{"solver_agreement", true, 0.0, 1e-5, ""};
  struct Point {
    int n;
    int nmax;
    double u, j, gd;
  };
  const std::vector<Point> pts{{1, 6, 40, 20, 2.0}, {2, 3, 100, 50, 1.5}, {2, 4, 20, 10, 4.0}};
  for (const auto& pt : pts) {
    const auto geom = LatticeGeometry::chain(pt.n);
    const FockSpace fock(pt.nmax);
    const auto liou = model_liouvillian(ModelParams::convention(pt.u, pt.j, pt.gd), geom, fock);
    const auto a = steady_state_direct(liou);
    const auto b = steady_state_krylov(liou);
    const auto c = steady_state_eigen(liou);
    g.worst = std::max({g.worst, trace_distance(a.rho, b.rho), trace_distance(a.rho, c.rho)});
  }
  g.passed = g.worst <= g.bound;
  g.detail = "direct/krylov/eigen max trace distance over " + std::to_string(pts.size()) + " points";
  return g;
}

inline GroupResult group_corner_exactness(Eigen::Index forced_m) {
  GroupResult g{"corner_exactness", true, 0.0, 1e-7, ""};
  const auto geom = LatticeGeometry::chain(4);
  const FockSpace fock(2);
  const auto p = ModelParams::convention(100, 50, 3.0);
  const auto exact = steady_state_krylov(model_liouvillian(p, geom, fock), 1e-10);
  const Eigen::Index m = forced_m > 0 ? forced_m : 81;
  CornerOptions opt;
  opt.tol = 1e-10;
  auto rep = convergence_sweep(geom, p, fock, {m}, 1e-3, opt);
  if (!rep.result || !rep.converged) {
    g.passed = false;
    g.worst = 1.0;
    g.detail = "UNCONVERGED at M = " + std::to_string(m);
    if (!rep.entries.empty() && !rep.entries.back().error.empty()) g.detail += " (" + rep.entries.back().error + ")";
    return g;
  }
  g.worst = trace_distance(corner_to_fock(*rep.result, geom, fock), exact.rho);
  g.passed = g.worst <= g.bound;
  g.detail = "1D N=4 n_max=2, full corner vs exact, trace distance";
  return g;
}

inline GroupResult group_sm_identities(double bx_perturbation) {
  GroupResult g{"sm_identities", true, 0.0, 1e-11, ""};
  ModelParams p;
  for (int k = 0; k < 50; ++k) {
    const double a2 = 1e-3 * std::pow(3e4, k / 49.0);
    auto c = spin_coefficients(std::sqrt(a2), p, 1);
    c.b_x += bx_perturbation;
    // relative deviations: B^2 grows like 1/|alpha|^2 at small |alpha|
    const double scale = std::max(1.0, std::abs(c.a_plus));
    g.worst = std::max({g.worst, std::abs(c.b_x * c.b_y - c.a_minus) / scale,
                        std::abs(c.b_x * c.b_x - (c.a_plus + 2.0)) / scale,
                        std::abs(c.b_y * c.b_y - (c.a_plus - 2.0)) / scale});
  }
  g.passed = g.worst <= g.bound;
  g.detail = "BxBy = A-, Bx^2 = A+ + 2, By^2 = A+ - 2 over 50 |alpha|^2 in [1e-3, 30]";
  return g;
}

inline GroupResult group_mapping() {
  GroupResult g{"mapping_deviation", true, 0.0, 1e-8, ""};
  const auto p = ModelParams::convention(100, 50, 2.0);
  for (double a2 : {0.5, 1.0, 2.0}) {
    const FockSpace fock(cat_cutoff(a2) + 8);
    g.worst = std::max(g.worst, validate_mapping(std::sqrt(a2), p, LatticeGeometry::chain(2), fock));
  }
  g.passed = g.worst <= g.bound;
  g.detail = "projected H vs H_XY + identity, N=2 chain";
  return g;
}

}  // namespace detail

/// Cross-module oracle checks. Never throws for a failing check; exceptions
/// inside a group mark that group failed.
inline std::vector<GroupResult> validate_suite(const ValidateOptions& opt = {}) {
  std::vector<GroupResult> out;
  auto run = [&](const std::string& name, auto&& fn) {
    try {
      out.push_back(fn());
    } catch (const std::exception& e) {
      out.push_back({name, false, 0.0, 0.0, std::string("exception: ") + e.what()});
    }
  };
  run("solver_agreement", [] { return detail::group_solver_agreement(); });
  run("corner_exactness", [&] { return detail::group_corner_exactness(opt.forced_corner_m); });
  run("sm_identities", [&] { return detail::group_sm_identities(opt.bx_perturbation); });
  run("mapping_deviation", [] { return detail::group_mapping(); });
  return out;
}

}  // namespace qdbh
