#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "qdbh/corner.hpp"

using namespace qdbh;

namespace {

DensityMatrix diag_state(std::vector<double> p) {
  DenseMat m = DenseMat::Zero(p.size(), p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m(i, i) = p[i];
  return DensityMatrix(m);
}

DensityMatrix random_state(Eigen::Index d, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  DenseMat m(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = cplx(nd(rng), nd(rng));
  DenseMat r = m * m.adjoint();
  return DensityMatrix(r / r.trace().real());
}

DensityMatrix exact_state(const LatticeGeometry& geom, const ModelParams& p, const FockSpace& f) {
  auto liou = vectorize_lindbladian(build_hamiltonian(p, geom, f), build_jump_operators(p, geom, f));
  return steady_state_krylov(liou, 1e-10).rho;
}

}  // namespace

TEST(MergeSpaces, KeepsLargestProducts) {
  const auto a = random_state(5, 1), b = random_state(4, 2);
  for (Eigen::Index m : {1, 3, 7, 12, 20}) {
    const auto cb = merge_spaces(a, b, m);
    EXPECT_GE(cb.dim(), std::min<Eigen::Index>(m, 20));
    for (std::size_t k = 1; k < cb.pairs.size(); ++k) EXPECT_GE(cb.pairs[k - 1].weight, cb.pairs[k].weight);
    // full enumeration oracle: the kept set is the top of all products
    std::vector<double> all;
    const RealVec pa = a.eigenvalues(), pb = b.eigenvalues();
    for (Eigen::Index i = 0; i < 5; ++i)
      for (Eigen::Index j = 0; j < 4; ++j) all.push_back(std::max(pa(i), 0.0) * std::max(pb(j), 0.0));
    std::sort(all.rbegin(), all.rend());
    double kept = 0.0;
    for (std::size_t k = 0; k < cb.pairs.size(); ++k) {
      EXPECT_NEAR(cb.pairs[k].weight, all[k], 1e-12);
      kept += all[k];
    }
    EXPECT_NEAR(cb.kept_weight, kept, 1e-12);
    EXPECT_NEAR(cb.kept_weight + cb.discarded_weight, 1.0, 1e-10);
  }
}

TEST(MergeSpaces, CoverageIsMonotone) {
  const auto a = random_state(6, 3), b = random_state(6, 4);
  double prev = 0.0;
  for (Eigen::Index m = 1; m <= 36; ++m) {
    const double w = merge_spaces(a, b, m).kept_weight;
    EXPECT_GE(w, prev - 1e-15);
    prev = w;
  }
  EXPECT_TRUE(merge_spaces(a, b, 36).exact());
}

TEST(MergeSpaces, TieStraddlingTheCutIsKeptWhole) {
  const auto a = diag_state({0.9, 0.1}), b = diag_state({0.9, 0.1});
  // products 0.81, 0.09, 0.09, 0.01: M = 2 must keep both 0.09 states
  const auto cb = merge_spaces(a, b, 2);
  EXPECT_EQ(cb.dim(), 3);
  EXPECT_NEAR(cb.pairs[1].weight, 0.09, 1e-15);
  EXPECT_NEAR(cb.pairs[2].weight, 0.09, 1e-15);
}

TEST(MergeSpaces, PureStatesGiveRankOne) {
  const auto cb = merge_spaces(diag_state({1, 0, 0}), diag_state({0, 1, 0}), 1);
  EXPECT_EQ(cb.dim(), 1);
  EXPECT_NEAR(cb.kept_weight, 1.0, 1e-15);
  // numerically zero weights never expand a tie
  EXPECT_EQ(merge_spaces(diag_state({1, 0, 0}), diag_state({1, 0, 0}), 2).dim(), 2);
}

TEST(MergeSpaces, BasisIsOrthonormal) {
  const auto a = random_state(4, 5), b = random_state(3, 6);
  const auto cb = merge_spaces(a, b, 7);
  DenseMat vecs(12, cb.dim());
  for (Eigen::Index k = 0; k < cb.dim(); ++k) {
    DenseMat col = Eigen::kroneckerProduct(cb.frame_a.col(cb.pairs[k].a), cb.frame_b.col(cb.pairs[k].b));
    vecs.col(k) = col;
  }
  EXPECT_LT((vecs.adjoint() * vecs - DenseMat::Identity(cb.dim(), cb.dim())).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(merge_spaces(a, b, 0), Error);
}

TEST(MergeSpaces, ParityResolvedFrames) {
  const FockSpace f(3);
  const RealVec par = parity_op(f, 1).dense().diagonal().real();
  const auto rho = random_state(4, 8);
  const auto fr = spectral_frame(rho, &par);
  for (Eigen::Index k = 0; k < 4; ++k)
    for (Eigen::Index i = 0; i < 4; ++i)
      if (par(i) != fr.parity(k)) EXPECT_EQ(std::abs(fr.vectors(i, k)), 0.0);
}

TEST(Schedule, ValidForManyShapes) {
  for (int n : {1, 2, 3, 4, 5, 6, 8}) {
    const auto s = MergeSchedule::build(LatticeGeometry::chain(n), 50);
    EXPECT_TRUE(s.valid()) << n;
    for (const auto& l : s.leaves) EXPECT_LE(l.n_sites(), 2);
  }
  for (auto [lx, ly] : {std::pair{2, 2}, {3, 2}, {2, 3}, {3, 3}, {4, 4}, {1, 2}}) {
    const auto s = MergeSchedule::build(LatticeGeometry::rectangle(lx, ly), 50);
    EXPECT_TRUE(s.valid());
    EXPECT_EQ(s.target, (Shape{lx, ly}));
    if (!s.steps.empty()) EXPECT_EQ(s.steps.back().result, (Shape{lx, ly}));
  }
  auto broken = MergeSchedule::build(LatticeGeometry::chain(4), 10);
  broken.steps.erase(broken.steps.begin());
  EXPECT_FALSE(broken.valid());
  EXPECT_THROW(corner_steady_state(LatticeGeometry::chain(4), ModelParams::convention(1, 1, 1), FockSpace(1), broken),
               ConfigError);
}

TEST(Corner, FullDimensionReproducesExact1D) {
  const FockSpace f(2);
  const auto geom = LatticeGeometry::chain(4);
  for (double g : {0.8, 3.0}) {
    const auto p = ModelParams::convention(100, 50, g);
    CornerOptions opt;
    opt.tol = 1e-10;
    const auto r = corner_steady_state(geom, p, f, MergeSchedule::build(geom, 81), opt);
    EXPECT_TRUE(r.exact);
    const auto exact = exact_state(geom, p, f);
    const auto mine = corner_to_fock(r, geom, f);
    EXPECT_LE(trace_distance(mine, exact), 1e-7);
    const auto obs = corner_observables(r);
    EXPECT_NEAR(obs.parity, parity_expectation(exact, parity_op(f, 4)), 1e-7);
    EXPECT_NEAR(obs.entropy, von_neumann_entropy(exact), 1e-7);
    EXPECT_LE(parity_commutator(r.block.rho, r.block.parity), 1e-8);
  }
}

TEST(Corner, FullDimensionReproducesExact2D) {
  const FockSpace f(2);
  const auto geom = LatticeGeometry::rectangle(2, 2);
  const auto p = ModelParams::convention(40, 20, 1.5);
  CornerOptions opt;
  opt.tol = 1e-10;
  const auto r = corner_steady_state(geom, p, f, MergeSchedule::build(geom, 81), opt);
  const auto exact = exact_state(geom, p, f);
  EXPECT_LE(trace_distance(corner_to_fock(r, geom, f), exact), 1e-7);
}

TEST(Corner, TruncatedSweepConverges) {
  const FockSpace f(2);
  const auto geom = LatticeGeometry::chain(4);
  const auto p = ModelParams::convention(100, 50, 2.0);
  const auto rep = convergence_sweep(geom, p, f, {12, 20, 30, 45, 60}, 1e-3);
  ASSERT_TRUE(rep.converged);
  ASSERT_TRUE(rep.result);
  const auto exact = exact_state(geom, p, f);
  const auto obs = corner_observables(*rep.result);
  EXPECT_NEAR(obs.parity, parity_expectation(exact, parity_op(f, 4)), 2e-3);
  EXPECT_NEAR(obs.entropy, von_neumann_entropy(exact), 2e-3);
  EXPECT_TRUE(obs.violations().empty());
}

TEST(Corner, TooSmallIsReported) {
  const FockSpace f(2);
  const auto geom = LatticeGeometry::chain(4);
  CornerOptions opt;
  opt.max_discarded_weight = 1e-12;
  EXPECT_THROW(corner_steady_state(geom, ModelParams::convention(100, 50, 3.0), f, MergeSchedule::build(geom, 2), opt),
               CornerTooSmall);
  EXPECT_THROW(convergence_sweep(geom, ModelParams::convention(1, 1, 1), f, {5, 3}, 1e-3), ConfigError);
}
