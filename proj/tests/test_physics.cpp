#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "qdbh/liouvillian.hpp"
#include "qdbh/observables.hpp"

using namespace qdbh;

namespace {

// Dense oracles, built from number-state digits rather than Kronecker products.

std::vector<int> digits(Eigen::Index idx, int n_sites, int d) {
  std::vector<int> out(n_sites);
  for (int s = n_sites - 1; s >= 0; --s) {
    out[s] = static_cast<int>(idx % d);
    idx /= d;
  }
  return out;
}

Eigen::Index index_of(const std::vector<int>& dg, int d) {
  Eigen::Index i = 0;
  for (int v : dg) i = i * d + v;
  return i;
}

DenseMat oracle_hamiltonian(const ModelParams& p, int n_sites, const std::vector<std::pair<int, int>>& pairs,
                            int dim_lat, int nmax) {
  const int d = nmax + 1;
  Eigen::Index dim = 1;
  for (int s = 0; s < n_sites; ++s) dim *= d;
  DenseMat h = DenseMat::Zero(dim, dim);
  const double c = -p.j_hop / (2.0 * dim_lat);
  for (Eigen::Index col = 0; col < dim; ++col) {
    const auto n = digits(col, n_sites, d);
    for (int s = 0; s < n_sites; ++s) {
      h(col, col) += -p.delta * n[s] + p.u / 2.0 * n[s] * (n[s] - 1);
      if (n[s] + 2 <= nmax) {
        auto m = n;
        m[s] += 2;
        h(index_of(m, d), col) += p.g / 2.0 * std::sqrt(double((n[s] + 1) * (n[s] + 2)));
      }
      if (n[s] >= 2) {
        auto m = n;
        m[s] -= 2;
        h(index_of(m, d), col) += std::conj(p.g) / 2.0 * std::sqrt(double(n[s] * (n[s] - 1)));
      }
    }
    // every listed pair contributes a_i^dag a_j + a_j^dag a_i
    for (auto [i, j] : pairs)
      for (auto [x, y] : {std::pair{i, j}, std::pair{j, i}})
        if (n[y] >= 1 && n[x] < nmax) {
          auto m = n;
          m[y] -= 1;
          m[x] += 1;
          h(index_of(m, d), col) += c * std::sqrt(double(n[y]) * double(n[x] + 1));
        }
  }
  return h;
}

DenseMat dense_lindblad(const DenseMat& h, const std::vector<DenseMat>& jumps, const DenseMat& x) {
  DenseMat out = -kI * (h * x - x * h);
  for (const auto& g : jumps) {
    const DenseMat gd = g.adjoint();
    out += g * x * gd - 0.5 * (gd * g * x + x * gd * g);
  }
  return out;
}

Liouvillian model(const ModelParams& p, const LatticeGeometry& geom, const FockSpace& fock) {
  auto l = vectorize_lindbladian(build_hamiltonian(p, geom, fock), build_jump_operators(p, geom, fock));
  l.parity = parity_op(fock, geom.n_sites()).dense().diagonal().real();
  return l;
}

double oracle_parity(const DensityMatrix& rho, int n_sites, int d) {
  double p = 0.0;
  for (Eigen::Index i = 0; i < rho.dim(); ++i) {
    int tot = 0;
    for (int v : digits(i, n_sites, d)) tot += v;
    p += (tot % 2 ? -1.0 : 1.0) * rho.matrix()(i, i).real();
  }
  return p;
}

DenseMat random_state(Eigen::Index d, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  DenseMat m(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = cplx(nd(rng), nd(rng));
  DenseMat r = m * m.adjoint();
  return r / r.trace().real();
}

}  // namespace

TEST(Fock, LadderAndNumber) {
  const FockSpace f(5);
  EXPECT_EQ(f.dim(), 6);
  EXPECT_THROW(FockSpace(0), DimensionError);
  const DenseMat a = annihilation_op(f).dense();
  const DenseMat n = number_op(f).dense();
  EXPECT_LT((DenseMat(a.adjoint() * a) - n).cwiseAbs().maxCoeff(), 1e-14);
  for (int k = 1; k <= 5; ++k) EXPECT_NEAR(a(k - 1, k).real(), std::sqrt(double(k)), 1e-15);
  // [a, a^dag] = 1 except at the truncation edge
  const DenseMat comm = a * a.adjoint() - a.adjoint() * a;
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(comm(k, k).real(), 1.0, 1e-14);
  EXPECT_NEAR(comm(5, 5).real(), -5.0, 1e-14);
}

TEST(Fock, HermitianTagIsChecked) {
  const FockSpace f(3);
  EXPECT_TRUE(number_op(f).is_numerically_hermitian());
  EXPECT_FALSE(annihilation_op(f).is_numerically_hermitian());
  EXPECT_THROW(SparseOperator::hermitian_checked(annihilation_op(f).matrix()), Error);
}

TEST(Fock, ParityDiagonalMatchesDigits) {
  const FockSpace f(2);
  const DenseMat p = parity_op(f, 3).dense();
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    int tot = 0;
    for (int v : digits(i, 3, 3)) tot += v;
    EXPECT_EQ(p(i, i).real(), tot % 2 ? -1.0 : 1.0);
  }
}

TEST(Fock, DimensionCap) {
  const FockSpace f(9, 1000);
  EXPECT_NO_THROW(f.tensor_dim(3));
  EXPECT_THROW(f.tensor_dim(4), DimensionError);
}

TEST(Lattice, ChainCoordination) {
  for (int n : {2, 3, 4, 7}) {
    const auto g = LatticeGeometry::chain(n);
    for (int s = 0; s < n; ++s) EXPECT_DOUBLE_EQ(g.coordination(s), 2.0) << n;
    // no duplicate unordered pairs
    for (std::size_t i = 0; i < g.bonds().size(); ++i)
      for (std::size_t j = i + 1; j < g.bonds().size(); ++j)
        EXPECT_FALSE(g.bonds()[i].i == g.bonds()[j].i && g.bonds()[i].j == g.bonds()[j].j);
  }
  EXPECT_EQ(LatticeGeometry::chain(2).bonds().size(), 1u);
  EXPECT_DOUBLE_EQ(LatticeGeometry::chain(2).bonds()[0].weight, 2.0);
}

TEST(Lattice, RectangleCoordination) {
  for (auto [lx, ly] : {std::pair{2, 2}, {2, 3}, {3, 3}, {4, 2}}) {
    const auto g = LatticeGeometry::rectangle(lx, ly);
    for (int s = 0; s < g.n_sites(); ++s) EXPECT_DOUBLE_EQ(g.coordination(s), 4.0);
  }
  EXPECT_DOUBLE_EQ(LatticeGeometry::rectangle(2, 2).linear_size(), 2.0);
  EXPECT_DOUBLE_EQ(LatticeGeometry::chain(5).linear_size(), 5.0);
}

TEST(Lattice, Parse) {
  EXPECT_EQ(LatticeGeometry::parse("4", 1).n_sites(), 4);
  EXPECT_EQ(LatticeGeometry::parse("2x3", 2).n_sites(), 6);
  EXPECT_THROW(LatticeGeometry::parse("2x3", 1), ConfigError);
  EXPECT_THROW(LatticeGeometry::parse("4", 2), ConfigError);
  EXPECT_THROW(LatticeGeometry::parse("abc", 1), ConfigError);
}

TEST(Lattice, ConventionAndValidation) {
  const auto p = ModelParams::convention(40, 20, 1.5);
  EXPECT_DOUBLE_EQ(p.delta, -20.0);
  EXPECT_DOUBLE_EQ(p.eta, 1.0);
  ModelParams bad;
  bad.gamma = 0.0;
  bad.u = -1.0;
  EXPECT_EQ(bad.violations().size(), 2u);
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Lattice, HamiltonianMatchesOracle) {
  const FockSpace f(3);
  ModelParams p = ModelParams::convention(7.0, 3.0, 0.0);
  p.g = cplx(1.3, 0.4);
  const auto g3 = LatticeGeometry::chain(3);
  const DenseMat h = build_hamiltonian(p, g3, f).dense();
  EXPECT_LT((h - oracle_hamiltonian(p, 3, {{0, 1}, {1, 2}, {2, 0}}, 1, 3)).cwiseAbs().maxCoeff(), 1e-12);
  // N = 2 periodic chain counts the bond twice
  const DenseMat h2 = build_hamiltonian(p, LatticeGeometry::chain(2), f).dense();
  EXPECT_LT((h2 - oracle_hamiltonian(p, 2, {{0, 1}, {1, 0}}, 1, 3)).cwiseAbs().maxCoeff(), 1e-12);
  // 2x2: each axis doubled, J/(2d) with d = 2
  const FockSpace f1(1);
  const DenseMat h4 = build_hamiltonian(p, LatticeGeometry::rectangle(2, 2), f1).dense();
  const std::vector<std::pair<int, int>> pairs{{0, 2}, {2, 0}, {1, 3}, {3, 1}, {0, 1}, {1, 0}, {2, 3}, {3, 2}};
  EXPECT_LT((h4 - oracle_hamiltonian(p, 4, pairs, 2, 1)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Lattice, HamiltonianSymmetries) {
  const FockSpace f(4);
  const auto p = ModelParams::convention(10, 4, 2.0);
  const DenseMat h = build_hamiltonian(p, LatticeGeometry::chain(3), f).dense();
  const DenseMat par = parity_op(f, 3).dense();
  EXPECT_LE((par * h * par - h).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LE(h.imag().cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((h - h.transpose()).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Lattice, JumpOperators) {
  const FockSpace f(3);
  ModelParams p;
  p.gamma = 1.0;
  p.eta = 4.0;
  auto jumps = build_jump_operators(p, 1, f);
  ASSERT_EQ(jumps.size(), 2u);
  EXPECT_NEAR(jumps[0].coeff(0, 1).real(), 1.0, 1e-15);
  EXPECT_NEAR(jumps[1].coeff(0, 2).real(), 2.0 * std::sqrt(2.0), 1e-14);
  p.eta = 0.0;
  EXPECT_EQ(build_jump_operators(p, 1, f).size(), 1u);
  EXPECT_EQ(build_jump_operators(ModelParams::convention(1, 1, 1), LatticeGeometry::chain(4), FockSpace(1)).size(), 8u);
}

TEST(Liouvillian, MatchesDenseLindbladForm) {
  const FockSpace f(2);
  const auto geom = LatticeGeometry::chain(2);
  auto p = ModelParams::convention(5, 2, 0.0);
  p.g = cplx(1.0, 0.3);
  const auto liou = model(p, geom, f);
  std::vector<DenseMat> jd;
  for (const auto& g : liou.jumps) jd.push_back(g.dense());
  const DenseMat x = random_state(liou.hilbert_dim, 3) + kI * random_state(liou.hilbert_dim, 4);
  const DenseMat want = dense_lindblad(liou.h.dense(), jd, x);
  const DenseMat got = unvectorize(liou.apply(vectorize(x)), liou.hilbert_dim);
  EXPECT_LT((want - got).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Liouvillian, TracePreservationAndSpectrum) {
  const FockSpace f(3);
  const auto liou = model(ModelParams::convention(4, 2, 1.0), LatticeGeometry::chain(1), f);
  const Eigen::Index d = liou.hilbert_dim;
  const DenseVec w = vectorize(DenseMat::Identity(d, d));
  const DenseMat l = liou.super.dense();
  EXPECT_LE((w.adjoint() * l).cwiseAbs().maxCoeff(), 1e-10 * liou.scale());
  Eigen::ComplexEigenSolver<DenseMat> es(l);
  EXPECT_LE(es.eigenvalues().real().maxCoeff(), 1e-10);
}

TEST(Solvers, VacuumWithoutDrive) {
  const FockSpace f(4);
  const auto liou = model(ModelParams::convention(10, 5, 0.0), LatticeGeometry::chain(2), f);
  const auto vac = DensityMatrix::basis_state(liou.hilbert_dim, 0);
  EXPECT_LT(trace_distance(steady_state_direct(liou).rho, vac), 1e-8);
  EXPECT_LT(trace_distance(steady_state_krylov(liou).rho, vac), 1e-8);
  EXPECT_LT(trace_distance(steady_state_eigen(liou).rho, vac), 1e-6);
}

TEST(Solvers, CrossAgreementAndInvariants) {
  struct Pt {
    int n, nmax;
    double u, j, g;
  };
  for (const auto& pt : {Pt{1, 8, 40, 20, 3.0}, Pt{2, 3, 20, 10, 1.2}, Pt{3, 2, 100, 50, 2.0}}) {
    const FockSpace f(pt.nmax);
    const auto geom = LatticeGeometry::chain(pt.n);
    const auto liou = model(ModelParams::convention(pt.u, pt.j, pt.g), geom, f);
    const auto a = steady_state_direct(liou);
    const auto b = steady_state_krylov(liou);
    const auto c = steady_state_eigen(liou);
    for (const auto* r : {&a, &b, &c}) {
      EXPECT_NO_THROW(r->rho.check());
      EXPECT_LE(r->residual, 1e-8 * liou.scale());
      EXPECT_LE(parity_commutator(r->rho, *liou.parity), 1e-8);
    }
    EXPECT_LE(trace_distance(a.rho, b.rho), 1e-5);
    EXPECT_LE(trace_distance(a.rho, c.rho), 1e-5);
  }
}

TEST(Solvers, TimeEvolutionConvergesAndPreservesTrace) {
  const FockSpace f(5);
  const auto liou = model(ModelParams::convention(4, 2, 1.5), LatticeGeometry::chain(1), f);
  const double dt = 1.5 / (1.1 * spectral_radius_estimate(liou));
  DensityMatrix rho = DensityMatrix::basis_state(liou.hilbert_dim, 0);
  for (int k = 0; k < 8; ++k) {
    rho = time_evolve(rho, liou, 5.0, dt);
    EXPECT_NEAR(rho.trace().real(), 1.0, 1e-8);
    EXPECT_LE(rho.hermiticity_error(), 1e-8);
  }
  EXPECT_LT(trace_distance(rho, steady_state_direct(liou).rho), 1e-5);
  EXPECT_THROW(time_evolve(rho, liou, 1.0, 100.0), SolverError);
}

TEST(Solvers, NoJumpsIsDegenerate) {
  const FockSpace f(2);
  const auto h = build_hamiltonian(ModelParams::convention(1, 1, 1), LatticeGeometry::chain(1), f);
  const auto liou = vectorize_lindbladian(h, {});
  EXPECT_THROW(steady_state_direct(liou), DegenerateSteadyState);
  EXPECT_THROW(steady_state_eigen(liou), DegenerateSteadyState);
}

TEST(Density, Invariants) {
  DenseMat m = random_state(4, 9);
  EXPECT_NO_THROW(DensityMatrix(m).check());
  DenseMat bad = m;
  bad(0, 1) += 0.1;
  EXPECT_THROW(DensityMatrix(bad).check(), InvalidState);
  EXPECT_THROW(DensityMatrix(2.0 * m).check(), InvalidState);
  EXPECT_THROW(DensityMatrix::from_raw(DenseMat::Zero(3, 3)), InvalidState);
  EXPECT_THROW(trace_distance(DensityMatrix(m), DensityMatrix(m, 99)), BasisMismatch);
}

TEST(Observables, EntropyOracle) {
  const RealVec p = (RealVec(4) << 0.5, 0.25, 0.125, 0.125).finished();
  DenseMat m = DenseMat::Zero(4, 4);
  for (int i = 0; i < 4; ++i) m(i, i) = p(i);
  // rotate into a generic basis; entropy is unitarily invariant
  Eigen::HouseholderQR<DenseMat> qr(random_state(4, 2) + kI * random_state(4, 5));
  const DenseMat q = qr.householderQ();
  const DensityMatrix rho(q * m * q.adjoint());
  double want = 0.0;
  for (int i = 0; i < 4; ++i) want -= p(i) * std::log(p(i));
  EXPECT_NEAR(von_neumann_entropy(rho), want, 1e-12);
  EXPECT_NEAR(von_neumann_entropy(DensityMatrix::basis_state(5, 2)), 0.0, 1e-14);
  EXPECT_NEAR(von_neumann_entropy(DensityMatrix(DenseMat::Identity(6, 6) / 6.0)), std::log(6.0), 1e-12);
}

TEST(Observables, ParityAndDensitiesOnSteadyState) {
  const FockSpace f(3);
  const auto geom = LatticeGeometry::chain(2);
  const auto liou = model(ModelParams::convention(20, 10, 2.0), geom, f);
  const auto ss = steady_state_direct(liou);
  const auto pi = parity_op(f, 2);
  EXPECT_NEAR(parity_expectation(ss.rho, pi), oracle_parity(ss.rho, 2, 4), 1e-12);
  EXPECT_NEAR(parity_expectation_eigen(ss.rho, pi), oracle_parity(ss.rho, 2, 4), 1e-10);
  const auto dens = site_density(ss.rho, geom, f);
  double n0 = 0.0;
  for (Eigen::Index i = 0; i < ss.rho.dim(); ++i) n0 += digits(i, 2, 4)[0] * ss.rho.matrix()(i, i).real();
  EXPECT_NEAR(dens[0], n0, 1e-12);
  EXPECT_NEAR(dens[0], dens[1], 1e-7);  // translation invariance
  const cplx c01 = correlation(ss.rho, 0, 1, geom, f);
  EXPECT_NEAR(c01.imag(), 0.0, 1e-8);
  const auto rec = evaluate(ss.rho, *liou.parity, {embed_site_op(number_op(f), 0, 2), embed_site_op(number_op(f), 1, 2)});
  EXPECT_TRUE(rec.violations().empty());
  EXPECT_LE(rec.entropy, std::log(double(ss.rho.dim())));
}

TEST(Observables, ZeroDriveLimit) {
  for (int n : {1, 2, 3}) {
    const FockSpace f(3);
    const auto liou = model(ModelParams::convention(40, 20, 0.0), LatticeGeometry::chain(n), f);
    const auto ss = steady_state_krylov(liou);
    EXPECT_NEAR(parity_expectation(ss.rho, parity_op(f, n)), 1.0, 1e-6);
    EXPECT_LE(von_neumann_entropy(ss.rho), 1e-6);
  }
}

TEST(Observables, BasisMismatchThrows) {
  const DensityMatrix rho(random_state(4, 1), 42);
  EXPECT_THROW(parity_expectation(rho, parity_op(FockSpace(1), 2)), BasisMismatch);
}
