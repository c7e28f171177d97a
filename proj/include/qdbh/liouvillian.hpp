#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/SparseLU>

#include "qdbh/density.hpp"
#include "qdbh/fock.hpp"
#include "qdbh/krylov.hpp"

namespace qdbh {

/// Vectorized Lindbladian acting on column-stacked density matrices.
struct Liouvillian {
  SparseOperator super;
  Eigen::Index hilbert_dim = 0;
  SparseOperator h;
  std::vector<SparseOperator> jumps;
  BasisId basis = kFockBasis;
  /// Diagonal of the parity operator when the basis is parity-resolved.
  std::optional<RealVec> parity;

  /// Largest entry magnitude; the reference scale for residual tolerances.
  double scale() const {
    double s = 0.0;
    const CsrMat& m = super.matrix();
    for (Eigen::Index k = 0; k < m.outerSize(); ++k)
      for (CsrMat::InnerIterator it(m, k); it; ++it) s = std::max(s, std::abs(it.value()));
    return s;
  }

  DenseVec apply(const DenseVec& v) const { return super.matrix() * v; }

  double residual(const DensityMatrix& rho) const { return apply(vectorize(rho.matrix())).norm(); }

  /// H_eff = H - (i/2) sum_k G_k^dagger G_k as a dense matrix.
  DenseMat effective_hamiltonian() const {
    DenseMat k = DenseMat::Zero(hilbert_dim, hilbert_dim);
    for (const auto& g : jumps) k += DenseMat(CsrMat(g.matrix().adjoint() * g.matrix()));
    return h.dense() - 0.5 * kI * k;
  }
};

/// L = -i(I (x) H - H^T (x) I) + sum_k [G_k^* (x) G_k - (I (x) G_k^dag G_k + (G_k^dag G_k)^T (x) I)/2]
/// under column stacking, vec(A X B) = (B^T (x) A) vec(X).
inline Liouvillian vectorize_lindbladian(const SparseOperator& h, const std::vector<SparseOperator>& jumps) {
  const Eigen::Index d = h.dim();
  for (const auto& g : jumps) {
    if (g.dim() != d) throw DimensionError("vectorize_lindbladian: jump dimension differs from H");
    if (g.basis() != h.basis()) throw BasisMismatch("vectorize_lindbladian: jump basis differs from H");
  }
  const CsrMat id = sparse_identity(d);
  CsrMat k(d, d);
  for (const auto& g : jumps) k += CsrMat(g.matrix().adjoint() * g.matrix());
  const CsrMat heff = h.matrix() - 0.5 * kI * k;
  const CsrMat heff_conj = heff.conjugate();
  CsrMat super = CsrMat(Eigen::kroneckerProduct(id, CsrMat(-kI * heff)));
  super += CsrMat(Eigen::kroneckerProduct(CsrMat(kI * heff_conj), id));
  for (const auto& g : jumps) super += CsrMat(Eigen::kroneckerProduct(CsrMat(g.matrix().conjugate()), g.matrix()));
  Liouvillian l;
  l.super = SparseOperator(std::move(super), false, h.basis());
  l.hilbert_dim = d;
  l.h = h;
  l.jumps = jumps;
  l.basis = h.basis();
  return l;
}

struct SteadyStateResult {
  DensityMatrix rho;
  double residual = 0.0;
  std::string method;
  int iterations = 0;
  double wall_seconds = 0.0;
  /// Two smallest |eigenvalues| closer than the gap tolerance.
  bool near_degenerate = false;
  std::optional<double> gap_estimate;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline DenseMat parity_even_projection(const DenseMat& rho, const RealVec& parity) {
  DenseMat out = rho;
  for (Eigen::Index i = 0; i < rho.rows(); ++i)
    for (Eigen::Index j = 0; j < rho.cols(); ++j)
      if (parity(i) * parity(j) < 0.0) out(i, j) = 0.0;
  return out;
}

inline DenseMat random_hermitian(Eigen::Index d, std::uint64_t seed, bool traceless) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  DenseMat m(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) m(i, j) = cplx(nd(rng), nd(rng));
  if (traceless) {
    DenseMat h = m + m.adjoint();
    h.diagonal().array() -= h.trace() / double(d);
    return h;
  }
  DenseMat psd = m * m.adjoint();
  return psd / psd.trace().real();
}

}  // namespace detail

/// Solves L vec(rho) = 0 together with Tr(rho) = 1 through the bordered system
/// [[L, w], [w^dag, 0]] [x; s] = [0; 1] with w = vec(I), by sparse LU.
inline SteadyStateResult steady_state_direct(const Liouvillian& liou, double tol = 1e-8,
                                             std::int64_t max_rows = 40000) {
  const auto t0 = detail::Clock::now();
  const Eigen::Index d = liou.hilbert_dim;
  const Eigen::Index n = d * d;
  if (n > max_rows)
    throw DimensionError("steady_state_direct: " + std::to_string(n) + " rows exceed direct-solve cap " +
                         std::to_string(max_rows));
  if (liou.jumps.empty())
    throw DegenerateSteadyState("no jump operators: every eigenprojector of H is stationary");
  std::vector<Eigen::Triplet<cplx>> trip;
  const CsrMat& l = liou.super.matrix();
  trip.reserve(static_cast<std::size_t>(l.nonZeros() + 2 * d));
  for (Eigen::Index r = 0; r < l.outerSize(); ++r)
    for (CsrMat::InnerIterator it(l, r); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
  for (Eigen::Index i = 0; i < d; ++i) {
    trip.emplace_back(i * d + i, n, 1.0);
    trip.emplace_back(n, i * d + i, 1.0);
  }
  CscMat bordered(n + 1, n + 1);
  bordered.setFromTriplets(trip.begin(), trip.end());
  bordered.makeCompressed();
  Eigen::SparseLU<CscMat, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(bordered);
  if (lu.info() != Eigen::Success)
    throw DegenerateSteadyState("bordered Liouvillian is singular: steady state not unique (" + lu.lastErrorMessage() +
                                ")");
  DenseVec rhs = DenseVec::Zero(n + 1);
  rhs(n) = 1.0;
  DenseVec x = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !x.allFinite())
    throw DegenerateSteadyState("bordered solve failed: steady state not unique");
  SteadyStateResult res;
  res.rho = DensityMatrix::from_raw(unvectorize(x.head(n), d), liou.basis);
  res.residual = liou.residual(res.rho);
  res.method = "direct";
  res.iterations = 1;
  res.wall_seconds = detail::seconds_since(t0);
  if (res.residual > tol * liou.scale())
    throw SolverError("steady_state_direct: residual " + std::to_string(res.residual) +
                      " above tolerance; system ill-conditioned or steady state not unique");
  return res;
}

/// Steady state by preconditioned GMRES on the sparse superoperator.
inline SteadyStateResult steady_state_krylov(const Liouvillian& liou, double tol = 1e-8,
                                             const KrylovOptions& opt = {}, const DenseMat* guess = nullptr) {
  const auto t0 = detail::Clock::now();
  if (liou.jumps.empty())
    throw DegenerateSteadyState("no jump operators: every eigenprojector of H is stationary");
  auto apply = [&](const DenseVec& v) { return liou.apply(v); };
  auto out = solve_steady_krylov(apply, liou.effective_hamiltonian(), guess, opt);
  SteadyStateResult res;
  res.rho = DensityMatrix::from_raw(out.rho, liou.basis);
  res.residual = liou.residual(res.rho);
  res.method = "krylov";
  res.iterations = out.report.iterations;
  res.wall_seconds = detail::seconds_since(t0);
  if (res.residual > tol * liou.scale())
    throw NotConverged("steady_state_krylov: residual " + std::to_string(res.residual) + " above tolerance",
                       res.residual);
  return res;
}

struct EigenOptions {
  std::uint64_t seed = 12345;
  /// Inverse-iteration shift as a fraction of the Liouvillian scale.
  double shift_fraction = 1e-6;
  bool check_gap = true;
  int gap_iterations = 8;
  /// Gap below gap_fraction * scale flags near-degeneracy.
  double gap_fraction = 1e-8;
  KrylovOptions inner{};
};

/// Eigenvector of L with the eigenvalue of smallest magnitude by shifted
/// inverse iteration; inner solves by preconditioned GMRES.
inline SteadyStateResult steady_state_eigen(const Liouvillian& liou, double tol = 1e-8, int max_iter = 50,
                                            const EigenOptions& opt = {}) {
  const auto t0 = detail::Clock::now();
  if (liou.jumps.empty())
    throw DegenerateSteadyState("zero eigenvalue degenerate: no jump operators, every eigenprojector of H is stationary");
  const Eigen::Index d = liou.hilbert_dim;
  const double scale = liou.scale();
  const double delta = opt.shift_fraction * scale;
  const DenseMat heff = liou.effective_hamiltonian();
  const double pshift = opt.inner.shift > 0.0 ? opt.inner.shift : 0.5 * slowest_decay_rate(heff);
  SylvesterPreconditioner pre(heff, pshift);
  auto apply = [&](const DenseVec& v) {
    DenseVec out = liou.apply(v);
    out.noalias() += delta * v;
    return out;
  };
  auto precondition = [&](const DenseVec& v) { return vectorize(pre.solve(unvectorize(v, d))); };
  const int restart = std::clamp(static_cast<int>(opt.inner.basis_memory / (16.0 * double(d) * double(d))), 5,
                                 opt.inner.restart);
  auto inverse_step = [&](const DenseVec& x) {
    DenseVec y = DenseVec::Zero(x.size());
    auto rep = gmres(apply, precondition, x, y, opt.inner.tol, restart, opt.inner.max_iter);
    if (!rep.converged && rep.relative_residual > 1e-6)
      throw NotConverged("steady_state_eigen: inner solve stalled", rep.relative_residual);
    return y;
  };

  DenseVec x = vectorize(detail::random_hermitian(d, opt.seed, false));
  x /= x.norm();
  SteadyStateResult res;
  res.method = "eigen";
  double best = std::numeric_limits<double>::infinity();
  bool converged = false;
  for (int it = 1; it <= max_iter; ++it) {
    x = inverse_step(x);
    x /= x.norm();
    DensityMatrix rho = DensityMatrix::from_raw(unvectorize(x, d), liou.basis);
    const double r = liou.residual(rho);
    res.iterations = it;
    if (r < best) {
      best = r;
      res.rho = rho;
      res.residual = r;
    }
    if (r <= tol * scale) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NotConverged("steady_state_eigen: no convergence after max_iter", best);

  if (opt.check_gap) {
    const DenseMat& rho = res.rho.matrix();
    DenseMat z = detail::random_hermitian(d, opt.seed + 1, true);
    double gap = 0.0;
    for (int k = 0; k < opt.gap_iterations; ++k) {
      DenseVec y = inverse_step(vectorize(z / z.norm()));
      z = unvectorize(y, d);
      z -= z.trace() * rho;
      z = 0.5 * (z + z.adjoint());
      gap = liou.apply(vectorize(z)).norm() / z.norm();
    }
    res.gap_estimate = gap;
    if (gap <= opt.gap_fraction * scale) {
      res.near_degenerate = true;
      if (liou.parity) res.rho = DensityMatrix::from_raw(detail::parity_even_projection(rho, *liou.parity), liou.basis);
      res.residual = liou.residual(res.rho);
    }
  }
  res.wall_seconds = detail::seconds_since(t0);
  return res;
}

/// Power-iteration estimate of the spectral radius of L.
inline double spectral_radius_estimate(const Liouvillian& liou, int iterations = 60) {
  const Eigen::Index n = liou.super.dim();
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  DenseVec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = cplx(nd(rng), nd(rng));
  v /= v.norm();
  double est = 0.0;
  for (int k = 0; k < iterations; ++k) {
    DenseVec w = liou.apply(v);
    est = w.norm();
    if (est == 0.0) return 0.0;
    v = w / est;
  }
  return est;
}

/// Fixed-step RK4 integration of d rho/dt = L rho.
inline DensityMatrix time_evolve(const DensityMatrix& rho0, const Liouvillian& liou, double t_final, double dt) {
  if (rho0.dim() != liou.hilbert_dim) throw DimensionError("time_evolve: state dimension differs from Liouvillian");
  if (rho0.basis() != liou.basis) throw BasisMismatch("time_evolve: state basis differs from Liouvillian");
  if (!(dt > 0.0) || t_final < 0.0) throw Error("time_evolve: need dt > 0 and t_final >= 0");
  if (liou.super.nnz() == 0 || t_final == 0.0) return rho0;
  const double radius = 1.1 * spectral_radius_estimate(liou);
  if (dt * radius >= 2.5)
    throw SolverError("time_evolve: dt * spectral radius = " + std::to_string(dt * radius) +
                      " violates the RK4 stability bound 2.5");
  const auto steps = static_cast<long>(std::ceil(t_final / dt - 1e-12));
  const double h = t_final / double(steps);
  const Eigen::Index d = liou.hilbert_dim;
  const cplx tr0 = rho0.trace();
  DenseVec y = vectorize(rho0.matrix());
  auto trace_of = [&](const DenseVec& v) {
    cplx t = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) t += v(i * d + i);
    return t;
  };
  for (long s = 1; s <= steps; ++s) {
    DenseVec k1 = liou.apply(y);
    DenseVec k2 = liou.apply(y + 0.5 * h * k1);
    DenseVec k3 = liou.apply(y + 0.5 * h * k2);
    DenseVec k4 = liou.apply(y + h * k3);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (s % 64 == 0 || s == steps) {
      const double drift = std::abs(trace_of(y) - tr0);
      if (!y.allFinite() || drift > 1e-8)
        throw SolverError("time_evolve: instability at t = " + std::to_string(s * h) + " (trace drift " +
                          std::to_string(drift) + ")");
    }
  }
  return DensityMatrix(unvectorize(y, d), rho0.basis());
}

}  // namespace qdbh
