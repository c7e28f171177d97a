#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qdbh/core.hpp"
#include "qdbh/density.hpp"

namespace qdbh {

struct GmresReport {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Restarted GMRES with right preconditioning. `apply` computes A*v and
/// `precondition` an approximation of A^{-1}*v.
template <class Apply, class Precondition>
GmresReport gmres(const Apply& apply, const Precondition& precondition, const DenseVec& b, DenseVec& x, double tol,
                  int restart, int max_iter) {
  GmresReport rep;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    x.setZero();
    rep.converged = true;
    return rep;
  }
  const Eigen::Index n = b.size();
  restart = std::max(2, restart);
  std::vector<DenseVec> v(static_cast<std::size_t>(restart + 1));
  DenseMat h = DenseMat::Zero(restart + 1, restart);
  DenseVec g(restart + 1);
  std::vector<double> cs(static_cast<std::size_t>(restart));
  std::vector<cplx> sn(static_cast<std::size_t>(restart));

  DenseVec r = b - apply(x);
  double beta = r.norm();
  rep.relative_residual = beta / bnorm;
  while (rep.iterations < max_iter) {
    if (rep.relative_residual <= tol) {
      rep.converged = true;
      return rep;
    }
    v[0] = r / beta;
    g.setZero();
    g(0) = beta;
    h.setZero();
    int k = 0;
    for (; k < restart && rep.iterations < max_iter; ++k, ++rep.iterations) {
      DenseVec w = apply(precondition(v[static_cast<std::size_t>(k)]));
      // Two passes of classical Gram-Schmidt.
      for (int pass = 0; pass < 2; ++pass)
        for (int i = 0; i <= k; ++i) {
          const cplx c = v[static_cast<std::size_t>(i)].dot(w);
          h(i, k) += c;
          w.noalias() -= c * v[static_cast<std::size_t>(i)];
        }
      const double wn = w.norm();
      h(k + 1, k) = wn;
      v[static_cast<std::size_t>(k + 1)] = (wn > 0.0) ? DenseVec(w / wn) : DenseVec::Zero(n);
      for (int i = 0; i < k; ++i) {
        const cplx a = h(i, k), c = h(i + 1, k);
        h(i, k) = cs[i] * a + sn[i] * c;
        h(i + 1, k) = -std::conj(sn[i]) * a + cs[i] * c;
      }
      const cplx a = h(k, k);
      const double bb = std::abs(h(k + 1, k));
      const double t = std::hypot(std::abs(a), bb);
      if (std::abs(a) == 0.0) {
        cs[k] = 0.0;
        sn[k] = 1.0;
      } else {
        cs[k] = std::abs(a) / t;
        sn[k] = (a / std::abs(a)) * bb / t;
      }
      h(k, k) = cs[k] * a + sn[k] * h(k + 1, k);
      h(k + 1, k) = 0.0;
      g(k + 1) = -std::conj(sn[k]) * g(k);
      g(k) = cs[k] * g(k);
      rep.relative_residual = std::abs(g(k + 1)) / bnorm;
      if (rep.relative_residual <= tol || wn == 0.0) {
        ++k;
        ++rep.iterations;
        break;
      }
    }
    DenseVec y = h.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    DenseVec update = DenseVec::Zero(n);
    for (int i = 0; i < k; ++i) update.noalias() += y(i) * v[static_cast<std::size_t>(i)];
    x.noalias() += precondition(update);
    r = b - apply(x);
    beta = r.norm();
    rep.relative_residual = beta / bnorm;
    if (beta == 0.0) break;
  }
  rep.converged = rep.relative_residual <= tol;
  return rep;
}

/// Exact inverse of X -> -i(H X - X H^dagger) - shift X through the Schur form
/// H = Q T Q^dagger. Used as the preconditioner for Lindbladian solves: it
/// covers the coherent and no-jump dissipative parts exactly.
class SylvesterPreconditioner {
 public:
  SylvesterPreconditioner() = default;
  SylvesterPreconditioner(const DenseMat& h_eff, double shift) : shift_(shift) {
    Eigen::ComplexSchur<DenseMat> schur(h_eff);
    if (schur.info() != Eigen::Success) throw SolverError("Schur decomposition of the effective Hamiltonian failed");
    q_ = schur.matrixU();
    t_ = schur.matrixT();
    mit_ = -kI * t_;
  }

  Eigen::Index dim() const { return t_.rows(); }

  DenseMat solve(const DenseMat& r) const {
    const Eigen::Index n = t_.rows();
    DenseMat s = q_.adjoint() * r * q_;
    DenseMat y(n, n);
    DenseVec rhs(n);
    for (Eigen::Index j = n - 1; j >= 0; --j) {
      rhs = s.col(j);
      const Eigen::Index tail = n - 1 - j;
      if (tail > 0) rhs.noalias() -= kI * (y.rightCols(tail) * t_.row(j).tail(tail).adjoint());
      const cplx cj = kI * std::conj(t_(j, j)) - shift_;
      for (Eigen::Index c = n - 1; c >= 0; --c) {
        const cplx yc = rhs(c) / (mit_(c, c) + cj);
        y(c, j) = yc;
        if (c > 0) rhs.head(c).noalias() -= yc * mit_.col(c).head(c);
      }
    }
    return q_ * y * q_.adjoint();
  }

 private:
  DenseMat q_, t_, mit_;
  double shift_ = 0.5;
};

/// Smallest eigenvalue of K = i (H_eff - H_eff^dagger) above the numerical
/// floor: the slowest no-jump decay rate. Sets the preconditioner shift scale.
inline double slowest_decay_rate(const DenseMat& h_eff) {
  DenseMat k = kI * (h_eff - h_eff.adjoint());
  k = 0.5 * (k + k.adjoint());
  RealVec ev = Eigen::SelfAdjointEigenSolver<DenseMat>(k, Eigen::EigenvaluesOnly).eigenvalues();
  const double floor = 1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) > floor) return ev(i);
  return 1.0;
}

struct KrylovOptions {
  double tol = 1e-12;
  int restart = 40;
  int max_iter = 3000;
  /// <= 0 selects half the slowest decay rate.
  double shift = 0.0;
  /// Upper bound on the Arnoldi basis memory in bytes.
  double basis_memory = 1.0e9;
};

struct KrylovOutcome {
  DenseMat rho;  ///< raw (unnormalized) solution
  GmresReport report;
};

/// Solves L(rho) + Tr(rho) I = I, whose solution is the unit-trace null vector
/// of L when that null vector is unique. `apply_l` maps a vectorized D x D
/// matrix to vec(L(rho)).
template <class ApplyL>
KrylovOutcome solve_steady_krylov(const ApplyL& apply_l, const DenseMat& h_eff, const DenseMat* guess,
                                  const KrylovOptions& opt) {
  const Eigen::Index dim = h_eff.rows();
  const double shift = opt.shift > 0.0 ? opt.shift : 0.5 * slowest_decay_rate(h_eff);
  SylvesterPreconditioner pre(h_eff, shift);
  const DenseMat id = DenseMat::Identity(dim, dim);
  auto apply = [&](const DenseVec& v) {
    DenseVec out = apply_l(v);
    cplx tr = 0.0;
    for (Eigen::Index i = 0; i < dim; ++i) tr += v(i * dim + i);
    for (Eigen::Index i = 0; i < dim; ++i) out(i * dim + i) += tr;
    return out;
  };
  auto precondition = [&](const DenseVec& v) { return vectorize(pre.solve(unvectorize(v, dim))); };
  DenseVec b = vectorize(id);
  DenseVec x = guess ? vectorize(*guess) : DenseVec(b / double(dim));
  const double bytes_per_vec = 16.0 * double(dim) * double(dim);
  const int restart = std::clamp(static_cast<int>(opt.basis_memory / bytes_per_vec), 5, opt.restart);
  KrylovOutcome out;
  out.report = gmres(apply, precondition, b, x, opt.tol, restart, opt.max_iter);
  out.rho = unvectorize(x, dim);
  return out;
}

/// Lindbladian in operator form: L(rho) = -i(H_eff rho - rho H_eff^dagger) +
/// sum_k G_k rho G_k^dagger with H_eff = H - (i/2) sum_k G_k^dagger G_k.
/// Jumps denser than 10% are kept dense.
class LindbladForm {
 public:
  LindbladForm(const DenseMat& h, const std::vector<CsrMat>& jumps) : dim_(h.rows()) {
    DenseMat k = DenseMat::Zero(dim_, dim_);
    for (const auto& g : jumps) {
      if (g.rows() != dim_ || g.cols() != dim_) throw DimensionError("LindbladForm: jump dimension mismatch");
      k += DenseMat(CsrMat(g.adjoint() * g));
      if (double(g.nonZeros()) > 0.1 * double(dim_) * double(dim_))
        dense_.push_back(DenseMat(g));
      else
        sparse_.push_back(g);
    }
    h_eff_ = h - 0.5 * kI * k;
  }
  LindbladForm(const DenseMat& h, const std::vector<DenseMat>& jumps) : dim_(h.rows()) {
    DenseMat k = DenseMat::Zero(dim_, dim_);
    for (const auto& g : jumps) {
      if (g.rows() != dim_ || g.cols() != dim_) throw DimensionError("LindbladForm: jump dimension mismatch");
      k.noalias() += g.adjoint() * g;
      Eigen::Index nnz = (g.array().abs() > kZero).count();
      if (double(nnz) > 0.1 * double(dim_) * double(dim_))
        dense_.push_back(g);
      else
        sparse_.push_back(g.sparseView(cplx{0.0}, kZero));
    }
    h_eff_ = h - 0.5 * kI * k;
  }

  Eigen::Index dim() const { return dim_; }
  const DenseMat& h_eff() const { return h_eff_; }

  DenseMat apply(const DenseMat& rho) const {
    DenseMat out = h_eff_ * rho;
    out.noalias() -= rho * h_eff_.adjoint();
    out *= -kI;
    for (const auto& g : sparse_) out.noalias() += DenseMat(g * rho) * g.adjoint();
    for (const auto& g : dense_) out.noalias() += (g * rho) * g.adjoint();
    return out;
  }

  DenseVec apply_vec(const DenseVec& v) const { return vectorize(apply(unvectorize(v, dim_))); }

 private:
  static constexpr double kZero = 1e-15;
  Eigen::Index dim_;
  DenseMat h_eff_;
  std::vector<CsrMat> sparse_;
  std::vector<DenseMat> dense_;
};

}  // namespace qdbh
