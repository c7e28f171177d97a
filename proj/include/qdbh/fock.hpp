#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <unsupported/Eigen/KroneckerProduct>

#include "qdbh/core.hpp"

namespace qdbh {

/// Entries with magnitude at or below this are never stored.
inline constexpr double kDropTolerance = 1e-15;

/// Truncated single-mode Fock space |0>..|n_max>.
struct FockSpace {
  int n_max = 4;
  /// Largest tensor-product dimension any lattice operator may reach.
  std::int64_t dim_cap = std::int64_t{1} << 22;

  explicit FockSpace(int nmax = 4, std::int64_t cap = std::int64_t{1} << 22) : n_max(nmax), dim_cap(cap) {
    if (n_max < 1) throw DimensionError("FockSpace: n_max must be >= 1 (dim >= 2)");
  }
  int dim() const { return n_max + 1; }

  /// dim^n_sites, or DimensionError when it exceeds the cap.
  std::int64_t tensor_dim(int n_sites) const {
    if (n_sites < 1) throw DimensionError("tensor_dim: need at least one site");
    std::int64_t d = 1;
    for (int s = 0; s < n_sites; ++s) {
      d *= dim();
      if (d > dim_cap)
        throw DimensionError("lattice Hilbert space (" + std::to_string(dim()) + "^" + std::to_string(n_sites) +
                             ") exceeds dimension cap " + std::to_string(dim_cap));
    }
    return d;
  }
};

/// Complex sparse matrix in compressed-row layout with a Hermiticity tag and
/// the id of the basis it is written in.
class SparseOperator {
 public:
  SparseOperator() = default;
  SparseOperator(CsrMat m, bool hermitian, BasisId basis = kFockBasis)
      : mat_(std::move(m)), hermitian_(hermitian), basis_(basis) {
    if (mat_.rows() != mat_.cols()) throw DimensionError("SparseOperator must be square");
    mat_.prune(cplx{0.0}, kDropTolerance);
    mat_.makeCompressed();
  }

  /// Builds the operator and verifies the Hermitian tag before setting it.
  static SparseOperator hermitian_checked(CsrMat m, BasisId basis = kFockBasis) {
    SparseOperator op(std::move(m), false, basis);
    if (!op.is_numerically_hermitian()) throw Error("operator tagged Hermitian fails M == M^dagger check");
    op.hermitian_ = true;
    return op;
  }

  Eigen::Index dim() const { return mat_.rows(); }
  Eigen::Index nnz() const { return mat_.nonZeros(); }
  const CsrMat& matrix() const { return mat_; }
  bool hermitian() const { return hermitian_; }
  BasisId basis() const { return basis_; }

  cplx coeff(Eigen::Index r, Eigen::Index c) const { return mat_.coeff(r, c); }
  DenseMat dense() const { return DenseMat(mat_); }

  SparseOperator adjoint() const { return {CsrMat(mat_.adjoint()), hermitian_, basis_}; }

  /// max|M - M^dagger| <= rel_tol * max|M|.
  bool is_numerically_hermitian(double rel_tol = 1e-12) const {
    CsrMat diff = mat_ - CsrMat(mat_.adjoint());
    double scale = 0.0, dev = 0.0;
    for (Eigen::Index k = 0; k < mat_.outerSize(); ++k)
      for (CsrMat::InnerIterator it(mat_, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
    for (Eigen::Index k = 0; k < diff.outerSize(); ++k)
      for (CsrMat::InnerIterator it(diff, k); it; ++it) dev = std::max(dev, std::abs(it.value()));
    return dev <= rel_tol * scale;
  }

  friend SparseOperator operator*(const SparseOperator& a, const SparseOperator& b) {
    check_compatible(a, b);
    return {CsrMat(a.mat_ * b.mat_), false, a.basis_};
  }
  friend SparseOperator operator+(const SparseOperator& a, const SparseOperator& b) {
    check_compatible(a, b);
    return {CsrMat(a.mat_ + b.mat_), a.hermitian_ && b.hermitian_, a.basis_};
  }
  friend SparseOperator operator*(cplx s, const SparseOperator& a) {
    return {CsrMat(s * a.mat_), a.hermitian_ && s.imag() == 0.0, a.basis_};
  }

 private:
  static void check_compatible(const SparseOperator& a, const SparseOperator& b) {
    if (a.dim() != b.dim()) throw DimensionError("operator dimension mismatch");
    if (a.basis_ != b.basis_) throw BasisMismatch("operators written in different bases");
  }

  CsrMat mat_;
  bool hermitian_ = false;
  BasisId basis_ = kFockBasis;
};

inline CsrMat sparse_identity(Eigen::Index n) {
  CsrMat id(n, n);
  id.setIdentity();
  return id;
}

inline SparseOperator identity_op(Eigen::Index n) { return {sparse_identity(n), true}; }

/// a|n> = sqrt(n)|n-1>.
inline SparseOperator annihilation_op(const FockSpace& fock) {
  const int d = fock.dim();
  std::vector<Eigen::Triplet<cplx>> t;
  for (int n = 1; n < d; ++n) t.emplace_back(n - 1, n, std::sqrt(static_cast<double>(n)));
  CsrMat a(d, d);
  a.setFromTriplets(t.begin(), t.end());
  return {std::move(a), false};
}

inline SparseOperator number_op(const FockSpace& fock) {
  const int d = fock.dim();
  CsrMat n(d, d);
  for (int k = 1; k < d; ++k) n.insert(k, k) = static_cast<double>(k);
  return {std::move(n), true};
}

/// I (x) ... (x) op (x) ... (x) I with op at `site`. Site 0 is the slowest
/// varying tensor index.
inline SparseOperator embed_site_op(const SparseOperator& op, int site, int n_sites,
                                    std::int64_t dim_cap = std::int64_t{1} << 22) {
  if (n_sites < 1 || site < 0 || site >= n_sites)
    throw DimensionError("embed_site_op: site " + std::to_string(site) + " out of range for " +
                         std::to_string(n_sites) + " sites");
  const std::int64_t d = op.dim();
  std::int64_t left = 1, right = 1, total = d;
  for (int s = 0; s < n_sites; ++s) {
    if (s == site) continue;
    if (total > dim_cap / d) throw DimensionError("embed_site_op: dimension exceeds cap " + std::to_string(dim_cap));
    total *= d;
    (s < site ? left : right) *= d;
  }
  CsrMat out = CsrMat(Eigen::kroneckerProduct(sparse_identity(left), op.matrix()));
  out = CsrMat(Eigen::kroneckerProduct(out, sparse_identity(right)));
  return {std::move(out), op.hermitian()};
}

/// Total photon number of every tensor basis state (site 0 slowest).
inline std::vector<int> total_photon_numbers(const FockSpace& fock, int n_sites) {
  const std::int64_t dim = fock.tensor_dim(n_sites);
  std::vector<int> total(static_cast<std::size_t>(dim), 0);
  const int d = fock.dim();
  for (std::int64_t idx = 0; idx < dim; ++idx) {
    std::int64_t rest = idx;
    int sum = 0;
    for (int s = 0; s < n_sites; ++s) {
      sum += static_cast<int>(rest % d);
      rest /= d;
    }
    total[static_cast<std::size_t>(idx)] = sum;
  }
  return total;
}

/// exp(i pi sum_j n_j): diagonal (-1)^{total photon number}.
inline SparseOperator parity_op(const FockSpace& fock, int n_sites) {
  const auto total = total_photon_numbers(fock, n_sites);
  const auto dim = static_cast<Eigen::Index>(total.size());
  CsrMat p(dim, dim);
  p.reserve(Eigen::VectorXi::Constant(dim, 1));
  for (Eigen::Index i = 0; i < dim; ++i) p.insert(i, i) = (total[static_cast<std::size_t>(i)] % 2 == 0) ? 1.0 : -1.0;
  p.makeCompressed();
  return {std::move(p), true};
}

}  // namespace qdbh
