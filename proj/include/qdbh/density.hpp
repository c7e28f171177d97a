#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Eigenvalues>

#include "qdbh/core.hpp"

namespace qdbh {

/// Dense Hermitian, unit-trace, positive semidefinite matrix over an explicit
/// basis. Eigenvalues are cached on first use.
class DensityMatrix {
 public:
  DensityMatrix() = default;
  explicit DensityMatrix(DenseMat m, BasisId basis = kFockBasis) : m_(std::move(m)), basis_(basis) {
    if (m_.rows() != m_.cols()) throw DimensionError("density matrix must be square");
  }

  /// Hermitizes and trace-normalizes a raw solver output.
  static DensityMatrix from_raw(const DenseMat& raw, BasisId basis = kFockBasis) {
    DenseMat h = 0.5 * (raw + raw.adjoint());
    const cplx tr = h.trace();
    if (std::abs(tr) < 1e-300) throw InvalidState("cannot normalize a traceless matrix");
    h /= tr.real();
    return DensityMatrix(std::move(h), basis);
  }

  static DensityMatrix pure(const DenseVec& psi, BasisId basis = kFockBasis) {
    DenseVec v = psi / psi.norm();
    return DensityMatrix(v * v.adjoint(), basis);
  }

  static DensityMatrix basis_state(Eigen::Index dim, Eigen::Index k, BasisId basis = kFockBasis) {
    DenseMat m = DenseMat::Zero(dim, dim);
    m(k, k) = 1.0;
    return DensityMatrix(std::move(m), basis);
  }

  Eigen::Index dim() const { return m_.rows(); }
  BasisId basis() const { return basis_; }
  const DenseMat& matrix() const { return m_; }
  cplx trace() const { return m_.trace(); }

  /// Ascending eigenvalues.
  const RealVec& eigenvalues() const {
    if (!eig_) eig_ = Eigen::SelfAdjointEigenSolver<DenseMat>(m_, Eigen::EigenvaluesOnly).eigenvalues();
    return *eig_;
  }

  double hermiticity_error() const { return (m_ - m_.adjoint()).cwiseAbs().maxCoeff(); }

  /// Throws InvalidState when any invariant is violated beyond the bounds.
  void check(double herm_tol = 1e-10, double trace_tol = 1e-10, double psd_tol = 1e-8) const {
    if (hermiticity_error() > herm_tol) throw InvalidState("density matrix not Hermitian");
    if (std::abs(trace() - cplx{1.0}) > trace_tol) throw InvalidState("density matrix trace differs from 1");
    if (eigenvalues().size() > 0 && eigenvalues()(0) < -psd_tol)
      throw InvalidState("density matrix has eigenvalue " + std::to_string(eigenvalues()(0)));
  }

 private:
  DenseMat m_;
  BasisId basis_ = kFockBasis;
  mutable std::optional<RealVec> eig_;
};

/// (1/2) sum |eig(a - b)|.
inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.dim() != b.dim()) throw DimensionError("trace_distance: dimension mismatch");
  if (a.basis() != b.basis()) throw BasisMismatch("trace_distance: states in different bases");
  DenseMat d = a.matrix() - b.matrix();
  d = 0.5 * (d + d.adjoint());
  RealVec ev = Eigen::SelfAdjointEigenSolver<DenseMat>(d, Eigen::EigenvaluesOnly).eigenvalues();
  return 0.5 * ev.cwiseAbs().sum();
}

/// Column-stacking vectorization.
inline DenseVec vectorize(const DenseMat& m) { return Eigen::Map<const DenseVec>(m.data(), m.size()); }

inline DenseMat unvectorize(const DenseVec& v, Eigen::Index dim) {
  if (v.size() != dim * dim) throw DimensionError("unvectorize: length is not dim^2");
  return Eigen::Map<const DenseMat>(v.data(), dim, dim);
}

}  // namespace qdbh
