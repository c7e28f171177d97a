#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "qdbh/density.hpp"
#include "qdbh/fock.hpp"
#include "qdbh/lattice.hpp"

namespace qdbh {

/// Eigenvalues below this are dropped from the entropy sum.
inline constexpr double kEntropyFloor = 1e-14;

namespace detail {
inline void require_same_basis(const DensityMatrix& rho, const SparseOperator& op, const char* what) {
  if (rho.dim() != op.dim()) throw DimensionError(std::string(what) + ": operator and state dimensions differ");
  if (rho.basis() != op.basis()) throw BasisMismatch(std::string(what) + ": operator and state in different bases");
}

inline cplx expectation(const DensityMatrix& rho, const CsrMat& op) {
  // Tr(rho O) = sum_{ij} rho_ji O_ij
  cplx s = 0.0;
  for (Eigen::Index i = 0; i < op.outerSize(); ++i)
    for (CsrMat::InnerIterator it(op, i); it; ++it) s += rho.matrix()(it.col(), i) * it.value();
  return s;
}
}  // namespace detail

/// Tr(rho O) for an arbitrary operator in the state's basis.
inline cplx expectation(const DensityMatrix& rho, const SparseOperator& op) {
  detail::require_same_basis(rho, op, "expectation");
  return detail::expectation(rho, op.matrix());
}

/// Tr(rho Pi).
inline double parity_expectation(const DensityMatrix& rho, const SparseOperator& pi_op) {
  const cplx v = expectation(rho, pi_op);
  if (std::abs(v.imag()) > 1e-10) throw InvalidState("parity expectation has imaginary part " + std::to_string(v.imag()));
  return v.real();
}

/// Same quantity through the eigenbasis of rho: sum_k lambda_k <v_k|Pi|v_k>.
/// Used to cross-check the diagonal route.
inline double parity_expectation_eigen(const DensityMatrix& rho, const SparseOperator& pi_op) {
  detail::require_same_basis(rho, pi_op, "parity_expectation_eigen");
  Eigen::SelfAdjointEigenSolver<DenseMat> es(rho.matrix());
  const DenseMat& v = es.eigenvectors();
  const DenseMat pv = pi_op.matrix() * v;
  double s = 0.0;
  for (Eigen::Index k = 0; k < v.cols(); ++k) s += es.eigenvalues()(k) * v.col(k).dot(pv.col(k)).real();
  return s;
}

/// -Tr(rho log rho), natural log.
inline double von_neumann_entropy(const DensityMatrix& rho) {
  const RealVec& ev = rho.eigenvalues();
  if (ev.size() > 0 && ev(0) < -1e-8) throw InvalidState("entropy: eigenvalue " + std::to_string(ev(0)) + " < -1e-8");
  double s = 0.0;
  for (Eigen::Index k = 0; k < ev.size(); ++k)
    if (ev(k) > kEntropyFloor) s -= ev(k) * std::log(ev(k));
  return std::max(s, 0.0);
}

/// <a_j^dag a_j> for each site, from per-site number operators in the
/// state's basis.
inline std::vector<double> site_density(const DensityMatrix& rho, const std::vector<SparseOperator>& number_ops) {
  std::vector<double> out;
  for (const auto& n : number_ops) out.push_back(expectation(rho, n).real());
  return out;
}

/// Fock-basis convenience overload.
inline std::vector<double> site_density(const DensityMatrix& rho, const LatticeGeometry& geom, const FockSpace& fock) {
  std::vector<SparseOperator> ns;
  for (int s = 0; s < geom.n_sites(); ++s) ns.push_back(embed_site_op(number_op(fock), s, geom.n_sites(), fock.dim_cap));
  return site_density(rho, ns);
}

/// <a_j^dag a_j'> for per-site annihilators in the state's basis.
inline cplx correlation(const DensityMatrix& rho, const SparseOperator& a_j, const SparseOperator& a_jp) {
  return expectation(rho, a_j.adjoint() * a_jp);
}

inline cplx correlation(const DensityMatrix& rho, int j, int jp, const LatticeGeometry& geom, const FockSpace& fock) {
  const auto a = annihilation_op(fock);
  return correlation(rho, embed_site_op(a, j, geom.n_sites(), fock.dim_cap),
                     embed_site_op(a, jp, geom.n_sites(), fock.dim_cap));
}

/// max |[rho, Pi]| entrywise for a diagonal parity.
inline double parity_commutator(const DensityMatrix& rho, const RealVec& parity) {
  double m = 0.0;
  for (Eigen::Index j = 0; j < rho.dim(); ++j)
    for (Eigen::Index i = 0; i < rho.dim(); ++i)
      m = std::max(m, std::abs(rho.matrix()(i, j)) * std::abs(parity(j) - parity(i)));
  return m;
}

struct ObservableRecord {
  double parity = 1.0;
  double entropy = 0.0;
  double n_per_site = 0.0;
  std::vector<double> densities;
  std::optional<DenseMat> correlations;
  std::string method;
  Eigen::Index corner_dim = 0;
  int n_max = 0;
  double residual = 0.0;
  Eigen::Index basis_dim = 0;

  std::vector<std::string> violations(double tol = 1e-8) const {
    std::vector<std::string> v;
    if (parity < -1.0 - tol || parity > 1.0 + tol) v.push_back("parity outside [-1,1]");
    if (entropy < -1e-12) v.push_back("negative entropy");
    if (basis_dim > 0 && entropy > std::log(double(basis_dim)) + tol) v.push_back("entropy above log(dim)");
    for (double d : densities)
      if (d < -tol) v.push_back("negative density");
    return v;
  }
};

/// Evaluates all observables from per-site number operators and a diagonal
/// parity, every operator written in the basis of `rho`.
inline ObservableRecord evaluate(const DensityMatrix& rho, const RealVec& parity,
                                 const std::vector<SparseOperator>& number_ops) {
  ObservableRecord r;
  if (parity.size() != rho.dim()) throw DimensionError("evaluate: parity diagonal has wrong length");
  double p = 0.0;
  for (Eigen::Index i = 0; i < rho.dim(); ++i) p += parity(i) * rho.matrix()(i, i).real();
  r.parity = p;
  r.entropy = von_neumann_entropy(rho);
  r.densities = site_density(rho, number_ops);
  double tot = 0.0;
  for (double d : r.densities) tot += d;
  r.n_per_site = r.densities.empty() ? 0.0 : tot / double(r.densities.size());
  r.basis_dim = rho.dim();
  return r;
}

}  // namespace qdbh
