#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "qdbh/lattice.hpp"
#include "qdbh/liouvillian.hpp"

namespace qdbh {

/// Even and odd cat states (|alpha> +- |-alpha>)/norm in a truncated Fock space.
struct CatBasis {
  cplx alpha = 0.0;
  int n_max = 0;
  DenseVec plus;
  DenseVec minus;

  double abs2() const { return std::norm(alpha); }
  /// SM normalizations N_+ = sqrt(cosh|a|^2 / e^|a|^2), N_- = sqrt(sinh|a|^2 / e^|a|^2).
  double n_plus() const { return std::sqrt(std::cosh(abs2()) * std::exp(-abs2())); }
  double n_minus() const { return std::sqrt(std::sinh(abs2()) * std::exp(-abs2())); }
};

/// Cutoff at which the cat vectors are trusted to 1e-10.
inline int cat_cutoff(double abs2) { return static_cast<int>(std::ceil(abs2 + 8.0 * std::sqrt(abs2 + 1.0))); }

inline CatBasis cat_states(cplx alpha, const FockSpace& fock) {
  CatBasis cb;
  cb.alpha = alpha;
  cb.n_max = fock.n_max;
  const int d = fock.dim();
  const double a2 = std::norm(alpha);
  // Coherent amplitudes via log-factorials; (-alpha)^n = (-1)^n alpha^n.
  DenseVec coh(d);
  double mass = 0.0;
  for (int n = 0; n < d; ++n) {
    const double mag = std::exp(-0.5 * a2 + 0.5 * n * std::log(std::max(a2, 1e-300)) - 0.5 * std::lgamma(n + 1.0));
    const cplx phase = std::pow(std::polar(1.0, std::arg(alpha)), n);
    coh(n) = (n == 0) ? cplx{std::exp(-0.5 * a2)} : (a2 == 0.0 ? cplx{0.0} : mag * phase);
    mass += std::norm(coh(n));
  }
  if (1.0 - mass > 1e-8)
    throw TruncationError("cat_states: coherent state loses " + std::to_string(1.0 - mass) + " of its norm at n_max = " +
                          std::to_string(fock.n_max));
  cb.plus = DenseVec::Zero(d);
  cb.minus = DenseVec::Zero(d);
  for (int n = 0; n < d; ++n) (n % 2 == 0 ? cb.plus : cb.minus)(n) = coh(n);
  cb.plus /= cb.plus.norm();
  if (cb.minus.norm() > 0.0) {
    cb.minus /= cb.minus.norm();
  } else {
    cb.minus(1) = 1.0;  // alpha -> 0 limit of the odd cat
  }
  return cb;
}

/// <C^s|a|C^s'> with rows/columns ordered (+, -).
inline Eigen::Matrix2cd annihilation_on_cats(const CatBasis& cb) {
  const int d = static_cast<int>(cb.plus.size());
  DenseVec ap = DenseVec::Zero(d), am = DenseVec::Zero(d);
  for (int n = 1; n < d; ++n) {
    ap(n - 1) = std::sqrt(double(n)) * cb.plus(n);
    am(n - 1) = std::sqrt(double(n)) * cb.minus(n);
  }
  Eigen::Matrix2cd m;
  m << cb.plus.dot(ap), cb.plus.dot(am), cb.minus.dot(ap), cb.minus.dot(am);
  return m;
}

struct SpinModelCoefficients {
  cplx alpha = 0.0;
  double a_plus = 0.0;
  double a_minus = 0.0;
  double b_x = 0.0;
  double b_y = 0.0;
  double h_z = 0.0;   ///< H_XY contains -h_z sum sigma_z
  double c_xx = 0.0;  ///< per unit bond weight, H_XY contains -c_xx sigma_x sigma_x
  double c_yy = 0.0;
  int dimensionality = 1;
};

inline SpinModelCoefficients spin_coefficients(cplx alpha, const ModelParams& params, int dimensionality) {
  SpinModelCoefficients c;
  c.alpha = alpha;
  c.dimensionality = dimensionality;
  const double a2 = std::norm(alpha);
  if (!(a2 > 0.0)) throw Error("spin_coefficients: alpha must be nonzero");
  const double t = std::tanh(a2);
  c.a_plus = t + 1.0 / t;
  c.a_minus = t - 1.0 / t;
  const double np = std::sqrt(std::cosh(a2) * std::exp(-a2));
  const double nm = std::sqrt(std::sinh(a2) * std::exp(-a2));
  c.b_x = nm / np + np / nm;
  c.b_y = nm / np - np / nm;
  c.h_z = params.delta * a2 * c.a_minus / 2.0;
  const double pref = params.j_hop * a2 / (4.0 * dimensionality);
  c.c_xx = pref * (c.a_plus + 2.0);
  c.c_yy = pref * (c.a_plus - 2.0);
  return c;
}

namespace detail {
inline Eigen::Matrix2cd pauli(char k) {
  Eigen::Matrix2cd m;
  if (k == 'x') m << 0, 1, 1, 0;
  if (k == 'y') m << 0, -kI, kI, 0;
  if (k == 'z') m << 1, 0, 0, -1;
  return m;
}
inline CsrMat spin_site_op(const Eigen::Matrix2cd& s, int site, int n_sites) {
  const Eigen::Index left = Eigen::Index{1} << site;
  const Eigen::Index right = Eigen::Index{1} << (n_sites - site - 1);
  CsrMat sm = DenseMat(s).sparseView();
  CsrMat out = CsrMat(Eigen::kroneckerProduct(sparse_identity(left), sm));
  return CsrMat(Eigen::kroneckerProduct(out, sparse_identity(right)));
}
}  // namespace detail

/// Spin index 0 is up = even cat; site 0 is the slowest tensor index.
inline SparseOperator build_xy_hamiltonian(const SpinModelCoefficients& c, const LatticeGeometry& geom,
                                           int max_sites = 20) {
  const int n = geom.n_sites();
  if (n > max_sites) throw DimensionError("build_xy_hamiltonian: 2^" + std::to_string(n) + " exceeds the spin cap");
  const Eigen::Index dim = Eigen::Index{1} << n;
  CsrMat h(dim, dim);
  for (int s = 0; s < n; ++s) h -= c.h_z * detail::spin_site_op(detail::pauli('z'), s, n);
  for (const auto& b : geom.bonds()) {
    h -= (c.c_xx * b.weight) *
         CsrMat(detail::spin_site_op(detail::pauli('x'), b.i, n) * detail::spin_site_op(detail::pauli('x'), b.j, n));
    h -= (c.c_yy * b.weight) *
         CsrMat(detail::spin_site_op(detail::pauli('y'), b.i, n) * detail::spin_site_op(detail::pauli('y'), b.j, n));
  }
  return SparseOperator::hermitian_checked(std::move(h));
}

/// Identity components per site of the projected detuning, driving and Kerr
/// terms. H carries -Delta a^dag a, hence the sign of the detuning part.
struct ProjectionScalars {
  double detuning = 0.0;
  double driving = 0.0;
  double nonlinearity = 0.0;
  double total() const { return detuning + driving + nonlinearity; }
};

inline ProjectionScalars projection_scalars(const SpinModelCoefficients& c, const ModelParams& p) {
  const double a2 = std::norm(c.alpha);
  const double bx2 = c.b_x * c.b_x, by2 = c.b_y * c.b_y;
  ProjectionScalars s;
  s.detuning = -p.delta * a2 * (bx2 + by2) / 4.0;
  s.driving = (p.g * std::conj(c.alpha * c.alpha) + std::conj(p.g) * c.alpha * c.alpha).real() * (bx2 - by2) / 8.0;
  // (U/2)(|a|^4/16)(Bx^2 - By^2)^2
  s.nonlinearity = p.u * a2 * a2 * (bx2 - by2) * (bx2 - by2) / 32.0;
  return s;
}

/// Columns: product cat states, spin index bits with site 0 most significant.
inline DenseMat cat_product_basis(const CatBasis& cb, int n_sites) {
  DenseMat p = DenseMat::Ones(1, 1);
  DenseMat local(cb.plus.size(), 2);
  local.col(0) = cb.plus;
  local.col(1) = cb.minus;
  for (int s = 0; s < n_sites; ++s) p = Eigen::kroneckerProduct(p, local).eval();
  return p;
}

struct MappingReport {
  double max_deviation = 0.0;
  double sigma_z_deviation = 0.0;  ///< single-site: |projected sigma_z coefficient - Delta|a|^2 BxBy/2|
  DenseMat projected;              ///< P^dag H P
  DenseMat xy;                     ///< H_XY + identity scalars
};

/// Projects the bosonic H onto the product cat basis and compares with H_XY
/// plus the predicted identity components.
inline MappingReport validate_mapping_report(cplx alpha, const ModelParams& params, const LatticeGeometry& geom,
                                             const FockSpace& fock) {
  const CatBasis cb = cat_states(alpha, fock);
  const ModelParams p = params.normalized();
  const auto h = build_hamiltonian(p, geom, fock);
  const DenseMat pb = cat_product_basis(cb, geom.n_sites());
  MappingReport r;
  r.projected = pb.adjoint() * (h.matrix() * pb);
  const auto coeffs = spin_coefficients(alpha, p, geom.dimensionality());
  r.xy = build_xy_hamiltonian(coeffs, geom).dense();
  r.xy.diagonal().array() += geom.n_sites() * projection_scalars(coeffs, p).total();
  r.max_deviation = (r.projected - r.xy).cwiseAbs().maxCoeff();
  if (geom.n_sites() == 1) {
    const double sz = 0.5 * (r.projected(0, 0) - r.projected(1, 1)).real();
    // -Delta a^dag a projects to -(Delta |a|^2 / 2) BxBy sigma_z
    r.sigma_z_deviation = std::abs(sz + p.delta * std::norm(alpha) * coeffs.b_x * coeffs.b_y / 2.0);
  }
  return r;
}

inline double validate_mapping(cplx alpha, const ModelParams& params, const LatticeGeometry& geom,
                               const FockSpace& fock) {
  return validate_mapping_report(alpha, params, geom, fock).max_deviation;
}

/// Dominant even-parity eigenvector of the single-site steady state.
inline DenseVec dominant_even_state(const ModelParams& params, const FockSpace& fock) {
  const ModelParams p = params.normalized();
  const auto geom = LatticeGeometry::chain(1);
  auto liou = vectorize_lindbladian(build_hamiltonian(p, geom, fock), build_jump_operators(p, geom, fock));
  const auto ss = steady_state_krylov(liou, 1e-8);
  std::vector<Eigen::Index> even;
  for (int n = 0; n < fock.dim(); n += 2) even.push_back(n);
  DenseMat sub(even.size(), even.size());
  for (std::size_t i = 0; i < even.size(); ++i)
    for (std::size_t j = 0; j < even.size(); ++j) sub(i, j) = ss.rho.matrix()(even[i], even[j]);
  Eigen::SelfAdjointEigenSolver<DenseMat> es(sub);
  DenseVec v = DenseVec::Zero(fock.dim());
  const Eigen::Index top = sub.rows() - 1;
  for (std::size_t i = 0; i < even.size(); ++i) v(even[i]) = es.eigenvectors()(static_cast<Eigen::Index>(i), top);
  return v;
}

struct AlphaEstimate {
  cplx alpha = 0.0;
  double overlap = 0.0;  ///< |<C_alpha^+|v>|^2
};

/// Coherent amplitude whose even cat best overlaps the dominant even
/// eigenvector of the single-site steady state: grid over |alpha| and phase,
/// then Brent refinement in |alpha|.
inline AlphaEstimate estimate_alpha(const ModelParams& params, const FockSpace& fock, int radial_points = 60,
                                    int phase_points = 36) {
  const DenseVec v = dominant_even_state(params, fock);
  const double r_max = std::sqrt(std::max(1.0, 0.5 * double(fock.n_max)));
  auto overlap = [&](double r, double th) {
    if (r <= 0.0) return std::norm(v(0));
    // cat_states would reject large r at this cutoff; build the even cat directly
    const int d = fock.dim();
    DenseVec c = DenseVec::Zero(d);
    for (int n = 0; n < d; n += 2)
      c(n) = std::polar(std::exp(-0.5 * r * r + n * std::log(r) - 0.5 * std::lgamma(n + 1.0)), n * th);
    return std::norm(c.dot(v)) / c.squaredNorm();
  };
  double best = -1.0, br = 0.0, bt = 0.0;
  for (int i = 0; i <= radial_points; ++i)
    for (int k = 0; k < phase_points; ++k) {
      const double r = r_max * i / radial_points;
      const double th = M_PI * k / phase_points;
      const double o = overlap(r, th);
      if (o > best) {
        best = o;
        br = r;
        bt = th;
      }
    }
  const double step = r_max / radial_points;
  auto [r, neg] = boost::math::tools::brent_find_minima([&](double x) { return -overlap(x, bt); },
                                                        std::max(0.0, br - step), br + step, 40);
  AlphaEstimate e;
  e.alpha = std::polar(r, bt);
  e.overlap = -neg;
  return e;
}

}  // namespace qdbh
