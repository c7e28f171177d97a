#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
// pchip.hpp calls isnan unqualified on doubles
namespace boost::math::interpolators {
using std::isnan;
}
#include <boost/math/interpolators/pchip.hpp>
#include <boost/math/tools/roots.hpp>

#include "qdbh/core.hpp"

namespace qdbh {

struct Exponents {
  double beta = 0.125;
  double nu = 1.0;
  std::string name = "2D Ising";

  static Exponents ising3d() { return {0.32642, 0.62997, "3D Ising"}; }
  static Exponents ising2d() { return {0.125, 1.0, "2D Ising"}; }
  /// 2D lattices map to the 3D classical model, 1D arrays to the 2D one.
  static Exponents for_lattice(int dimensionality) { return dimensionality == 2 ? ising3d() : ising2d(); }
};

struct ScalingRecord {
  std::string size_label;
  double length = 0.0;  ///< L = N in 1D, sqrt(N) in 2D
  int n_sites = 0;
  double g = 0.0;  ///< G / gamma
  double parity = 0.0;
  double entropy = 0.0;
  bool converged = true;
};

struct ScalingDataset {
  std::vector<ScalingRecord> records;
  Exponents exponents;
  int dimensionality = 1;
  bool include_unconverged = false;

  std::vector<ScalingRecord> usable() const {
    std::vector<ScalingRecord> out;
    for (const auto& r : records)
      if (r.converged || include_unconverged) out.push_back(r);
    return out;
  }

  /// Records grouped by size label, each sorted by G.
  std::map<std::string, std::vector<ScalingRecord>> curves() const {
    std::map<std::string, std::vector<ScalingRecord>> c;
    for (const auto& r : usable()) c[r.size_label].push_back(r);
    for (auto& [k, v] : c) std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.g < b.g; });
    return c;
  }
};

struct RescaledPoint {
  std::string size_label;
  double length = 0.0;
  double x = 0.0;  ///< (G - G_c) L^{1/nu}
  double y = 0.0;  ///< Pi L^{beta/nu}
};

inline RescaledPoint rescale_point(const ScalingRecord& r, double gc, const Exponents& e) {
  return {r.size_label, r.length, (r.g - gc) * std::pow(r.length, 1.0 / e.nu),
          r.parity * std::pow(r.length, e.beta / e.nu)};
}

/// (G, Pi) from a rescaled point.
inline std::pair<double, double> inverse_rescale(const RescaledPoint& p, double gc, const Exponents& e) {
  return {gc + p.x * std::pow(p.length, -1.0 / e.nu), p.y * std::pow(p.length, -e.beta / e.nu)};
}

inline std::vector<RescaledPoint> rescale(const ScalingDataset& ds, double gc) {
  std::vector<RescaledPoint> out;
  for (const auto& r : ds.usable()) out.push_back(rescale_point(r, gc, ds.exponents));
  return out;
}

struct PairCrossing {
  std::string size_a;
  std::string size_b;
  double g = 0.0;
};

struct CollapseResult {
  double gc = 0.0;
  double uncertainty = 0.0;
  double residual = -1.0;  ///< negative until collapse_quality is evaluated
  std::vector<PairCrossing> crossings;
  std::vector<std::string> warnings;
  std::vector<std::pair<double, double>> master_curve;
};

namespace detail {

/// Linear-interpolated quantile of sorted data.
inline double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted.front();
  const double pos = q * double(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - double(lo)) * (sorted[hi] - sorted[lo]);
}

using Pchip = boost::math::interpolators::pchip<std::vector<double>>;

inline Pchip rescaled_interpolant(const std::vector<ScalingRecord>& curve, const Exponents& e) {
  std::vector<double> x, y;
  for (const auto& r : curve) {
    if (!x.empty() && r.g <= x.back()) continue;  // duplicate G: keep the first
    x.push_back(r.g);
    y.push_back(r.parity * std::pow(r.length, e.beta / e.nu));
  }
  if (x.size() < 4) throw Error("find_crossing: size " + curve.front().size_label + " has fewer than 4 G points");
  return Pchip(std::move(x), std::move(y));
}

}  // namespace detail

/// Lowest crossing of the rescaled parity curves for every pair of sizes;
/// G_c is the median over pairs and the uncertainty their interquartile range.
inline CollapseResult find_crossing(const ScalingDataset& ds, int scan_points = 2000) {
  const auto curves = ds.curves();
  if (curves.size() < 2) throw Error("find_crossing: need at least 2 sizes, have " + std::to_string(curves.size()));
  CollapseResult res;
  std::vector<std::string> labels;
  std::vector<detail::Pchip> interp;
  std::vector<std::pair<double, double>> range;
  for (const auto& [label, c] : curves) {
    labels.push_back(label);
    interp.push_back(detail::rescaled_interpolant(c, ds.exponents));
    range.emplace_back(c.front().g, c.back().g);
  }
  for (std::size_t a = 0; a < labels.size(); ++a)
    for (std::size_t b = a + 1; b < labels.size(); ++b) {
      const double lo = std::max(range[a].first, range[b].first);
      const double hi = std::min(range[a].second, range[b].second);
      auto diff = [&](double g) { return interp[a](g) - interp[b](g); };
      bool found = false;
      if (hi > lo) {
        double g0 = lo, f0 = diff(lo);
        for (int k = 1; k <= scan_points && !found; ++k) {
          const double g1 = lo + (hi - lo) * double(k) / scan_points;
          const double f1 = diff(g1);
          if (f0 == 0.0 && k == 1 && std::abs(diff(lo + 0.5 * (g1 - lo))) > 0.0) {
            res.crossings.push_back({labels[a], labels[b], lo});
            found = true;
          } else if (f0 * f1 < 0.0) {
            std::uintmax_t it = 200;
            auto [x0, x1] = boost::math::tools::toms748_solve(diff, g0, g1, f0, f1,
                                                              boost::math::tools::eps_tolerance<double>(50), it);
            res.crossings.push_back({labels[a], labels[b], 0.5 * (x0 + x1)});
            found = true;
          }
          g0 = g1;
          f0 = f1;
        }
      }
      if (!found) res.warnings.push_back("no crossing between sizes " + labels[a] + " and " + labels[b]);
    }
  if (res.crossings.empty()) throw Error("find_crossing: no pair of rescaled curves crosses in the swept range");
  std::vector<double> g;
  for (const auto& c : res.crossings) g.push_back(c.g);
  std::sort(g.begin(), g.end());
  res.gc = detail::quantile(g, 0.5);
  res.uncertainty = detail::quantile(g, 0.75) - detail::quantile(g, 0.25);
  return res;
}

namespace detail {

/// Cubic B-spline basis on uniform knots covering [lo, hi] with `segments` spans.
inline Eigen::MatrixXd bspline_design(const std::vector<double>& x, double lo, double hi, int segments) {
  const int deg = 3;
  const int nb = segments + deg;
  const double h = (hi - lo) / segments;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.size()), nb);
  for (std::size_t r = 0; r < x.size(); ++r) {
    double u = (x[r] - lo) / h;
    int span = std::clamp(static_cast<int>(std::floor(u)), 0, segments - 1);
    const double t = u - span;
    // uniform cubic B-spline blending functions
    const double w[4] = {(1 - t) * (1 - t) * (1 - t) / 6.0, (3 * t * t * t - 6 * t * t + 4) / 6.0,
                         (-3 * t * t * t + 3 * t * t + 3 * t + 1) / 6.0, t * t * t / 6.0};
    for (int k = 0; k < 4; ++k) b(static_cast<Eigen::Index>(r), span + k) = w[k];
  }
  return b;
}

}  // namespace detail

struct SplineFit {
  double residual = 0.0;
  bool trivial = false;
  std::vector<std::pair<double, double>> samples;
};

/// Penalized cubic spline (second-difference penalty) through all rescaled
/// points pooled over sizes. Residual = mean squared deviation / var(y).
inline SplineFit collapse_fit(const ScalingDataset& ds, double gc, double lambda = 1e-8, int max_segments = 24) {
  const auto pts = rescale(ds, gc);
  if (pts.size() < 8) throw Error("collapse_quality: need at least 8 pooled points, have " + std::to_string(pts.size()));
  SplineFit fit;
  if (ds.curves().size() < 2) {
    fit.trivial = true;
    return fit;
  }
  std::vector<double> x, y;
  for (const auto& p : pts) {
    x.push_back(p.x);
    y.push_back(p.y);
  }
  const double lo = *std::min_element(x.begin(), x.end());
  const double hi = *std::max_element(x.begin(), x.end());
  const int segments = std::clamp(static_cast<int>(pts.size() / 4), 1, max_segments);
  const Eigen::MatrixXd b = detail::bspline_design(x, lo, hi > lo ? hi : lo + 1.0, segments);
  const Eigen::Index nb = b.cols();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(std::max<Eigen::Index>(nb - 2, 0), nb);
  for (Eigen::Index i = 0; i + 2 < nb; ++i) {
    d(i, i) = 1.0;
    d(i, i + 1) = -2.0;
    d(i, i + 2) = 1.0;
  }
  const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  Eigen::MatrixXd a(b.rows() + d.rows(), nb);
  a << b, std::sqrt(lambda * double(pts.size())) * d;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(a.rows());
  rhs.head(b.rows()) = yv;
  const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(rhs);
  const Eigen::VectorXd f = b * coef;
  const double mean = yv.mean();
  const double var = (yv.array() - mean).square().mean();
  const double msd = (yv - f).squaredNorm() / double(yv.size());
  fit.residual = var > 0.0 ? msd / var : msd;
  const int ns = 100;
  std::vector<double> xs;
  for (int k = 0; k <= ns; ++k) xs.push_back(lo + (hi - lo) * k / ns);
  const Eigen::VectorXd fs = detail::bspline_design(xs, lo, hi > lo ? hi : lo + 1.0, segments) * coef;
  for (int k = 0; k <= ns; ++k) fit.samples.emplace_back(xs[static_cast<std::size_t>(k)], fs(k));
  return fit;
}

inline double collapse_quality(const ScalingDataset& ds, double gc) { return collapse_fit(ds, gc).residual; }

struct EntropyPeak {
  std::string size_label;
  int n_sites = 0;
  double g_peak = 0.0;
  double s_max = 0.0;
};

struct EntropyPeakFit {
  double kappa = 0.0;
  double prefactor = 0.0;
  double r2 = 0.0;
  bool underdetermined = false;
  std::vector<EntropyPeak> peaks;
};

/// Peak of S(G) per size by 3-point quadratic interpolation around the
/// largest sample (the sample itself when it sits on the grid edge).
inline EntropyPeak entropy_peak(const std::vector<ScalingRecord>& curve) {
  if (curve.empty()) throw Error("entropy_peak: empty curve");
  std::size_t k = 0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    if (curve[i].entropy > curve[k].entropy) k = i;
  EntropyPeak p{curve[k].size_label, curve[k].n_sites, curve[k].g, curve[k].entropy};
  if (k == 0 || k + 1 == curve.size()) return p;
  const double x0 = curve[k - 1].g, x1 = curve[k].g, x2 = curve[k + 1].g;
  const double y0 = curve[k - 1].entropy, y1 = curve[k].entropy, y2 = curve[k + 1].entropy;
  // Lagrange quadratic through the three samples
  const double d01 = (y1 - y0) / (x1 - x0), d12 = (y2 - y1) / (x2 - x1);
  const double c2 = (d12 - d01) / (x2 - x0);
  if (c2 >= 0.0) return p;
  const double c1 = d01 - c2 * (x0 + x1);
  const double xv = -c1 / (2.0 * c2);
  if (xv < x0 || xv > x2) return p;
  p.g_peak = xv;
  p.s_max = y0 + d01 * (xv - x0) + c2 * (xv - x0) * (xv - x1);
  return p;
}

/// OLS fit of log max(S) against log N.
inline EntropyPeakFit fit_entropy_peak(const std::vector<EntropyPeak>& peaks) {
  if (peaks.size() < 2) throw Error("fit_entropy_peak: need at least 2 sizes");
  EntropyPeakFit f;
  f.peaks = peaks;
  f.underdetermined = peaks.size() < 3;
  const auto n = static_cast<double>(peaks.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : peaks) {
    if (!(p.s_max > 0.0)) throw Error("fit_entropy_peak: non-positive peak entropy for size " + p.size_label);
    const double x = std::log(double(p.n_sites)), y = std::log(p.s_max);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  if (den <= 0.0) throw Error("fit_entropy_peak: all sizes have the same site count");
  f.kappa = (n * sxy - sx * sy) / den;
  const double b = (sy - f.kappa * sx) / n;
  f.prefactor = std::exp(b);
  double ss_res = 0, ss_tot = 0;
  for (const auto& p : peaks) {
    const double x = std::log(double(p.n_sites)), y = std::log(p.s_max);
    ss_res += std::pow(y - (b + f.kappa * x), 2);
    ss_tot += std::pow(y - sy / n, 2);
  }
  f.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

inline EntropyPeakFit fit_entropy_peak(const ScalingDataset& ds) {
  std::vector<EntropyPeak> peaks;
  for (const auto& [label, c] : ds.curves()) peaks.push_back(entropy_peak(c));
  return fit_entropy_peak(peaks);
}

}  // namespace qdbh
