#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qdbh/fock.hpp"

namespace qdbh {

/// Unordered nearest-neighbour pair with multiplicity weight (2 for the
/// doubled bond of a periodic extent-2 axis).
struct Bond {
  int i = 0;
  int j = 0;
  double weight = 1.0;
  friend bool operator==(const Bond&, const Bond&) = default;
};

/// Periodic 1D chain or 2D rectangle. Sites are numbered x * ly + y.
class LatticeGeometry {
 public:
  static LatticeGeometry chain(int length) {
    if (length < 1) throw DimensionError("chain length must be >= 1");
    return LatticeGeometry(1, length, 1);
  }
  static LatticeGeometry rectangle(int lx, int ly) {
    if (lx < 1 || ly < 1) throw DimensionError("rectangle extents must be >= 1");
    return LatticeGeometry(2, lx, ly);
  }

  int dimensionality() const { return dim_; }
  int lx() const { return lx_; }
  int ly() const { return ly_; }
  int n_sites() const { return lx_ * ly_; }
  const std::vector<Bond>& bonds() const { return bonds_; }

  int site(int x, int y) const { return x * ly_ + y; }
  std::pair<int, int> coords(int s) const { return {s / ly_, s % ly_}; }

  /// Finite-size length entering the scaling analysis: N in 1D, sqrt(N) in 2D.
  double linear_size() const { return dim_ == 1 ? double(lx_) : std::sqrt(double(n_sites())); }

  std::string label() const {
    return dim_ == 1 ? std::to_string(lx_) : std::to_string(lx_) + "x" + std::to_string(ly_);
  }

  /// Parses "4" (chain) or "2x3" (rectangle).
  static LatticeGeometry parse(const std::string& text, int dimensionality) {
    auto pos = text.find('x');
    try {
      if (pos == std::string::npos) {
        if (dimensionality != 1) throw ConfigError("2D lattice size must be written LxxLy, got '" + text + "'");
        return chain(std::stoi(text));
      }
      if (dimensionality != 2) throw ConfigError("1D lattice size must be a single integer, got '" + text + "'");
      return rectangle(std::stoi(text.substr(0, pos)), std::stoi(text.substr(pos + 1)));
    } catch (const std::invalid_argument&) {
      throw ConfigError("cannot parse lattice size '" + text + "'");
    }
  }

  /// Weighted neighbour count of a site (2d for every site when all extents >= 2).
  double coordination(int s) const {
    double c = 0.0;
    for (const auto& b : bonds_)
      if (b.i == s || b.j == s) c += b.weight;
    return c;
  }

  /// Bonds with both ends in `sites`, re-indexed to positions within `sites`.
  std::vector<Bond> induced_bonds(const std::vector<int>& sites) const {
    std::map<int, int> local;
    for (std::size_t k = 0; k < sites.size(); ++k) local[sites[k]] = static_cast<int>(k);
    std::vector<Bond> out;
    for (const auto& b : bonds_) {
      auto a = local.find(b.i), c = local.find(b.j);
      if (a != local.end() && c != local.end()) out.push_back({a->second, c->second, b.weight});
    }
    return out;
  }

 private:
  LatticeGeometry(int dim, int lx, int ly) : dim_(dim), lx_(lx), ly_(ly) {
    std::map<std::pair<int, int>, double> acc;
    auto add = [&](int a, int b) {
      if (a == b) return;
      acc[{std::min(a, b), std::max(a, b)}] += 1.0;
    };
    for (int x = 0; x < lx_; ++x)
      for (int y = 0; y < ly_; ++y) {
        if (lx_ >= 2) add(site(x, y), site((x + 1) % lx_, y));
        if (dim_ == 2 && ly_ >= 2) add(site(x, y), site(x, (y + 1) % ly_));
      }
    for (const auto& [pair, w] : acc) bonds_.push_back({pair.first, pair.second, w});
  }

  int dim_ = 1;
  int lx_ = 1;
  int ly_ = 1;
  std::vector<Bond> bonds_;
};

/// Parameters of the quadratically driven dissipative Bose-Hubbard model, all
/// in units of the one-photon loss rate.
struct ModelParams {
  double delta = 0.0;  ///< detuning
  double u = 0.0;      ///< Kerr energy
  cplx g = 0.0;        ///< two-photon drive amplitude
  double j_hop = 0.0;  ///< hopping
  double gamma = 1.0;  ///< one-photon loss
  double eta = 0.0;    ///< two-photon loss
  /// When set, delta = -|J| and eta = gamma are enforced.
  bool resonant_convention = false;

  static ModelParams convention(double u, double j_hop, double g, double gamma = 1.0) {
    ModelParams p;
    p.u = u;
    p.j_hop = j_hop;
    p.g = g;
    p.gamma = gamma;
    p.resonant_convention = true;
    return p.normalized();
  }

  /// Copy with the convention constraints applied (no-op when the flag is off).
  ModelParams normalized() const {
    ModelParams p = *this;
    if (p.resonant_convention) {
      p.delta = -std::abs(p.j_hop);
      p.eta = p.gamma;
    }
    return p;
  }

  std::vector<std::string> violations() const {
    std::vector<std::string> v;
    if (!(gamma > 0.0)) v.push_back("gamma must be > 0");
    if (!(eta >= 0.0)) v.push_back("eta must be >= 0");
    if (!(u >= 0.0)) v.push_back("u must be >= 0");
    if (resonant_convention) {
      if (std::abs(delta + std::abs(j_hop)) > 1e-12) v.push_back("convention requires delta = -|J|");
      if (std::abs(eta - gamma) > 1e-12) v.push_back("convention requires eta = gamma");
    }
    return v;
  }

  void validate() const {
    auto v = violations();
    if (v.empty()) return;
    std::string msg = "invalid model parameters:";
    for (const auto& s : v) msg += " " + s + ";";
    throw ConfigError(msg);
  }
};

/// Builds H for `n_sites` sites joined by `bonds`; `coordination_dim` is the d
/// in the J/(2d) hopping prefactor.
inline SparseOperator build_hamiltonian(const ModelParams& params, int n_sites, const std::vector<Bond>& bonds,
                                        int coordination_dim, const FockSpace& fock) {
  const std::int64_t dim = fock.tensor_dim(n_sites);
  const auto a = annihilation_op(fock);
  const CsrMat& am = a.matrix();
  const CsrMat ad = am.adjoint();
  const CsrMat a2 = am * am;
  const CsrMat ad2 = ad * ad;
  CsrMat onsite = -params.delta * CsrMat(ad * am) + (params.u / 2.0) * CsrMat(ad2 * a2) + (params.g / 2.0) * ad2 +
                  (std::conj(params.g) / 2.0) * a2;
  CsrMat h(dim, dim);
  for (int s = 0; s < n_sites; ++s) h += embed_site_op({onsite, false}, s, n_sites, fock.dim_cap).matrix();
  if (params.j_hop != 0.0) {
    std::vector<CsrMat> sites_a;
    sites_a.reserve(static_cast<std::size_t>(n_sites));
    for (int s = 0; s < n_sites; ++s) sites_a.push_back(embed_site_op(a, s, n_sites, fock.dim_cap).matrix());
    for (const auto& b : bonds) {
      const double c = -params.j_hop / (2.0 * coordination_dim) * b.weight;
      CsrMat hop = CsrMat(sites_a[b.i].adjoint()) * sites_a[b.j];
      h += c * CsrMat(hop + CsrMat(hop.adjoint()));
    }
  }
  return SparseOperator::hermitian_checked(std::move(h));
}

inline SparseOperator build_hamiltonian(const ModelParams& params, const LatticeGeometry& geom,
                                        const FockSpace& fock) {
  return build_hamiltonian(params, geom.n_sites(), geom.bonds(), geom.dimensionality(), fock);
}

/// sqrt(gamma) a_j for every site, then sqrt(eta) a_j^2 (omitted when eta = 0).
inline std::vector<SparseOperator> build_jump_operators(const ModelParams& params, int n_sites,
                                                        const FockSpace& fock) {
  params.validate();
  fock.tensor_dim(n_sites);
  const auto a = annihilation_op(fock);
  std::vector<SparseOperator> jumps;
  for (int s = 0; s < n_sites; ++s)
    jumps.push_back(std::sqrt(params.gamma) * embed_site_op(a, s, n_sites, fock.dim_cap));
  if (params.eta > 0.0) {
    SparseOperator a2{CsrMat(a.matrix() * a.matrix()), false};
    for (int s = 0; s < n_sites; ++s)
      jumps.push_back(std::sqrt(params.eta) * embed_site_op(a2, s, n_sites, fock.dim_cap));
  }
  return jumps;
}

inline std::vector<SparseOperator> build_jump_operators(const ModelParams& params, const LatticeGeometry& geom,
                                                        const FockSpace& fock) {
  return build_jump_operators(params, geom.n_sites(), fock);
}

}  // namespace qdbh
