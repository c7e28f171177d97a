#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qdbh/lattice.hpp"
#include "qdbh/liouvillian.hpp"
#include "qdbh/observables.hpp"

namespace qdbh {

struct CornerTooSmall : SolverError {
  double discarded_weight = 0.0;
  CornerTooSmall(const std::string& what, double discarded) : SolverError(what), discarded_weight(discarded) {}
};

/// Eigendecomposition of a density matrix, weights descending. When a parity
/// diagonal is supplied the decomposition is done sector by sector so every
/// eigenvector has definite parity.
struct SpectralFrame {
  RealVec weights;
  DenseMat vectors;
  RealVec parity;  ///< +1/-1 per eigenvector, or +1 everywhere if unknown
};

inline SpectralFrame spectral_frame(const DensityMatrix& rho, const RealVec* parity = nullptr) {
  const Eigen::Index d = rho.dim();
  std::vector<double> w;
  std::vector<DenseVec> vecs;
  std::vector<double> par;
  auto decompose = [&](const std::vector<Eigen::Index>& idx, double sign) {
    if (idx.empty()) return;
    const auto m = static_cast<Eigen::Index>(idx.size());
    DenseMat sub(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b) sub(a, b) = rho.matrix()(idx[a], idx[b]);
    Eigen::SelfAdjointEigenSolver<DenseMat> es(0.5 * (sub + sub.adjoint()));
    for (Eigen::Index k = 0; k < m; ++k) {
      DenseVec v = DenseVec::Zero(d);
      for (Eigen::Index a = 0; a < m; ++a) v(idx[a]) = es.eigenvectors()(a, k);
      w.push_back(es.eigenvalues()(k));
      vecs.push_back(std::move(v));
      par.push_back(sign);
    }
  };
  if (parity) {
    std::vector<Eigen::Index> even, odd;
    for (Eigen::Index i = 0; i < d; ++i) ((*parity)(i) > 0 ? even : odd).push_back(i);
    decompose(even, 1.0);
    decompose(odd, -1.0);
  } else {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(d));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    decompose(all, 1.0);
  }
  std::vector<std::size_t> order(w.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return w[a] > w[b]; });
  SpectralFrame f;
  f.weights.resize(d);
  f.vectors.resize(d, d);
  f.parity.resize(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const auto o = order[static_cast<std::size_t>(k)];
    f.weights(k) = w[o];
    f.vectors.col(k) = vecs[o];
    f.parity(k) = par[o];
  }
  return f;
}

/// Orthonormal product basis |phi_i>_A (x) |psi_j>_B of the most probable
/// pairs, p_i * q_j descending.
struct CornerBasis {
  struct Pair {
    Eigen::Index a = 0;
    Eigen::Index b = 0;
    double weight = 0.0;
  };
  std::vector<Pair> pairs;
  Eigen::Index requested = 0;  ///< M asked for
  Eigen::Index dim_a = 0;
  Eigen::Index dim_b = 0;
  DenseMat frame_a;  ///< eigenvectors of rho_A (columns)
  DenseMat frame_b;
  RealVec parity_a;
  RealVec parity_b;
  double kept_weight = 0.0;
  double discarded_weight = 0.0;
  BasisId id = 0;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(pairs.size()); }
  bool exact() const { return dim() == dim_a * dim_b; }

  RealVec parity() const {
    RealVec p(dim());
    for (Eigen::Index k = 0; k < dim(); ++k) p(k) = parity_a(pairs[k].a) * parity_b(pairs[k].b);
    return p;
  }
};

/// Relative tolerance under which two product weights count as degenerate.
inline constexpr double kTieTolerance = 1e-9;
/// Weights below this fraction of the largest are numerically zero and never
/// expand a tie.
inline constexpr double kWeightFloor = 1e-14;

/// Keeps the M product states with the largest p_i q_j. A degenerate multiplet
/// straddling the cut is kept whole.
inline CornerBasis merge_spaces(const SpectralFrame& fa, const SpectralFrame& fb, Eigen::Index m) {
  if (m < 1) throw Error("merge_spaces: corner dimension M must be >= 1");
  CornerBasis cb;
  cb.requested = m;
  cb.dim_a = fa.weights.size();
  cb.dim_b = fb.weights.size();
  cb.frame_a = fa.vectors;
  cb.frame_b = fb.vectors;
  cb.parity_a = fa.parity;
  cb.parity_b = fb.parity;
  cb.id = next_basis_id();
  std::vector<CornerBasis::Pair> all;
  all.reserve(static_cast<std::size_t>(cb.dim_a * cb.dim_b));
  for (Eigen::Index i = 0; i < cb.dim_a; ++i)
    for (Eigen::Index j = 0; j < cb.dim_b; ++j)
      all.push_back({i, j, std::max(fa.weights(i), 0.0) * std::max(fb.weights(j), 0.0)});
  std::stable_sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return x.weight > y.weight; });
  double total = 0.0;
  for (const auto& p : all) total += p.weight;
  auto keep = static_cast<std::size_t>(std::min<Eigen::Index>(m, static_cast<Eigen::Index>(all.size())));
  const double wmax = all.empty() ? 0.0 : all.front().weight;
  if (keep > 0 && keep < all.size()) {
    const double last = all[keep - 1].weight;
    if (last > kWeightFloor * wmax)
      while (keep < all.size() && std::abs(all[keep].weight - last) <= kTieTolerance * last) ++keep;
  }
  cb.pairs.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep));
  for (const auto& p : cb.pairs) cb.kept_weight += p.weight;
  cb.discarded_weight = std::max(0.0, total - cb.kept_weight);
  return cb;
}

inline CornerBasis merge_spaces(const DensityMatrix& rho_a, const DensityMatrix& rho_b, Eigen::Index m,
                                const RealVec* parity_a = nullptr, const RealVec* parity_b = nullptr) {
  return merge_spaces(spectral_frame(rho_a, parity_a), spectral_frame(rho_b, parity_b), m);
}

enum class Side { A, B };

/// <k|O (x) I|l> (side A) or <k|I (x) O|l> (side B) on the corner, for O given
/// in the side's eigenframe.
inline DenseMat project_framed(const DenseMat& framed, Side side, const CornerBasis& cb) {
  const Eigen::Index m = cb.dim();
  DenseMat out = DenseMat::Zero(m, m);
  for (Eigen::Index k = 0; k < m; ++k)
    for (Eigen::Index l = 0; l < m; ++l) {
      const auto& pk = cb.pairs[static_cast<std::size_t>(k)];
      const auto& pl = cb.pairs[static_cast<std::size_t>(l)];
      if (side == Side::A) {
        if (pk.b == pl.b) out(k, l) = framed(pk.a, pl.a);
      } else if (pk.a == pl.a) {
        out(k, l) = framed(pk.b, pl.b);
      }
    }
  return out;
}

/// <k|OA (x) OB|l> on the corner for framed OA, OB.
inline DenseMat project_framed_pair(const DenseMat& framed_a, const DenseMat& framed_b, const CornerBasis& cb) {
  const Eigen::Index m = cb.dim();
  DenseMat out(m, m);
  for (Eigen::Index l = 0; l < m; ++l)
    for (Eigen::Index k = 0; k < m; ++k) {
      const auto& pk = cb.pairs[static_cast<std::size_t>(k)];
      const auto& pl = cb.pairs[static_cast<std::size_t>(l)];
      out(k, l) = framed_a(pk.a, pl.a) * framed_b(pk.b, pl.b);
    }
  return out;
}

inline DenseMat to_frame(const DenseMat& op, Side side, const CornerBasis& cb) {
  const DenseMat& u = side == Side::A ? cb.frame_a : cb.frame_b;
  return u.adjoint() * op * u;
}

/// Projects an operator written in the A (or B) block basis onto the corner.
inline SparseOperator project_operator(const SparseOperator& op, Side side, const CornerBasis& cb) {
  const Eigen::Index expect = side == Side::A ? cb.dim_a : cb.dim_b;
  if (op.dim() != expect) throw DimensionError("project_operator: operator dimension does not match the side");
  DenseMat p = project_framed(to_frame(op.dense(), side, cb), side, cb);
  if (op.hermitian()) p = 0.5 * (p + p.adjoint());
  return {CsrMat(p.sparseView(cplx{0.0}, kDropTolerance)), op.hermitian(), cb.id};
}

/// Rectangle shape of a block; sub-blocks are placed with their origin at (0,0)
/// of the target lattice, which is valid by translation invariance.
struct Shape {
  int wx = 1;
  int wy = 1;
  int n_sites() const { return wx * wy; }
  std::string label() const { return std::to_string(wx) + "x" + std::to_string(wy); }
  friend bool operator==(const Shape&, const Shape&) = default;
  friend auto operator<=>(const Shape&, const Shape&) = default;
};

struct MergeStep {
  Shape left;
  Shape right;
  Shape result;
  int axis = 0;  ///< 0: right block placed after left along x, 1: along y
  Eigen::Index corner_dim = 0;
};

/// Order of block merges, children before parents.
struct MergeSchedule {
  Shape target;
  std::vector<Shape> leaves;
  std::vector<MergeStep> steps;

  /// Repeated halving of the longer axis down to blocks of at most
  /// `leaf_sites` sites; every step uses corner dimension `corner_dim`.
  static MergeSchedule build(const LatticeGeometry& geom, Eigen::Index corner_dim, int leaf_sites = 2) {
    if (leaf_sites < 1) throw ConfigError("leaf_sites must be >= 1");
    MergeSchedule s;
    s.target = {geom.lx(), geom.ly()};
    std::map<Shape, bool> seen;
    auto visit = [&](auto&& self, Shape sh) -> void {
      if (seen.count(sh)) return;
      seen[sh] = true;
      if (sh.n_sites() <= leaf_sites) {
        s.leaves.push_back(sh);
        return;
      }
      const int axis = sh.wx >= sh.wy ? 0 : 1;
      const int w = axis == 0 ? sh.wx : sh.wy;
      Shape left = sh, right = sh;
      (axis == 0 ? left.wx : left.wy) = (w + 1) / 2;
      (axis == 0 ? right.wx : right.wy) = w / 2;
      self(self, left);
      self(self, right);
      s.steps.push_back({left, right, sh, axis, corner_dim});
    };
    visit(visit, s.target);
    return s;
  }

  void set_corner_dim(Eigen::Index m) {
    for (auto& st : steps) st.corner_dim = m;
  }

  /// Final shape is the target and every merge uses shapes available earlier.
  bool valid() const {
    std::vector<Shape> avail = leaves;
    auto has = [&](const Shape& x) { return std::find(avail.begin(), avail.end(), x) != avail.end(); };
    for (const auto& st : steps) {
      if (!has(st.left) || !has(st.right)) return false;
      Shape expect = st.left;
      if (st.axis == 0) {
        if (st.left.wy != st.right.wy) return false;
        expect.wx += st.right.wx;
      } else {
        if (st.left.wx != st.right.wx) return false;
        expect.wy += st.right.wy;
      }
      if (!(expect == st.result)) return false;
      avail.push_back(st.result);
    }
    return has(target);
  }
};

/// A solved block: its steady state plus every operator needed to merge it or
/// evaluate observables, all written in the block basis.
struct Block {
  Shape shape;
  /// Site coordinates in tensor order (site 0 slowest).
  std::vector<std::pair<int, int>> coords;
  BasisId basis = kFockBasis;
  DenseMat h;
  std::vector<DenseMat> a, a2, n;
  RealVec parity;
  DensityMatrix rho;
  double residual = 0.0;
  /// Basis vectors as columns in the Fock product space of `coords`, kept
  /// only while that space is small.
  std::optional<DenseMat> embedding;

  Eigen::Index dim() const { return h.rows(); }
  int n_sites() const { return static_cast<int>(coords.size()); }
};

struct StepDiagnostics {
  std::string shape;
  Eigen::Index product_dim = 0;
  Eigen::Index requested_dim = 0;
  Eigen::Index corner_dim = 0;
  double kept_weight = 0.0;
  double discarded_weight = 0.0;
  double residual = 0.0;
  int iterations = 0;
  double seconds = 0.0;
};

struct CornerOptions {
  /// A step whose discarded weight exceeds this raises CornerTooSmall.
  double max_discarded_weight = 1.0;
  double tol = 1e-8;
  KrylovOptions krylov{};
  std::int64_t embedding_cap = 10000;
};

struct CornerResult {
  SteadyStateResult steady;
  Block block;
  std::vector<StepDiagnostics> steps;
  /// True when no step truncated the product space.
  bool exact = true;
};

namespace detail {

inline double lindblad_scale(const LindbladForm& form) { return form.h_eff().cwiseAbs().maxCoeff(); }

inline std::vector<DenseMat> corner_jumps(const Block& b, const ModelParams& p) {
  std::vector<DenseMat> j;
  for (const auto& a : b.a) j.push_back(std::sqrt(p.gamma) * a);
  if (p.eta > 0.0)
    for (const auto& a2 : b.a2) j.push_back(std::sqrt(p.eta) * a2);
  return j;
}

/// Steady state of a block in its own basis by preconditioned GMRES.
inline SteadyStateResult solve_block(const Block& b, const ModelParams& p, const CornerOptions& opt,
                                     const DenseMat* guess) {
  const auto t0 = Clock::now();
  LindbladForm form(b.h, corner_jumps(b, p));
  auto apply = [&](const DenseVec& v) { return form.apply_vec(v); };
  auto out = solve_steady_krylov(apply, form.h_eff(), guess, opt.krylov);
  SteadyStateResult res;
  res.rho = DensityMatrix::from_raw(out.rho, b.basis);
  res.residual = form.apply_vec(vectorize(res.rho.matrix())).norm();
  res.method = "corner";
  res.iterations = out.report.iterations;
  res.wall_seconds = seconds_since(t0);
  if (res.residual > opt.tol * lindblad_scale(form))
    throw NotConverged("corner block solve: residual " + std::to_string(res.residual) + " above tolerance",
                       res.residual);
  return res;
}

inline std::vector<int> global_sites(const LatticeGeometry& geom, const std::vector<std::pair<int, int>>& coords) {
  std::vector<int> s;
  for (const auto& [x, y] : coords) s.push_back(geom.site(x, y));
  return s;
}

inline std::vector<std::pair<int, int>> shape_coords(const Shape& sh) {
  std::vector<std::pair<int, int>> c;
  for (int x = 0; x < sh.wx; ++x)
    for (int y = 0; y < sh.wy; ++y) c.emplace_back(x, y);
  return c;
}

inline Block solve_leaf(const Shape& sh, const LatticeGeometry& geom, const ModelParams& p, const FockSpace& fock,
                        const CornerOptions& opt) {
  Block b;
  b.shape = sh;
  b.coords = shape_coords(sh);
  const int n = sh.n_sites();
  const auto bonds = geom.induced_bonds(global_sites(geom, b.coords));
  b.h = build_hamiltonian(p, n, bonds, geom.dimensionality(), fock).dense();
  const auto a = annihilation_op(fock);
  const SparseOperator a2{CsrMat(a.matrix() * a.matrix()), false};
  const auto nop = number_op(fock);
  for (int s = 0; s < n; ++s) {
    b.a.push_back(embed_site_op(a, s, n, fock.dim_cap).dense());
    b.a2.push_back(embed_site_op(a2, s, n, fock.dim_cap).dense());
    b.n.push_back(embed_site_op(nop, s, n, fock.dim_cap).dense());
  }
  b.parity = parity_op(fock, n).dense().diagonal().real();
  b.basis = next_basis_id();
  if (b.dim() <= opt.embedding_cap) b.embedding = DenseMat::Identity(b.dim(), b.dim());
  auto res = solve_block(b, p, opt, nullptr);
  b.rho = res.rho;
  b.residual = res.residual;
  return b;
}

inline Block merge_blocks(const Block& left, const Block& right, const MergeStep& step, const LatticeGeometry& geom,
                          const ModelParams& p, const CornerOptions& opt, StepDiagnostics& diag) {
  const auto t0 = Clock::now();
  const CornerBasis cb = merge_spaces(left.rho, right.rho, step.corner_dim, &left.parity, &right.parity);
  diag.shape = step.result.label();
  diag.product_dim = left.dim() * right.dim();
  diag.requested_dim = step.corner_dim;
  diag.corner_dim = cb.dim();
  diag.kept_weight = cb.kept_weight;
  diag.discarded_weight = cb.discarded_weight;
  if (cb.discarded_weight > opt.max_discarded_weight)
    throw CornerTooSmall("corner too small at " + diag.shape + ": discarded weight " +
                             std::to_string(cb.discarded_weight),
                         cb.discarded_weight);

  Block m;
  m.shape = step.result;
  m.coords = left.coords;
  const int dx = step.axis == 0 ? step.left.wx : 0;
  const int dy = step.axis == 1 ? step.left.wy : 0;
  for (const auto& [x, y] : right.coords) m.coords.emplace_back(x + dx, y + dy);
  m.basis = cb.id;

  std::vector<DenseMat> fa_a, fb_a;
  for (const auto& op : left.a) fa_a.push_back(to_frame(op, Side::A, cb));
  for (const auto& op : right.a) fb_a.push_back(to_frame(op, Side::B, cb));

  m.h = project_framed(to_frame(left.h, Side::A, cb), Side::A, cb) +
        project_framed(to_frame(right.h, Side::B, cb), Side::B, cb);
  // Bonds crossing the seam, including periodic closure once an axis is complete.
  const auto gl = global_sites(geom, left.coords);
  const auto gr = global_sites(geom, right.coords);
  const auto merged_sites = global_sites(geom, m.coords);
  const auto bonds = geom.induced_bonds(merged_sites);
  const auto n_left = static_cast<int>(gl.size());
  for (const auto& bd : bonds) {
    const bool i_left = bd.i < n_left, j_left = bd.j < n_left;
    if (i_left == j_left) continue;
    const int li = i_left ? bd.i : bd.j;
    const int rj = (i_left ? bd.j : bd.i) - n_left;
    const double c = -p.j_hop / (2.0 * geom.dimensionality()) * bd.weight;
    // a_i^dag (x) a_j + a_i (x) a_j^dag
    DenseMat hop = project_framed_pair(fa_a[li].adjoint(), fb_a[rj], cb);
    m.h += c * (hop + hop.adjoint());
  }
  m.h = 0.5 * (m.h + m.h.adjoint());

  for (std::size_t s = 0; s < left.a.size(); ++s) {
    m.a.push_back(project_framed(fa_a[s], Side::A, cb));
    m.a2.push_back(project_framed(to_frame(left.a2[s], Side::A, cb), Side::A, cb));
    m.n.push_back(project_framed(to_frame(left.n[s], Side::A, cb), Side::A, cb));
  }
  for (std::size_t s = 0; s < right.a.size(); ++s) {
    m.a.push_back(project_framed(fb_a[s], Side::B, cb));
    m.a2.push_back(project_framed(to_frame(right.a2[s], Side::B, cb), Side::B, cb));
    m.n.push_back(project_framed(to_frame(right.n[s], Side::B, cb), Side::B, cb));
  }
  m.parity = cb.parity();

  if (left.embedding && right.embedding &&
      left.embedding->rows() * right.embedding->rows() <= opt.embedding_cap) {
    const DenseMat ea = *left.embedding * cb.frame_a;
    const DenseMat eb = *right.embedding * cb.frame_b;
    DenseMat e(ea.rows() * eb.rows(), cb.dim());
    for (Eigen::Index k = 0; k < cb.dim(); ++k) {
      const auto& pr = cb.pairs[static_cast<std::size_t>(k)];
      for (Eigen::Index r = 0; r < ea.rows(); ++r) e.col(k).segment(r * eb.rows(), eb.rows()) = ea(r, pr.a) * eb.col(pr.b);
    }
    m.embedding = std::move(e);
  }

  DenseMat guess = DenseMat::Zero(cb.dim(), cb.dim());
  for (Eigen::Index k = 0; k < cb.dim(); ++k) guess(k, k) = cb.pairs[static_cast<std::size_t>(k)].weight;
  if (guess.trace().real() > 0.0)
    guess /= guess.trace().real();
  else
    guess.setIdentity();
  auto res = solve_block(m, p, opt, &guess);
  m.rho = res.rho;
  m.residual = res.residual;
  diag.residual = res.residual;
  diag.iterations = res.iterations;
  diag.seconds = seconds_since(t0);
  return m;
}

}  // namespace detail

/// Corner-space renormalization: exact steady states of the leaf blocks,
/// then repeated merge / truncate / re-solve up to the full lattice.
inline CornerResult corner_steady_state(const LatticeGeometry& geom, const ModelParams& params, const FockSpace& fock,
                                        const MergeSchedule& schedule, const CornerOptions& opt = {}) {
  const auto t0 = detail::Clock::now();
  const ModelParams p = params.normalized();
  p.validate();
  if (!(schedule.target == Shape{geom.lx(), geom.ly()}) || !schedule.valid())
    throw ConfigError("merge schedule does not terminate at the requested lattice");
  std::map<Shape, Block> solved;
  for (const auto& leaf : schedule.leaves) solved[leaf] = detail::solve_leaf(leaf, geom, p, fock, opt);
  CornerResult out;
  int iterations = 0;
  for (const auto& step : schedule.steps) {
    StepDiagnostics diag;
    Block merged = detail::merge_blocks(solved.at(step.left), solved.at(step.right), step, geom, p, opt, diag);
    out.exact = out.exact && diag.corner_dim == diag.product_dim;
    iterations += diag.iterations;
    out.steps.push_back(diag);
    solved[step.result] = std::move(merged);
  }
  out.block = solved.at(schedule.target);
  out.steady.rho = out.block.rho;
  out.steady.residual = out.block.residual;
  out.steady.method = schedule.steps.empty() ? "exact-leaf" : "corner";
  out.steady.iterations = iterations;
  out.steady.wall_seconds = detail::seconds_since(t0);
  return out;
}

/// Corner steady state mapped back to the full Fock basis of the lattice
/// (site order x * ly + y). Requires the embedding to have been kept.
inline DensityMatrix corner_to_fock(const CornerResult& r, const LatticeGeometry& geom, const FockSpace& fock) {
  if (!r.block.embedding) throw DimensionError("corner_to_fock: lattice too large for an explicit embedding");
  const DenseMat& e = *r.block.embedding;
  const DenseMat rho_block = e * r.block.rho.matrix() * e.adjoint();
  const int n = r.block.n_sites();
  const int d = fock.dim();
  const auto dim = static_cast<Eigen::Index>(e.rows());
  // Tensor position k of the block holds global site g[k].
  const auto g = detail::global_sites(geom, r.block.coords);
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(dim));
  std::vector<int> digits(static_cast<std::size_t>(n));
  for (Eigen::Index idx = 0; idx < dim; ++idx) {
    Eigen::Index rest = idx;
    for (int k = n - 1; k >= 0; --k) {
      digits[static_cast<std::size_t>(k)] = static_cast<int>(rest % d);
      rest /= d;
    }
    std::vector<int> global(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) global[static_cast<std::size_t>(g[static_cast<std::size_t>(k)])] = digits[static_cast<std::size_t>(k)];
    Eigen::Index gi = 0;
    for (int s = 0; s < n; ++s) gi = gi * d + global[static_cast<std::size_t>(s)];
    perm[static_cast<std::size_t>(idx)] = gi;
  }
  DenseMat out(dim, dim);
  for (Eigen::Index c = 0; c < dim; ++c)
    for (Eigen::Index r2 = 0; r2 < dim; ++r2) out(perm[r2], perm[c]) = rho_block(r2, c);
  return DensityMatrix(std::move(out), kFockBasis);
}

/// Parity, entropy and densities of a corner result in its own basis.
inline ObservableRecord corner_observables(const CornerResult& r) {
  std::vector<SparseOperator> ns;
  for (const auto& n : r.block.n) ns.push_back({CsrMat(n.sparseView(cplx{0.0}, kDropTolerance)), true, r.block.basis});
  ObservableRecord rec = evaluate(r.block.rho, r.block.parity, ns);
  rec.method = r.steady.method;
  rec.corner_dim = r.block.dim();
  rec.residual = r.steady.residual;
  return rec;
}

struct ConvergenceEntry {
  Eigen::Index m = 0;
  double parity = 0.0;
  double entropy = 0.0;
  double parity_drift = -1.0;  ///< negative for the first entry
  double entropy_drift = -1.0;
  bool exact = false;
  std::string error;
};

struct ConvergenceReport {
  std::optional<CornerResult> result;
  bool converged = false;
  Eigen::Index converged_m = 0;
  std::vector<ConvergenceEntry> entries;
};

/// Runs the corner method for each M in ascending order and returns the first
/// result whose parity and entropy moved by at most `tol` from the previous M
/// (or that involved no truncation at all). Otherwise the largest-M result is
/// returned flagged unconverged.
inline ConvergenceReport convergence_sweep(const LatticeGeometry& geom, const ModelParams& params,
                                           const FockSpace& fock, const std::vector<Eigen::Index>& m_list, double tol,
                                           const CornerOptions& opt = {}, int leaf_sites = 2) {
  if (m_list.empty()) throw ConfigError("convergence_sweep: empty M list");
  for (std::size_t i = 1; i < m_list.size(); ++i)
    if (m_list[i] <= m_list[i - 1]) throw ConfigError("convergence_sweep: M list must be ascending");
  ConvergenceReport rep;
  std::optional<ObservableRecord> prev;
  for (Eigen::Index m : m_list) {
    ConvergenceEntry e;
    e.m = m;
    try {
      auto sched = MergeSchedule::build(geom, m, leaf_sites);
      CornerResult r = corner_steady_state(geom, params, fock, sched, opt);
      const auto obs = corner_observables(r);
      e.parity = obs.parity;
      e.entropy = obs.entropy;
      e.exact = r.exact;
      if (prev) {
        e.parity_drift = std::abs(obs.parity - prev->parity);
        e.entropy_drift = std::abs(obs.entropy - prev->entropy);
      }
      rep.result = std::move(r);
      rep.entries.push_back(e);
      if (e.exact || (prev && e.parity_drift <= tol && e.entropy_drift <= tol)) {
        rep.converged = true;
        rep.converged_m = m;
        return rep;
      }
      prev = obs;
    } catch (const SolverError& err) {
      e.error = err.what();
      rep.entries.push_back(e);
      prev.reset();
    }
  }
  return rep;
}

}  // namespace qdbh
