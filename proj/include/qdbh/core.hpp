#pragma once

#include <atomic>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace qdbh {

using cplx = std::complex<double>;
using DenseMat = Eigen::MatrixXcd;
using DenseVec = Eigen::VectorXcd;
using RealVec = Eigen::VectorXd;
/// Compressed-row complex storage.
using CsrMat = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
/// Column-major variant, required by the sparse direct factorizations.
using CscMat = Eigen::SparseMatrix<cplx, Eigen::ColMajor>;

inline constexpr cplx kI{0.0, 1.0};

/// Identifies the basis a matrix is written in. 0 is the full tensor-product
/// Fock basis; corner bases get fresh ids.
using BasisId = std::uint64_t;
inline constexpr BasisId kFockBasis = 0;

inline BasisId next_basis_id() {
  static std::atomic<std::uint64_t> counter{0};
  return counter.fetch_add(1, std::memory_order_relaxed) + 1;
}

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionError : Error {
  using Error::Error;
};
struct BasisMismatch : Error {
  using Error::Error;
};
struct InvalidState : Error {
  using Error::Error;
};
struct SolverError : Error {
  using Error::Error;
};
/// Null space of the Liouvillian is not one-dimensional.
struct DegenerateSteadyState : SolverError {
  using SolverError::SolverError;
};
struct NotConverged : SolverError {
  double best_residual = 0.0;
  NotConverged(const std::string& what, double best) : SolverError(what), best_residual(best) {}
};
struct TruncationError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace qdbh
