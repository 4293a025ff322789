#pragma once

#include <cstdint>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace tetflat {

using SparseMatrix = Eigen::SparseMatrix<double>;

class SpectralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// L = I - D^{-1/2} W D^{-1/2}. Throws SpectralError on a zero-degree vertex.
SparseMatrix normalized_laplacian(const SparseMatrix& w, Eigen::VectorXd* degrees = nullptr);

struct FiedlerOptions {
  double tolerance = 1e-8;   // on ||L v - lambda v||
  double shift = 1e-9;       // factorization shift: (L + shift I)^-1
  int krylov_dim = 40;
  int max_restarts = 60;
  std::uint64_t seed = 0;
};

struct FiedlerResult {
  Eigen::VectorXd vector;  // unit norm, orthogonal to the null vector
  double eigenvalue = 0.0;
  double residual = 0.0;
  int restarts = 0;
};

/// Eigenvector of the second-smallest eigenvalue of the symmetric positive
/// semi-definite `laplacian`, whose known null vector is `null_vector`
/// (D^{1/2} 1 for a normalized Laplacian). Shift-invert Lanczos with full
/// reorthogonalization and explicit restarts; the null vector is deflated
/// throughout. Throws SpectralError with the final residual when the
/// iteration cap is reached.
FiedlerResult fiedler_vector(const SparseMatrix& laplacian, const Eigen::VectorXd& null_vector,
                             const FiedlerOptions& options = {});

}  // namespace tetflat
