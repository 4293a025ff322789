#include "tetflat/spectral.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

namespace tetflat {

SparseMatrix normalized_laplacian(const SparseMatrix& w, Eigen::VectorXd* degrees) {
  const Eigen::Index n = w.rows();
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  for (Eigen::Index c = 0; c < w.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(w, c); it; ++it) d[it.row()] += it.value();
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(d[i] > 0)) throw SpectralError("isolated vertex " + std::to_string(i) + " has zero degree");
  const Eigen::VectorXd inv_sqrt = d.cwiseSqrt().cwiseInverse();

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(w.nonZeros()) + n);
  for (Eigen::Index i = 0; i < n; ++i) trips.emplace_back(i, i, 1.0);
  for (Eigen::Index c = 0; c < w.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(w, c); it; ++it)
      trips.emplace_back(it.row(), it.col(), -inv_sqrt[it.row()] * it.value() * inv_sqrt[it.col()]);
  SparseMatrix l(n, n);
  l.setFromTriplets(trips.begin(), trips.end());
  if (degrees) *degrees = d;
  return l;
}

namespace {

void deflate(Eigen::VectorXd& v, const Eigen::VectorXd& null_unit) {
  v -= null_unit.dot(v) * null_unit;
}

}  // namespace

FiedlerResult fiedler_vector(const SparseMatrix& laplacian, const Eigen::VectorXd& null_vector,
                             const FiedlerOptions& opt) {
  const Eigen::Index n = laplacian.rows();
  if (n < 2) throw SpectralError("graph needs at least two vertices");
  const Eigen::VectorXd z = null_vector.normalized();

  SparseMatrix shifted = laplacian;
  for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) += opt.shift;
  Eigen::SimplicialLDLT<SparseMatrix> solver(shifted);
  if (solver.info() != Eigen::Success) throw SpectralError("factorization of shifted Laplacian failed");

  auto op = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd y = solver.solve(x);
    deflate(y, z);
    return y;
  };

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd start(n);
  for (Eigen::Index i = 0; i < n; ++i) start[i] = gauss(rng);
  deflate(start, z);
  start.normalize();

  const int m_max = static_cast<int>(std::min<Eigen::Index>(opt.krylov_dim, n - 1));
  FiedlerResult best;
  best.residual = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart <= opt.max_restarts; ++restart) {
    Eigen::MatrixXd q(n, m_max);
    std::vector<double> alpha, beta;
    q.col(0) = start;
    int m = 0;
    for (int j = 0; j < m_max; ++j) {
      Eigen::VectorXd w = op(q.col(j));
      alpha.push_back(q.col(j).dot(w));
      // Full reorthogonalization, twice.
      for (int pass = 0; pass < 2; ++pass) {
        w -= q.leftCols(j + 1) * (q.leftCols(j + 1).transpose() * w);
        deflate(w, z);
      }
      m = j + 1;
      const double b = w.norm();
      if (j + 1 == m_max || b < 1e-14 * std::abs(alpha.back())) break;
      beta.push_back(b);
      q.col(j + 1) = w / b;
    }
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      t(i, i) = alpha[i];
      if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    // Largest eigenvalue of the inverse <-> smallest non-null eigenvalue of L.
    Eigen::VectorXd v = q.leftCols(m) * es.eigenvectors().col(m - 1);
    deflate(v, z);
    v.normalize();
    const Eigen::VectorXd lv = laplacian * v;
    const double lambda = v.dot(lv);
    const double res = (lv - lambda * v).norm();
    if (res < best.residual) {
      best.vector = v;
      best.eigenvalue = lambda;
      best.residual = res;
      best.restarts = restart;
    }
    if (res < opt.tolerance) return best;
    start = v;
  }
  throw SpectralError("Fiedler iteration did not converge: residual " +
                      std::to_string(best.residual));
}

}  // namespace tetflat
