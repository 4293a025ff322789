#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "tetflat/mesh.hpp"
#include "tetflat/parcellation.hpp"

namespace tetflat {

/// Fetal side on x3 = +h, maternal side on x3 = -h.
struct ParallelPlanes {
  double h = 1.0;
};
/// Maternal plane only (fetal weight zero); h is fit to the maternal side.
struct SinglePlane {
  double h = 1.0;
};
/// (x^T R x - 1)^2 with R = diag(rx^-2, ry^-2, rz^-2); applies to every
/// boundary vertex regardless of label.
struct Ellipsoid {
  Vec3 radii = Vec3::Ones();
};

using TemplateSpec = std::variant<ParallelPlanes, SinglePlane, Ellipsoid>;

std::string template_name(const TemplateSpec& spec);
/// Throws std::invalid_argument for non-positive h or radii.
void validate(const TemplateSpec& spec);
/// Optimizable template parameters: (h) for planes, (rx, ry, rz) for the ellipsoid.
Eigen::VectorXd template_params(const TemplateSpec& spec);
TemplateSpec with_params(const TemplateSpec& spec, const Eigen::VectorXd& theta);

/// A tet collapsed or inverted where the energy needs it nondegenerate.
class FlipError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rows [-1 -1 -1; 1 0 0; 0 1 0; 0 0 1]: X_k * B stacks the edge vectors
/// leaving the first corner.
Eigen::Matrix<double, 4, 3> basis_matrix();

/// J = (X_k B)(Z_k B)^-1 given the edge matrix of X_k and the frozen inverse
/// rest edge matrix.
inline Mat3 jacobian(const Mat3& edges, const Mat3& rest_inverse) { return edges * rest_inverse; }

/// ||J||_F^2 + ||J^-1||_F^2, via the adjugate. Throws FlipError on det J == 0.
double dirichlet_density(const Mat3& j);
/// Singular values, descending (diagnostic path).
Vec3 singular_values(const Mat3& j);
/// Sum of sigma^2 + sigma^-2 from an SVD (diagnostic path).
double dirichlet_density_svd(const Mat3& j);

/// Per-vertex template distance for a boundary vertex with label `label`.
double template_term(const Vec3& x, Label label, const TemplateSpec& spec);

/// Frozen inverse rest edge matrices (Z_k B)^-1, one per tet.
class DeformationCache {
 public:
  DeformationCache() = default;
  explicit DeformationCache(const TetMesh& rest);

  const Mat3& rest_inverse(int k) const { return rest_inverse_[k]; }
  Mat3 jacobian(const Points& x, const std::vector<Tet>& tets, int k) const {
    return tetflat::jacobian(edge_matrix(x, tets[k]), rest_inverse_[k]);
  }
  int size() const { return static_cast<int>(rest_inverse_.size()); }

 private:
  std::vector<Mat3> rest_inverse_;
};

struct EnergyParts {
  double template_term = 0.0;  // sum_m A_m T(x_m)
  double distortion = 0.0;     // sum_k V_k D(X_k), without lambda
  double total = 0.0;          // template + lambda * distortion, +inf if infeasible
  double min_det = 0.0;        // smallest det J over tets
  bool feasible = true;        // every det J > 0
};

struct ObjectiveGradient {
  Points x;                   // d phi / dX
  Points x_template;          // template part
  Points x_distortion;        // lambda * distortion part
  Eigen::VectorXd theta;      // d phi / d theta
  EnergyParts parts;
};

/// phi(X, theta) = sum_m A_m T(x_m, theta) + lambda sum_k V_k D(X_k) with the
/// weights and rest shape of `rest`. Labels are per boundary vertex and are
/// only consulted by the plane templates.
class Objective {
 public:
  Objective(const TetMesh& rest, const BoundaryTopology& topo, std::vector<Label> labels,
            double lambda);

  /// Never throws; an inverted or collapsed tet makes the result infeasible.
  EnergyParts evaluate(const Points& x, const TemplateSpec& spec) const;
  /// Throws FlipError when some tet is flipped.
  double value(const Points& x, const TemplateSpec& spec) const;
  /// Throws FlipError when some tet is flipped.
  ObjectiveGradient gradient(const Points& x, const TemplateSpec& spec) const;

  /// Signed volume cubic coefficients (c0..c3) of tet k along X - eta * dir.
  std::array<double, 4> volume_cubic(const Points& x, const Points& dir, int k) const;

  const TetMesh& rest() const { return *rest_; }
  const BoundaryTopology& topology() const { return *topo_; }
  const std::vector<Label>& labels() const { return labels_; }
  const DeformationCache& cache() const { return cache_; }
  double lambda() const { return lambda_; }

 private:
  double template_sum(const Points& x, const TemplateSpec& spec) const;

  const TetMesh* rest_;
  const BoundaryTopology* topo_;
  std::vector<Label> labels_;
  double lambda_;
  DeformationCache cache_;
};

/// Central-difference check (five-point stencil) of the analytic gradient; each entry is the
/// largest componentwise error divided by the larger of the FD gradient's
/// max-norm and a floor of 1e-3 * (|term| + 1) / bbox diagonal.
struct FdReport {
  double distortion = 0.0;
  double template_term = 0.0;
  double theta = 0.0;
  double max() const { return std::max({distortion, template_term, theta}); }
};

using GradientFn = std::function<ObjectiveGradient(const Points&, const TemplateSpec&)>;

/// `step` is absolute (mm). `analytic` defaults to Objective::gradient.
FdReport fd_check(const Objective& objective, const Points& x, const TemplateSpec& spec,
                  double step, const GradientFn& analytic = {});

}  // namespace tetflat
