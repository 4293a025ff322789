#pragma once

#include <optional>
#include <vector>

#include "tetflat/optimizer.hpp"
#include "tetflat/parcellation.hpp"

namespace tetflat {

enum class TemplateKind { Planes, SinglePlane, Ellipsoid };

struct FlattenParams {
  TemplateKind kind = TemplateKind::Planes;
  OptimizerParams optimizer;
  ParcellationParams parcellation;
  /// Optional overrides of the data-driven initial template parameters.
  std::optional<double> initial_h;
  std::optional<Vec3> initial_radii;
};

/// Rigid alignment applied to the input: aligned = R (z - center).
struct Alignment {
  Vec3 center = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();  // proper rotation
  Points apply(const Points& z) const;
};

struct FlattenOutput {
  TetMesh aligned;                       // original mesh after centering/rotation
  BoundaryTopology topology;
  std::optional<BoundaryParcellation> parcellation;  // plane templates only
  Alignment alignment;
  TemplateSpec initial_spec;
  FlatteningResult result;               // final stage
  std::optional<FlatteningResult> planes_stage;  // first stage of single-plane runs
};

/// Principal-axis alignment: centroid to the origin, covariance eigenvectors
/// with descending eigenvalues onto x, y, z, signs chosen so each axis has a
/// positive dominant component and the rotation is proper.
Alignment principal_alignment(const Points& z);

/// 95th percentile of the distances from tet barycenters to the boundary
/// surface: the half-thickness estimate.
double half_thickness_estimate(const TetMesh& mesh, const BoundaryTopology& topo);

/// Half of the 95th percentile of boundary geodesic distances from a set of
/// evenly spread sources.
double geodesic_half_spread(const TetMesh& mesh, const BoundaryTopology& topo, int sources = 16);

/// Exact distance from p to triangle (a, b, c).
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Full pipeline: align, parcellate (plane templates), initialize theta,
/// descend; single-plane runs the parallel-planes stage first.
FlattenOutput flatten(const TetMesh& mesh, const FlattenParams& params,
                      const IterationCallback& on_iteration = {});

}  // namespace tetflat
