#pragma once

#include <stdexcept>
#include <vector>

#include "tetflat/mesh.hpp"

namespace tetflat {

class HullError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Triangulated convex hull; faces index the input points and are wound
/// counter-clockwise seen from outside.
struct ConvexHull {
  std::vector<Tri> faces;
  std::vector<Vec3> normals;   // outward unit normals
  std::vector<double> offsets; // plane: normal.dot(p) == offset

  /// Largest plane distance over faces: positive outside the hull, and minus
  /// the distance to the hull surface for interior points.
  double signed_distance(const Vec3& p) const;
};

/// Quickhull. `eps` is the coplanarity tolerance in length units; pass a
/// negative value to derive it from the point extent. Throws HullError when
/// the points are (nearly) coplanar.
ConvexHull quickhull(const std::vector<Vec3>& points, double eps = -1.0);

}  // namespace tetflat
