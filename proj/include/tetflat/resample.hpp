#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <vector>

#include "tetflat/mesh.hpp"
#include "tetflat/volume.hpp"

namespace tetflat {

using Bary = Eigen::Vector4d;

/// Barycentric weights of x in tet t of positions `pts`; alpha_1..3 come from
/// the inverse edge matrix and alpha_0 completes the sum to one.
Bary barycentric(const Vec3& x, const Points& pts, const Tet& t);

struct Location {
  int tet = -1;
  Bary alpha = Bary::Zero();
};

/// Uniform hash grid over tet bounding boxes. A point is inside tet k when
/// every alpha_i times the corresponding corner height is >= -tol, with
/// tol = 1e-9 * bbox diagonal; among containing tets the lowest index wins.
class PointLocator {
 public:
  explicit PointLocator(const TetMesh& mesh, double cell_size = -1.0);

  std::optional<Location> locate(const Vec3& p) const;
  /// Same decision as locate() by scanning every tet.
  std::optional<Location> locate_brute_force(const Vec3& p) const;
  bool contains(int tet, const Vec3& p, Bary* alpha = nullptr) const;

  double tolerance() const { return tol_; }
  double cell_size() const { return cell_; }
  std::array<int, 3> grid_dims() const { return dims_; }

 private:
  const TetMesh* mesh_;
  std::vector<Mat3> inverse_;            // per tet (X_k B)^-1
  std::vector<Eigen::Vector4d> height_;  // corner heights over opposite faces
  double tol_ = 0.0;
  double cell_ = 1.0;
  Vec3 lo_;
  std::array<int, 3> dims_{1, 1, 1};
  std::vector<std::vector<int>> cells_;

  std::array<int, 3> cell_of(const Vec3& p) const;
};

struct GridSpec {
  std::array<int, 3> dims{1, 1, 1};
  Vec3 spacing = Vec3::Ones();
  Vec3 origin = Vec3::Zero();
};

/// Axis-aligned bbox of `mesh` padded by one voxel on every side.
GridSpec default_output_grid(const TetMesh& mesh, const Vec3& spacing);

class ResampleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Template-space raster: each voxel center x is located in `x_mesh`, mapped
/// to z = Z_k alpha and the input is sampled trilinearly there. Voxels outside
/// the mesh get NaN, recorded as metadata "fill_value".
ScalarVolume pull_back(const ScalarVolume& input, const TetMesh& z_mesh, const TetMesh& x_mesh,
                       const GridSpec& grid);

}  // namespace tetflat
