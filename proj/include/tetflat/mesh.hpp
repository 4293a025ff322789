#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

namespace tetflat {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Points = Eigen::Matrix3Xd;  // one column per vertex
using Tet = std::array<int, 4>;
using Tri = std::array<int, 3>;
using Edge = std::array<int, 2>;

/// Raised for malformed or inconsistent mesh data.
class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Frame { Original, Template };

/// Six times the signed volume of the tet (a, b, c, d).
inline double signed_volume6(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).dot((c - a).cross(d - a));
}

/// Edge matrix [x1-x0, x2-x0, x3-x0] of tet `t` (the product X_k B).
inline Mat3 edge_matrix(const Points& x, const Tet& t) {
  Mat3 e;
  e.col(0) = x.col(t[1]) - x.col(t[0]);
  e.col(1) = x.col(t[2]) - x.col(t[0]);
  e.col(2) = x.col(t[3]) - x.col(t[0]);
  return e;
}

/// Swaps two corners of every negatively oriented tet. Throws on zero-volume
/// tets. Returns the number of tets that were flipped.
int orient_tets(const Points& vertices, std::vector<Tet>& tets);

/// Immutable tetrahedral mesh. Construction validates index ranges, distinct
/// corners and strictly positive orientation of every tet.
class TetMesh {
 public:
  TetMesh() = default;
  TetMesh(Points vertices, std::vector<Tet> tets, Frame frame = Frame::Original);

  const Points& vertices() const { return vertices_; }
  const std::vector<Tet>& tets() const { return tets_; }
  Frame frame() const { return frame_; }
  int num_vertices() const { return static_cast<int>(vertices_.cols()); }
  int num_tets() const { return static_cast<int>(tets_.size()); }

  Vec3 vertex(int i) const { return vertices_.col(i); }
  double tet_volume(int k) const;
  double total_volume() const;
  double min_tet_volume() const;
  Vec3 bbox_min() const;
  Vec3 bbox_max() const;
  double bbox_diagonal() const;
  Vec3 centroid() const;

  /// Same connectivity, new coordinates. Validates orientation again.
  TetMesh with_vertices(Points vertices, Frame frame) const;

  /// All unique undirected edges (i < j), sorted.
  std::vector<Edge> edges() const;

 private:
  Points vertices_;
  std::vector<Tet> tets_;
  Frame frame_ = Frame::Original;
};

/// Boundary surface of a tet mesh and the normalized weights used by the
/// objective: per-boundary-vertex area weights and per-tet volume weights.
struct BoundaryTopology {
  std::vector<Tri> triangles;          // global vertex ids, outward oriented
  std::vector<int> triangle_tet;       // owning tet per boundary triangle
  std::vector<double> triangle_area;   // mm^2
  std::vector<int> vertices;           // sorted global ids of boundary vertices
  std::vector<int> local_index;        // global id -> boundary-local id, or -1
  std::vector<Edge> edges;             // boundary edges as sorted global id pairs
  std::vector<std::vector<int>> neighbors;  // boundary-local adjacency, sorted
  std::vector<double> area_weight;     // A_m, boundary-local, sums to 1
  std::vector<double> volume_weight;   // V_k, per tet, sums to 1

  int num_boundary_vertices() const { return static_cast<int>(vertices.size()); }
  bool is_boundary(int global) const { return local_index[global] >= 0; }
  int euler_characteristic() const {
    return num_boundary_vertices() - static_cast<int>(edges.size()) +
           static_cast<int>(triangles.size());
  }
};

/// Extracts the boundary. Throws MeshError when some boundary edge does not
/// border exactly two boundary triangles.
BoundaryTopology boundary_topology(const TetMesh& mesh);

/// Area-weighted unit normal per boundary vertex (boundary-local order).
/// Falls back to the unweighted average of unit face normals when the
/// weighted sum vanishes; throws if that vanishes too.
std::vector<Vec3> vertex_normals(const TetMesh& mesh, const BoundaryTopology& topo);

/// Outward unit normal of boundary triangle `t` under positions `x`.
Vec3 triangle_normal(const Points& x, const Tri& t);
double triangle_area(const Points& x, const Tri& t);

}  // namespace tetflat
