#include "tetflat/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace tetflat {

namespace {

double max_edge_length(const Points& x, const Tet& t) {
  double len = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) len = std::max(len, (x.col(t[i]) - x.col(t[j])).norm());
  return len;
}

// Relative threshold below which a tet counts as degenerate.
constexpr double kDegenerateRel = 1e-12;

bool is_degenerate(const Points& x, const Tet& t, double vol6) {
  const double l = max_edge_length(x, t);
  return std::abs(vol6) <= kDegenerateRel * l * l * l;
}

}  // namespace

int orient_tets(const Points& vertices, std::vector<Tet>& tets) {
  int flipped = 0;
  for (std::size_t k = 0; k < tets.size(); ++k) {
    auto& t = tets[k];
    for (int i : t) {
      if (i < 0 || i >= vertices.cols())
        throw MeshError("tet " + std::to_string(k) + " references vertex " + std::to_string(i) +
                        " out of range");
    }
    const double v6 = signed_volume6(vertices.col(t[0]), vertices.col(t[1]), vertices.col(t[2]),
                                     vertices.col(t[3]));
    if (is_degenerate(vertices, t, v6))
      throw MeshError("tet " + std::to_string(k) + " has zero volume");
    if (v6 < 0) {
      std::swap(t[2], t[3]);
      ++flipped;
    }
  }
  return flipped;
}

TetMesh::TetMesh(Points vertices, std::vector<Tet> tets, Frame frame)
    : vertices_(std::move(vertices)), tets_(std::move(tets)), frame_(frame) {
  const int n = num_vertices();
  for (std::size_t k = 0; k < tets_.size(); ++k) {
    const auto& t = tets_[k];
    for (int a = 0; a < 4; ++a) {
      if (t[a] < 0 || t[a] >= n)
        throw MeshError("tet " + std::to_string(k) + " references vertex " +
                        std::to_string(t[a]) + " out of range [0, " + std::to_string(n) + ")");
      for (int b = a + 1; b < 4; ++b)
        if (t[a] == t[b]) throw MeshError("tet " + std::to_string(k) + " repeats a vertex");
    }
    const double v6 = signed_volume6(vertices_.col(t[0]), vertices_.col(t[1]),
                                     vertices_.col(t[2]), vertices_.col(t[3]));
    if (!(v6 > 0.0))
      throw MeshError("tet " + std::to_string(k) + " is not positively oriented");
  }
}

double TetMesh::tet_volume(int k) const {
  const auto& t = tets_[k];
  return signed_volume6(vertices_.col(t[0]), vertices_.col(t[1]), vertices_.col(t[2]),
                        vertices_.col(t[3])) /
         6.0;
}

double TetMesh::total_volume() const {
  double v = 0.0;
  for (int k = 0; k < num_tets(); ++k) v += tet_volume(k);
  return v;
}

double TetMesh::min_tet_volume() const {
  double v = std::numeric_limits<double>::infinity();
  for (int k = 0; k < num_tets(); ++k) v = std::min(v, tet_volume(k));
  return v;
}

Vec3 TetMesh::bbox_min() const { return vertices_.rowwise().minCoeff(); }
Vec3 TetMesh::bbox_max() const { return vertices_.rowwise().maxCoeff(); }
double TetMesh::bbox_diagonal() const { return (bbox_max() - bbox_min()).norm(); }
Vec3 TetMesh::centroid() const { return vertices_.rowwise().mean(); }

TetMesh TetMesh::with_vertices(Points vertices, Frame frame) const {
  if (vertices.cols() != vertices_.cols())
    throw MeshError("vertex count mismatch: " + std::to_string(vertices.cols()) + " vs " +
                    std::to_string(vertices_.cols()));
  return TetMesh(std::move(vertices), tets_, frame);
}

std::vector<Edge> TetMesh::edges() const {
  std::vector<Edge> out;
  out.reserve(tets_.size() * 6);
  for (const auto& t : tets_)
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
        out.push_back({std::min(t[a], t[b]), std::max(t[a], t[b])});
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Vec3 triangle_normal(const Points& x, const Tri& t) {
  return (x.col(t[1]) - x.col(t[0])).cross(x.col(t[2]) - x.col(t[0])).normalized();
}

double triangle_area(const Points& x, const Tri& t) {
  return 0.5 * (x.col(t[1]) - x.col(t[0])).cross(x.col(t[2]) - x.col(t[0])).norm();
}

BoundaryTopology boundary_topology(const TetMesh& mesh) {
  // Outward faces of a positively oriented tet (0,1,2,3).
  static constexpr int kFaces[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};

  struct FaceRec {
    Tri key;
    Tri oriented;
    int tet;
  };
  std::vector<FaceRec> faces;
  faces.reserve(mesh.tets().size() * 4);
  for (int k = 0; k < mesh.num_tets(); ++k) {
    const auto& t = mesh.tets()[k];
    for (const auto& f : kFaces) {
      Tri o{t[f[0]], t[f[1]], t[f[2]]};
      Tri key = o;
      std::sort(key.begin(), key.end());
      faces.push_back({key, o, k});
    }
  }
  std::sort(faces.begin(), faces.end(), [](const FaceRec& a, const FaceRec& b) {
    return a.key != b.key ? a.key < b.key : a.tet < b.tet;
  });

  BoundaryTopology topo;
  for (std::size_t i = 0; i < faces.size();) {
    std::size_t j = i;
    while (j < faces.size() && faces[j].key == faces[i].key) ++j;
    if (j - i == 1) {
      topo.triangles.push_back(faces[i].oriented);
      topo.triangle_tet.push_back(faces[i].tet);
    } else if (j - i > 2) {
      throw MeshError("face shared by more than two tets");
    }
    i = j;
  }

  const Points& x = mesh.vertices();
  const int n = mesh.num_vertices();
  topo.local_index.assign(n, -1);
  for (const auto& t : topo.triangles)
    for (int v : t) topo.local_index[v] = 0;
  for (int v = 0; v < n; ++v)
    if (topo.local_index[v] == 0) topo.vertices.push_back(v);
  std::fill(topo.local_index.begin(), topo.local_index.end(), -1);
  for (std::size_t i = 0; i < topo.vertices.size(); ++i)
    topo.local_index[topo.vertices[i]] = static_cast<int>(i);

  // Closed 2-manifold check: every boundary edge in exactly two triangles.
  std::map<Edge, int> edge_count;
  for (const auto& t : topo.triangles)
    for (int a = 0; a < 3; ++a) {
      const int u = t[a], v = t[(a + 1) % 3];
      ++edge_count[{std::min(u, v), std::max(u, v)}];
    }
  for (const auto& [e, c] : edge_count) {
    if (c != 2)
      throw MeshError("open or non-manifold boundary: edge (" + std::to_string(e[0]) + ", " +
                      std::to_string(e[1]) + ") borders " + std::to_string(c) +
                      " boundary triangles");
    topo.edges.push_back(e);
  }

  const int nb = topo.num_boundary_vertices();
  topo.neighbors.assign(nb, {});
  for (const auto& e : topo.edges) {
    const int a = topo.local_index[e[0]], b = topo.local_index[e[1]];
    topo.neighbors[a].push_back(b);
    topo.neighbors[b].push_back(a);
  }
  for (auto& nbrs : topo.neighbors) std::sort(nbrs.begin(), nbrs.end());

  // One-third lumping of incident triangle areas, then normalization.
  topo.triangle_area.reserve(topo.triangles.size());
  topo.area_weight.assign(nb, 0.0);
  for (const auto& t : topo.triangles) {
    const double a = triangle_area(x, t);
    topo.triangle_area.push_back(a);
    for (int v : t) topo.area_weight[topo.local_index[v]] += a / 3.0;
  }
  const double area_sum = std::accumulate(topo.area_weight.begin(), topo.area_weight.end(), 0.0);
  for (auto& w : topo.area_weight) w /= area_sum;

  topo.volume_weight.resize(mesh.num_tets());
  double vol_sum = 0.0;
  for (int k = 0; k < mesh.num_tets(); ++k) {
    topo.volume_weight[k] = mesh.tet_volume(k);
    vol_sum += topo.volume_weight[k];
  }
  for (auto& w : topo.volume_weight) w /= vol_sum;
  return topo;
}

std::vector<Vec3> vertex_normals(const TetMesh& mesh, const BoundaryTopology& topo) {
  const Points& x = mesh.vertices();
  const int nb = topo.num_boundary_vertices();
  std::vector<Vec3> weighted(nb, Vec3::Zero());
  std::vector<Vec3> unweighted(nb, Vec3::Zero());
  for (const auto& t : topo.triangles) {
    const Vec3 c = (x.col(t[1]) - x.col(t[0])).cross(x.col(t[2]) - x.col(t[0]));
    const double len = c.norm();
    for (int v : t) {
      weighted[topo.local_index[v]] += 0.5 * c;
      if (len > 0) unweighted[topo.local_index[v]] += c / len;
    }
  }
  std::vector<Vec3> normals(nb);
  for (int i = 0; i < nb; ++i) {
    if (weighted[i].norm() > 0) {
      normals[i] = weighted[i].normalized();
    } else if (unweighted[i].norm() > 0) {
      normals[i] = unweighted[i].normalized();
    } else {
      throw MeshError("vertex normal undefined at vertex " + std::to_string(topo.vertices[i]));
    }
  }
  return normals;
}

}  // namespace tetflat
