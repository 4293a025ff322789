#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "tetflat/mesh.hpp"
#include "tetflat/spectral.hpp"

namespace tetflat {

enum class Label : std::uint8_t { Fetal = 0, Maternal = 1, Margin = 2 };

std::string_view label_name(Label l);

class ParcellationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Normalized approximate geodesic distances between boundary vertices that
/// are joined by a path of at most three boundary edges. Entry lists are in
/// boundary-local ids, sorted by neighbour id, and symmetric.
struct RingDistances {
  std::vector<std::vector<int>> neighbor;
  std::vector<std::vector<double>> distance;  // in (0, 1]
  double max_raw = 0.0;                       // normalizer, mm
};

/// Shortest paths over boundary edges (Euclidean edge lengths) restricted to
/// at most `hops` edges, then divided by the largest such distance. Throws
/// ParcellationError when the boundary has more than one component.
RingDistances three_ring_geodesics(const TetMesh& mesh, const BoundaryTopology& topo, int hops = 3);

struct AffinityGraph {
  SparseMatrix weights;     // symmetric, zero diagonal
  Eigen::VectorXd degrees;
  double gamma = 20.0;
};

/// w_ij = exp(gamma * <n_i, n_j> * l_ij) for ring pairs; 0 elsewhere.
AffinityGraph build_affinity(const std::vector<Vec3>& normals, const RingDistances& ring, double gamma);

struct Bipartition {
  std::vector<Label> side;             // Fetal or Maternal per boundary vertex
  std::array<int, 2> hull_votes{};     // on-hull counts indexed by Label
  std::array<int, 2> sizes{};
};

/// Thresholds the embedding at zero and labels the cluster with more
/// convex-hull vertices Maternal (ties: larger cluster, then the cluster
/// holding the lowest boundary id).
Bipartition bipartition_and_assign(const TetMesh& mesh, const BoundaryTopology& topo,
                                   const Eigen::VectorXd& embedding);

struct BoundaryParcellation {
  std::vector<Label> labels;     // per boundary vertex (boundary-local order)
  Eigen::VectorXd fiedler;
  double fiedler_eigenvalue = 0.0;
  double fiedler_residual = 0.0;
  double margin_mm = 0.0;
  double gamma = 0.0;
  std::array<int, 2> hull_votes{};

  int count(Label l) const;
  /// Per-vertex code for output fields: label value, or -1 off the boundary.
  std::vector<double> vertex_field(const BoundaryTopology& topo) const;
};

/// Margin = every boundary vertex within `half_width` mm (boundary geodesic)
/// of a vertex that has an edge neighbour in the other cluster. Throws
/// ParcellationError if the margin swallows a whole cluster.
BoundaryParcellation expand_margin(const TetMesh& mesh, const BoundaryTopology& topo,
                                   const Bipartition& clusters, double half_width);

struct ParcellationParams {
  double gamma = 20.0;
  double margin_mm = 15.0;
  std::uint64_t seed = 0;
};

/// Full boundary segmentation: normals, ring distances, affinity, normalized
/// Laplacian, Fiedler vector, hull vote and margin expansion.
BoundaryParcellation parcellate(const TetMesh& mesh, const BoundaryTopology& topo,
                                const ParcellationParams& params = {});

/// Multi-source Dijkstra over boundary edges; returns mm distances per
/// boundary vertex (infinity when unreachable).
std::vector<double> boundary_geodesic(const TetMesh& mesh, const BoundaryTopology& topo,
                                      const std::vector<int>& sources);

}  // namespace tetflat
