#include "tetflat/parcellation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>

#include "tetflat/convex_hull.hpp"

namespace tetflat {

std::string_view label_name(Label l) {
  switch (l) {
    case Label::Fetal:
      return "fetal";
    case Label::Maternal:
      return "maternal";
    case Label::Margin:
      return "margin";
  }
  return "unknown";
}

int BoundaryParcellation::count(Label l) const {
  return static_cast<int>(std::count(labels.begin(), labels.end(), l));
}

std::vector<double> BoundaryParcellation::vertex_field(const BoundaryTopology& topo) const {
  std::vector<double> f(topo.local_index.size(), -1.0);
  for (std::size_t i = 0; i < labels.size(); ++i)
    f[topo.vertices[i]] = static_cast<double>(labels[i]);
  return f;
}

namespace {

void require_connected(const BoundaryTopology& topo) {
  const int nb = topo.num_boundary_vertices();
  if (nb == 0) throw ParcellationError("mesh has no boundary");
  std::vector<char> seen(nb, 0);
  std::vector<int> stack = {0};
  seen[0] = 1;
  int reached = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int u : topo.neighbors[v])
      if (!seen[u]) {
        seen[u] = 1;
        ++reached;
        stack.push_back(u);
      }
  }
  if (reached != nb) throw ParcellationError("boundary has more than one connected component");
}

double edge_length(const TetMesh& mesh, const BoundaryTopology& topo, int a, int b) {
  return (mesh.vertex(topo.vertices[a]) - mesh.vertex(topo.vertices[b])).norm();
}

}  // namespace

RingDistances three_ring_geodesics(const TetMesh& mesh, const BoundaryTopology& topo, int hops) {
  require_connected(topo);
  const int nb = topo.num_boundary_vertices();
  RingDistances out;
  out.neighbor.resize(nb);
  out.distance.resize(nb);

  // Hop-limited relaxation from each source; `cur`/`nxt` are scratch arrays
  // reset through the touched list.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> cur(nb, inf), nxt(nb, inf);
  std::vector<int> touched;
  for (int s = 0; s < nb; ++s) {
    touched.assign(1, s);
    cur[s] = nxt[s] = 0.0;
    for (int h = 0; h < hops; ++h) {
      for (int v : touched) nxt[v] = cur[v];
      const std::size_t old_touched = touched.size();
      for (std::size_t ti = 0; ti < old_touched; ++ti) {
        const int v = touched[ti];
        if (cur[v] == inf) continue;
        for (int u : topo.neighbors[v]) {
          const double d = cur[v] + edge_length(mesh, topo, v, u);
          if (nxt[u] == inf) touched.push_back(u);
          if (d < nxt[u]) nxt[u] = d;
        }
      }
      for (int v : touched) cur[v] = nxt[v];
    }
    std::sort(touched.begin(), touched.end());
    for (int v : touched) {
      if (v != s) {
        out.neighbor[s].push_back(v);
        out.distance[s].push_back(cur[v]);
        out.max_raw = std::max(out.max_raw, cur[v]);
      }
      cur[v] = nxt[v] = inf;
    }
  }
  for (auto& row : out.distance)
    for (auto& d : row) d /= out.max_raw;
  return out;
}

AffinityGraph build_affinity(const std::vector<Vec3>& normals, const RingDistances& ring,
                             double gamma) {
  const int nb = static_cast<int>(normals.size());
  for (int i = 0; i < nb; ++i)
    if (std::abs(normals[i].norm() - 1.0) > 1e-9)
      throw ParcellationError("normal " + std::to_string(i) + " is not unit length");
  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < nb; ++i)
    for (std::size_t a = 0; a < ring.neighbor[i].size(); ++a) {
      const int j = ring.neighbor[i][a];
      if (j <= i) continue;
      // One evaluation per unordered pair keeps W exactly symmetric.
      const double w = std::exp(gamma * normals[i].dot(normals[j]) * ring.distance[i][a]);
      trips.emplace_back(i, j, w);
      trips.emplace_back(j, i, w);
    }
  AffinityGraph g;
  g.gamma = gamma;
  g.weights.resize(nb, nb);
  g.weights.setFromTriplets(trips.begin(), trips.end());
  g.degrees = Eigen::VectorXd::Zero(nb);
  for (Eigen::Index c = 0; c < g.weights.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(g.weights, c); it; ++it) g.degrees[it.row()] += it.value();
  return g;
}

Bipartition bipartition_and_assign(const TetMesh& mesh, const BoundaryTopology& topo,
                                   const Eigen::VectorXd& embedding) {
  const int nb = topo.num_boundary_vertices();
  // Cluster 0: embedding >= 0, cluster 1: embedding < 0.
  std::vector<int> cluster(nb);
  std::array<int, 2> sizes{0, 0};
  for (int i = 0; i < nb; ++i) {
    cluster[i] = embedding[i] >= 0 ? 0 : 1;
    ++sizes[cluster[i]];
  }
  if (sizes[0] == 0 || sizes[1] == 0) throw ParcellationError("thresholding produced an empty cluster");

  std::vector<Vec3> pts(nb);
  for (int i = 0; i < nb; ++i) pts[i] = mesh.vertex(topo.vertices[i]);
  const double diag = mesh.bbox_diagonal();
  const ConvexHull hull = quickhull(pts);
  const double tol = 1e-6 * diag;
  std::array<int, 2> votes{0, 0};
  for (int i = 0; i < nb; ++i)
    if (hull.signed_distance(pts[i]) > -tol) ++votes[cluster[i]];

  int maternal;
  if (votes[0] != votes[1])
    maternal = votes[0] > votes[1] ? 0 : 1;
  else if (sizes[0] != sizes[1])
    maternal = sizes[0] > sizes[1] ? 0 : 1;
  else
    maternal = cluster[0];

  Bipartition out;
  out.side.resize(nb);
  for (int i = 0; i < nb; ++i) out.side[i] = cluster[i] == maternal ? Label::Maternal : Label::Fetal;
  out.hull_votes[static_cast<int>(Label::Maternal)] = votes[maternal];
  out.hull_votes[static_cast<int>(Label::Fetal)] = votes[1 - maternal];
  out.sizes[static_cast<int>(Label::Maternal)] = sizes[maternal];
  out.sizes[static_cast<int>(Label::Fetal)] = sizes[1 - maternal];
  return out;
}

std::vector<double> boundary_geodesic(const TetMesh& mesh, const BoundaryTopology& topo,
                                      const std::vector<int>& sources) {
  const int nb = topo.num_boundary_vertices();
  std::vector<double> dist(nb, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  for (int s : sources) {
    dist[s] = 0.0;
    pq.emplace(0.0, s);
  }
  while (!pq.empty()) {
    const auto [d, v] = pq.top();
    pq.pop();
    if (d > dist[v]) continue;
    for (int u : topo.neighbors[v]) {
      const double nd = d + edge_length(mesh, topo, v, u);
      if (nd < dist[u]) {
        dist[u] = nd;
        pq.emplace(nd, u);
      }
    }
  }
  return dist;
}

BoundaryParcellation expand_margin(const TetMesh& mesh, const BoundaryTopology& topo,
                                   const Bipartition& clusters, double half_width) {
  const int nb = topo.num_boundary_vertices();
  if (half_width < 0) throw ParcellationError("margin half-width must be non-negative");
  if (std::none_of(clusters.side.begin(), clusters.side.end(), [](Label l) { return l == Label::Fetal; }) ||
      std::none_of(clusters.side.begin(), clusters.side.end(), [](Label l) { return l == Label::Maternal; }))
    throw ParcellationError("margin expansion needs two non-empty clusters");

  std::vector<int> seeds;
  for (int v = 0; v < nb; ++v)
    for (int u : topo.neighbors[v])
      if (clusters.side[u] != clusters.side[v]) {
        seeds.push_back(v);
        break;
      }
  const auto dist = boundary_geodesic(mesh, topo, seeds);

  BoundaryParcellation out;
  out.labels = clusters.side;
  out.margin_mm = half_width;
  out.hull_votes = clusters.hull_votes;
  for (int v = 0; v < nb; ++v)
    if (dist[v] <= half_width) out.labels[v] = Label::Margin;
  for (Label l : {Label::Fetal, Label::Maternal})
    if (out.count(l) == 0)
      throw ParcellationError("margin of half-width " + std::to_string(half_width) +
                              " mm consumes the entire " + std::string(label_name(l)) + " cluster");
  return out;
}

BoundaryParcellation parcellate(const TetMesh& mesh, const BoundaryTopology& topo,
                                const ParcellationParams& params) {
  const auto normals = vertex_normals(mesh, topo);
  const auto ring = three_ring_geodesics(mesh, topo);
  const auto graph = build_affinity(normals, ring, params.gamma);
  Eigen::VectorXd degrees;
  const SparseMatrix lap = normalized_laplacian(graph.weights, &degrees);
  FiedlerOptions fo;
  fo.seed = params.seed;
  const auto fiedler = fiedler_vector(lap, degrees.cwiseSqrt(), fo);
  const auto clusters = bipartition_and_assign(mesh, topo, fiedler.vector);
  auto out = expand_margin(mesh, topo, clusters, params.margin_mm);
  out.fiedler = fiedler.vector;
  out.fiedler_eigenvalue = fiedler.eigenvalue;
  out.fiedler_residual = fiedler.residual;
  out.gamma = params.gamma;
  return out;
}

}  // namespace tetflat
