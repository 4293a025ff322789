#include "tetflat/baseline2d.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include <Eigen/SparseLU>

#include "tetflat/parallel.hpp"

namespace tetflat {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

double tri_area2(const Vec3& a, const Vec3& b, const Vec3& c) { return 0.5 * (b - a).cross(c - a).norm(); }
double tri_area2(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  const Eigen::Vector2d u = b - a, v = c - a;
  return 0.5 * (u.x() * v.y() - u.y() * v.x());
}

void classify_topology(SliceSurface& s) {
  const int n = static_cast<int>(s.template_pos.cols());
  std::map<std::pair<int, int>, int> edge_count;
  std::map<int, std::vector<int>> next;  // directed boundary half-edges
  for (const Tri& t : s.triangles)
    for (int e = 0; e < 3; ++e) {
      const int a = t[e], b = t[(e + 1) % 3];
      ++edge_count[{std::min(a, b), std::max(a, b)}];
    }
  bool manifold = true;
  for (const auto& [e, c] : edge_count)
    if (c > 2) manifold = false;
  for (const Tri& t : s.triangles)
    for (int e = 0; e < 3; ++e) {
      const int a = t[e], b = t[(e + 1) % 3];
      if (edge_count[{std::min(a, b), std::max(a, b)}] == 1) next[a].push_back(b);
    }
  UnionFind uf(n);
  for (const Tri& t : s.triangles) {
    uf.unite(t[0], t[1]);
    uf.unite(t[1], t[2]);
  }
  s.components = 0;
  for (int i = 0; i < n; ++i)
    if (uf.find(i) == i) ++s.components;
  s.euler = n - static_cast<int>(edge_count.size()) + static_cast<int>(s.triangles.size());

  s.boundary_loops = 0;
  s.boundary_loop.clear();
  std::map<int, char> used;
  for (const auto& [v, outs] : next)
    if (outs.size() != 1) manifold = false;
  if (manifold) {
    for (const auto& [start, outs] : next) {
      if (used[start]) continue;
      ++s.boundary_loops;
      std::vector<int> loop;
      int v = start;
      while (!used[v]) {
        used[v] = 1;
        loop.push_back(v);
        const auto it = next.find(v);
        if (it == next.end()) {
          manifold = false;
          break;
        }
        v = it->second[0];
      }
      if (v != start) manifold = false;
      if (s.boundary_loops == 1) s.boundary_loop = loop;
    }
  }
  s.disk = manifold && s.components == 1 && s.boundary_loops == 1 && s.euler == 1;
  if (!s.disk) s.boundary_loop.clear();
}

}  // namespace

std::vector<double> slice_levels(double half_height, double spacing) {
  if (!(spacing > 0)) throw std::invalid_argument("slice spacing must be positive");
  if (!(half_height >= 0)) throw std::invalid_argument("half-height must be non-negative");
  const int n = static_cast<int>(std::floor(2.0 * half_height / spacing)) + 1;
  std::vector<double> levels(n);
  for (int j = 0; j < n; ++j) levels[j] = (j - 0.5 * (n - 1)) * spacing;
  return levels;
}

std::vector<double> slice_levels(const Points& x, double spacing) {
  if (!(spacing > 0)) throw std::invalid_argument("slice spacing must be positive");
  const double lo = x.row(2).minCoeff(), hi = x.row(2).maxCoeff();
  const int n = static_cast<int>(std::floor((hi - lo) / spacing)) + 1;
  const double mid = 0.5 * (lo + hi);
  std::vector<double> levels(n);
  for (int j = 0; j < n; ++j) levels[j] = mid + (j - 0.5 * (n - 1)) * spacing;
  return levels;
}

SliceSurface slice_mesh(const std::vector<Tet>& tets, const Points& x, const Points& z, double level) {
  SliceSurface s;
  s.level = level;
  std::unordered_map<std::uint64_t, int> ids;
  std::vector<Vec3> tp, op;

  auto vertex_for = [&](int k, int ca, int cb, const std::array<double, 4>& d) {
    const Tet& t = tets[k];
    const int a = t[ca], b = t[cb];
    // a is below (d < 0), b is on or above; a point exactly at b is keyed by b.
    const bool at_b = d[cb] == 0.0;
    const std::uint64_t key = at_b ? (static_cast<std::uint64_t>(b) << 32 | static_cast<std::uint32_t>(b))
                                   : (static_cast<std::uint64_t>(std::min(a, b)) << 32 |
                                      static_cast<std::uint32_t>(std::max(a, b)));
    const auto it = ids.find(key);
    if (it != ids.end()) return it->second;
    const double w = at_b ? 1.0 : d[ca] / (d[ca] - d[cb]);
    Bary alpha = Bary::Zero();
    alpha[ca] = 1.0 - w;
    alpha[cb] = w;
    Vec3 pz = Vec3::Zero(), px = Vec3::Zero();
    for (int c = 0; c < 4; ++c) {
      px += alpha[c] * x.col(t[c]);
      pz += alpha[c] * z.col(t[c]);
    }
    const int id = static_cast<int>(tp.size());
    tp.push_back(px);
    op.push_back(pz);
    s.source_tet.push_back(k);
    s.alpha.push_back(alpha);
    ids.emplace(key, id);
    return id;
  };

  auto emit = [&](int p, int q, int r) {
    if (p == q || q == r || p == r) return;
    const Vec3 nrm = (tp[q] - tp[p]).cross(tp[r] - tp[p]);
    // Only exactly degenerate triangles go; dropping merely small ones would
    // punch holes into the cross-section.
    if (nrm.squaredNorm() == 0.0) return;
    if (nrm.z() > 0)
      s.triangles.push_back({p, q, r});
    else
      s.triangles.push_back({p, r, q});
  };

  for (int k = 0; k < static_cast<int>(tets.size()); ++k) {
    const Tet& t = tets[k];
    std::array<double, 4> d;
    std::vector<int> below, above;
    for (int c = 0; c < 4; ++c) {
      d[c] = x(2, t[c]) - level;
      (d[c] < 0 ? below : above).push_back(c);
    }
    if (below.empty() || above.empty()) continue;
    if (below.size() == 1) {
      const int a = below[0];
      emit(vertex_for(k, a, above[0], d), vertex_for(k, a, above[1], d), vertex_for(k, a, above[2], d));
    } else if (below.size() == 3) {
      const int b = above[0];
      emit(vertex_for(k, below[0], b, d), vertex_for(k, below[1], b, d), vertex_for(k, below[2], b, d));
    } else {
      const int p0 = vertex_for(k, below[0], above[0], d), p1 = vertex_for(k, below[0], above[1], d);
      const int p2 = vertex_for(k, below[1], above[1], d), p3 = vertex_for(k, below[1], above[0], d);
      emit(p0, p1, p2);
      emit(p0, p2, p3);
    }
  }

  // Drop vertices no surviving triangle uses.
  std::vector<int> remap(tp.size(), -1);
  int used = 0;
  for (const Tri& tr : s.triangles)
    for (int v : tr)
      if (remap[v] < 0) remap[v] = used++;
  s.template_pos.resize(3, used);
  s.original_pos.resize(3, used);
  std::vector<int> src(used);
  std::vector<Bary> al(used);
  for (std::size_t i = 0; i < tp.size(); ++i)
    if (remap[i] >= 0) {
      s.template_pos.col(remap[i]) = tp[i];
      s.original_pos.col(remap[i]) = op[i];
      src[remap[i]] = s.source_tet[i];
      al[remap[i]] = s.alpha[i];
    }
  s.source_tet = std::move(src);
  s.alpha = std::move(al);
  for (Tri& tr : s.triangles)
    for (int& v : tr) v = remap[v];
  classify_topology(s);
  return s;
}

std::vector<SliceSurface> slice_surfaces(const std::vector<Tet>& tets, const Points& x, const Points& z,
                                         const std::vector<double>& levels) {
  std::vector<SliceSurface> out(levels.size());
  parallel_for(static_cast<int>(levels.size()), [&](int b, int e) {
    for (int i = b; i < e; ++i) out[i] = slice_mesh(tets, x, z, levels[i]);
  });
  return out;
}

namespace {

struct WeightedGraph {
  std::vector<std::map<int, double>> w;
};

WeightedGraph cotangent_weights(const Points& pos, const std::vector<Tri>& tris) {
  WeightedGraph g;
  g.w.resize(pos.cols());
  for (const Tri& t : tris)
    for (int c = 0; c < 3; ++c) {
      const int k = t[c], i = t[(c + 1) % 3], j = t[(c + 2) % 3];
      const Vec3 u = pos.col(i) - pos.col(k), v = pos.col(j) - pos.col(k);
      const double cot = u.dot(v) / u.cross(v).norm();
      g.w[i][j] += 0.5 * cot;
      g.w[j][i] += 0.5 * cot;
    }
  return g;
}

WeightedGraph uniform_weights(int n, const std::vector<Tri>& tris) {
  WeightedGraph g;
  g.w.resize(n);
  for (const Tri& t : tris)
    for (int c = 0; c < 3; ++c) {
      const int i = t[c], j = t[(c + 1) % 3];
      g.w[i][j] = 1.0;
      g.w[j][i] = 1.0;
    }
  return g;
}

// Returns false when the solve fails.
bool solve_interior(const WeightedGraph& g, const std::vector<int>& interior_index, Points2& uv) {
  const int n = static_cast<int>(uv.cols());
  const int ni = *std::max_element(interior_index.begin(), interior_index.end()) + 1;
  if (ni <= 0) return true;
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(ni, 2);
  for (int v = 0; v < n; ++v) {
    const int r = interior_index[v];
    if (r < 0) continue;
    double diag = 0;
    for (const auto& [u, w] : g.w[v]) {
      diag += w;
      if (interior_index[u] >= 0)
        trips.emplace_back(r, interior_index[u], -w);
      else
        rhs.row(r) += w * uv.col(u).transpose();
    }
    trips.emplace_back(r, r, diag);
  }
  Eigen::SparseMatrix<double> a(ni, ni);
  a.setFromTriplets(trips.begin(), trips.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) return false;
  const Eigen::MatrixXd sol = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !sol.allFinite()) return false;
  for (int v = 0; v < n; ++v)
    if (interior_index[v] >= 0) uv.col(v) = sol.row(interior_index[v]).transpose();
  return true;
}

int count_flips(const Points2& uv, const std::vector<Tri>& tris) {
  int f = 0;
  for (const Tri& t : tris)
    if (!(tri_area2(Eigen::Vector2d(uv.col(t[0])), Eigen::Vector2d(uv.col(t[1])), Eigen::Vector2d(uv.col(t[2]))) > 0)) ++f;
  return f;
}

double harmonic_residual(const WeightedGraph& g, const std::vector<int>& interior_index, const Points2& uv) {
  double r = 0;
  for (std::size_t v = 0; v < g.w.size(); ++v) {
    if (interior_index[v] < 0) continue;
    Eigen::Vector2d s = Eigen::Vector2d::Zero();
    for (const auto& [u, w] : g.w[v]) s += w * (uv.col(v) - uv.col(u));
    r = std::max(r, s.cwiseAbs().maxCoeff());
  }
  return r;
}

}  // namespace

DiskEmbedding harmonic_disk(const Points& pos, const std::vector<Tri>& triangles,
                            const std::vector<int>& boundary_loop, double radius) {
  const int n = static_cast<int>(pos.cols());
  if (boundary_loop.size() < 3) throw std::invalid_argument("disk boundary needs at least three vertices");
  DiskEmbedding out;
  out.uv = Points2::Zero(2, n);

  const int nbnd = static_cast<int>(boundary_loop.size());
  std::vector<double> arc(nbnd + 1, 0.0);
  for (int i = 0; i < nbnd; ++i)
    arc[i + 1] = arc[i] + (pos.col(boundary_loop[(i + 1) % nbnd]) - pos.col(boundary_loop[i])).norm();
  int north = 0;
  for (int i = 1; i < nbnd; ++i)
    if (pos(2, boundary_loop[i]) > pos(2, boundary_loop[north])) north = i;
  const double offset = 0.5 * kPi - 2 * kPi * arc[north] / arc[nbnd];
  for (int i = 0; i < nbnd; ++i) {
    const double th = 2 * kPi * arc[i] / arc[nbnd] + offset;
    out.uv.col(boundary_loop[i]) = radius * Eigen::Vector2d(std::cos(th), std::sin(th));
  }

  std::vector<int> interior_index(n, 0);
  for (int v : boundary_loop) interior_index[v] = -1;
  int ni = 0;
  for (int v = 0; v < n; ++v)
    if (interior_index[v] >= 0) interior_index[v] = ni++;
  if (ni == 0) {
    out.flipped = count_flips(out.uv, triangles);
    return out;
  }

  const WeightedGraph cot = cotangent_weights(pos, triangles);
  Points2 uv = out.uv;
  const bool ok = solve_interior(cot, interior_index, uv);
  if (ok && count_flips(uv, triangles) == 0) {
    out.uv = uv;
    out.residual = harmonic_residual(cot, interior_index, out.uv);
    return out;
  }
  out.uniform_fallback = true;
  const WeightedGraph uni = uniform_weights(n, triangles);
  solve_interior(uni, interior_index, out.uv);
  out.flipped = count_flips(out.uv, triangles);
  out.residual = harmonic_residual(uni, interior_index, out.uv);
  return out;
}

double choose_radius(const std::vector<const SliceSurface*>& surfaces,
                     const std::vector<const DiskEmbedding*>& embeddings) {
  double sum = 0;
  long long count = 0;
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    const auto& s = *surfaces[i];
    const auto& uv = embeddings[i]->uv;
    for (const Tri& t : s.triangles) {
      const double a = tri_area2(Eigen::Vector2d(uv.col(t[0])), Eigen::Vector2d(uv.col(t[1])),
                                 Eigen::Vector2d(uv.col(t[2])));
      const double b = tri_area2(Vec3(s.original_pos.col(t[0])), Vec3(s.original_pos.col(t[1])),
                                 Vec3(s.original_pos.col(t[2])));
      sum += std::log2(std::abs(a) / b);
      ++count;
    }
  }
  if (count == 0) return 1.0;
  return std::exp2(-0.5 * sum / static_cast<double>(count));
}

namespace {

template <class AreaFn, class PosFn>
SliceDistortion distortion_impl(const SliceSurface& s, AreaFn area, PosFn position) {
  SliceDistortion d;
  std::vector<char> on_boundary(s.original_pos.cols(), 0);
  for (int v : s.boundary_loop) on_boundary[v] = 1;
  std::map<std::pair<int, int>, int> edges;
  for (const Tri& t : s.triangles) {
    const double orig = tri_area2(Vec3(s.original_pos.col(t[0])), Vec3(s.original_pos.col(t[1])),
                                  Vec3(s.original_pos.col(t[2])));
    const double val = std::log2(std::abs(area(t)) / orig);
    d.log2_areal.push_back(val);
    if (on_boundary[t[0]] || on_boundary[t[1]] || on_boundary[t[2]]) d.boundary_areal.push_back(val);
    for (int e = 0; e < 3; ++e) edges.emplace(std::pair{std::min(t[e], t[(e + 1) % 3]), std::max(t[e], t[(e + 1) % 3])}, 0);
  }
  for (const auto& [e, unused] : edges) {
    const double orig = (s.original_pos.col(e.first) - s.original_pos.col(e.second)).norm();
    d.log2_metric.push_back(std::log2((position(e.first) - position(e.second)).norm() / orig));
  }
  return d;
}

void append(SliceDistortion& into, const SliceDistortion& from) {
  into.log2_areal.insert(into.log2_areal.end(), from.log2_areal.begin(), from.log2_areal.end());
  into.log2_metric.insert(into.log2_metric.end(), from.log2_metric.begin(), from.log2_metric.end());
  into.boundary_areal.insert(into.boundary_areal.end(), from.boundary_areal.begin(), from.boundary_areal.end());
}

}  // namespace

SliceDistortion slice_distortion(const SliceSurface& s, const Points& mapped) {
  return distortion_impl(
      s, [&](const Tri& t) { return tri_area2(Vec3(mapped.col(t[0])), Vec3(mapped.col(t[1])), Vec3(mapped.col(t[2]))); },
      [&](int v) -> Eigen::VectorXd { return mapped.col(v); });
}

SliceDistortion slice_distortion(const SliceSurface& s, const Points2& mapped) {
  return distortion_impl(
      s,
      [&](const Tri& t) {
        return tri_area2(Eigen::Vector2d(mapped.col(t[0])), Eigen::Vector2d(mapped.col(t[1])),
                         Eigen::Vector2d(mapped.col(t[2])));
      },
      [&](int v) -> Eigen::VectorXd { return mapped.col(v); });
}

BaselineResult run_baseline(const std::vector<Tet>& tets, const Points& x, const Points& z,
                            const std::vector<double>& levels) {
  BaselineResult r;
  r.slices = slice_surfaces(tets, x, z, levels);
  r.embeddings.resize(r.slices.size());
  std::vector<std::size_t> used;
  for (std::size_t i = 0; i < r.slices.size(); ++i) {
    const auto& s = r.slices[i];
    if (s.empty()) continue;
    if (!s.disk) {
      ++r.skipped;
      continue;
    }
    r.embeddings[i] = harmonic_disk(s.original_pos, s.triangles, s.boundary_loop, 1.0);
    used.push_back(i);
  }
  std::vector<const SliceSurface*> surf;
  std::vector<const DiskEmbedding*> emb;
  for (std::size_t i : used) {
    surf.push_back(&r.slices[i]);
    emb.push_back(&r.embeddings[i]);
  }
  r.radius = choose_radius(surf, emb);
  for (std::size_t i : used) {
    r.embeddings[i].uv *= r.radius;
    append(r.baseline, slice_distortion(r.slices[i], r.embeddings[i].uv));
    append(r.volumetric, slice_distortion(r.slices[i], r.slices[i].template_pos));
  }
  return r;
}

}  // namespace tetflat
