#include "tetflat/convex_hull.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <utility>

namespace tetflat {

double ConvexHull::signed_distance(const Vec3& p) const {
  double d = -std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < faces.size(); ++f) d = std::max(d, normals[f].dot(p) - offsets[f]);
  return d;
}

namespace {

struct Face {
  Tri v;
  Vec3 n;
  double d = 0.0;
  std::vector<int> outside;
  bool alive = true;
};

class Builder {
 public:
  Builder(const std::vector<Vec3>& pts, double eps) : p_(pts), eps_(eps) {}

  ConvexHull run() {
    seed();
    std::vector<int> work;
    for (std::size_t f = 0; f < faces_.size(); ++f)
      if (!faces_[f].outside.empty()) work.push_back(static_cast<int>(f));
    while (!work.empty()) {
      const int f = work.back();
      work.pop_back();
      if (!faces_[f].alive || faces_[f].outside.empty()) continue;
      for (int nf : add_point(f))
        if (!faces_[nf].outside.empty()) work.push_back(nf);
    }
    ConvexHull hull;
    for (const auto& f : faces_) {
      if (!f.alive) continue;
      hull.faces.push_back(f.v);
      hull.normals.push_back(f.n);
      hull.offsets.push_back(f.d);
    }
    return hull;
  }

 private:
  double dist(const Face& f, int i) const { return f.n.dot(p_[i]) - f.d; }

  int make_face(int a, int b, int c) {
    Face f;
    f.v = {a, b, c};
    const Vec3 n = (p_[b] - p_[a]).cross(p_[c] - p_[a]);
    f.n = n.normalized();
    f.d = f.n.dot(p_[a]);
    faces_.push_back(std::move(f));
    const int id = static_cast<int>(faces_.size()) - 1;
    for (int k = 0; k < 3; ++k) edges_[{faces_[id].v[k], faces_[id].v[(k + 1) % 3]}] = id;
    return id;
  }

  void assign(const std::vector<int>& pts, const std::vector<int>& candidates) {
    for (int i : pts) {
      int best = -1;
      double best_d = eps_;
      for (int f : candidates) {
        const double d = dist(faces_[f], i);
        if (d > best_d) {
          best_d = d;
          best = f;
        }
      }
      if (best >= 0) faces_[best].outside.push_back(i);
    }
  }

  void seed() {
    const int n = static_cast<int>(p_.size());
    if (n < 4) throw HullError("convex hull needs at least 4 points");
    // Extreme points along the axes; keep the most distant pair.
    int ext[6] = {0, 0, 0, 0, 0, 0};
    for (int i = 0; i < n; ++i)
      for (int a = 0; a < 3; ++a) {
        if (p_[i][a] < p_[ext[2 * a]][a]) ext[2 * a] = i;
        if (p_[i][a] > p_[ext[2 * a + 1]][a]) ext[2 * a + 1] = i;
      }
    int i0 = 0, i1 = 0;
    double best = -1;
    for (int a = 0; a < 6; ++a)
      for (int b = a + 1; b < 6; ++b) {
        const double d = (p_[ext[a]] - p_[ext[b]]).squaredNorm();
        if (d > best) {
          best = d;
          i0 = ext[a];
          i1 = ext[b];
        }
      }
    if (std::sqrt(best) <= eps_) throw HullError("degenerate hull: points coincide");
    const Vec3 dir = (p_[i1] - p_[i0]).normalized();
    int i2 = -1;
    best = eps_;
    for (int i = 0; i < n; ++i) {
      const Vec3 r = p_[i] - p_[i0];
      const double d = (r - r.dot(dir) * dir).norm();
      if (d > best) {
        best = d;
        i2 = i;
      }
    }
    if (i2 < 0) throw HullError("degenerate hull: points are collinear");
    const Vec3 pn = (p_[i1] - p_[i0]).cross(p_[i2] - p_[i0]).normalized();
    int i3 = -1;
    best = eps_;
    for (int i = 0; i < n; ++i) {
      const double d = std::abs(pn.dot(p_[i] - p_[i0]));
      if (d > best) {
        best = d;
        i3 = i;
      }
    }
    if (i3 < 0) throw HullError("degenerate hull: points are coplanar");

    // Orient the seed tet so faces point outward.
    if (pn.dot(p_[i3] - p_[i0]) > 0) std::swap(i1, i2);
    std::vector<int> f = {make_face(i0, i1, i2), make_face(i0, i3, i1), make_face(i1, i3, i2),
                          make_face(i2, i3, i0)};
    std::vector<int> rest;
    rest.reserve(n);
    for (int i = 0; i < n; ++i)
      if (i != i0 && i != i1 && i != i2 && i != i3) rest.push_back(i);
    assign(rest, f);
  }

  // Adds the farthest outside point of face `f`; returns the new faces.
  std::vector<int> add_point(int f) {
    const auto& out = faces_[f].outside;
    int apex = out[0];
    double far = dist(faces_[f], apex);
    for (int i : out) {
      const double d = dist(faces_[f], i);
      if (d > far) {
        far = d;
        apex = i;
      }
    }

    std::vector<int> visible = {f};
    std::vector<char> seen(faces_.size(), 0);
    seen[f] = 1;
    std::vector<std::pair<int, int>> horizon;
    for (std::size_t q = 0; q < visible.size(); ++q) {
      const Face& vf = faces_[visible[q]];
      for (int k = 0; k < 3; ++k) {
        const int a = vf.v[k], b = vf.v[(k + 1) % 3];
        const int nb = edges_.at({b, a});
        if (seen[nb] == 1) continue;
        if (seen[nb] == 2 || dist(faces_[nb], apex) <= eps_) {
          seen[nb] = 2;
          horizon.emplace_back(a, b);
        } else {
          seen[nb] = 1;
          visible.push_back(nb);
        }
      }
    }

    std::vector<int> orphans;
    for (int vf : visible) {
      Face& face = faces_[vf];
      face.alive = false;
      for (int i : face.outside)
        if (i != apex) orphans.push_back(i);
      face.outside.clear();
      for (int k = 0; k < 3; ++k) edges_.erase({face.v[k], face.v[(k + 1) % 3]});
    }
    std::vector<int> created;
    created.reserve(horizon.size());
    for (const auto& [a, b] : horizon) created.push_back(make_face(a, b, apex));
    assign(orphans, created);
    return created;
  }

  const std::vector<Vec3>& p_;
  double eps_;
  std::vector<Face> faces_;
  std::map<std::pair<int, int>, int> edges_;
};

}  // namespace

ConvexHull quickhull(const std::vector<Vec3>& points, double eps) {
  if (eps < 0) {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (const auto& p : points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    eps = points.empty() ? 0.0 : 1e-10 * (hi - lo).norm();
  }
  return Builder(points, eps).run();
}

}  // namespace tetflat
