#include "tetflat/resample.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tetflat/parallel.hpp"

namespace tetflat {

Bary barycentric(const Vec3& x, const Points& pts, const Tet& t) {
  const Vec3 rest = edge_matrix(pts, t).inverse() * (x - pts.col(t[0]));
  Bary a;
  a.tail<3>() = rest;
  a[0] = 1.0 - rest.sum();
  return a;
}

PointLocator::PointLocator(const TetMesh& mesh, double cell_size) : mesh_(&mesh) {
  const auto& x = mesh.vertices();
  const int nt = mesh.num_tets();
  inverse_.resize(nt);
  height_.resize(nt);
  double mean_extent = 0.0;
  for (int k = 0; k < nt; ++k) {
    const Tet& t = mesh.tets()[k];
    const Mat3 e = edge_matrix(x, t);
    inverse_[k] = e.inverse();
    const double v6 = e.determinant();
    for (int i = 0; i < 4; ++i) {
      const Vec3 a = x.col(t[(i + 1) % 4]), b = x.col(t[(i + 2) % 4]), c = x.col(t[(i + 3) % 4]);
      height_[k][i] = v6 / (b - a).cross(c - a).norm();
    }
    Vec3 lo = x.col(t[0]), hi = lo;
    for (int c : t) {
      lo = lo.cwiseMin(x.col(c));
      hi = hi.cwiseMax(x.col(c));
    }
    mean_extent += (hi - lo).maxCoeff();
  }
  mean_extent /= std::max(1, nt);
  tol_ = 1e-9 * mesh.bbox_diagonal();
  cell_ = cell_size > 0 ? cell_size : std::max(mean_extent, 1e-12);

  lo_ = mesh.bbox_min();
  const Vec3 ext = mesh.bbox_max() - lo_;
  // Keep the grid at most ~8 cells per tet.
  for (;;) {
    long long total = 1;
    for (int d = 0; d < 3; ++d) {
      dims_[d] = std::max(1, static_cast<int>(std::ceil(ext[d] / cell_)));
      total *= dims_[d];
    }
    if (total <= 8LL * std::max(1, nt) + 8) break;
    cell_ *= 1.5;
  }
  cells_.assign(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2], {});
  const Vec3 pad = Vec3::Constant(tol_);
  for (int k = 0; k < nt; ++k) {
    const Tet& t = mesh.tets()[k];
    Vec3 lo = x.col(t[0]), hi = lo;
    for (int c : t) {
      lo = lo.cwiseMin(x.col(c));
      hi = hi.cwiseMax(x.col(c));
    }
    const auto a = cell_of(lo - pad), b = cell_of(hi + pad);
    for (int i = a[0]; i <= b[0]; ++i)
      for (int j = a[1]; j <= b[1]; ++j)
        for (int l = a[2]; l <= b[2]; ++l)
          cells_[static_cast<std::size_t>(i) + dims_[0] * (static_cast<std::size_t>(j) + dims_[1] * l)].push_back(k);
  }
}

std::array<int, 3> PointLocator::cell_of(const Vec3& p) const {
  std::array<int, 3> c;
  for (int d = 0; d < 3; ++d)
    c[d] = std::clamp(static_cast<int>(std::floor((p[d] - lo_[d]) / cell_)), 0, dims_[d] - 1);
  return c;
}

bool PointLocator::contains(int k, const Vec3& p, Bary* alpha) const {
  const Tet& t = mesh_->tets()[k];
  const auto& x = mesh_->vertices();
  const Vec3 r = inverse_[k] * (p - x.col(t[0]));
  Bary a;
  a.tail<3>() = r;
  a[0] = 1.0 - r.sum();
  if (alpha) *alpha = a;
  for (int i = 0; i < 4; ++i)
    if (a[i] * height_[k][i] < -tol_) return false;
  return true;
}

std::optional<Location> PointLocator::locate(const Vec3& p) const {
  const Vec3 lo = mesh_->bbox_min().array() - tol_, hi = mesh_->bbox_max().array() + tol_;
  if ((p.array() < lo.array()).any() || (p.array() > hi.array()).any()) return std::nullopt;
  const auto c = cell_of(p);
  const auto& cand = cells_[static_cast<std::size_t>(c[0]) + dims_[0] * (static_cast<std::size_t>(c[1]) + dims_[1] * c[2])];
  Location loc;
  for (int k : cand)  // ascending tet order
    if (contains(k, p, &loc.alpha)) {
      loc.tet = k;
      return loc;
    }
  return std::nullopt;
}

std::optional<Location> PointLocator::locate_brute_force(const Vec3& p) const {
  Location loc;
  for (int k = 0; k < mesh_->num_tets(); ++k)
    if (contains(k, p, &loc.alpha)) {
      loc.tet = k;
      return loc;
    }
  return std::nullopt;
}

GridSpec default_output_grid(const TetMesh& mesh, const Vec3& spacing) {
  GridSpec g;
  g.spacing = spacing;
  g.origin = mesh.bbox_min() - spacing;
  const Vec3 top = mesh.bbox_max() + spacing;
  for (int d = 0; d < 3; ++d)
    g.dims[d] = static_cast<int>(std::floor((top[d] - g.origin[d]) / spacing[d] + 1e-9)) + 1;
  return g;
}

ScalarVolume pull_back(const ScalarVolume& input, const TetMesh& z_mesh, const TetMesh& x_mesh,
                       const GridSpec& grid) {
  if (z_mesh.tets() != x_mesh.tets() || z_mesh.num_vertices() != x_mesh.num_vertices())
    throw ResampleError("original and template meshes do not share connectivity");
  input.validate();
  const double fill = std::numeric_limits<double>::quiet_NaN();
  ScalarVolume out(grid.dims, grid.spacing, grid.origin, fill);
  out.metadata["fill_value"] = "nan";
  out.metadata["frame"] = "template";
  const PointLocator locator(x_mesh);
  const auto& z = z_mesh.vertices();
  const int nk = grid.dims[2];
  parallel_for(nk, [&](int b, int e) {
    for (int k = b; k < e; ++k)
      for (int j = 0; j < grid.dims[1]; ++j)
        for (int i = 0; i < grid.dims[0]; ++i) {
          const auto loc = locator.locate(out.world(i, j, k));
          if (!loc) continue;
          const Tet& t = z_mesh.tets()[loc->tet];
          Vec3 p = Vec3::Zero();
          for (int c = 0; c < 4; ++c) p += loc->alpha[c] * z.col(t[c]);
          out.at(i, j, k) = input.sample_trilinear(p);
        }
  });
  return out;
}

}  // namespace tetflat
