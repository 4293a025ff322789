#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/SVD>

#include "tetflat/baseline2d.hpp"
#include "tetflat/synth.hpp"
#include "test_util.hpp"

using namespace tetflat;

namespace {

double slice_area(const SliceSurface& s) {
  double a = 0;
  for (const Tri& t : s.triangles) a += triangle_area(s.template_pos, t);
  return a;
}

/// Planar disk triangulated on polar rings; boundary vertices evenly spaced.
struct PlanarDisk {
  Points pos;
  std::vector<Tri> tris;
  std::vector<int> loop;
};

PlanarDisk planar_disk(int rings, int sectors) {
  PlanarDisk d;
  std::vector<Vec3> p{Vec3::Zero()};
  for (int r = 1; r <= rings; ++r)
    for (int s = 0; s < sectors; ++s) {
      const double a = 2 * std::numbers::pi * s / sectors;
      p.emplace_back(r * std::cos(a), r * std::sin(a), 0.0);
    }
  d.pos.resize(3, p.size());
  for (std::size_t i = 0; i < p.size(); ++i) d.pos.col(i) = p[i];
  auto id = [&](int r, int s) { return r == 0 ? 0 : 1 + (r - 1) * sectors + (s % sectors); };
  for (int s = 0; s < sectors; ++s) d.tris.push_back({0, id(1, s), id(1, s + 1)});
  for (int r = 1; r < rings; ++r)
    for (int s = 0; s < sectors; ++s) {
      d.tris.push_back({id(r, s), id(r + 1, s), id(r + 1, s + 1)});
      d.tris.push_back({id(r, s), id(r + 1, s + 1), id(r, s + 1)});
    }
  for (int s = 0; s < sectors; ++s) d.loop.push_back(id(rings, s));
  return d;
}

}  // namespace

TEST_SUITE("baseline2d") {

TEST_CASE("slice levels") {
  CHECK(slice_levels(6.0, 3.0).size() == 5);
  CHECK(slice_levels(6.75, 3.0).size() == 5);
  const auto l = slice_levels(7.0, 3.0);
  CHECK(l.size() == 5);
  CHECK(l.front() == doctest::Approx(-6.0));
  CHECK(l.back() == doctest::Approx(6.0));
  CHECK(slice_levels(1.0, 3.0).size() == 1);
}

TEST_CASE("box cross-section is the full rectangle") {
  BentSlabSpec s;
  s.length = 40, s.width = 25, s.thickness = 10, s.nx = 8, s.ny = 5, s.nz = 2;
  const auto box = bent_slab(s);
  const Points& x = box.mesh.vertices();
  // Level 0 runs through a vertex layer, 1.7 cuts tets in their interiors.
  for (double level : {0.0, 1.7, -3.2}) {
    const auto sl = slice_mesh(box.mesh.tets(), x, x, level);
    CHECK(slice_area(sl) == doctest::Approx(s.length * s.width).epsilon(1e-9));
    CHECK(sl.disk);
    CHECK(sl.components == 1);
    CHECK(sl.boundary_loops == 1);
    CHECK(sl.euler == 1);
    for (int v = 0; v < sl.template_pos.cols(); ++v) CHECK(std::abs(sl.template_pos(2, v) - level) < 1e-12);
    // Transported positions agree with the source tets.
    CHECK((sl.original_pos - sl.template_pos).cwiseAbs().maxCoeff() < 1e-12);
    for (const Tri& t : sl.triangles) CHECK(triangle_normal(sl.template_pos, t).z() > 0.999);
  }
  CHECK(slice_mesh(box.mesh.tets(), x, x, 20.0).empty());
}

TEST_CASE("harmonic map of a planar disk is a similarity") {
  const auto d = planar_disk(6, 24);
  const auto e = harmonic_disk(d.pos, d.tris, d.loop, 2.0);
  CHECK_FALSE(e.uniform_fallback);
  CHECK(e.flipped == 0);
  for (const Tri& t : d.tris) {
    const Eigen::Vector2d a = e.uv.col(t[0]), b = e.uv.col(t[1]), c = e.uv.col(t[2]);
    const Eigen::Vector2d u = b - a, v = c - a;
    CHECK(u.x() * v.y() - u.y() * v.x() > 0);
  }
  // Best similarity fit (Procrustes) from pos.xy to uv.
  const Eigen::Matrix2Xd p = d.pos.topRows<2>();
  const Eigen::Vector2d pc = p.rowwise().mean(), qc = e.uv.rowwise().mean();
  const Eigen::Matrix2Xd pp = p.colwise() - pc, qq = e.uv.colwise() - qc;
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(qq * pp.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix2d r = svd.matrixU() * svd.matrixV().transpose();
  const double scale = svd.singularValues().sum() / pp.squaredNorm();
  const double err = (qq - scale * r * pp).cwiseAbs().maxCoeff();
  CHECK(r.determinant() > 0);
  CHECK(scale == doctest::Approx(2.0 / 6.0).epsilon(1e-9));
  CHECK(err < 1e-9);
}

TEST_CASE("radius choice closes the mean log areal ratio") {
  SliceSurface s;
  s.original_pos.resize(3, 3);
  s.original_pos << 0, 1, 0, 0, 0, 2, 0, 0, 0;  // area 1
  s.triangles = {Tri{0, 1, 2}};
  DiskEmbedding e;
  e.uv.resize(2, 3);
  e.uv << 0, 2, 0, 0, 0, 4;  // area 4
  CHECK(choose_radius({&s}, {&e}) == doctest::Approx(0.5).epsilon(1e-15));

  const auto d = planar_disk(4, 12);
  SliceSurface m;
  m.original_pos = d.pos;
  m.original_pos.row(0) *= 1.3;
  m.triangles = d.tris;
  m.boundary_loop = d.loop;
  const auto em = harmonic_disk(d.pos, d.tris, d.loop, 1.0);
  const double sc = choose_radius({&s, &m}, {&e, &em});
  DiskEmbedding es = e, ems = em;
  es.uv *= sc;
  ems.uv *= sc;
  double sum = 0;
  int n = 0;
  for (const auto& [surf, emb] : {std::pair{&s, &es}, std::pair{&m, &ems}})
    for (double v : slice_distortion(*surf, emb->uv).log2_areal) sum += v, ++n;
  CHECK(std::abs(sum / n) < 1e-12);
}

TEST_CASE("flattened bent slab slices are disks") {
  // The analytic flat reference stands in for a flattening result.
  BentSlabSpec s;
  s.length = 60, s.width = 30, s.thickness = 10, s.bend_angle = 2.0, s.nx = 15, s.ny = 8, s.nz = 3;
  const auto slab = bent_slab(s);
  const auto levels = slice_levels(s.thickness / 2, 3.0);
  CHECK(levels.size() == static_cast<std::size_t>(std::floor(s.thickness / 3.0)) + 1);
  const auto res = run_baseline(slab.mesh.tets(), slab.flat_reference, slab.mesh.vertices(), levels);
  CHECK(res.skipped == 0);
  for (const auto& sl : res.slices) {
    CHECK(sl.disk);
    CHECK(sl.boundary_loops == 1);
  }
  // The volumetric side is exact up to the bending strain here.
  double mean_vol = 0;
  for (double v : res.volumetric.log2_areal) mean_vol += std::abs(v);
  mean_vol /= res.volumetric.log2_areal.size();
  double mean_base = 0;
  for (double v : res.baseline.log2_areal) mean_base += std::abs(v);
  mean_base /= res.baseline.log2_areal.size();
  CHECK(mean_vol < mean_base);
}

}  // TEST_SUITE
