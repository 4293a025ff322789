#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "tetflat/metrics.hpp"
#include "tetflat/synth.hpp"
#include "test_util.hpp"

using namespace tetflat;

TEST_SUITE("metrics") {

TEST_CASE("summary statistics against direct formulas") {
  const std::vector<double> v{4, 1, 9, 2, 7, 3, 100, 5, 6, 8};
  const auto s = summarize(v);
  CHECK(s.n == 10);
  CHECK(s.mean == doctest::Approx(14.5));
  double ss = 0;
  for (double x : v) ss += (x - 14.5) * (x - 14.5);
  CHECK(s.sd == doctest::Approx(std::sqrt(ss / 9)));
  // Sorted: 1 2 3 4 5 6 7 8 9 100; positions 2.25, 4.5, 6.75.
  CHECK(s.q1 == doctest::Approx(3.25));
  CHECK(s.median == doctest::Approx(5.5));
  CHECK(s.q3 == doctest::Approx(7.75));
  CHECK(s.min == 1);
  CHECK(s.max == 100);
  CHECK(s.whisker_lo == 1);
  CHECK(s.whisker_hi == 9);  // 100 lies beyond q3 + 1.5 IQR = 14.5
  CHECK(quantile({5.0}, 0.95) == 5.0);
}

TEST_CASE("template rms") {
  const auto box = test::small_slab(0.0);
  const auto topo = boundary_topology(box.mesh);
  const Points& z = box.mesh.vertices();
  std::vector<Label> labels(topo.num_boundary_vertices(), Label::Margin);
  for (int i = 0; i < topo.num_boundary_vertices(); ++i) {
    const double zz = z(2, topo.vertices[i]);
    if (zz == 4.0) labels[i] = Label::Fetal;
    if (zz == -4.0) labels[i] = Label::Maternal;
  }
  CHECK(template_rms(topo, z, labels, ParallelPlanes{4.0}) == 0.0);
  // Push every constrained vertex one 3 mm voxel off its plane.
  Points x = z;
  double constrained = 0;
  for (int i = 0; i < topo.num_boundary_vertices(); ++i) {
    if (labels[i] == Label::Fetal) x(2, topo.vertices[i]) += 3.0;
    if (labels[i] == Label::Maternal) x(2, topo.vertices[i]) -= 3.0;
    if (labels[i] != Label::Margin) constrained += topo.area_weight[i];
  }
  CHECK(template_rms(topo, x, labels, ParallelPlanes{4.0}, 3.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(template_rms_unnormalized(topo, x, labels, ParallelPlanes{4.0}, 3.0) ==
        doctest::Approx(std::sqrt(constrained)).epsilon(1e-14));
  // Single plane: only the maternal side counts.
  CHECK(template_rms(topo, x, labels, SinglePlane{4.0}, 3.0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("dirichlet excess and log distortions under scaling") {
  const auto slab = test::small_slab(1.0);
  const auto topo = boundary_topology(slab.mesh);
  const Points& z = slab.mesh.vertices();
  CHECK(dirichlet_excess(slab.mesh, topo, z) == 0.0);
  const Points two = 2.0 * z;
  CHECK(dirichlet_excess(slab.mesh, topo, two) == doctest::Approx(112.5).epsilon(1e-13));
  for (double v : volumetric_distortion(slab.mesh, z)) CHECK(std::abs(v) < 1e-13);
  for (double v : volumetric_distortion(slab.mesh, two)) CHECK(v == doctest::Approx(3.0).epsilon(1e-13));
  for (double v : areal_distortion(slab.mesh, topo, z)) CHECK(std::abs(v) < 1e-13);
  for (double v : areal_distortion(slab.mesh, topo, two)) CHECK(v == doctest::Approx(2.0).epsilon(1e-13));
  const auto edges = slab.mesh.edges();
  for (double v : metric_distortion(slab.mesh, edges, z)) CHECK(v == 0.0);
  for (double v : metric_distortion(slab.mesh, edges, two)) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("spatial profiles") {
  const auto slab = test::small_slab(0.0, 8, 6, 2);
  const Points x = slab.mesh.vertices().colwise() - slab.mesh.centroid();
  const auto zero = spatial_profiles(x, std::vector<double>(x.cols(), 0.0));
  for (const auto& b : zero.radial) CHECK(b.mean == 0.0);
  for (const auto& b : zero.height) CHECK(b.mean == 0.0);
  const auto flat = spatial_profiles(x, std::vector<double>(x.cols(), 0.7));
  int nonempty = 0;
  for (const auto& b : flat.radial)
    if (b.count > 0) {
      CHECK(b.mean == doctest::Approx(0.7).epsilon(1e-14));
      ++nonempty;
    }
  CHECK(nonempty > 1);
  CHECK(flat.max_adjacent_step(true) < 1e-14);
  CHECK(flat.max_adjacent_step(false) < 1e-14);
  int total = 0;
  for (const auto& b : flat.height) total += b.count;
  CHECK(total == x.cols());
}

TEST_CASE("tet to vertex averaging") {
  const auto slab = test::small_slab(0.5, 3, 3, 1);
  std::vector<double> vals(slab.mesh.num_tets());
  for (int k = 0; k < slab.mesh.num_tets(); ++k) vals[k] = 2.5;
  for (double v : tet_to_vertex(slab.mesh, vals)) CHECK(v == doctest::Approx(2.5).epsilon(1e-14));
}

TEST_CASE("report files") {
  const auto slab = test::small_slab(1.0);
  const Points x = 1.5 * slab.mesh.vertices();
  ReportInputs in;
  in.z = &slab.mesh;
  in.x = &x;
  const auto r = distortion_report(in);
  CHECK_FALSE(r.template_rms.has_value());
  CHECK(r.log2_det.size() == static_cast<std::size_t>(slab.mesh.num_tets()));
  const auto j = report_json(r);
  CHECK(j["log2_metric"]["mean"].get<double>() == doctest::Approx(std::log2(1.5)));
  CHECK(j["template_rms_voxels"].is_null());
  const auto dir = test::scratch_dir("report");
  write_report(r, dir / "rep");
  for (const char* suffix : {".json", "_tets.csv", "_triangles.csv", "_edges.csv", "_profiles.csv"})
    CHECK(std::filesystem::exists(dir / (std::string("rep") + suffix)));
  std::ifstream f(dir / "rep_tets.csv");
  int lines = 0;
  for (std::string s; std::getline(f, s);) ++lines;
  CHECK(lines == slab.mesh.num_tets() + 1);
}

}  // TEST_SUITE
