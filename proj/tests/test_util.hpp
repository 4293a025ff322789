#pragma once

#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "tetflat/energy.hpp"
#include "tetflat/synth.hpp"

namespace tetflat::test {

/// Fresh per-test directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::path(TETFLAT_TEST_SCRATCH) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

inline SynthMesh small_slab(double bend, int nx = 5, int ny = 4, int nz = 2) {
  BentSlabSpec s;
  s.length = 30, s.width = 20, s.thickness = 8, s.bend_angle = bend;
  s.nx = nx, s.ny = ny, s.nz = nz;
  return bent_slab(s);
}

/// Gaussian jitter with per-coordinate sd `scale`; retries until no tet flips.
inline Points jitter(const TetMesh& mesh, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, scale);
  for (;;) {
    Points x = mesh.vertices();
    for (int i = 0; i < x.cols(); ++i)
      for (int d = 0; d < 3; ++d) x(d, i) += g(rng);
    bool ok = true;
    for (const auto& t : mesh.tets())
      if (signed_volume6(x.col(t[0]), x.col(t[1]), x.col(t[2]), x.col(t[3])) <= 0) ok = false;
    if (ok) return x;
  }
}

/// Fetal above z = 0, maternal below, per boundary vertex.
inline std::vector<Label> labels_by_sign(const BoundaryTopology& topo, const Points& x) {
  std::vector<Label> l(topo.num_boundary_vertices());
  for (int i = 0; i < topo.num_boundary_vertices(); ++i)
    l[i] = x(2, topo.vertices[i]) >= 0 ? Label::Fetal : Label::Maternal;
  return l;
}

}  // namespace tetflat::test
