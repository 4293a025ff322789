#pragma once

#include <vector>

#include "tetflat/mesh.hpp"
#include "tetflat/resample.hpp"

namespace tetflat {

using Points2 = Eigen::Matrix2Xd;

/// Cross-section of a tet mesh by the plane x3 = level in template space.
/// Every vertex records the tet it was cut from and its barycentric weights
/// there, so original = Z_k alpha exactly.
struct SliceSurface {
  double level = 0.0;
  Points template_pos;            // 3 x n, x3 == level up to rounding
  Points original_pos;            // 3 x n
  std::vector<int> source_tet;
  std::vector<Bary> alpha;
  std::vector<Tri> triangles;     // oriented with +x3 normal in template space
  std::vector<int> boundary_loop; // counter-clockwise seen from +x3
  int components = 0;
  int boundary_loops = 0;
  int euler = 0;
  bool disk = false;

  bool empty() const { return triangles.empty(); }
};

/// floor(2 h / spacing) + 1 planes spaced `spacing` apart and centered on
/// x3 = 0, i.e. between the template planes at -h and +h.
std::vector<double> slice_levels(double half_height, double spacing);
/// Same count rule over the x3 range of `x`, centered on its middle.
std::vector<double> slice_levels(const Points& x, double spacing);

/// Marching-tets slice of the mesh (template positions `x`, original `z`)
/// at one level. Vertices are shared between tets through edge keys.
SliceSurface slice_mesh(const std::vector<Tet>& tets, const Points& x, const Points& z, double level);
std::vector<SliceSurface> slice_surfaces(const std::vector<Tet>& tets, const Points& x, const Points& z,
                                         const std::vector<double>& levels);

struct DiskEmbedding {
  Points2 uv;                  // 2 x n
  bool uniform_fallback = false;
  int flipped = 0;             // flipped triangles in the final embedding
  double residual = 0.0;       // max |L u| over interior rows (weights used)
};

/// Harmonic map of a disk surface to the circle of `radius`: boundary by
/// arc length, interior by cotangent weights (uniform weights when the
/// cotangent map flips a triangle). The boundary vertex of largest x3 in
/// `pos` lands at +90 degrees.
DiskEmbedding harmonic_disk(const Points& pos, const std::vector<Tri>& triangles,
                            const std::vector<int>& boundary_loop, double radius = 1.0);

/// Scale s so that the mean of log2(s^2 A_uv / A_orig) over all triangles
/// of the stack is zero.
double choose_radius(const std::vector<const SliceSurface*>& surfaces,
                     const std::vector<const DiskEmbedding*>& embeddings);

struct SliceDistortion {
  std::vector<double> log2_areal;   // per triangle
  std::vector<double> log2_metric;  // per unique edge
  std::vector<double> boundary_areal;  // triangles touching the slice boundary
};

/// Distortion of the slice triangles between the given 3D/2D positions and
/// the original positions.
SliceDistortion slice_distortion(const SliceSurface& s, const Points& mapped);
SliceDistortion slice_distortion(const SliceSurface& s, const Points2& mapped);

struct BaselineResult {
  std::vector<SliceSurface> slices;          // every level, including skipped ones
  std::vector<DiskEmbedding> embeddings;     // per slice; empty uv when skipped
  double radius = 1.0;
  int skipped = 0;
  SliceDistortion baseline;                  // disk vs original, pooled
  SliceDistortion volumetric;                // template slice vs original, pooled
};

BaselineResult run_baseline(const std::vector<Tet>& tets, const Points& x, const Points& z,
                            const std::vector<double>& levels);

}  // namespace tetflat
