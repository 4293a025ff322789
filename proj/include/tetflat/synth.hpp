#pragma once

#include <cstdint>
#include <vector>

#include "tetflat/mesh.hpp"

namespace tetflat {

/// Flat slab [0,L]x[0,W]x[-T/2,T/2] wrapped along its length onto a cylinder
/// of radius L/angle about an axis parallel to y. Arc length on the
/// mid-surface is preserved.
struct BentSlabSpec {
  double length = 100.0;
  double width = 60.0;
  double thickness = 12.0;
  double bend_angle = 0.0;  // radians; 0 gives an axis-aligned box
  int nx = 25, ny = 12, nz = 4;
};

struct ShellSpec {
  double outer_radius = 40.0;
  double thickness = 10.0;
  int rings = 10;   // polar subdivisions from pole to rim
  int layers = 3;   // subdivisions through the thickness
};

/// Ground-truth surface a vertex belongs to.
enum class SurfaceTag : std::int8_t { Interior = 0, Outer = 1, Inner = 2, Side = 3 };

struct SynthMesh {
  TetMesh mesh;
  Points flat_reference;            // analytic flattened coordinates per vertex
  std::vector<SurfaceTag> tags;     // per vertex
};

/// Throws std::invalid_argument for invalid or self-intersecting specs.
SynthMesh bent_slab(const BentSlabSpec& spec);

SynthMesh hemispherical_shell(const ShellSpec& spec);
/// Convenience form: `resolution` rings, layers chosen to keep cells roughly
/// isotropic.
SynthMesh hemispherical_shell(double outer_radius, double thickness, int resolution);

/// Exact volume of a hemispherical shell.
double hemispherical_shell_volume(double outer_radius, double thickness);

}  // namespace tetflat
