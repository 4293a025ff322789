#include "tetflat/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tetflat {

namespace {

constexpr double kPi = std::numbers::pi;

// Split every tet into positive orientation; generators never produce
// degenerate tets, so a zero volume here is a bug in the generator.
TetMesh make_mesh(Points x, std::vector<Tet> tets) {
  orient_tets(x, tets);
  return TetMesh(std::move(x), std::move(tets));
}

// Prism (a,b,c) -> (a+off, b+off, c+off) split so that every quad face uses
// the diagonal from its lower-index bottom vertex to its higher-index top
// vertex. Neighbouring prisms therefore agree on shared faces.
void split_prism(Tri bottom, int offset, std::vector<Tet>& out) {
  std::sort(bottom.begin(), bottom.end());
  const int v0 = bottom[0], v1 = bottom[1], v2 = bottom[2];
  out.push_back({v0, v1, v2, v2 + offset});
  out.push_back({v0, v1, v1 + offset, v2 + offset});
  out.push_back({v0, v0 + offset, v1 + offset, v2 + offset});
}

}  // namespace

SynthMesh bent_slab(const BentSlabSpec& s) {
  if (!(s.length > 0 && s.width > 0 && s.thickness > 0))
    throw std::invalid_argument("slab dimensions must be positive");
  if (s.nx < 1 || s.ny < 1 || s.nz < 1)
    throw std::invalid_argument("slab resolution must be at least 1 per axis");
  if (!(s.bend_angle >= 0 && s.bend_angle < 2 * kPi))
    throw std::invalid_argument("bend angle must lie in [0, 2pi)");
  const bool bent = s.bend_angle > 0;
  const double radius = bent ? s.length / s.bend_angle : 0.0;
  if (bent && !(radius > s.thickness / 2))
    throw std::invalid_argument("bend radius L/angle must exceed T/2 (self-intersection)");

  const int px = s.nx + 1, py = s.ny + 1, pz = s.nz + 1;
  const int n = px * py * pz;
  auto id = [&](int i, int j, int k) { return i + px * (j + py * k); };

  Points flat(3, n), x(3, n);
  std::vector<SurfaceTag> tags(n, SurfaceTag::Interior);
  for (int k = 0; k < pz; ++k)
    for (int j = 0; j < py; ++j)
      for (int i = 0; i < px; ++i) {
        const double u = s.length * i / s.nx;
        const double v = s.width * j / s.ny;
        const double w = -s.thickness / 2 + s.thickness * k / s.nz;
        const int v_id = id(i, j, k);
        flat.col(v_id) = Vec3(u, v, w);
        if (bent) {
          const double a = (u - s.length / 2) / radius;
          x.col(v_id) = Vec3(s.length / 2 + (radius + w) * std::sin(a), v,
                             (radius + w) * std::cos(a) - radius);
        } else {
          x.col(v_id) = flat.col(v_id);
        }
        if (k == pz - 1)
          tags[v_id] = SurfaceTag::Outer;
        else if (k == 0)
          tags[v_id] = SurfaceTag::Inner;
        else if (i == 0 || i == px - 1 || j == 0 || j == py - 1)
          tags[v_id] = SurfaceTag::Side;
      }

  // Kuhn subdivision: one tet per axis permutation along the 000 -> 111 diagonal.
  static constexpr int kPerms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                       {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  std::vector<Tet> tets;
  tets.reserve(static_cast<std::size_t>(6) * s.nx * s.ny * s.nz);
  for (int k = 0; k < s.nz; ++k)
    for (int j = 0; j < s.ny; ++j)
      for (int i = 0; i < s.nx; ++i)
        for (const auto& p : kPerms) {
          int c[3] = {i, j, k};
          Tet t;
          t[0] = id(c[0], c[1], c[2]);
          for (int step = 0; step < 3; ++step) {
            ++c[p[step]];
            t[step + 1] = id(c[0], c[1], c[2]);
          }
          tets.push_back(t);
        }
  // Orientation is decided in flat coordinates; the bend preserves it.
  orient_tets(flat, tets);
  return {TetMesh(std::move(x), std::move(tets)), std::move(flat), std::move(tags)};
}

SynthMesh hemispherical_shell(const ShellSpec& s) {
  if (!(s.outer_radius > 0 && s.thickness > 0 && s.thickness < s.outer_radius))
    throw std::invalid_argument("shell needs 0 < thickness < outer radius");
  if (s.rings < 1 || s.layers < 1) throw std::invalid_argument("shell resolution must be >= 1");

  // Disk triangulation: centre vertex plus rings of 6*i vertices.
  std::vector<int> ring_start(s.rings + 1);
  std::vector<int> ring_size(s.rings + 1);
  int nd = 0;
  for (int i = 0; i <= s.rings; ++i) {
    ring_start[i] = nd;
    ring_size[i] = i == 0 ? 1 : 6 * i;
    nd += ring_size[i];
  }
  std::vector<Tri> disk;
  for (int i = 1; i <= s.rings; ++i) {
    const int n1 = ring_size[i - 1], n2 = ring_size[i];
    auto in = [&](int p) { return ring_start[i - 1] + p % n1; };
    auto out = [&](int q) { return ring_start[i] + q % n2; };
    if (i == 1) {
      for (int q = 0; q < n2; ++q) disk.push_back({in(0), out(q), out(q + 1)});
      continue;
    }
    int p = 0, q = 0;
    while (p < n1 || q < n2) {
      // Advance whichever ring's next vertex comes first in angle.
      const bool advance_outer = q < n2 && (p == n1 || static_cast<long>(q + 1) * n1 <=
                                                           static_cast<long>(p + 1) * n2);
      if (advance_outer) {
        disk.push_back({in(p), out(q), out(q + 1)});
        ++q;
      } else {
        disk.push_back({in(p), out(q), in(p + 1)});
        ++p;
      }
    }
  }

  const int n = nd * (s.layers + 1);
  const double inner = s.outer_radius - s.thickness;
  Points x(3, n), flat(3, n);
  std::vector<SurfaceTag> tags(n, SurfaceTag::Interior);
  for (int l = 0; l <= s.layers; ++l) {
    const double r = inner + s.thickness * l / s.layers;
    for (int i = 0; i <= s.rings; ++i)
      for (int q = 0; q < ring_size[i]; ++q) {
        const double theta = 0.5 * kPi * i / s.rings;
        const double psi = 2 * kPi * q / ring_size[i];
        const int v = l * nd + ring_start[i] + q;
        x.col(v) = r * Vec3(std::sin(theta) * std::cos(psi), std::sin(theta) * std::sin(psi),
                            std::cos(theta));
        // Azimuthal equidistant unrolling of the mid-surface.
        const double rho = (inner + s.thickness / 2) * theta;
        flat.col(v) = Vec3(rho * std::cos(psi), rho * std::sin(psi), r - inner - s.thickness / 2);
        if (l == s.layers)
          tags[v] = SurfaceTag::Outer;
        else if (l == 0)
          tags[v] = SurfaceTag::Inner;
        else if (i == s.rings)
          tags[v] = SurfaceTag::Side;
      }
  }

  std::vector<Tet> tets;
  tets.reserve(disk.size() * 3 * s.layers);
  for (int l = 0; l < s.layers; ++l)
    for (const auto& t : disk) split_prism({t[0] + l * nd, t[1] + l * nd, t[2] + l * nd}, nd, tets);
  return {make_mesh(std::move(x), std::move(tets)), std::move(flat), std::move(tags)};
}

SynthMesh hemispherical_shell(double outer_radius, double thickness, int resolution) {
  ShellSpec s;
  s.outer_radius = outer_radius;
  s.thickness = thickness;
  s.rings = resolution;
  const double ring_step = 0.5 * kPi * (outer_radius - thickness / 2) / std::max(resolution, 1);
  s.layers = std::max(1, static_cast<int>(std::lround(thickness / ring_step)));
  return hemispherical_shell(s);
}

double hemispherical_shell_volume(double outer_radius, double thickness) {
  const double r = outer_radius - thickness;
  return 2.0 / 3.0 * kPi * (outer_radius * outer_radius * outer_radius - r * r * r);
}

}  // namespace tetflat
