#include "tetflat/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "tetflat/parallel.hpp"

namespace tetflat {

namespace {

constexpr double kPi = 3.14159265358979323846;

double percentile95(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("percentile of an empty set");
  const std::size_t rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(v.size())));
  const std::size_t idx = std::min(v.size() - 1, rank == 0 ? 0 : rank - 1);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
  return v[idx];
}

}  // namespace

Points Alignment::apply(const Points& z) const {
  return rotation * (z.colwise() - center);
}

Alignment principal_alignment(const Points& z) {
  Alignment a;
  a.center = z.rowwise().mean();
  const Points c = z.colwise() - a.center;
  const Mat3 cov = c * c.transpose() / static_cast<double>(z.cols());
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  // Eigen sorts ascending; rows of the rotation are the axes, largest first.
  for (int i = 0; i < 3; ++i) {
    Vec3 axis = es.eigenvectors().col(2 - i);
    Eigen::Index dom;
    axis.cwiseAbs().maxCoeff(&dom);
    if (axis[dom] < 0) axis = -axis;
    a.rotation.row(i) = axis.transpose();
  }
  if (a.rotation.determinant() < 0) a.rotation.row(2) *= -1.0;
  return a;
}

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Closest point by Voronoi region of the triangle.
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return ap.norm();
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return bp.norm();
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return (p - (a + d1 / (d1 - d3) * ab)).norm();
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return cp.norm();
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return (p - (a + d2 / (d2 - d6) * ac)).norm();
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
    return (p - (b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b))).norm();
  const double denom = 1.0 / (va + vb + vc);
  return (p - (a + ab * (vb * denom) + ac * (vc * denom))).norm();
}

double half_thickness_estimate(const TetMesh& mesh, const BoundaryTopology& topo) {
  const auto& x = mesh.vertices();
  const int nt = mesh.num_tets();
  std::vector<double> dist(nt);
  parallel_for(nt, [&](int b, int e) {
    for (int k = b; k < e; ++k) {
      const Tet& t = mesh.tets()[k];
      const Vec3 p = 0.25 * (x.col(t[0]) + x.col(t[1]) + x.col(t[2]) + x.col(t[3]));
      double best = std::numeric_limits<double>::infinity();
      for (const Tri& f : topo.triangles)
        best = std::min(best, point_triangle_distance(p, x.col(f[0]), x.col(f[1]), x.col(f[2])));
      dist[k] = best;
    }
  });
  return percentile95(std::move(dist));
}

double geodesic_half_spread(const TetMesh& mesh, const BoundaryTopology& topo, int sources) {
  const int nb = topo.num_boundary_vertices();
  const int ns = std::max(1, std::min(sources, nb));
  std::vector<double> all;
  for (int s = 0; s < ns; ++s) {
    const int src = static_cast<int>(static_cast<long long>(s) * nb / ns);
    for (double d : boundary_geodesic(mesh, topo, {src}))
      if (std::isfinite(d)) all.push_back(d);
  }
  return 0.5 * percentile95(std::move(all));
}

FlattenOutput flatten(const TetMesh& mesh, const FlattenParams& params,
                      const IterationCallback& on_iteration) {
  params.optimizer.validate();
  FlattenOutput out;
  out.alignment = principal_alignment(mesh.vertices());
  out.aligned = mesh.with_vertices(out.alignment.apply(mesh.vertices()), Frame::Original);
  out.topology = boundary_topology(out.aligned);

  std::vector<Label> labels;
  if (params.kind != TemplateKind::Ellipsoid) {
    out.parcellation = parcellate(out.aligned, out.topology, params.parcellation);
    labels = out.parcellation->labels;
    double zm = 0, am = 0;
    for (int i = 0; i < out.topology.num_boundary_vertices(); ++i)
      if (labels[i] == Label::Maternal) {
        zm += out.topology.area_weight[i] * out.aligned.vertex(out.topology.vertices[i]).z();
        am += out.topology.area_weight[i];
      }
    if (zm / am > 0) {
      // Half turn about y: maternal side goes to negative z, rotation stays proper.
      out.alignment.rotation.row(0) *= -1.0;
      out.alignment.rotation.row(2) *= -1.0;
      out.aligned = mesh.with_vertices(out.alignment.apply(mesh.vertices()), Frame::Original);
      out.topology = boundary_topology(out.aligned);
    }
  }

  const double h0 = params.initial_h ? *params.initial_h : half_thickness_estimate(out.aligned, out.topology);
  switch (params.kind) {
    case TemplateKind::Planes:
    case TemplateKind::SinglePlane:
      out.initial_spec = ParallelPlanes{h0};
      break;
    case TemplateKind::Ellipsoid: {
      Vec3 r;
      if (params.initial_radii) {
        r = *params.initial_radii;
      } else {
        const double ry = geodesic_half_spread(out.aligned, out.topology);
        const double rz = h0;
        const double rx = 3.0 * out.aligned.total_volume() / (4.0 * kPi * ry * rz);
        r = Vec3(rx, ry, rz);
      }
      out.initial_spec = Ellipsoid{r};
      break;
    }
  }

  const Objective objective(out.aligned, out.topology, labels, params.optimizer.lambda);
  out.result = descend(objective, out.aligned.vertices(), out.initial_spec, params.optimizer, on_iteration);
  if (params.kind == TemplateKind::SinglePlane) {
    out.planes_stage = std::move(out.result);
    const double h = std::get<ParallelPlanes>(out.planes_stage->spec).h;
    out.result = descend(objective, out.planes_stage->x, SinglePlane{h}, params.optimizer, on_iteration);
  }
  return out;
}

}  // namespace tetflat
