#include "tetflat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "tetflat/mesh_io.hpp"

namespace tetflat {

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t i = static_cast<std::size_t>(std::floor(pos));
  const double f = pos - static_cast<double>(i);
  return i + 1 < v.size() ? v[i] + f * (v[i + 1] - v[i]) : v[i];
}

SummaryStats summarize(const std::vector<double>& values) {
  SummaryStats s;
  s.n = static_cast<int>(values.size());
  if (values.empty()) return s;
  std::vector<double> v = values;
  std::sort(v.begin(), v.end());
  double sum = 0;
  for (double x : v) sum += x;
  s.mean = sum / s.n;
  double ss = 0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.sd = s.n > 1 ? std::sqrt(ss / (s.n - 1)) : 0.0;
  s.min = v.front();
  s.max = v.back();
  s.q1 = quantile(v, 0.25);
  s.median = quantile(v, 0.5);
  s.q3 = quantile(v, 0.75);
  const double iqr = s.q3 - s.q1;
  const double lo = s.q1 - 1.5 * iqr, hi = s.q3 + 1.5 * iqr;
  // Whiskers end at the most extreme samples still inside the fences.
  s.whisker_lo = *std::lower_bound(v.begin(), v.end(), lo);
  s.whisker_hi = *(std::upper_bound(v.begin(), v.end(), hi) - 1);
  return s;
}

namespace {

struct TemplateMass {
  double weighted = 0;     // sum A T
  double constrained = 0;  // sum A over vertices the template constrains
};

TemplateMass template_mass(const BoundaryTopology& topo, const Points& x, const std::vector<Label>& labels,
                           const TemplateSpec& spec) {
  const bool ellipsoid = std::holds_alternative<Ellipsoid>(spec);
  const bool single = std::holds_alternative<SinglePlane>(spec);
  if (!ellipsoid && static_cast<int>(labels.size()) != topo.num_boundary_vertices())
    throw std::invalid_argument("label count does not match boundary vertex count");
  TemplateMass m;
  for (int i = 0; i < topo.num_boundary_vertices(); ++i) {
    const Label l = ellipsoid ? Label::Margin : labels[i];
    const bool constrained = ellipsoid || l == Label::Maternal || (l == Label::Fetal && !single);
    if (!constrained) continue;
    m.constrained += topo.area_weight[i];
    m.weighted += topo.area_weight[i] * template_term(x.col(topo.vertices[i]), l, spec);
  }
  return m;
}

}  // namespace

double template_rms(const BoundaryTopology& topo, const Points& x, const std::vector<Label>& labels,
                    const TemplateSpec& spec, double voxel_mm) {
  const TemplateMass m = template_mass(topo, x, labels, spec);
  if (m.constrained <= 0) return 0.0;
  return std::sqrt(m.weighted / m.constrained) / voxel_mm;
}

double template_rms_unnormalized(const BoundaryTopology& topo, const Points& x,
                                 const std::vector<Label>& labels, const TemplateSpec& spec,
                                 double voxel_mm) {
  return std::sqrt(template_mass(topo, x, labels, spec).weighted) / voxel_mm;
}

double dirichlet_excess(const TetMesh& z, const BoundaryTopology& topo, const Points& x) {
  const DeformationCache cache(z);
  double sum = 0;
  for (int k = 0; k < z.num_tets(); ++k) {
    const Tet& t = z.tets()[k];
    // An untouched tet is the identity map; skip the rounding of E * E^-1.
    if (edge_matrix(x, t) == edge_matrix(z.vertices(), t)) continue;
    const Mat3 j = cache.jacobian(x, z.tets(), k);
    if (!(j.determinant() > 0)) throw FlipError("flipped tet " + std::to_string(k));
    sum += topo.volume_weight[k] * (dirichlet_density(j) - 6.0);
  }
  return 100.0 * sum / 6.0;
}

std::vector<double> volumetric_distortion(const TetMesh& z, const Points& x) {
  std::vector<double> out(z.num_tets());
  for (int k = 0; k < z.num_tets(); ++k) {
    const Tet& t = z.tets()[k];
    const double ratio = edge_matrix(x, t).determinant() / edge_matrix(z.vertices(), t).determinant();
    if (!(ratio > 0)) throw FlipError("flipped tet " + std::to_string(k));
    out[k] = std::log2(ratio);
  }
  return out;
}

std::vector<double> areal_distortion(const TetMesh& z, const BoundaryTopology& topo, const Points& x) {
  std::vector<double> out(topo.triangles.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::log2(triangle_area(x, topo.triangles[i]) / triangle_area(z.vertices(), topo.triangles[i]));
  return out;
}

std::vector<double> metric_distortion(const TetMesh& z, const std::vector<Edge>& edges, const Points& x) {
  std::vector<double> out(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto [a, b] = edges[i];
    out[i] = std::log2((x.col(a) - x.col(b)).norm() / (z.vertices().col(a) - z.vertices().col(b)).norm());
  }
  return out;
}

std::vector<double> tet_to_vertex(const TetMesh& z, const std::vector<double>& tet_values) {
  std::vector<double> num(z.num_vertices(), 0.0), den(z.num_vertices(), 0.0);
  for (int k = 0; k < z.num_tets(); ++k) {
    const double v = z.tet_volume(k);
    for (int c : z.tets()[k]) {
      num[c] += v * tet_values[k];
      den[c] += v;
    }
  }
  for (int i = 0; i < z.num_vertices(); ++i) num[i] = den[i] > 0 ? num[i] / den[i] : 0.0;
  return num;
}

namespace {

std::vector<ProfileBin> bin_profile(const std::vector<double>& coord, const std::vector<double>& val, int bins) {
  std::vector<ProfileBin> out(std::max(1, bins));
  const double hi = coord.empty() ? 0.0 : *std::max_element(coord.begin(), coord.end());
  const double width = hi > 0 ? hi / out.size() : 1.0;
  std::vector<double> sum(out.size(), 0.0), sq(out.size(), 0.0);
  for (std::size_t b = 0; b < out.size(); ++b) {
    out[b].lo = b * width;
    out[b].hi = (b + 1) * width;
  }
  for (std::size_t i = 0; i < coord.size(); ++i) {
    const std::size_t b = std::min(out.size() - 1, static_cast<std::size_t>(coord[i] / width));
    ++out[b].count;
    sum[b] += val[i];
  }
  for (std::size_t b = 0; b < out.size(); ++b)
    if (out[b].count > 0) out[b].mean = sum[b] / out[b].count;
  for (std::size_t i = 0; i < coord.size(); ++i) {
    const std::size_t b = std::min(out.size() - 1, static_cast<std::size_t>(coord[i] / width));
    sq[b] += (val[i] - out[b].mean) * (val[i] - out[b].mean);
  }
  for (std::size_t b = 0; b < out.size(); ++b)
    if (out[b].count > 1) out[b].sd = std::sqrt(sq[b] / (out[b].count - 1));
  return out;
}

}  // namespace

double SpatialProfiles::max_adjacent_step(bool radial_profile) const {
  const auto& bins = radial_profile ? radial : height;
  double step = 0;
  const ProfileBin* prev = nullptr;
  for (const auto& b : bins) {
    if (b.count == 0) continue;
    if (prev) step = std::max(step, std::abs(b.mean - prev->mean));
    prev = &b;
  }
  return step;
}

SpatialProfiles spatial_profiles(const Points& x, const std::vector<double>& vertex_values, int radial_bins,
                                 int height_bins) {
  std::vector<double> r(x.cols()), h(x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    r[i] = std::hypot(x(0, i), x(1, i));
    h[i] = std::abs(x(2, i));
  }
  SpatialProfiles p;
  p.radial = bin_profile(r, vertex_values, radial_bins);
  p.height = bin_profile(h, vertex_values, height_bins);
  return p;
}

DistortionReport distortion_report(const ReportInputs& in) {
  const TetMesh& z = *in.z;
  const Points& x = *in.x;
  if (x.cols() != z.num_vertices()) throw std::invalid_argument("vertex count mismatch between meshes");
  const BoundaryTopology topo = boundary_topology(z);
  DistortionReport r;
  r.num_vertices = z.num_vertices();
  r.voxel_mm = in.voxel_mm;
  r.log2_det = volumetric_distortion(z, x);
  r.log2_areal = areal_distortion(z, topo, x);
  r.edges = z.edges();
  r.log2_metric = metric_distortion(z, r.edges, x);
  r.dirichlet_excess = dirichlet_excess(z, topo, x);
  if (in.spec && (in.labels || std::holds_alternative<Ellipsoid>(*in.spec))) {
    const std::vector<Label> none;
    const auto& labels = in.labels ? *in.labels : none;
    r.template_rms = template_rms(topo, x, labels, *in.spec, in.voxel_mm);
    r.template_rms_unnormalized = template_rms_unnormalized(topo, x, labels, *in.spec, in.voxel_mm);
  }
  r.profiles = spatial_profiles(x, tet_to_vertex(z, r.log2_det));
  return r;
}

nlohmann::json summary_json(const SummaryStats& s) {
  return {{"n", s.n},           {"mean", s.mean},   {"sd", s.sd},
          {"min", s.min},       {"q1", s.q1},       {"median", s.median},
          {"q3", s.q3},         {"max", s.max},     {"whisker_lo", s.whisker_lo},
          {"whisker_hi", s.whisker_hi}};
}

namespace {

nlohmann::json profile_json(const std::vector<ProfileBin>& bins) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& b : bins)
    a.push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}, {"mean", b.mean}, {"sd", b.sd}});
  return a;
}

std::vector<double> absolute(const std::vector<double>& v) {
  std::vector<double> a(v.size());
  std::transform(v.begin(), v.end(), a.begin(), [](double x) { return std::abs(x); });
  return a;
}

}  // namespace

nlohmann::json report_json(const DistortionReport& r) {
  nlohmann::json j;
  j["counts"] = {{"vertices", r.num_vertices},
                 {"tets", r.log2_det.size()},
                 {"boundary_triangles", r.log2_areal.size()},
                 {"edges", r.log2_metric.size()}};
  j["dirichlet_excess_percent"] = r.dirichlet_excess;
  j["voxel_mm"] = r.voxel_mm;
  j["template_rms_voxels"] = r.template_rms ? nlohmann::json(*r.template_rms) : nlohmann::json(nullptr);
  j["template_rms_unnormalized_voxels"] =
      r.template_rms_unnormalized ? nlohmann::json(*r.template_rms_unnormalized) : nlohmann::json(nullptr);
  j["log2_det_jacobian"] = summary_json(summarize(r.log2_det));
  j["log2_areal"] = summary_json(summarize(r.log2_areal));
  j["log2_metric"] = summary_json(summarize(r.log2_metric));
  j["abs_log2_areal"] = summary_json(summarize(absolute(r.log2_areal)));
  j["abs_log2_metric"] = summary_json(summarize(absolute(r.log2_metric)));
  j["profiles"] = {{"radial", profile_json(r.profiles.radial)}, {"height", profile_json(r.profiles.height)}};
  return j;
}

void write_report(const DistortionReport& r, const std::filesystem::path& stem) {
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p);
    if (!f) throw IoError("cannot write " + p.string());
    f << std::setprecision(17);
    return f;
  };
  const std::string s = stem.string();
  {
    auto f = open(s + ".json");
    f << report_json(r).dump(2) << '\n';
  }
  {
    auto f = open(s + "_tets.csv");
    f << "tet,log2_det_jacobian\n";
    for (std::size_t i = 0; i < r.log2_det.size(); ++i) f << i << ',' << r.log2_det[i] << '\n';
  }
  {
    auto f = open(s + "_triangles.csv");
    f << "triangle,log2_areal\n";
    for (std::size_t i = 0; i < r.log2_areal.size(); ++i) f << i << ',' << r.log2_areal[i] << '\n';
  }
  {
    auto f = open(s + "_edges.csv");
    f << "v0,v1,log2_metric\n";
    for (std::size_t i = 0; i < r.log2_metric.size(); ++i)
      f << r.edges[i][0] << ',' << r.edges[i][1] << ',' << r.log2_metric[i] << '\n';
  }
  {
    auto f = open(s + "_profiles.csv");
    f << "profile,lo,hi,count,mean,sd\n";
    for (const auto& [name, bins] : {std::pair{"radial", &r.profiles.radial}, std::pair{"height", &r.profiles.height}})
      for (const auto& b : *bins) f << name << ',' << b.lo << ',' << b.hi << ',' << b.count << ',' << b.mean << ',' << b.sd << '\n';
  }
}

}  // namespace tetflat
