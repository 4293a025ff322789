#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tetflat/energy.hpp"

namespace tetflat {

/// Five-number summary plus mean/sd and Tukey whiskers (1.5 IQR, clipped to
/// the data range). Quartiles use linear interpolation between order stats.
struct SummaryStats {
  int n = 0;
  double mean = 0, sd = 0, min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  double whisker_lo = 0, whisker_hi = 0;
};
SummaryStats summarize(const std::vector<double>& values);
double quantile(std::vector<double> values, double q);

/// Root-mean-square template distance in voxels over the constrained
/// boundary mass: sqrt(sum A T / sum A over constrained vertices) / voxel_mm.
/// Margin vertices (and fetal ones for the single plane) carry no weight.
double template_rms(const BoundaryTopology& topo, const Points& x, const std::vector<Label>& labels,
                    const TemplateSpec& spec, double voxel_mm = 3.0);
/// sqrt(sum A T) / voxel_mm with A normalized over the whole boundary.
double template_rms_unnormalized(const BoundaryTopology& topo, const Points& x,
                                 const std::vector<Label>& labels, const TemplateSpec& spec,
                                 double voxel_mm = 3.0);

/// 100 (sum V D - 6) / 6 with V from the original mesh. Throws FlipError.
double dirichlet_excess(const TetMesh& z, const BoundaryTopology& topo, const Points& x);

std::vector<double> volumetric_distortion(const TetMesh& z, const Points& x);  // log2 det J per tet
std::vector<double> areal_distortion(const TetMesh& z, const BoundaryTopology& topo, const Points& x);
std::vector<double> metric_distortion(const TetMesh& z, const std::vector<Edge>& edges, const Points& x);

/// Per-vertex volume-weighted average of incident tet values.
std::vector<double> tet_to_vertex(const TetMesh& z, const std::vector<double>& tet_values);

struct ProfileBin {
  double lo = 0, hi = 0;
  int count = 0;
  double mean = 0, sd = 0;
};
struct SpatialProfiles {
  std::vector<ProfileBin> radial;  // by sqrt(x1^2 + x2^2)
  std::vector<ProfileBin> height;  // by |x3|
  /// Largest difference between means of adjacent non-empty bins.
  double max_adjacent_step(bool radial_profile) const;
};
SpatialProfiles spatial_profiles(const Points& x, const std::vector<double>& vertex_values,
                                 int radial_bins = 10, int height_bins = 6);

struct DistortionReport {
  std::vector<double> log2_det;     // per tet
  std::vector<double> log2_areal;   // per boundary triangle
  std::vector<double> log2_metric;  // per edge
  std::vector<Edge> edges;
  double dirichlet_excess = 0;
  std::optional<double> template_rms;
  std::optional<double> template_rms_unnormalized;
  double voxel_mm = 3.0;
  SpatialProfiles profiles;
  int num_vertices = 0;
};

struct ReportInputs {
  const TetMesh* z = nullptr;
  const Points* x = nullptr;
  const std::vector<Label>* labels = nullptr;  // optional
  const TemplateSpec* spec = nullptr;          // optional, needed with labels
  double voxel_mm = 3.0;
};
DistortionReport distortion_report(const ReportInputs& in);

nlohmann::json summary_json(const SummaryStats& s);
nlohmann::json report_json(const DistortionReport& r);
/// Writes `<stem>.json`, `<stem>_tets.csv`, `<stem>_triangles.csv`,
/// `<stem>_edges.csv` and `<stem>_profiles.csv`.
void write_report(const DistortionReport& r, const std::filesystem::path& stem);

}  // namespace tetflat
