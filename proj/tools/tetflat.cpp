// tetflat: command line front end for the flattening pipeline.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "tetflat/baseline2d.hpp"
#include "tetflat/convex_hull.hpp"
#include "tetflat/mesh_io.hpp"
#include "tetflat/metrics.hpp"
#include "tetflat/parallel.hpp"
#include "tetflat/pipeline.hpp"
#include "tetflat/resample.hpp"
#include "tetflat/synth.hpp"

#ifndef TETFLAT_VERSION
#define TETFLAT_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace tetflat;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kConvergence = 4, kCheckFailed = 5 };

/// Error carrying an exit code.
struct CliFailure : std::runtime_error {
  int code;
  CliFailure(int c, const std::string& m) : std::runtime_error(m), code(c) {}
};

std::string sha256_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return "";
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

/// Input files of a mesh path: TetGen stems expand to .node and .ele.
std::vector<fs::path> mesh_files(const fs::path& p) {
  if (p.extension() == ".vtk") return {p};
  fs::path stem = p;
  if (p.extension() == ".node" || p.extension() == ".ele") stem.replace_extension();
  return {fs::path(stem.string() + ".node"), fs::path(stem.string() + ".ele")};
}

void require_exists(const fs::path& p) {
  for (const auto& f : mesh_files(p))
    if (!fs::exists(f)) throw CliFailure(kData, "input not found: " + f.string());
}

void write_json(const fs::path& p, const json& j) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p);
  if (!f) throw IoError("cannot write " + p.string());
  f << j.dump(2) << '\n';
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json template_json(const TemplateSpec& spec) {
  json j{{"kind", template_name(spec)}};
  if (const auto* e = std::get_if<Ellipsoid>(&spec))
    j["radii"] = vec_json(e->radii);
  else
    j["h"] = template_params(spec)[0];
  return j;
}

TemplateSpec template_from_json(const json& j) {
  const std::string kind = j.at("kind");
  if (kind == "planes") return ParallelPlanes{j.at("h").get<double>()};
  if (kind == "single-plane") return SinglePlane{j.at("h").get<double>()};
  if (kind == "ellipsoid") {
    const auto r = j.at("radii").get<std::vector<double>>();
    return Ellipsoid{Vec3(r.at(0), r.at(1), r.at(2))};
  }
  throw CliFailure(kData, "unknown template kind '" + kind + "'");
}

TemplateKind parse_kind(const std::string& s) {
  if (s == "planes") return TemplateKind::Planes;
  if (s == "single-plane") return TemplateKind::SinglePlane;
  return TemplateKind::Ellipsoid;
}

std::string two_sig(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << v;
  return os.str();
}

/// Records the run; written on success and on failures with an output path.
struct Manifest {
  std::string subcommand;
  json config = json::object();
  json inputs = json::array();
  fs::path path;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void add_input(const fs::path& p) {
    const auto files = fs::is_regular_file(p) && p.extension() != ".node" && p.extension() != ".ele"
                           ? std::vector<fs::path>{p}
                           : mesh_files(p);
    for (const auto& f : files)
      inputs.push_back({{"path", f.string()}, {"sha256", sha256_file(f)}});
  }
  void write(int code, const std::string& message) const {
    if (path.empty()) return;
    json j;
    j["tool"] = "tetflat";
    j["version"] = TETFLAT_VERSION;
    j["subcommand"] = subcommand;
    j["config"] = config;
    j["inputs"] = inputs;
    j["exit_code"] = code;
    if (!message.empty()) j["message"] = message;
    j["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    j["threads"] = thread_count();
    j["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                         std::to_string(EIGEN_MINOR_VERSION);
    try {
      write_json(path, j);
    } catch (const std::exception& e) {
      spdlog::error("could not write manifest: {}", e.what());
    }
  }
};

// ---- synth ---------------------------------------------------------------

struct SynthOpts {
  std::string kind = "slab";
  BentSlabSpec slab;
  ShellSpec shell;
  std::string out;
};

int cmd_synth(const SynthOpts& o, Manifest& m) {
  SynthMesh s;
  json spec;
  if (o.kind == "slab") {
    s = bent_slab(o.slab);
    spec = {{"kind", "slab"},          {"length", o.slab.length}, {"width", o.slab.width},
            {"thickness", o.slab.thickness}, {"bend_angle", o.slab.bend_angle}, {"nx", o.slab.nx},
            {"ny", o.slab.ny},         {"nz", o.slab.nz}};
  } else {
    s = hemispherical_shell(o.shell);
    spec = {{"kind", "shell"},
            {"outer_radius", o.shell.outer_radius},
            {"thickness", o.shell.thickness},
            {"rings", o.shell.rings},
            {"layers", o.shell.layers}};
  }
  m.config["spec"] = spec;
  write_tetgen(s.mesh, o.out);
  json side;
  side["spec"] = spec;
  side["num_vertices"] = s.mesh.num_vertices();
  side["num_tets"] = s.mesh.num_tets();
  json flat = json::array();
  for (Eigen::Index i = 0; i < s.flat_reference.cols(); ++i)
    flat.push_back({s.flat_reference(0, i), s.flat_reference(1, i), s.flat_reference(2, i)});
  side["flat_reference"] = flat;
  std::vector<int> tags(s.tags.size());
  for (std::size_t i = 0; i < tags.size(); ++i) tags[i] = static_cast<int>(s.tags[i]);
  side["surface_tags"] = tags;
  side["surface_tag_names"] = {"interior", "outer", "inner", "side"};
  write_json(o.out + ".json", side);
  spdlog::info("wrote {} vertices, {} tets to {}.node/.ele", s.mesh.num_vertices(), s.mesh.num_tets(), o.out);
  return kOk;
}

// ---- parcellate ----------------------------------------------------------

struct ParcOpts {
  std::string mesh, out;
  double gamma = 20.0, margin_mm = 15.0;
};

json labels_json(const BoundaryTopology& topo, const std::vector<Label>& labels) {
  std::vector<int> codes(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) codes[i] = static_cast<int>(labels[i]);
  return {{"boundary_vertices", topo.vertices}, {"labels", codes}, {"label_names", {"fetal", "maternal", "margin"}}};
}

std::vector<Label> labels_from_json(const json& j, const BoundaryTopology& topo) {
  const auto verts = j.at("boundary_vertices").get<std::vector<int>>();
  const auto codes = j.at("labels").get<std::vector<int>>();
  if (verts != topo.vertices || codes.size() != verts.size())
    throw CliFailure(kData, "parcellation does not match the mesh boundary");
  std::vector<Label> out(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] < 0 || codes[i] > 2) throw CliFailure(kData, "invalid label code " + std::to_string(codes[i]));
    out[i] = static_cast<Label>(codes[i]);
  }
  return out;
}

int cmd_parcellate(const ParcOpts& o, std::uint64_t seed, Manifest& m) {
  require_exists(o.mesh);
  m.add_input(o.mesh);
  const auto loaded = load_mesh(o.mesh);
  const TetMesh& mesh = loaded.mesh;
  const auto topo = boundary_topology(mesh);
  ParcellationParams p;
  p.gamma = o.gamma;
  p.margin_mm = o.margin_mm;
  p.seed = seed;
  const auto parc = parcellate(mesh, topo, p);
  json j = labels_json(topo, parc.labels);
  j["counts"] = {{"fetal", parc.count(Label::Fetal)},
                 {"maternal", parc.count(Label::Maternal)},
                 {"margin", parc.count(Label::Margin)}};
  j["gamma"] = parc.gamma;
  j["margin_mm"] = parc.margin_mm;
  j["hull_votes"] = {{"fetal", parc.hull_votes[0]}, {"maternal", parc.hull_votes[1]}};
  j["fiedler_eigenvalue"] = parc.fiedler_eigenvalue;
  j["fiedler_residual"] = parc.fiedler_residual;
  write_json(o.out + ".json", j);
  write_vtk(mesh, {{"boundary_label", parc.vertex_field(topo)}}, {}, o.out + ".vtk");
  spdlog::info("fetal {} / maternal {} / margin {}", parc.count(Label::Fetal), parc.count(Label::Maternal),
               parc.count(Label::Margin));
  return kOk;
}

// ---- flatten -------------------------------------------------------------

struct FlattenOpts {
  std::string mesh, out, templ = "planes", theta_update = "exact";
  OptimizerParams opt;
  double gamma = 20.0, margin_mm = 15.0, voxel_mm = 3.0;
  bool lambda_sweep = false;
  std::vector<double> sweep_values = {1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0};
  bool trace = true;
};

json trace_json(const FlatteningResult& r) {
  json t = json::array();
  for (const auto& e : r.trace)
    t.push_back({{"iteration", e.iteration},
                 {"objective", e.objective},
                 {"template", e.template_term},
                 {"distortion", e.distortion},
                 {"grad_norm", e.grad_norm},
                 {"eta", e.eta},
                 {"eta_max", e.eta_max},
                 {"min_volume", e.min_volume},
                 {"theta", vec_json(e.theta)}});
  return t;
}

json result_json(const FlatteningResult& r, bool with_trace) {
  json j{{"converged", r.converged},
         {"stop_reason", std::string(stop_reason_name(r.reason))},
         {"iterations", r.iterations},
         {"template", template_json(r.spec)},
         {"objective", r.final_parts.total},
         {"template_term", r.final_parts.template_term},
         {"distortion_term", r.final_parts.distortion}};
  if (with_trace) j["trace"] = trace_json(r);
  return j;
}

FlattenParams flatten_params(const FlattenOpts& o, std::uint64_t seed) {
  FlattenParams p;
  p.kind = parse_kind(o.templ);
  p.optimizer = o.opt;
  p.optimizer.theta_update = o.theta_update == "shared" ? ThetaUpdate::SharedStep : ThetaUpdate::ExactSolve;
  p.parcellation.gamma = o.gamma;
  p.parcellation.margin_mm = o.margin_mm;
  p.parcellation.seed = seed;
  return p;
}

int cmd_flatten_sweep(const FlattenOpts& o, const TetMesh& mesh, std::uint64_t seed) {
  json rows = json::array();
  std::ofstream csv(o.out + "_sweep.csv");
  csv << std::setprecision(17) << "lambda,template_rms_voxels,dirichlet_excess_percent,converged,iterations\n";
  for (double lambda : o.sweep_values) {
    FlattenParams p = flatten_params(o, seed);
    p.optimizer.lambda = lambda;
    const auto out = flatten(mesh, p);
    const std::vector<Label> none;
    const auto& labels = out.parcellation ? out.parcellation->labels : none;
    const double rms = template_rms(out.topology, out.result.x, labels, out.result.spec, o.voxel_mm);
    const double excess = dirichlet_excess(out.aligned, out.topology, out.result.x);
    spdlog::info("lambda {}: rms {} vox, excess {}%", lambda, two_sig(rms), two_sig(excess));
    rows.push_back({{"lambda", lambda},
                    {"template_rms_voxels", rms},
                    {"dirichlet_excess_percent", excess},
                    {"converged", out.result.converged},
                    {"iterations", out.result.iterations}});
    csv << lambda << ',' << rms << ',' << excess << ',' << out.result.converged << ',' << out.result.iterations << '\n';
  }
  write_json(o.out + "_sweep.json", {{"template", o.templ}, {"voxel_mm", o.voxel_mm}, {"sweep", rows}});
  return kOk;
}

int cmd_flatten(const FlattenOpts& o, std::uint64_t seed, Manifest& m) {
  require_exists(o.mesh);
  m.add_input(o.mesh);
  const auto loaded = load_mesh(o.mesh);
  if (loaded.reoriented > 0) spdlog::warn("reoriented {} tets on load", loaded.reoriented);
  if (o.lambda_sweep) return cmd_flatten_sweep(o, loaded.mesh, seed);

  const FlattenParams p = flatten_params(o, seed);
  int last_logged = -1;
  const auto out = flatten(loaded.mesh, p, [&](const TraceEntry& e) {
    if (e.iteration % 500 == 0 && e.iteration != last_logged) {
      last_logged = e.iteration;
      spdlog::debug("iter {} phi {} |g| {} eta {}", e.iteration, e.objective, e.grad_norm, e.eta);
    }
  });
  const auto& r = out.result;
  const TetMesh xmesh = out.aligned.with_vertices(r.x, Frame::Template);
  write_tetgen(xmesh, o.out + "_x");
  write_tetgen(out.aligned, o.out + "_z");

  const auto logdet = volumetric_distortion(out.aligned, r.x);
  std::vector<double> density(out.aligned.num_tets());
  const DeformationCache cache(out.aligned);
  for (int k = 0; k < out.aligned.num_tets(); ++k)
    density[k] = dirichlet_density(cache.jacobian(r.x, out.aligned.tets(), k));
  std::vector<Field> point_fields;
  const std::vector<Label> none;
  const auto& labels = out.parcellation ? out.parcellation->labels : none;
  if (out.parcellation) point_fields.push_back({"boundary_label", out.parcellation->vertex_field(out.topology)});
  write_vtk(xmesh, point_fields, {{"log2_det_jacobian", logdet}, {"dirichlet_density", density}}, o.out + "_x.vtk");

  json j = result_json(r, o.trace);
  j["initial_template"] = template_json(out.initial_spec);
  j["lambda"] = p.optimizer.lambda;
  j["alignment"] = {{"center", vec_json(out.alignment.center)},
                    {"rotation", {vec_json(out.alignment.rotation.row(0).transpose()),
                                  vec_json(out.alignment.rotation.row(1).transpose()),
                                  vec_json(out.alignment.rotation.row(2).transpose())}}};
  j["template_rms_voxels"] = template_rms(out.topology, r.x, labels, r.spec, o.voxel_mm);
  j["dirichlet_excess_percent"] = dirichlet_excess(out.aligned, out.topology, r.x);
  if (out.parcellation) j["parcellation"] = labels_json(out.topology, labels);
  if (out.planes_stage) j["planes_stage"] = result_json(*out.planes_stage, false);
  write_json(o.out + ".json", j);
  m.config["result"] = {{"converged", r.converged}, {"stop_reason", std::string(stop_reason_name(r.reason))}};

  spdlog::info("{} after {} iterations ({}), excess {}%, template rms {} vox", r.converged ? "converged" : "stopped",
               r.iterations, stop_reason_name(r.reason), two_sig(j["dirichlet_excess_percent"].get<double>()),
               two_sig(j["template_rms_voxels"].get<double>()));
  if (!r.converged)
    throw CliFailure(kConvergence, std::string("optimizer did not converge: ") + std::string(stop_reason_name(r.reason)));
  return kOk;
}

// ---- resample ------------------------------------------------------------

struct ResampleOpts {
  std::string volume, mesh_z, mesh_x, out;
  std::vector<double> spacing;
};

int cmd_resample(const ResampleOpts& o, Manifest& m) {
  if (!fs::exists(o.volume)) throw CliFailure(kData, "input not found: " + o.volume);
  require_exists(o.mesh_z);
  require_exists(o.mesh_x);
  m.add_input(o.volume);
  m.add_input(o.mesh_z);
  m.add_input(o.mesh_x);
  const ScalarVolume in = load_volume(o.volume);
  const auto z = load_mesh(o.mesh_z), x = load_mesh(o.mesh_x);
  Vec3 spacing = in.spacing;
  if (o.spacing.size() == 1) spacing = Vec3::Constant(o.spacing[0]);
  if (o.spacing.size() == 3) spacing = Vec3(o.spacing[0], o.spacing[1], o.spacing[2]);
  if (!(spacing.minCoeff() > 0)) throw CliFailure(kUsage, "--spacing must be positive");
  const GridSpec grid = default_output_grid(x.mesh, spacing);
  const ScalarVolume out = pull_back(in, z.mesh, x.mesh, grid);
  write_volume(out, o.out);
  std::size_t inside = 0;
  for (double v : out.samples) inside += std::isfinite(v);
  spdlog::info("resampled {} of {} voxels inside the mesh", inside, out.size());
  return kOk;
}

// ---- metrics -------------------------------------------------------------

struct MetricsOpts {
  std::string mesh_z, mesh_x, parcellation, out;
  double voxel_mm = 3.0;
};

int cmd_metrics(const MetricsOpts& o, Manifest& m) {
  require_exists(o.mesh_z);
  require_exists(o.mesh_x);
  m.add_input(o.mesh_z);
  m.add_input(o.mesh_x);
  const auto z = load_mesh(o.mesh_z), x = load_mesh(o.mesh_x);
  if (z.mesh.tets() != x.mesh.tets()) throw CliFailure(kData, "meshes do not share connectivity");
  ReportInputs in;
  in.z = &z.mesh;
  in.x = &x.mesh.vertices();
  in.voxel_mm = o.voxel_mm;
  std::vector<Label> labels;
  std::optional<TemplateSpec> spec;
  if (!o.parcellation.empty()) {
    if (!fs::exists(o.parcellation)) throw CliFailure(kData, "input not found: " + o.parcellation);
    m.add_input(o.parcellation);
    std::ifstream f(o.parcellation);
    const json j = json::parse(f);
    const auto topo = boundary_topology(z.mesh);
    if (j.contains("template")) spec = template_from_json(j.at("template"));
    const json& pj = j.contains("parcellation") ? j.at("parcellation") : j;
    if (pj.contains("labels")) labels = labels_from_json(pj, topo);
  }
  if (!labels.empty()) in.labels = &labels;
  if (spec) in.spec = &*spec;
  const DistortionReport r = distortion_report(in);
  write_report(r, o.out);
  write_vtk(x.mesh, {}, {{"log2_det_jacobian", r.log2_det}}, o.out + ".vtk");
  spdlog::info("excess {}%, mean log2 det {}", two_sig(r.dirichlet_excess), two_sig(summarize(r.log2_det).mean));
  return kOk;
}

// ---- baseline2d ----------------------------------------------------------

struct BaselineOpts {
  std::string mesh_z, mesh_x, result, out;
  double spacing = 3.0;
  double half_height = -1.0;
};

int cmd_baseline(const BaselineOpts& o, Manifest& m) {
  require_exists(o.mesh_z);
  require_exists(o.mesh_x);
  m.add_input(o.mesh_z);
  m.add_input(o.mesh_x);
  const auto z = load_mesh(o.mesh_z), x = load_mesh(o.mesh_x);
  if (z.mesh.tets() != x.mesh.tets()) throw CliFailure(kData, "meshes do not share connectivity");
  double h = o.half_height;
  if (h < 0 && !o.result.empty()) {
    if (!fs::exists(o.result)) throw CliFailure(kData, "input not found: " + o.result);
    m.add_input(o.result);
    std::ifstream f(o.result);
    const TemplateSpec spec = template_from_json(json::parse(f).at("template"));
    if (std::holds_alternative<Ellipsoid>(spec)) throw CliFailure(kUsage, "baseline2d needs a plane template result");
    h = template_params(spec)[0];
  }
  const auto levels = h >= 0 ? slice_levels(h, o.spacing) : slice_levels(x.mesh.vertices(), o.spacing);
  const auto res = run_baseline(x.mesh.tets(), x.mesh.vertices(), z.mesh.vertices(), levels);
  std::ofstream csv(o.out + ".csv");
  csv << std::setprecision(17) << "slice,triangle,level,log2_areal_baseline,log2_areal_volumetric\n";
  json slices = json::array();
  for (std::size_t i = 0; i < res.slices.size(); ++i) {
    const auto& s = res.slices[i];
    json sj{{"index", i},           {"level", s.level},   {"triangles", s.triangles.size()},
            {"disk", s.disk},       {"components", s.components}, {"boundary_loops", s.boundary_loops},
            {"euler", s.euler}};
    if (!s.empty() && !s.disk) spdlog::warn("slice {} at x3 = {} is not a disk; skipped", i, s.level);
    if (s.disk) {
      const auto& e = res.embeddings[i];
      sj["uniform_fallback"] = e.uniform_fallback;
      sj["flipped"] = e.flipped;
      const auto b = slice_distortion(s, e.uv), v = slice_distortion(s, s.template_pos);
      for (std::size_t t = 0; t < s.triangles.size(); ++t)
        csv << i << ',' << t << ',' << s.level << ',' << b.log2_areal[t] << ',' << v.log2_areal[t] << '\n';
      Points flat = Points::Zero(3, e.uv.cols());
      flat.topRows<2>() = e.uv;
      write_vtk_polydata(flat, s.triangles, {{"original_x3", std::vector<double>(s.original_pos.row(2).begin(), s.original_pos.row(2).end())}},
                         {{"log2_areal", b.log2_areal}}, o.out + "_slice" + std::to_string(i) + ".vtk");
    }
    slices.push_back(sj);
  }
  auto abs_mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += std::abs(x);
    return v.empty() ? 0.0 : s / v.size();
  };
  auto abs_q95 = [](const std::vector<double>& v) {
    std::vector<double> a(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) a[i] = std::abs(v[i]);
    return quantile(a, 0.95);
  };
  json j;
  j["spacing_mm"] = o.spacing;
  j["radius_scale"] = res.radius;
  j["skipped"] = res.skipped;
  j["slices"] = slices;
  for (const auto& [name, d] : {std::pair{"baseline", &res.baseline}, std::pair{"volumetric", &res.volumetric}})
    j[name] = {{"mean_abs_log2_areal", abs_mean(d->log2_areal)},
               {"mean_abs_log2_metric", abs_mean(d->log2_metric)},
               {"p95_abs_log2_areal", abs_q95(d->log2_areal)},
               {"log2_areal", summary_json(summarize(d->log2_areal))},
               {"log2_metric", summary_json(summarize(d->log2_metric))}};
  write_json(o.out + ".json", j);
  spdlog::info("baseline mean |log2 areal| {} vs volumetric {}", two_sig(j["baseline"]["mean_abs_log2_areal"].get<double>()),
               two_sig(j["volumetric"]["mean_abs_log2_areal"].get<double>()));
  return kOk;
}

// ---- gradcheck -----------------------------------------------------------

struct GradOpts {
  std::string mesh, templ = "planes";
  double lambda = 1.0, step_rel = 1e-5, tol = 1e-6, perturb = 0.1;
};

int cmd_gradcheck(const GradOpts& o, std::uint64_t seed, Manifest& m) {
  TetMesh mesh;
  if (o.mesh.empty()) {
    BentSlabSpec s;
    s.length = 30;
    s.width = 20;
    s.thickness = 8;
    s.bend_angle = 1.0;
    s.nx = 5;
    s.ny = 4;
    s.nz = 2;
    mesh = bent_slab(s).mesh;
  } else {
    require_exists(o.mesh);
    m.add_input(o.mesh);
    mesh = load_mesh(o.mesh).mesh;
  }
  const Alignment al = principal_alignment(mesh.vertices());
  const TetMesh z = mesh.with_vertices(al.apply(mesh.vertices()), Frame::Original);
  const auto topo = boundary_topology(z);
  std::vector<Label> labels(topo.num_boundary_vertices(), Label::Margin);
  for (int i = 0; i < topo.num_boundary_vertices(); ++i) {
    const double zc = z.vertex(topo.vertices[i]).z();
    labels[i] = zc > 0.25 ? Label::Fetal : zc < -0.25 ? Label::Maternal : Label::Margin;
  }
  const Objective obj(z, topo, labels, o.lambda);

  // Perturb by a fraction of the shortest edge so no tet flips.
  double min_edge = std::numeric_limits<double>::infinity();
  for (const auto& e : z.edges()) min_edge = std::min(min_edge, (z.vertex(e[0]) - z.vertex(e[1])).norm());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Points x = z.vertices();
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] += o.perturb * min_edge * u(rng);
  if (!obj.evaluate(x, ParallelPlanes{1.0}).feasible) throw CliFailure(kData, "perturbation flipped a tet");

  const double h = 0.5 * (z.bbox_max().z() - z.bbox_min().z());
  std::vector<TemplateSpec> specs;
  if (o.templ == "planes" || o.templ == "all") specs.push_back(ParallelPlanes{h});
  if (o.templ == "single-plane" || o.templ == "all") specs.push_back(SinglePlane{h});
  if (o.templ == "ellipsoid" || o.templ == "all")
    specs.push_back(Ellipsoid{0.5 * (z.bbox_max() - z.bbox_min())});
  const double step = o.step_rel * z.bbox_diagonal();
  bool ok = true;
  std::cout << std::left << std::setw(14) << "template" << std::setw(14) << "distortion" << std::setw(14)
            << "template" << std::setw(14) << "theta" << "status\n";
  json rows = json::array();
  for (const auto& spec : specs) {
    const FdReport r = fd_check(obj, x, spec, step);
    const bool pass = r.max() < o.tol;
    ok = ok && pass;
    std::cout << std::left << std::setw(14) << template_name(spec) << std::setw(14) << std::scientific
              << std::setprecision(2) << r.distortion << std::setw(14) << r.template_term << std::setw(14) << r.theta
              << (pass ? "ok" : "FAIL") << '\n'
              << std::defaultfloat;
    rows.push_back({{"template", template_name(spec)}, {"distortion", r.distortion}, {"template_term", r.template_term},
                    {"theta", r.theta}, {"pass", pass}});
  }
  m.config["results"] = rows;
  if (!ok) throw CliFailure(kCheckFailed, "gradient check exceeded tolerance " + two_sig(o.tol));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("tetflat");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Volumetric flattening of slab-like tetrahedral meshes onto canonical templates"};
  app.require_subcommand(1);
  int threads = 1;
  std::uint64_t seed = 0;
  std::string log_level = "info";
  app.add_option("--threads", threads, "worker threads for data-parallel loops")->envname("TETFLAT_THREADS")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "seed for randomized start vectors and perturbations")->envname("TETFLAT_SEED");
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error")->envname("TETFLAT_LOG_LEVEL");

  SynthOpts so;
  auto* synth = app.add_subcommand("synth", "generate a synthetic bent slab or hemispherical shell");
  synth->add_option("--kind", so.kind, "slab|shell")->check(CLI::IsMember({"slab", "shell"}));
  synth->add_option("--length", so.slab.length, "slab length (mm)");
  synth->add_option("--width", so.slab.width, "slab width (mm)");
  synth->add_option("--thickness", so.slab.thickness, "slab thickness (mm)");
  synth->add_option("--bend", so.slab.bend_angle, "slab bend angle (radians)");
  synth->add_option("--nx", so.slab.nx, "cells along the length");
  synth->add_option("--ny", so.slab.ny, "cells along the width");
  synth->add_option("--nz", so.slab.nz, "cells through the thickness");
  synth->add_option("--radius", so.shell.outer_radius, "shell outer radius (mm)");
  synth->add_option("--shell-thickness", so.shell.thickness, "shell thickness (mm)");
  synth->add_option("--rings", so.shell.rings, "shell polar subdivisions");
  synth->add_option("--layers", so.shell.layers, "shell radial subdivisions");
  synth->add_option("--out", so.out, "output stem")->required();

  ParcOpts po;
  auto* parc = app.add_subcommand("parcellate", "segment the boundary into fetal, maternal and margin");
  parc->add_option("--mesh", po.mesh, "input mesh (.node/.ele stem or .vtk)")->required();
  parc->add_option("--gamma", po.gamma, "affinity sharpness")->envname("TETFLAT_GAMMA");
  parc->add_option("--margin-mm", po.margin_mm, "margin half-width (mm)")->envname("TETFLAT_MARGIN_MM");
  parc->add_option("--out", po.out, "output stem")->required();

  FlattenOpts fo;
  auto* flat = app.add_subcommand("flatten", "map a mesh onto a flattened template");
  flat->add_option("--mesh", fo.mesh, "input mesh (.node/.ele stem or .vtk)")->required();
  flat->add_option("--template", fo.templ, "planes|single-plane|ellipsoid")
      ->check(CLI::IsMember({"planes", "single-plane", "ellipsoid"}))
      ->envname("TETFLAT_TEMPLATE");
  flat->add_option("--lambda", fo.opt.lambda, "distortion weight")->envname("TETFLAT_LAMBDA");
  flat->add_option("--beta", fo.opt.beta, "fraction of the flip-free step")->envname("TETFLAT_BETA");
  flat->add_option("--rho", fo.opt.rho, "backtracking factor")->envname("TETFLAT_RHO");
  flat->add_option("--eps", fo.opt.eps, "gradient-norm tolerance")->envname("TETFLAT_EPS");
  flat->add_option("--max-iters", fo.opt.max_iters, "iteration cap")->envname("TETFLAT_MAX_ITERS");
  flat->add_option("--margin-mm", fo.margin_mm, "margin half-width (mm)")->envname("TETFLAT_MARGIN_MM");
  flat->add_option("--gamma", fo.gamma, "affinity sharpness")->envname("TETFLAT_GAMMA");
  flat->add_option("--voxel-mm", fo.voxel_mm, "voxel size for reported template error");
  flat->add_option("--theta-update", fo.theta_update, "exact|shared")->check(CLI::IsMember({"exact", "shared"}));
  flat->add_flag("--lambda-sweep", fo.lambda_sweep, "rerun over a log grid of lambda and tabulate the trade-off");
  flat->add_option("--sweep-values", fo.sweep_values, "lambda values for --lambda-sweep");
  flat->add_flag("!--no-trace", fo.trace, "omit the per-iteration trace from the JSON output");
  flat->add_option("--out", fo.out, "output stem")->required();

  ResampleOpts ro;
  auto* res = app.add_subcommand("resample", "pull a scalar volume back into template space");
  res->add_option("--volume", ro.volume, "input volume (.nrrd or .json/.raw)")->required();
  res->add_option("--mesh-z", ro.mesh_z, "original-space mesh")->required();
  res->add_option("--mesh-x", ro.mesh_x, "template-space mesh")->required();
  res->add_option("--spacing", ro.spacing, "output spacing: one or three values (mm)")->expected(1, 3);
  res->add_option("--out", ro.out, "output volume (.nrrd or .json)")->required();

  MetricsOpts mo;
  auto* met = app.add_subcommand("metrics", "distortion report between original and template meshes");
  met->add_option("--mesh-z", mo.mesh_z, "original-space mesh")->required();
  met->add_option("--mesh-x", mo.mesh_x, "template-space mesh")->required();
  met->add_option("--parcellation", mo.parcellation, "flatten or parcellate JSON with labels/template");
  met->add_option("--voxel-mm", mo.voxel_mm, "voxel size (mm)")->envname("TETFLAT_VOXEL_MM");
  met->add_option("--out", mo.out, "output stem")->required();

  BaselineOpts bo;
  auto* base = app.add_subcommand("baseline2d", "slice-and-disk baseline for comparison");
  base->add_option("--mesh-z", bo.mesh_z, "original-space mesh")->required();
  base->add_option("--mesh-x", bo.mesh_x, "template-space mesh")->required();
  base->add_option("--spacing", bo.spacing, "plane spacing (mm)");
  base->add_option("--result", bo.result, "flatten JSON; planes are centered between its template planes");
  base->add_option("--half-height", bo.half_height, "template half-height (mm); overrides --result");
  base->add_option("--out", bo.out, "output stem")->required();

  GradOpts go;
  auto* grad = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  grad->add_option("--mesh", go.mesh, "input mesh (default: small synthetic slab)");
  grad->add_option("--template", go.templ, "planes|single-plane|ellipsoid|all")
      ->check(CLI::IsMember({"planes", "single-plane", "ellipsoid", "all"}));
  grad->add_option("--lambda", go.lambda, "distortion weight");
  grad->add_option("--step", go.step_rel, "step relative to the bbox diagonal");
  grad->add_option("--tol", go.tol, "relative error tolerance");
  grad->add_option("--perturb", go.perturb, "random perturbation, fraction of the shortest edge");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));
  set_thread_count(threads);

  Manifest m;
  m.config = {{"threads", threads}, {"seed", seed}};
  int code = kOk;
  std::string message;
  try {
    if (synth->parsed()) {
      m.subcommand = "synth";
      m.path = so.out + ".manifest.json";
      m.config["kind"] = so.kind;
      code = cmd_synth(so, m);
    } else if (parc->parsed()) {
      m.subcommand = "parcellate";
      m.path = po.out + ".manifest.json";
      m.config.update({{"mesh", po.mesh}, {"gamma", po.gamma}, {"margin_mm", po.margin_mm}});
      code = cmd_parcellate(po, seed, m);
    } else if (flat->parsed()) {
      m.subcommand = "flatten";
      m.path = fo.out + ".manifest.json";
      m.config.update({{"mesh", fo.mesh},
                       {"template", fo.templ},
                       {"lambda", fo.opt.lambda},
                       {"beta", fo.opt.beta},
                       {"rho", fo.opt.rho},
                       {"eps", fo.opt.eps},
                       {"max_iters", fo.opt.max_iters},
                       {"margin_mm", fo.margin_mm},
                       {"gamma", fo.gamma},
                       {"voxel_mm", fo.voxel_mm},
                       {"theta_update", fo.theta_update},
                       {"lambda_sweep", fo.lambda_sweep}});
      code = cmd_flatten(fo, seed, m);
    } else if (res->parsed()) {
      m.subcommand = "resample";
      m.path = ro.out + ".manifest.json";
      m.config.update({{"volume", ro.volume}, {"mesh_z", ro.mesh_z}, {"mesh_x", ro.mesh_x}, {"spacing", ro.spacing}});
      code = cmd_resample(ro, m);
    } else if (met->parsed()) {
      m.subcommand = "metrics";
      m.path = mo.out + ".manifest.json";
      m.config.update({{"mesh_z", mo.mesh_z}, {"mesh_x", mo.mesh_x}, {"parcellation", mo.parcellation}, {"voxel_mm", mo.voxel_mm}});
      code = cmd_metrics(mo, m);
    } else if (base->parsed()) {
      m.subcommand = "baseline2d";
      m.path = bo.out + ".manifest.json";
      m.config.update({{"mesh_z", bo.mesh_z}, {"mesh_x", bo.mesh_x}, {"spacing", bo.spacing}, {"result", bo.result},
                       {"half_height", bo.half_height}});
      code = cmd_baseline(bo, m);
    } else if (grad->parsed()) {
      m.subcommand = "gradcheck";
      m.config.update({{"mesh", go.mesh}, {"template", go.templ}, {"lambda", go.lambda}, {"step", go.step_rel}, {"tol", go.tol}});
      code = cmd_gradcheck(go, seed, m);
    }
  } catch (const CliFailure& e) {
    code = e.code;
    message = e.what();
  } catch (const std::invalid_argument& e) {
    code = kUsage;
    message = e.what();
  } catch (const std::exception& e) {
    code = kData;
    message = e.what();
  }
  if (!message.empty()) spdlog::error("{}", message);
  m.write(code, message);
  return code;
}
