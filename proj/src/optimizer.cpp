#include "tetflat/optimizer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "tetflat/parallel.hpp"

namespace tetflat {

std::string_view stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::GradientTolerance:
      return "gradient-tolerance";
    case StopReason::StallFloor:
      return "stall-floor";
    case StopReason::LineSearchStall:
      return "line-search-stall";
    case StopReason::MaxIterations:
      return "max-iterations";
  }
  return "unknown";
}

void OptimizerParams::validate() const {
  if (!(lambda >= 0)) throw std::invalid_argument("lambda must be non-negative");
  if (!(beta > 0 && beta < 1)) throw std::invalid_argument("beta must lie in (0, 1)");
  if (!(rho > 0 && rho < 1)) throw std::invalid_argument("rho must lie in (0, 1)");
  if (!(eps > 0)) throw std::invalid_argument("eps must be positive");
  if (max_iters < 0) throw std::invalid_argument("max_iters must be non-negative");
}

StepBound max_step_flip_free(const Objective& objective, const Points& x, const Points& dir) {
  const int nt = objective.rest().num_tets();
  std::vector<double> roots(nt, std::numeric_limits<double>::infinity());
  parallel_for(nt, [&](int b, int e) {
    for (int k = b; k < e; ++k) {
      const auto c = objective.volume_cubic(x, dir, k);
      if (auto r = smallest_positive_root(c[3], c[2], c[1], c[0])) roots[k] = *r;
    }
  });
  StepBound out;
  out.eta = std::numeric_limits<double>::infinity();
  for (int k = 0; k < nt; ++k)
    if (roots[k] < out.eta) {
      out.eta = roots[k];
      out.limiting_tet = k;
    }
  if (out.limiting_tet < 0) {
    const double norm = dir.norm();
    const double diag = (x.rowwise().maxCoeff() - x.rowwise().minCoeff()).norm();
    out.eta = norm > 0 ? 10.0 * diag / norm : std::numeric_limits<double>::infinity();
    out.capped = true;
  }
  return out;
}

double min_signed_volume(const std::vector<Tet>& tets, const Points& x) {
  double v = std::numeric_limits<double>::infinity();
  for (const Tet& t : tets) v = std::min(v, edge_matrix(x, t).determinant() / 6.0);
  return v;
}

TemplateSpec fit_template(const Objective& objective, const Points& x, const TemplateSpec& spec) {
  const auto& topo = objective.topology();
  const auto& labels = objective.labels();
  const int nb = topo.num_boundary_vertices();
  if (const auto* e = std::get_if<Ellipsoid>(&spec)) {
    // Linear least squares in s_i = r_i^-2.
    Mat3 m = Mat3::Zero();
    Vec3 rhs = Vec3::Zero();
    for (int i = 0; i < nb; ++i) {
      const Vec3 q = x.col(topo.vertices[i]).cwiseAbs2();
      m += topo.area_weight[i] * q * q.transpose();
      rhs += topo.area_weight[i] * q;
    }
    const Vec3 s = m.ldlt().solve(rhs);
    if (!(s.minCoeff() > 0) || !s.allFinite()) return *e;
    return Ellipsoid{s.cwiseSqrt().cwiseInverse()};
  }
  const bool single = std::holds_alternative<SinglePlane>(spec);
  double sf = 0, af = 0, sm = 0, am = 0;
  for (int i = 0; i < nb; ++i) {
    const double a = topo.area_weight[i], z = x(2, topo.vertices[i]);
    if (labels[i] == Label::Fetal) {
      sf += a * z;
      af += a;
    } else if (labels[i] == Label::Maternal) {
      sm += a * z;
      am += a;
    }
  }
  if (single) {
    const double h = am > 0 ? -sm / am : 0.0;
    return h > 0 ? TemplateSpec(SinglePlane{h}) : spec;
  }
  const double h = (af + am) > 0 ? (sf - sm) / (af + am) : 0.0;
  return h > 0 ? TemplateSpec(ParallelPlanes{h}) : spec;
}

FlatteningResult descend(const Objective& objective, const Points& x0, const TemplateSpec& spec0,
                         const OptimizerParams& params, const IterationCallback& on_iteration) {
  params.validate();
  validate(spec0);
  const auto& tets = objective.rest().tets();

  FlatteningResult res;
  res.x = x0;
  res.spec = spec0;
  int stall = 0;
  for (int it = 0;; ++it) {
    const ObjectiveGradient g = objective.gradient(res.x, res.spec);
    TraceEntry e;
    e.iteration = it;
    e.objective = g.parts.total;
    e.template_term = g.parts.template_term;
    e.distortion = g.parts.distortion;
    e.grad_norm = g.x.norm();
    e.min_volume = min_signed_volume(tets, res.x);
    e.theta = template_params(res.spec);
    res.final_parts = g.parts;
    res.iterations = it;

    auto finish = [&](StopReason r, bool ok) {
      res.reason = r;
      res.converged = ok;
      res.trace.push_back(e);
      if (on_iteration) on_iteration(e);
    };
    if (e.grad_norm <= params.eps) {
      finish(StopReason::GradientTolerance, true);
      break;
    }
    if (it >= params.max_iters) {
      finish(StopReason::MaxIterations, false);
      break;
    }

    const StepBound bound = max_step_flip_free(objective, res.x, g.x);
    e.eta_max = bound.eta;
    double eta = params.beta * bound.eta;
    TemplateSpec trial_spec = res.spec;
    if (params.theta_update == ThetaUpdate::SharedStep) {
      const Eigen::VectorXd theta = template_params(res.spec) - eta * g.theta;
      trial_spec = with_params(res.spec, theta);
      try {
        validate(trial_spec);
      } catch (const std::invalid_argument&) {
        trial_spec = res.spec;  // the shared step would leave the admissible set
      }
    }

    // Backtracking: only X is re-stepped; theta keeps its first candidate.
    Points trial;
    double trial_phi = std::numeric_limits<double>::infinity();
    bool accepted = false;
    while (eta >= 1e-14 * bound.eta) {
      trial = res.x - eta * g.x;
      trial_phi = objective.evaluate(trial, trial_spec).total;
      if (trial_phi < g.parts.total) {
        accepted = true;
        break;
      }
      eta *= params.rho;
    }
    if (!accepted) {
      finish(StopReason::LineSearchStall, false);
      break;
    }
    e.eta = eta;
    res.trace.push_back(e);
    if (on_iteration) on_iteration(e);

    res.x = std::move(trial);
    res.spec = trial_spec;
    if (params.theta_update == ThetaUpdate::ExactSolve) {
      const TemplateSpec fitted = fit_template(objective, res.x, res.spec);
      // The fit minimizes the template term; keep it only if it truly helps.
      if (objective.evaluate(res.x, fitted).total <= trial_phi) res.spec = fitted;
    }

    const double rel = (g.parts.total - trial_phi) / std::max(std::abs(g.parts.total), 1e-300);
    stall = rel < params.stall_rel ? stall + 1 : 0;
    if (stall >= params.stall_window) {
      const ObjectiveGradient gl = objective.gradient(res.x, res.spec);
      TraceEntry last;
      last.iteration = it + 1;
      last.objective = gl.parts.total;
      last.template_term = gl.parts.template_term;
      last.distortion = gl.parts.distortion;
      last.grad_norm = gl.x.norm();
      last.min_volume = min_signed_volume(tets, res.x);
      last.theta = template_params(res.spec);
      res.trace.push_back(last);
      if (on_iteration) on_iteration(last);
      res.final_parts = gl.parts;
      res.iterations = it + 1;
      res.reason = StopReason::StallFloor;
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace tetflat
