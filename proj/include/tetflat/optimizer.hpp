#pragma once

#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "tetflat/energy.hpp"

namespace tetflat {

/// Smallest strictly positive real root of c3 t^3 + c2 t^2 + c1 t + c0.
/// Leading coefficients that vanish relative to the others drop the degree.
std::optional<double> smallest_positive_root(double c3, double c2, double c1, double c0);

struct StepBound {
  double eta = 0.0;
  bool capped = false;  // no tet had a positive root
  int limiting_tet = -1;
};

/// Largest eta such that every tet keeps positive volume along X - eta * dir,
/// or 10 * bbox diagonal / ||dir||_F when no tet ever collapses.
StepBound max_step_flip_free(const Objective& objective, const Points& x, const Points& dir);

/// Smallest signed tet volume (mm^3) under positions `x`.
double min_signed_volume(const std::vector<Tet>& tets, const Points& x);

enum class ThetaUpdate {
  ExactSolve,  // closed-form template fit after every accepted vertex step
  SharedStep,  // theta - eta * grad, with the first trial eta of the iteration
};

enum class StopReason { GradientTolerance, StallFloor, LineSearchStall, MaxIterations };
std::string_view stop_reason_name(StopReason r);

struct OptimizerParams {
  double lambda = 1.0;
  double beta = 0.9;
  double rho = 0.5;
  double eps = 1e-4;
  int max_iters = 20000;
  ThetaUpdate theta_update = ThetaUpdate::ExactSolve;
  int stall_window = 50;      // iterations of relative decrease below stall_rel
  double stall_rel = 1e-12;

  /// Throws std::invalid_argument when out of range.
  void validate() const;
};

struct TraceEntry {
  int iteration = 0;
  double objective = 0.0;
  double template_term = 0.0;
  double distortion = 0.0;
  double grad_norm = 0.0;   // ||d phi / dX||_F at this iterate
  double eta = 0.0;         // step accepted from this iterate (0 on the last)
  double eta_max = 0.0;
  double min_volume = 0.0;  // smallest signed tet volume, mm^3
  Eigen::VectorXd theta;
};

struct FlatteningResult {
  Points x;
  TemplateSpec spec;
  std::vector<TraceEntry> trace;
  bool converged = false;
  StopReason reason = StopReason::MaxIterations;
  int iterations = 0;
  EnergyParts final_parts;
};

/// Closed-form minimizer of the template term over theta at fixed X.
/// Returns `spec` unchanged when the fit is not admissible.
TemplateSpec fit_template(const Objective& objective, const Points& x, const TemplateSpec& spec);

using IterationCallback = std::function<void(const TraceEntry&)>;

/// Flip-free backtracking gradient descent starting from `x0`.
FlatteningResult descend(const Objective& objective, const Points& x0, const TemplateSpec& spec0,
                         const OptimizerParams& params, const IterationCallback& on_iteration = {});

}  // namespace tetflat
