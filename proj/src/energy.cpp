#include "tetflat/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SVD>

#include "tetflat/parallel.hpp"

namespace tetflat {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Mat3 adjugate(const Mat3& m) {
  Mat3 a;
  a(0, 0) = m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
  a(0, 1) = m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2);
  a(0, 2) = m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1);
  a(1, 0) = m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2);
  a(1, 1) = m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0);
  a(1, 2) = m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2);
  a(2, 0) = m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0);
  a(2, 1) = m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1);
  a(2, 2) = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  return a;
}

}  // namespace

std::string template_name(const TemplateSpec& spec) {
  return std::visit(overloaded{[](const ParallelPlanes&) { return std::string("planes"); },
                               [](const SinglePlane&) { return std::string("single-plane"); },
                               [](const Ellipsoid&) { return std::string("ellipsoid"); }},
                    spec);
}

void validate(const TemplateSpec& spec) {
  std::visit(overloaded{[](const ParallelPlanes& p) {
                          if (!(p.h > 0)) throw std::invalid_argument("template half-height must be positive");
                        },
                        [](const SinglePlane& p) {
                          if (!(p.h > 0)) throw std::invalid_argument("template half-height must be positive");
                        },
                        [](const Ellipsoid& e) {
                          if (!(e.radii.minCoeff() > 0))
                            throw std::invalid_argument("ellipsoid radii must be positive");
                        }},
             spec);
}

Eigen::VectorXd template_params(const TemplateSpec& spec) {
  return std::visit(overloaded{[](const ParallelPlanes& p) -> Eigen::VectorXd { return Eigen::VectorXd::Constant(1, p.h); },
                               [](const SinglePlane& p) -> Eigen::VectorXd { return Eigen::VectorXd::Constant(1, p.h); },
                               [](const Ellipsoid& e) -> Eigen::VectorXd { return e.radii; }},
                    spec);
}

TemplateSpec with_params(const TemplateSpec& spec, const Eigen::VectorXd& theta) {
  return std::visit(overloaded{[&](const ParallelPlanes&) -> TemplateSpec { return ParallelPlanes{theta[0]}; },
                               [&](const SinglePlane&) -> TemplateSpec { return SinglePlane{theta[0]}; },
                               [&](const Ellipsoid&) -> TemplateSpec { return Ellipsoid{theta.head<3>()}; }},
                    spec);
}

Eigen::Matrix<double, 4, 3> basis_matrix() {
  Eigen::Matrix<double, 4, 3> b;
  b << -1, -1, -1, 1, 0, 0, 0, 1, 0, 0, 0, 1;
  return b;
}

double dirichlet_density(const Mat3& j) {
  const double det = j.determinant();
  if (det == 0.0) throw FlipError("singular Jacobian");
  return j.squaredNorm() + adjugate(j).squaredNorm() / (det * det);
}

Vec3 singular_values(const Mat3& j) {
  return Eigen::JacobiSVD<Mat3>(j).singularValues();
}

double dirichlet_density_svd(const Mat3& j) {
  const Vec3 s = singular_values(j);
  if (s.minCoeff() == 0.0) throw FlipError("singular Jacobian");
  return (s.array().square() + s.array().square().inverse()).sum();
}

double template_term(const Vec3& x, Label label, const TemplateSpec& spec) {
  return std::visit(overloaded{[&](const ParallelPlanes& p) {
                                 if (label == Label::Fetal) return (x.z() - p.h) * (x.z() - p.h);
                                 if (label == Label::Maternal) return (x.z() + p.h) * (x.z() + p.h);
                                 return 0.0;
                               },
                               [&](const SinglePlane& p) {
                                 if (label == Label::Maternal) return (x.z() + p.h) * (x.z() + p.h);
                                 return 0.0;
                               },
                               [&](const Ellipsoid& e) {
                                 const double q = x.cwiseQuotient(e.radii).squaredNorm() - 1.0;
                                 return q * q;
                               }},
                    spec);
}

DeformationCache::DeformationCache(const TetMesh& rest) {
  rest_inverse_.resize(rest.num_tets());
  for (int k = 0; k < rest.num_tets(); ++k)
    rest_inverse_[k] = edge_matrix(rest.vertices(), rest.tets()[k]).inverse();
}

Objective::Objective(const TetMesh& rest, const BoundaryTopology& topo, std::vector<Label> labels,
                     double lambda)
    : rest_(&rest), topo_(&topo), labels_(std::move(labels)), lambda_(lambda), cache_(rest) {
  if (!labels_.empty() && static_cast<int>(labels_.size()) != topo.num_boundary_vertices())
    throw std::invalid_argument("label count does not match boundary vertex count");
  if (!(lambda >= 0)) throw std::invalid_argument("lambda must be non-negative");
}

double Objective::template_sum(const Points& x, const TemplateSpec& spec) const {
  const bool planes = !std::holds_alternative<Ellipsoid>(spec);
  if (planes && labels_.empty()) throw std::invalid_argument("plane templates need boundary labels");
  double sum = 0.0;
  for (int m = 0; m < topo_->num_boundary_vertices(); ++m)
    sum += topo_->area_weight[m] *
           template_term(x.col(topo_->vertices[m]), planes ? labels_[m] : Label::Margin, spec);
  return sum;
}

EnergyParts Objective::evaluate(const Points& x, const TemplateSpec& spec) const {
  const auto& tets = rest_->tets();
  const int nt = rest_->num_tets();
  std::vector<double> dens(nt), dets(nt);
  parallel_for(nt, [&](int b, int e) {
    for (int k = b; k < e; ++k) {
      const Mat3 j = cache_.jacobian(x, tets, k);
      const double det = j.determinant();
      dets[k] = det;
      dens[k] = det > 0 ? j.squaredNorm() + adjugate(j).squaredNorm() / (det * det) : 0.0;
    }
  });
  EnergyParts p;
  p.min_det = std::numeric_limits<double>::infinity();
  for (int k = 0; k < nt; ++k) {
    p.min_det = std::min(p.min_det, dets[k]);
    p.distortion += topo_->volume_weight[k] * dens[k];
  }
  p.feasible = p.min_det > 0;
  p.template_term = template_sum(x, spec);
  p.total = p.feasible ? p.template_term + lambda_ * p.distortion
                       : std::numeric_limits<double>::infinity();
  return p;
}

double Objective::value(const Points& x, const TemplateSpec& spec) const {
  const EnergyParts p = evaluate(x, spec);
  if (!p.feasible) throw FlipError("flipped tet encountered (min det J = " + std::to_string(p.min_det) + ")");
  return p.total;
}

ObjectiveGradient Objective::gradient(const Points& x, const TemplateSpec& spec) const {
  const auto& tets = rest_->tets();
  const int nt = rest_->num_tets();
  const int nv = rest_->num_vertices();

  ObjectiveGradient g;
  g.parts.min_det = std::numeric_limits<double>::infinity();
  std::vector<double> dens(nt), dets(nt);
  std::vector<Eigen::Matrix<double, 3, 4>> local(nt);
  parallel_for(nt, [&](int b, int e) {
    for (int k = b; k < e; ++k) {
      const Mat3& q = cache_.rest_inverse(k);
      const Mat3 j = edge_matrix(x, tets[k]) * q;
      const double det = j.determinant();
      dets[k] = det;
      if (!(det > 0)) continue;
      const Mat3 jinv = adjugate(j) / det;
      dens[k] = j.squaredNorm() + jinv.squaredNorm();
      const Mat3 jinv_t = jinv.transpose();
      // d/dJ (||J||^2 + ||J^-1||^2) = 2J - 2 J^-T J^-1 J^-T, pulled back
      // through J = P Q to the edge matrix P.
      const Mat3 gp = (2.0 * j - 2.0 * jinv_t * jinv * jinv_t) * q.transpose();
      const double w = lambda_ * topo_->volume_weight[k];
      local[k].rightCols<3>() = w * gp;
      local[k].col(0) = -w * gp.rowwise().sum();
    }
  });
  for (int k = 0; k < nt; ++k) {
    g.parts.min_det = std::min(g.parts.min_det, dets[k]);
    g.parts.distortion += topo_->volume_weight[k] * dens[k];
  }
  if (!(g.parts.min_det > 0))
    throw FlipError("flipped tet encountered (min det J = " + std::to_string(g.parts.min_det) + ")");

  g.x_distortion = Points::Zero(3, nv);
  for (int k = 0; k < nt; ++k)
    for (int c = 0; c < 4; ++c) g.x_distortion.col(tets[k][c]) += local[k].col(c);

  g.x_template = Points::Zero(3, nv);
  const bool planes = !std::holds_alternative<Ellipsoid>(spec);
  if (planes && labels_.empty()) throw std::invalid_argument("plane templates need boundary labels");
  g.theta = Eigen::VectorXd::Zero(template_params(spec).size());
  for (int m = 0; m < topo_->num_boundary_vertices(); ++m) {
    const int v = topo_->vertices[m];
    const double a = topo_->area_weight[m];
    const Vec3 p = x.col(v);
    const Label l = planes ? labels_[m] : Label::Margin;
    std::visit(overloaded{[&](const ParallelPlanes& t) {
                            if (l == Label::Fetal) {
                              g.x_template(2, v) += 2.0 * a * (p.z() - t.h);
                              g.theta[0] -= 2.0 * a * (p.z() - t.h);
                            } else if (l == Label::Maternal) {
                              g.x_template(2, v) += 2.0 * a * (p.z() + t.h);
                              g.theta[0] += 2.0 * a * (p.z() + t.h);
                            }
                          },
                          [&](const SinglePlane& t) {
                            if (l == Label::Maternal) {
                              g.x_template(2, v) += 2.0 * a * (p.z() + t.h);
                              g.theta[0] += 2.0 * a * (p.z() + t.h);
                            }
                          },
                          [&](const Ellipsoid& t) {
                            const Vec3 rinv2 = t.radii.cwiseInverse().cwiseAbs2();
                            const double q = p.cwiseProduct(rinv2).dot(p) - 1.0;
                            g.x_template.col(v) += 4.0 * a * q * rinv2.cwiseProduct(p);
                            // d/dr_i (x^T R x) = -2 x_i^2 / r_i^3
                            for (int i = 0; i < 3; ++i)
                              g.theta[i] -= 4.0 * a * q * p[i] * p[i] / std::pow(t.radii[i], 3);
                          }},
               spec);
  }
  g.parts.template_term = template_sum(x, spec);
  g.parts.feasible = true;
  g.parts.total = g.parts.template_term + lambda_ * g.parts.distortion;
  g.x = g.x_template + g.x_distortion;
  return g;
}

std::array<double, 4> Objective::volume_cubic(const Points& x, const Points& dir, int k) const {
  const Tet& t = rest_->tets()[k];
  const Mat3 p = edge_matrix(x, t);
  const Mat3 d = edge_matrix(dir, t);
  // det(P - eta D) expanded in eta.
  return {p.determinant(), -(adjugate(p) * d).trace(), (adjugate(d) * p).trace(), -d.determinant()};
}

FdReport fd_check(const Objective& objective, const Points& x, const TemplateSpec& spec, double step,
                  const GradientFn& analytic) {
  const ObjectiveGradient g = analytic ? analytic(x, spec) : objective.gradient(x, spec);
  const double lambda = objective.lambda();
  const double diag = (x.rowwise().maxCoeff() - x.rowwise().minCoeff()).norm();

  // Five-point central stencil: truncation O(step^4), so the check is not
  // limited by the cubic terms of the density around the identity.
  auto stencil = [&](double m2, double m1, double p1, double p2) {
    return (m2 - 8 * m1 + 8 * p1 - p2) / (12 * step);
  };
  Points fd_dist = Points::Zero(3, x.cols()), fd_tmpl = Points::Zero(3, x.cols());
  Points xp = x;
  for (Eigen::Index v = 0; v < x.cols(); ++v)
    for (int i = 0; i < 3; ++i) {
      const double orig = xp(i, v);
      std::array<EnergyParts, 4> e;
      const std::array<double, 4> offsets{-2, -1, 1, 2};
      for (int q = 0; q < 4; ++q) {
        xp(i, v) = orig + offsets[q] * step;
        e[q] = objective.evaluate(xp, spec);
        if (!e[q].feasible) throw FlipError("finite-difference step flips a tet; reduce the step");
      }
      xp(i, v) = orig;
      fd_dist(i, v) = lambda * stencil(e[0].distortion, e[1].distortion, e[2].distortion, e[3].distortion);
      fd_tmpl(i, v) = stencil(e[0].template_term, e[1].template_term, e[2].template_term, e[3].template_term);
    }

  const Eigen::VectorXd theta = template_params(spec);
  Eigen::VectorXd fd_theta(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    std::array<double, 4> t4;
    const std::array<double, 4> offsets{-2, -1, 1, 2};
    for (int q = 0; q < 4; ++q) {
      Eigen::VectorXd t = theta;
      t[i] = theta[i] + offsets[q] * step;
      t4[q] = objective.evaluate(x, with_params(spec, t)).template_term;
    }
    fd_theta[i] = stencil(t4[0], t4[1], t4[2], t4[3]);
  }

  auto rel = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& f, double term) {
    const double floor = 1e-3 * (std::abs(term) + 1.0) / diag;
    const double denom = std::max(f.cwiseAbs().maxCoeff(), floor);
    return (a - f).cwiseAbs().maxCoeff() / denom;
  };
  FdReport r;
  r.distortion = rel(g.x_distortion, fd_dist, lambda * g.parts.distortion);
  r.template_term = rel(g.x_template, fd_tmpl, g.parts.template_term);
  r.theta = rel(g.theta, fd_theta, g.parts.template_term);
  return r;
}

}  // namespace tetflat
