#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "tetflat/optimizer.hpp"

namespace tetflat {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Roots of t^2 + b t + c without cancellation.
void quadratic_roots(double a, double b, double c, std::vector<double>& out) {
  const double disc = b * b - 4 * a * c;
  if (disc < 0) return;
  const double s = std::sqrt(disc);
  const double q = -0.5 * (b + std::copysign(s, b));
  if (q != 0) {
    out.push_back(q / a);
    out.push_back(c / q);
  } else {
    out.push_back(0.0);  // b == 0 and c == 0
  }
}

void depressed_cubic_roots(double a, double b, double c, std::vector<double>& out) {
  // t^3 + a t^2 + b t + c, t = y - a/3
  const double p = b - a * a / 3.0;
  const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
  const double shift = -a / 3.0;
  const double disc = 0.25 * q * q + p * p * p / 27.0;
  if (disc > 0) {
    const double s = std::sqrt(disc);
    const double u = std::cbrt(-0.5 * q + s), v = std::cbrt(-0.5 * q - s);
    out.push_back(u + v + shift);
  } else if (p == 0) {
    out.push_back(shift);
  } else {
    const double r = std::sqrt(-p / 3.0);
    const double arg = std::clamp(-0.5 * q / (r * r * r), -1.0, 1.0);
    const double phi = std::acos(arg);
    for (int k = 0; k < 3; ++k) out.push_back(2.0 * r * std::cos((phi - 2.0 * kPi * k) / 3.0) + shift);
  }
}

}  // namespace

std::optional<double> smallest_positive_root(double c3, double c2, double c1, double c0) {
  const double scale = std::max({std::abs(c3), std::abs(c2), std::abs(c1), std::abs(c0)});
  if (scale == 0 || !std::isfinite(scale)) return std::nullopt;
  c3 /= scale;
  c2 /= scale;
  c1 /= scale;
  c0 /= scale;

  std::vector<double> cand;
  constexpr double tiny = 1e-14;
  if (std::abs(c3) >= 1e-8) {
    depressed_cubic_roots(c2 / c3, c1 / c3, c0 / c3, cand);
  } else if (std::abs(c2) > tiny) {
    // Nearly quadratic: the closed form loses accuracy, so start from the
    // quadratic roots plus the far root and let Newton finish the job.
    quadratic_roots(c2, c1, c0, cand);
    if (c3 != 0) cand.push_back(-c2 / c3);
  } else if (std::abs(c1) > tiny) {
    cand.push_back(-c0 / c1);
    if (c3 != 0) {
      // c3 t^3 + c1 t + c0 with small c3: far roots at +-sqrt(-c1/c3)
      const double r = -c1 / c3;
      if (r > 0) {
        cand.push_back(std::sqrt(r));
        cand.push_back(-std::sqrt(r));
      }
    }
  } else if (c3 != 0) {
    cand.push_back(std::cbrt(-c0 / c3));
  } else {
    return std::nullopt;  // nonzero constant
  }

  auto poly = [&](double t) { return ((c3 * t + c2) * t + c1) * t + c0; };
  auto dpoly = [&](double t) { return (3 * c3 * t + 2 * c2) * t + c1; };
  auto mag = [&](double t) {
    const double a = std::abs(t);
    return ((std::abs(c3) * a + std::abs(c2)) * a + std::abs(c1)) * a + std::abs(c0);
  };

  std::optional<double> best;
  for (double t : cand) {
    if (!std::isfinite(t)) continue;
    for (int it = 0; it < 60; ++it) {
      const double f = poly(t);
      if (std::abs(f) <= 1e-15 * mag(t)) break;
      const double d = dpoly(t);
      if (d == 0) break;
      const double nt = t - f / d;
      if (!std::isfinite(nt)) break;
      if (std::abs(nt - t) <= 1e-16 * std::abs(t)) {
        t = nt;
        break;
      }
      t = nt;
    }
    if (std::abs(poly(t)) > 1e-9 * mag(t)) continue;  // Newton wandered off
    if (t > 0 && (!best || t < *best)) best = t;
  }
  return best;
}

}  // namespace tetflat
