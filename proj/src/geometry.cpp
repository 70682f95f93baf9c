#include "herc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace herc::geometry {

namespace {

void require_curvature(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw std::invalid_argument("curvature must be positive and finite, got " +
                                std::to_string(c));
  }
}

void require_finite(ConstSpan x, const char* what) {
  for (double v : x) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument(std::string(what) + " has a non-finite entry");
    }
  }
}

void require_same_size(ConstSpan a, ConstSpan b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dimension mismatch: " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
  }
}

void require_in_ball(ConstSpan x, double c) {
  if (!(c * squared_norm(x) < 1.0)) {
    throw std::domain_error("point lies outside the Poincare ball of curvature " +
                            std::to_string(c));
  }
}

void require_blocks(ConstSpan x, ConstSpan angles) {
  if (x.size() % 2 != 0) {
    throw std::invalid_argument("Givens maps need an even dimension, got " +
                                std::to_string(x.size()));
  }
  if (x.size() != 2 * angles.size()) {
    throw std::invalid_argument("expected " + std::to_string(x.size() / 2) +
                                " block angles, got " + std::to_string(angles.size()));
  }
}

// Largest argument handed to artanh by the distance.
constexpr double kMaxArtanhArg = 1.0 - 1e-15;

}  // namespace

double dot(ConstSpan a, ConstSpan b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double squared_norm(ConstSpan a) { return dot(a, a); }

double artanh(double x) { return 0.5 * std::log1p(2.0 * x / (1.0 - x)); }

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double tanh_ratio(double r) {
  if (r < 1e-4) {
    const double r2 = r * r;
    return 1.0 - r2 / 3.0 + 2.0 * r2 * r2 / 15.0;
  }
  return std::tanh(r) / r;
}

double artanh_ratio(double r) {
  if (r < 1e-4) {
    const double r2 = r * r;
    return 1.0 + r2 / 3.0 + r2 * r2 / 5.0;
  }
  return artanh(r) / r;
}

void exp0_into(ConstSpan u, double c, Span out) {
  require_curvature(c);
  require_finite(u, "tangent vector");
  const double scale = tanh_ratio(std::sqrt(c * squared_norm(u)));
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = scale * u[i];
}

Vec exp0(ConstSpan u, double c) {
  Vec out(u.size());
  exp0_into(u, c, out);
  return out;
}

void log0_into(ConstSpan v, double c, Span out) {
  require_curvature(c);
  require_finite(v, "ball point");
  require_in_ball(v, c);
  const double scale = artanh_ratio(std::sqrt(c * squared_norm(v)));
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = scale * v[i];
}

Vec log0(ConstSpan v, double c) {
  Vec out(v.size());
  log0_into(v, c, out);
  return out;
}

void mobius_add_into(ConstSpan x, ConstSpan y, double c, Span out) {
  require_curvature(c);
  require_same_size(x, y);
  const double xy = dot(x, y);
  const double x2 = squared_norm(x);
  const double y2 = squared_norm(y);
  const double a = 1.0 + 2.0 * c * xy + c * y2;
  const double b = 1.0 - c * x2;
  const double denom = std::max(1.0 + 2.0 * c * xy + c * c * x2 * y2,
                                std::numeric_limits<double>::min());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (a * x[i] + b * y[i]) / denom;
}

Vec mobius_add(ConstSpan x, ConstSpan y, double c) {
  Vec out(x.size());
  mobius_add_into(x, y, c, out);
  return out;
}

double hyp_distance(ConstSpan x, ConstSpan y, double c) {
  require_curvature(c);
  require_same_size(x, y);
  require_in_ball(x, c);
  require_in_ball(y, c);
  Vec neg_x(x.begin(), x.end());
  for (double& v : neg_x) v = -v;
  Vec w(x.size());
  mobius_add_into(neg_x, y, c, w);
  const double sqrt_c = std::sqrt(c);
  const double arg = std::min(sqrt_c * std::sqrt(squared_norm(w)), kMaxArtanhArg);
  return 2.0 / sqrt_c * artanh(arg);
}

void project_to_ball_into(ConstSpan x, double c, Span out) {
  require_curvature(c);
  const double max_norm = (1.0 - kBallEpsilon) / std::sqrt(c);
  const double norm = std::sqrt(squared_norm(x));
  const double scale = norm < max_norm ? 1.0 : max_norm / norm;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = scale * x[i];
}

Vec project_to_ball(ConstSpan x, double c) {
  Vec out(x.size());
  project_to_ball_into(x, c, out);
  return out;
}

void givens_rotate_into(ConstSpan x, ConstSpan angles, Span out) {
  require_blocks(x, angles);
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const double cs = std::cos(angles[i]);
    const double sn = std::sin(angles[i]);
    const double x0 = x[2 * i];
    const double x1 = x[2 * i + 1];
    out[2 * i] = cs * x0 - sn * x1;
    out[2 * i + 1] = sn * x0 + cs * x1;
  }
}

Vec givens_rotate(ConstSpan x, ConstSpan angles) {
  Vec out(x.size());
  givens_rotate_into(x, angles, out);
  return out;
}

void givens_reflect_into(ConstSpan x, ConstSpan angles, Span out) {
  require_blocks(x, angles);
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const double cs = std::cos(angles[i]);
    const double sn = std::sin(angles[i]);
    const double x0 = x[2 * i];
    const double x1 = x[2 * i + 1];
    out[2 * i] = cs * x0 + sn * x1;
    out[2 * i + 1] = sn * x0 - cs * x1;
  }
}

Vec givens_reflect(ConstSpan x, ConstSpan angles) {
  Vec out(x.size());
  givens_reflect_into(x, angles, out);
  return out;
}

}  // namespace herc::geometry
