#pragma once

// Forward primitives that record what their backward pass needs, and the
// matching vector-Jacobian products. Shared by the scorer and the gradient
// code so both evaluate the exact same floating-point expressions.
//
// Every *_vjp accumulates (+=) into its gradient outputs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "herc/geometry.hpp"
#include "herc/params.hpp"

namespace herc::detail {

using geometry::ConstSpan;
using geometry::Span;
using Vec = std::vector<double>;

inline constexpr double kMaxArtanhArg = 1.0 - 1e-15;
inline constexpr double kSeriesCutoff = 1e-2;

inline double dot(ConstSpan a, ConstSpan b) { return geometry::dot(a, b); }

// d/dr (tanh(r)/r) divided by r.
inline double tanh_ratio_slope(double r) {
  const double r2 = r * r;
  if (r < kSeriesCutoff) {
    return -2.0 / 3.0 + r2 * (8.0 / 15.0 + r2 * (-34.0 / 105.0 + r2 * 496.0 / 2835.0));
  }
  const double th = std::tanh(r);
  return (1.0 - th * th) / r2 - th / (r2 * r);
}

// d/dr (artanh(r)/r) divided by r.
inline double artanh_ratio_slope(double r) {
  const double r2 = r * r;
  if (r < kSeriesCutoff) {
    return 2.0 / 3.0 + r2 * (4.0 / 5.0 + r2 * (6.0 / 7.0 + r2 * 8.0 / 9.0));
  }
  return 1.0 / (r2 * (1.0 - r2)) - geometry::artanh(r) / (r2 * r);
}

// Curvature with a positive floor, since softplus underflows below -745.
inline double safe_softplus(double z) {
  return std::max(geometry::softplus(z), std::numeric_limits<double>::min());
}

// ---- exp0 / log0 ---------------------------------------------------------

inline void exp0_fwd(ConstSpan u, double c, Span out) {
  const double scale = geometry::tanh_ratio(std::sqrt(c * geometry::squared_norm(u)));
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = scale * u[i];
}

inline void exp0_vjp(ConstSpan u, double c, ConstSpan gy, Span gu, double& gc) {
  const double r2 = geometry::squared_norm(u);
  const double rho = std::sqrt(c * r2);
  const double f = geometry::tanh_ratio(rho);
  const double g = tanh_ratio_slope(rho);
  const double gy_u = dot(gy, u);
  for (std::size_t i = 0; i < u.size(); ++i) gu[i] += f * gy[i] + c * g * gy_u * u[i];
  gc += 0.5 * g * gy_u * r2;
}

inline void log0_fwd(ConstSpan v, double c, Span out) {
  const double scale = geometry::artanh_ratio(std::sqrt(c * geometry::squared_norm(v)));
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = scale * v[i];
}

inline void log0_vjp(ConstSpan v, double c, ConstSpan gy, Span gv, double& gc) {
  const double r2 = geometry::squared_norm(v);
  const double rho = std::sqrt(c * r2);
  const double h = geometry::artanh_ratio(rho);
  const double k = artanh_ratio_slope(rho);
  const double gy_v = dot(gy, v);
  for (std::size_t i = 0; i < v.size(); ++i) gv[i] += h * gy[i] + c * k * gy_v * v[i];
  gc += 0.5 * k * gy_v * r2;
}

// ---- ball projection ------------------------------------------------------

inline void project_fwd(ConstSpan x, double c, Span out) {
  const double max_norm = (1.0 - geometry::kBallEpsilon) / std::sqrt(c);
  const double norm = std::sqrt(geometry::squared_norm(x));
  const double scale = norm < max_norm ? 1.0 : max_norm / norm;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = scale * x[i];
}

inline void project_vjp(ConstSpan x, double c, ConstSpan gy, Span gx, double& gc) {
  const double max_norm = (1.0 - geometry::kBallEpsilon) / std::sqrt(c);
  const double norm = std::sqrt(geometry::squared_norm(x));
  if (norm < max_norm) {
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += gy[i];
    return;
  }
  const double gy_hat = dot(gy, x) / norm;
  const double ratio = max_norm / norm;
  for (std::size_t i = 0; i < x.size(); ++i) gx[i] += ratio * (gy[i] - gy_hat * x[i] / norm);
  gc += gy_hat * (-0.5 * max_norm / c);
}

// exp0 followed by projection; `raw` keeps the exp0 output for backward.
inline void to_ball_fwd(ConstSpan u, double c, Span raw, Span out) {
  exp0_fwd(u, c, raw);
  project_fwd(raw, c, out);
}

inline void to_ball_vjp(ConstSpan u, ConstSpan raw, double c, ConstSpan gy, Span scratch, Span gu,
                        double& gc) {
  std::fill(scratch.begin(), scratch.end(), 0.0);
  project_vjp(raw, c, gy, scratch, gc);
  exp0_vjp(u, c, scratch, gu, gc);
}

// ---- Mobius addition --------------------------------------------------------

inline double mobius_denominator(double c, double xy, double x2, double y2) {
  return std::max(1.0 + 2.0 * c * xy + c * c * x2 * y2, std::numeric_limits<double>::min());
}

inline void mobius_fwd(ConstSpan x, ConstSpan y, double c, Span out) {
  const double xy = dot(x, y);
  const double x2 = geometry::squared_norm(x);
  const double y2 = geometry::squared_norm(y);
  const double a = 1.0 + 2.0 * c * xy + c * y2;
  const double b = 1.0 - c * x2;
  const double d = mobius_denominator(c, xy, x2, y2);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (a * x[i] + b * y[i]) / d;
}

// `x_sign` = -1 differentiates (-x) (+) y with respect to x.
inline void mobius_vjp(ConstSpan x, ConstSpan y, double c, ConstSpan gz, Span gx, Span gy,
                       double& gc, double x_sign = 1.0) {
  const std::size_t n = x.size();
  const double sx = x_sign;
  // Work with x' = sx * x.
  const double xy = sx * dot(x, y);
  const double x2 = geometry::squared_norm(x);
  const double y2 = geometry::squared_norm(y);
  const double a = 1.0 + 2.0 * c * xy + c * y2;
  const double b = 1.0 - c * x2;
  const double d = mobius_denominator(c, xy, x2, y2);
  double gz_x = 0.0, gz_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    gz_x += gz[i] * sx * x[i];
    gz_y += gz[i] * y[i];
  }
  const double gn_x = gz_x / d;  // <gN, x'>
  const double gn_y = gz_y / d;  // <gN, y>
  // gD = -<gz, z>/D with z = (a x' + b y)/D.
  const double gz_z = (a * gz_x + b * gz_y) / d;
  const double gd = -gz_z / d;
  const double gd_live = (1.0 + 2.0 * c * xy + c * c * x2 * y2) > std::numeric_limits<double>::min()
                             ? gd
                             : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = sx * x[i];
    const double gn = gz[i] / d;
    const double gxp = a * gn + 2.0 * c * gn_x * y[i] - 2.0 * c * gn_y * xi +
                       gd_live * (2.0 * c * y[i] + 2.0 * c * c * y2 * xi);
    const double gyi = b * gn + 2.0 * c * gn_x * (xi + y[i]) +
                       gd_live * (2.0 * c * xi + 2.0 * c * c * x2 * y[i]);
    gx[i] += sx * gxp;
    gy[i] += gyi;
  }
  gc += gn_x * (2.0 * xy + y2) - gn_y * x2 + gd_live * (2.0 * xy + 2.0 * c * x2 * y2);
}

// ---- squared geodesic distance ------------------------------------------

// Computes d_c(x, y)^2 and records the Mobius difference in `w`.
inline double sqdist_fwd(ConstSpan x, ConstSpan y, double c, Span w) {
  const double xy = dot(x, y);
  const double x2 = geometry::squared_norm(x);
  const double y2 = geometry::squared_norm(y);
  // (-x) (+) y
  const double a = 1.0 - 2.0 * c * xy + c * y2;
  const double b = 1.0 - c * x2;
  const double d = mobius_denominator(c, -xy, x2, y2);
  for (std::size_t i = 0; i < x.size(); ++i) w[i] = (-a * x[i] + b * y[i]) / d;
  const double sqrt_c = std::sqrt(c);
  const double rho = std::min(sqrt_c * std::sqrt(geometry::squared_norm(w)), kMaxArtanhArg);
  const double dist = 2.0 / sqrt_c * geometry::artanh(rho);
  return dist * dist;
}

inline void sqdist_vjp(ConstSpan x, ConstSpan y, double c, ConstSpan w, double g, Span gx,
                       Span gy, double& gc, Span scratch) {
  const double sqrt_c = std::sqrt(c);
  const double m = std::sqrt(geometry::squared_norm(w));
  const double rho_raw = sqrt_c * m;
  if (rho_raw >= kMaxArtanhArg) {
    const double dist = 2.0 / sqrt_c * geometry::artanh(kMaxArtanhArg);
    gc += g * 2.0 * dist * (-dist / (2.0 * c));
    return;
  }
  const double rho = rho_raw;
  const double one_minus = 1.0 - rho * rho;
  const double ratio = geometry::artanh_ratio(rho);  // artanh(rho)/rho
  const double dist = 2.0 * m * ratio;
  const double gw_scale = g * 8.0 * ratio / one_minus;
  for (std::size_t i = 0; i < w.size(); ++i) scratch[i] = gw_scale * w[i];
  gc += g * (dist / c) * (-dist + 2.0 * m / one_minus);
  mobius_vjp(x, y, c, scratch, gx, gy, gc, -1.0);
}

// ---- Givens maps ------------------------------------------------------------

inline void block_angles_fwd(ConstSpan params, Span angles) {
  for (std::size_t i = 0; i < angles.size(); ++i) {
    angles[i] = std::atan2(params[2 * i + 1], params[2 * i]);
  }
}

inline void block_angles_vjp(ConstSpan params, ConstSpan g_angles, Span g_params) {
  for (std::size_t i = 0; i < g_angles.size(); ++i) {
    const double a = params[2 * i];
    const double b = params[2 * i + 1];
    const double r2 = a * a + b * b;
    if (r2 == 0.0) continue;
    g_params[2 * i] += -b / r2 * g_angles[i];
    g_params[2 * i + 1] += a / r2 * g_angles[i];
  }
}

inline void rotate_fwd(ConstSpan x, ConstSpan angles, Span out) {
  geometry::givens_rotate_into(x, angles, out);
}

inline void rotate_vjp(ConstSpan angles, ConstSpan y, ConstSpan gy, Span gx, Span g_angles) {
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const double cs = std::cos(angles[i]);
    const double sn = std::sin(angles[i]);
    const double g0 = gy[2 * i];
    const double g1 = gy[2 * i + 1];
    gx[2 * i] += cs * g0 + sn * g1;
    gx[2 * i + 1] += -sn * g0 + cs * g1;
    g_angles[i] += -g0 * y[2 * i + 1] + g1 * y[2 * i];
  }
}

inline void reflect_fwd(ConstSpan x, ConstSpan angles, Span out) {
  geometry::givens_reflect_into(x, angles, out);
}

inline void reflect_vjp(ConstSpan angles, ConstSpan y, ConstSpan gy, Span gx, Span g_angles) {
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const double cs = std::cos(angles[i]);
    const double sn = std::sin(angles[i]);
    const double g0 = gy[2 * i];
    const double g1 = gy[2 * i + 1];
    gx[2 * i] += cs * g0 + sn * g1;
    gx[2 * i + 1] += sn * g0 - cs * g1;
    g_angles[i] += -g0 * y[2 * i + 1] + g1 * y[2 * i];
  }
}

// ---- curvature ----------------------------------------------------------------

struct CurvatureTrace {
  double z = 0.0;    // softplus argument
  double c = 0.0;    // softplus(z), floored
  double tau = 1.0;  // time scalar used (1 for RelationOnly)
  double dot = 1.0;  // <e_s, e_o> for the dot variant, 1 otherwise
};

CurvatureTrace curvature_fwd(const CurvatureSpec& spec, const ModelParams& params, std::uint32_t p,
                             std::uint32_t t, std::uint32_t s, std::uint32_t o);

// Pushes dL/dc into rel_curv / time_curv (and entity_emb for the dot variant).
void curvature_vjp(const CurvatureSpec& spec, const ModelParams& params, const CurvatureTrace& tr,
                   std::uint32_t p, std::uint32_t t, std::uint32_t s, std::uint32_t o, double gc,
                   GradientSet& grads);

// ---- query embedding --------------------------------------------------------

// Every intermediate of Q(s, p[, t]) at a fixed curvature.
struct QueryTrace {
  std::size_t n = 0;
  std::uint32_t s = 0, p = 0, t = 0;
  double c = 0.0;
  Vec subj_raw, subj;           // exp0(e_s) before/after projection
  Vec rot_angles, ref_angles;   // n/2 each
  Vec q_rot, q_ref;             // isometries of subj
  Vec u_rot, u_ref;             // log0 of the above
  double alpha_rot = 0.5, alpha_ref = 0.5;
  Vec att_tan, att_raw, att;    // tangent average, exp0, projected
  Vec rel_raw, rel;             // exp0(r_p), projected
  Vec sum1_raw, q1;             // att (+) rel, projected
  bool translated = false;
  Vec tr_raw, tr, sum2_raw, q2; // optional time translation stage

  explicit QueryTrace(std::size_t dim = 0) { resize(dim); }
  void resize(std::size_t dim);
  const Vec& query() const { return translated ? q2 : q1; }
};

void query_fwd(const ModelParams& params, bool translate, std::uint32_t s, std::uint32_t p,
               std::uint32_t t, double c, QueryTrace& tr);

// Scratch buffers for query_vjp, sized to n.
struct QueryGradScratch {
  Vec g_q1, g_att, g_rel, g_att_tan, g_u_rot, g_u_ref, g_q_rot, g_q_ref, g_subj, g_angles,
      g_tr, scratch;
  explicit QueryGradScratch(std::size_t n = 0);
};

// Backpropagates dL/dQ; returns dL/dc from the query path.
double query_vjp(const ModelParams& params, const QueryTrace& tr, ConstSpan g_query,
                 GradientSet& grads, QueryGradScratch& ws);

// Object side: ball image of e_o and the score against Q.
struct ObjectTrace {
  Vec obj_raw, obj, w;
  explicit ObjectTrace(std::size_t n = 0) : obj_raw(n), obj(n), w(n) {}
};

double object_score_fwd(const ModelParams& params, ConstSpan query, double c, std::uint32_t s,
                        std::uint32_t o, ObjectTrace& ot);

// Backpropagates dL/dscore into g_query, the object embedding and the
// biases; returns dL/dc from the object path.
double object_score_vjp(const ModelParams& params, ConstSpan query, double c, std::uint32_t s,
                        std::uint32_t o, const ObjectTrace& ot, double g_score, Span g_query,
                        GradientSet& grads, Vec& g_obj, Vec& scratch);

}  // namespace herc::detail

namespace herc::detail {

// -log softmax(scores)[0], stable.
inline double softmax_xent(std::span<const double> scores) {
  double top = scores[0];
  for (double v : scores) top = std::max(top, v);
  double sum = 0.0;
  for (double v : scores) sum += std::exp(v - top);
  return top + std::log(sum) - scores[0];
}

}  // namespace herc::detail
