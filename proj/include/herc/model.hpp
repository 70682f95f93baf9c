#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "herc/params.hpp"

namespace herc {

// Manifold curvature for a fact:
//   RelationOnly                  softplus(mu_p)
//   RelationTime / +Translation   softplus(mu_p * tau_t)
//   RelationTimeDotProduct        softplus(mu_p * tau_t * <e_s, e_o>)
// Throws std::invalid_argument when a time-dependent variant finds no
// time_curv array.
double curvature(const CurvatureSpec& spec, const ModelParams& params, std::uint32_t p,
                 std::uint32_t t, std::uint32_t s, std::uint32_t o);

// Rotation/reflection angles of relation p: block i uses the angle of the
// 2-vector formed by parameter entries (2i, 2i+1).
std::vector<double> rotation_angles(const ModelParams& params, std::uint32_t p);
std::vector<double> reflection_angles(const ModelParams& params, std::uint32_t p);

struct QueryEmbedding {
  std::vector<double> point;  // Q(s, p[, t]) on the ball
  double curvature = 0.0;
  double alpha_rot = 0.0;
  double alpha_ref = 0.0;
};

// Subject transform, tangent-space attention and relation translation. The
// dot-product variant needs the object, since its curvature depends on it.
QueryEmbedding query_embedding(const ModelParams& params, const CurvatureSpec& spec,
                               std::uint32_t s, std::uint32_t p, std::uint32_t t,
                               std::optional<std::uint32_t> object = std::nullopt);

// -d_c(Q, exp0(e_o))^2 + b_s + b_o.
double score(const ModelParams& params, const CurvatureSpec& spec, std::uint32_t s,
             std::uint32_t p, std::uint32_t o, std::uint32_t t);

// Scores each candidate object; Q is shared across candidates whenever the
// curvature does not depend on the object.
std::vector<double> score_candidates(const ModelParams& params, const CurvatureSpec& spec,
                                     std::uint32_t s, std::uint32_t p, std::uint32_t t,
                                     std::span<const std::uint32_t> candidates);

// Scores every entity as object; out.size() must equal |E|.
void score_all_objects(const ModelParams& params, const CurvatureSpec& spec, std::uint32_t s,
                       std::uint32_t p, std::uint32_t t, std::span<double> out);

}  // namespace herc
