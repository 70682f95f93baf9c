#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>

#include "herc/data.hpp"
#include "herc/params.hpp"

namespace herc {

// Learned curvature per forward relation (rows) and timestamp (columns).
// Time-unaware models yield a single column.
struct CurvatureMatrix {
  Matrix values;
  bool has_time_axis = false;
};

// Entry (p, t) = softplus(mu_p * tau_t), or softplus(mu_p) without a time
// axis. Inverse relations are left out. The dot-product variant has no
// per-(p, t) curvature and is rejected.
CurvatureMatrix curvature_matrix(const ModelParams& params, const CurvatureSpec& spec);

struct CurvatureDelta {
  Matrix delta;  // |A - B|, a single column broadcast against a matrix
  double threshold = 0.1;
  double fraction_below = 0.0;  // share of entries < threshold

  double fraction_below_threshold(double t) const;
};

// Throws std::invalid_argument when the row counts differ or both sides
// carry time axes of different lengths.
CurvatureDelta curvature_delta(const CurvatureMatrix& a, const CurvatureMatrix& b,
                               double threshold = 0.1);

// "relation,timestamp,value" rows (timestamp empty without a time axis).
void write_curvature_csv(const Matrix& m, bool has_time_axis, const Vocabulary* vocab,
                         std::ostream& out);

// Writes "entity,x,y" for a 2-D model, with (x, y) = exp0(e, c(p, t))
// projected into the ball. Returns the number of rows.
std::size_t export_embeddings_2d(const ModelParams& params, const CurvatureSpec& spec,
                                 const Vocabulary& vocab, std::uint32_t p, std::uint32_t t,
                                 const std::filesystem::path& out_path);

}  // namespace herc
