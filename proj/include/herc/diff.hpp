#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "herc/data.hpp"
#include "herc/params.hpp"

namespace herc {

// k corrupted objects per batch row, stored row-major.
struct NegativeSamples {
  std::size_t k = 0;
  std::vector<std::uint32_t> ids;

  std::span<const std::uint32_t> row(std::size_t i) const { return {ids.data() + i * k, k}; }
  std::size_t rows() const { return k == 0 ? 0 : ids.size() / k; }
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LossAndGrads {
  double loss = 0.0;
  GradientSet grads;
};

// Mean over the batch of -log softmax of the true object's score among
// [true object] + its k negatives, and the exact gradient of that loss with
// respect to every parameter array. `threads` > 1 splits the batch over
// workers; threads == 1 accumulates strictly in batch order.
LossAndGrads loss_and_grads(const ModelParams& params, const CurvatureSpec& spec,
                            std::span<const Quadruple> batch, const NegativeSamples& negatives,
                            unsigned threads = 1);

// In-place form; `grads` must have the parameter shapes and is overwritten.
double loss_and_grads_into(const ModelParams& params, const CurvatureSpec& spec,
                           std::span<const Quadruple> batch, const NegativeSamples& negatives,
                           GradientSet& grads, unsigned threads = 1);

struct GradientMismatch {
  std::string entry;  // e.g. "entity_emb[3,1]"
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct FiniteDiffReport {
  bool passed = false;
  double max_rel_error = 0.0;
  std::string worst_entry;
  std::size_t checked = 0;             // entries compared against central differences
  std::size_t untouched_checked = 0;   // entries outside the batch, required to be exactly 0
  std::vector<GradientMismatch> failures;
};

// Compares `analytic` with central differences (L(x+h) - L(x-h)) / 2h on every
// entry in a row the batch touches; entries in other rows must be exactly
// zero. Relative error is |a - d| / max(|a|, |d|, 1e-6).
FiniteDiffReport compare_with_finite_differences(const ModelParams& params,
                                                 const CurvatureSpec& spec,
                                                 std::span<const Quadruple> batch,
                                                 const NegativeSamples& negatives,
                                                 const GradientSet& analytic, double h, double tol);

// Runs loss_and_grads and checks it against central differences.
FiniteDiffReport finite_diff_check(const ModelParams& params, const CurvatureSpec& spec,
                                   std::span<const Quadruple> batch,
                                   const NegativeSamples& negatives, double h, double tol);

}  // namespace herc
