#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "herc/data.hpp"
#include "herc/params.hpp"
#include "json.hpp"

namespace herc {

class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filtered ranks and their aggregates.
struct RankReport {
  std::vector<std::uint32_t> ranks;
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  std::size_t count = 0;

  static RankReport from_ranks(std::vector<std::uint32_t> ranks);
  nlohmann::json to_json() const;  // aggregates only
};

// Rank of `gold` once every other object in `filtered` is pushed to -inf:
// 1 + number of remaining candidates scoring strictly higher than gold.
std::uint32_t rank_from_scores(std::span<const double> scores, std::uint32_t gold,
                               std::span<const std::uint32_t> filtered);

// Scores all entities for <s, p, ?, t> and ranks `gold` under the filter.
// Throws IntegrityError when gold is not a known answer for (s, p, t).
std::uint32_t filtered_rank(const ModelParams& params, const CurvatureSpec& spec, std::uint32_t s,
                            std::uint32_t p, std::uint32_t t, std::uint32_t gold,
                            const FilterIndex& filter);

struct EvalOptions {
  unsigned threads = 1;
  // Scores every query at this timestamp instead of its own; filtering still
  // uses the query's own timestamp.
  std::optional<std::uint32_t> timestamp_override;
};

// Object-prediction ranks over `queries`. Passing an augmented split covers
// both directions: inverse copies turn subject prediction into object
// prediction.
RankReport evaluate(const ModelParams& params, const CurvatureSpec& spec,
                    std::span<const Quadruple> queries, const FilterIndex& filter,
                    const EvalOptions& options = {});

struct TemporalProbeResult {
  RankReport reference;                    // uncorrupted timestamps
  std::vector<std::uint32_t> timestamps;   // probed timestamp ids
  std::vector<RankReport> reports;         // one per probed timestamp
  // Root-mean-square deviation of (MRR, H@1, H@3, H@10) from the reference.
  std::array<double, 4> std_from_reference{};
};

struct ProbeOptions {
  unsigned threads = 1;
  // Subset of timestamp ids to probe; all when empty.
  std::vector<std::uint32_t> timestamps;
  // Scores depend on the timestamp only through tau_t (and the time
  // translation row); when set, timestamps whose parameters are bitwise
  // identical to an already probed one reuse its report.
  bool reuse_equivalent = false;
};

// Re-evaluates `queries` with every timestamp replaced by each probed
// timestamp in turn.
TemporalProbeResult temporal_probe(const ModelParams& params, const CurvatureSpec& spec,
                                   std::span<const Quadruple> queries, const FilterIndex& filter,
                                   std::size_t num_timestamps, const ProbeOptions& options = {});

}  // namespace herc
