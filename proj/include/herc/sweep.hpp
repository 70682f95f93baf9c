#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "herc/data.hpp"
#include "herc/evaluation.hpp"
#include "herc/training.hpp"

namespace herc {

struct SweepRow {
  std::size_t negatives = 0;
  RankReport report;  // best-validation model on the test split
};

// Trains one model per negative-sample count, everything else (seed
// included) taken from `base`.
std::vector<SweepRow> negative_sweep(const TrainConfig& base, std::span<const std::size_t> ks,
                                     const Dataset& data);

// "k,mrr,h1,h3,h10" with a header row.
void write_sweep_csv(std::span<const SweepRow> rows, std::ostream& out);

}  // namespace herc
