#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "herc/data.hpp"
#include "herc/diff.hpp"
#include "herc/evaluation.hpp"
#include "herc/params.hpp"
#include "herc/rng.hpp"
#include "json.hpp"

namespace herc {

struct TrainConfig {
  std::size_t epochs = 500;
  std::size_t batch_size = 256;
  std::size_t negatives = 500;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  std::size_t valid_every = 20;  // 0 disables validation
  std::size_t dim = 20;
  CurvatureSpec spec;
  unsigned threads = 1;

  // Throws std::invalid_argument on non-positive sizes or an odd dimension.
  void validate() const;
  nlohmann::json to_json() const;
};

struct AdamState {
  ModelParams first_moment;
  ModelParams second_moment;
  std::int64_t step = 0;

  static AdamState zeros_like(const ModelParams& params);
};

// k independent uniform draws from [0, num_entities). The true object is not
// excluded.
std::vector<std::uint32_t> sample_negatives(Rng& rng, const Quadruple& fact, std::size_t k,
                                            std::size_t num_entities);
NegativeSamples sample_negatives(Rng& rng, std::span<const Quadruple> batch, std::size_t k,
                                 std::size_t num_entities);

// Mean over the batch of -log softmax(score of the true object) among the
// true object and its negatives.
double batch_loss(const ModelParams& params, const CurvatureSpec& spec,
                  std::span<const Quadruple> batch, const NegativeSamples& negatives);

// Bias-corrected Adam; throws NumericalError on a non-finite gradient before
// touching anything.
void adam_step(ModelParams& params, const GradientSet& grads, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double seconds = 0.0;
  std::optional<RankReport> valid;

  nlohmann::json to_json() const;
};

struct TrainResult {
  ModelParams best;
  ModelParams last;
  std::size_t best_epoch = 0;
  std::optional<double> best_mrr;
  std::vector<EpochLog> log;
};

struct TrainHooks {
  // Called after every epoch with the current parameters; `is_best` marks a
  // new best validation MRR.
  std::function<void(const EpochLog&, const ModelParams& current, bool is_best)> on_epoch;
};

// Shuffled mini-batch Adam on the augmented training split, selecting the
// parameters with the highest filtered validation MRR.
TrainResult train(const TrainConfig& config, const Dataset& data, const TrainHooks& hooks = {});

}  // namespace herc
