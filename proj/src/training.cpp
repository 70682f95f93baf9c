#include "herc/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "herc/model.hpp"
#include "model_internal.hpp"

namespace herc {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("train config: " + what); };
  if (epochs == 0) fail("epochs must be positive");
  if (batch_size == 0) fail("batch size must be positive");
  if (negatives == 0) fail("negatives must be positive");
  if (!(learning_rate > 0.0)) fail("learning rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) fail("Adam betas must lie in (0, 1)");
  if (!(adam_eps > 0.0)) fail("Adam epsilon must be positive");
  if (dim == 0 || dim % 2 != 0) fail("dimension must be even and positive, got " + std::to_string(dim));
  if (threads == 0) fail("threads must be positive");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},       {"batch_size", batch_size},
          {"negatives", negatives}, {"learning_rate", learning_rate},
          {"beta1", beta1},         {"beta2", beta2},
          {"adam_eps", adam_eps},   {"seed", seed},
          {"valid_every", valid_every}, {"dim", dim},
          {"curvature", to_string(spec.variant)}, {"threads", threads}};
}

AdamState AdamState::zeros_like(const ModelParams& params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

std::vector<std::uint32_t> sample_negatives(Rng& rng, const Quadruple&, std::size_t k,
                                            std::size_t num_entities) {
  if (num_entities == 0) throw std::invalid_argument("sample_negatives: no entities to draw from");
  if (k == 0) throw std::invalid_argument("sample_negatives: k must be positive");
  std::vector<std::uint32_t> out(k);
  for (auto& o : out) o = static_cast<std::uint32_t>(rng.below(num_entities));
  return out;
}

NegativeSamples sample_negatives(Rng& rng, std::span<const Quadruple> batch, std::size_t k,
                                 std::size_t num_entities) {
  NegativeSamples out;
  out.k = k;
  out.ids.reserve(batch.size() * k);
  for (const auto& q : batch) {
    auto row = sample_negatives(rng, q, k, num_entities);
    out.ids.insert(out.ids.end(), row.begin(), row.end());
  }
  return out;
}

double batch_loss(const ModelParams& params, const CurvatureSpec& spec,
                  std::span<const Quadruple> batch, const NegativeSamples& negatives) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  if (negatives.rows() != batch.size()) {
    throw std::invalid_argument("batch_loss: need one negative row per batch example");
  }
  double total = 0.0;
  std::vector<std::uint32_t> candidates;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& q = batch[i];
    candidates.assign(1, q.o);
    const auto negs = negatives.row(i);
    candidates.insert(candidates.end(), negs.begin(), negs.end());
    const auto scores = score_candidates(params, spec, q.s, q.p, q.t, candidates);
    total += detail::softmax_xent(scores);
  }
  return total * (1.0 / static_cast<double>(batch.size()));
}

void adam_step(ModelParams& params, const GradientSet& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
  std::vector<std::span<const double>> g;
  grads.for_each_array([&](const char* name, std::span<const double> a) {
    for (double v : a) {
      if (!std::isfinite(v)) throw NumericalError(std::string("non-finite gradient in ") + name);
    }
    g.push_back(a);
  });
  std::vector<std::span<double>> m, v;
  state.first_moment.for_each_array([&](const char*, std::span<double> a) { m.push_back(a); });
  state.second_moment.for_each_array([&](const char*, std::span<double> a) { v.push_back(a); });

  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  std::size_t k = 0;
  params.for_each_array([&](const char* name, std::span<double> p) {
    if (g[k].size() != p.size() || m[k].size() != p.size() || v[k].size() != p.size()) {
      throw std::invalid_argument(std::string("adam_step: shape mismatch in ") + name);
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[k][i] = beta1 * m[k][i] + (1.0 - beta1) * g[k][i];
      v[k][i] = beta2 * v[k][i] + (1.0 - beta2) * g[k][i] * g[k][i];
      const double m_hat = m[k][i] / bc1;
      const double v_hat = v[k][i] / bc2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
    ++k;
  });
}

nlohmann::json EpochLog::to_json() const {
  nlohmann::json j = {{"epoch", epoch}, {"loss", loss}, {"seconds", seconds}};
  if (valid) {
    j["mrr"] = valid->mrr;
    j["h1"] = valid->hits1;
    j["h3"] = valid->hits3;
    j["h10"] = valid->hits10;
  }
  return j;
}

TrainResult train(const TrainConfig& config, const Dataset& data, const TrainHooks& hooks) {
  config.validate();
  if (data.train_aug.empty()) throw std::invalid_argument("train: empty training split");
  const auto sizes = data.sizes();
  const std::size_t num_entities = sizes.entities;

  TrainResult result;
  ModelParams params = init_params(sizes, config.dim, config.spec, config.seed);
  AdamState adam = AdamState::zeros_like(params);
  GradientSet grads = params.zeros_like();
  // Stream separate from initialization so both stay reproducible on their own.
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<std::size_t> order(data.train_aug.size());
  std::vector<Quadruple> batch;
  batch.reserve(config.batch_size);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order.begin(), order.end());

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(data.train_aug[order[i]]);
      const auto negs = sample_negatives(rng, batch, config.negatives, num_entities);
      const double loss = loss_and_grads_into(params, config.spec, batch, negs, grads, config.threads);
      adam_step(params, grads, adam, config.learning_rate, config.beta1, config.beta2, config.adam_eps);
      loss_sum += loss * static_cast<double>(batch.size());
      seen += batch.size();
    }

    EpochLog row;
    row.epoch = epoch;
    row.loss = loss_sum / static_cast<double>(seen);
    bool is_best = false;
    if (config.valid_every > 0 && epoch % config.valid_every == 0 && !data.valid_aug.empty()) {
      row.valid = evaluate(params, config.spec, data.valid_aug, data.filter, {config.threads, std::nullopt});
      if (!result.best_mrr || row.valid->mrr > *result.best_mrr) {
        result.best_mrr = row.valid->mrr;
        result.best = params;
        result.best_epoch = epoch;
        is_best = true;
      }
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (hooks.on_epoch) hooks.on_epoch(row, params, is_best);
    result.log.push_back(std::move(row));
  }

  result.last = std::move(params);
  if (!result.best_mrr) {
    result.best = result.last;
    result.best_epoch = config.epochs;
  }
  return result;
}

}  // namespace herc
