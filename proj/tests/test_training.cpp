#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "herc/model.hpp"
#include "herc/training.hpp"
#include "support/toy.hpp"

using namespace herc;

namespace {

Dataset toy_dataset(std::uint64_t seed, std::size_t facts) {
  Rng rng(seed);
  auto train = toy::random_graph(rng, 10, 3, 4, facts);
  auto valid = toy::random_graph(rng, 10, 3, 4, 6);
  auto test = toy::random_graph(rng, 10, 3, 4, 6);
  return make_dataset(train, valid, test);
}

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 8;
  c.negatives = 5;
  c.dim = 4;
  c.seed = 3;
  c.valid_every = 1;
  c.spec = {CurvatureVariant::RelationTime};
  return c;
}

}  // namespace

TEST_CASE("negative sampling") {
  Rng one(1);
  for (auto id : sample_negatives(one, Quadruple{}, 50, 1)) CHECK(id == 0);

  Rng a(7), b(7);
  CHECK(sample_negatives(a, Quadruple{}, 100, 33) == sample_negatives(b, Quadruple{}, 100, 33));

  CHECK_THROWS_AS(sample_negatives(a, Quadruple{}, 10, 0), std::invalid_argument);

  const std::vector<Quadruple> batch(3);
  const auto table = sample_negatives(a, batch, 4, 9);
  CHECK(table.rows() == 3);
  CHECK(table.ids.size() == 12);
}

TEST_CASE("negative sampling is uniform (chi-square within 4 sigma)") {
  const std::size_t entities = 7128, k = 500, quads = 100000;
  std::vector<std::uint64_t> counts(entities, 0);
  Rng rng(2024);
  for (std::size_t i = 0; i < quads; ++i) {
    for (auto id : sample_negatives(rng, Quadruple{}, k, entities)) ++counts[id];
  }
  const double expected = static_cast<double>(quads * k) / entities;
  double chi2 = 0.0;
  for (auto c : counts) chi2 += (c - expected) * (c - expected) / expected;
  const double dof = entities - 1.0;
  CHECK(std::abs(chi2 - dof) < 4.0 * std::sqrt(2.0 * dof));
}

TEST_CASE("batch loss on hand-computed cases") {
  const VocabSizes sizes{4, 1, 1};
  const CurvatureSpec spec{};
  auto p = toy::random_params(sizes, 2, spec, 1);
  // Identical embeddings and biases make every candidate score the same.
  for (double& v : p.entity_emb.values) v = 0.1;
  for (double& v : p.entity_bias) v = 0.0;
  const std::vector<Quadruple> batch{{0, 0, 1, 0}};
  NegativeSamples negs{3, {0, 2, 3}};
  CHECK(batch_loss(p, spec, batch, negs) == doctest::Approx(std::log(4.0)).epsilon(1e-14));

  // Only the bias separates the candidates: true object ahead by ln 3.
  p.entity_bias[1] = std::log(3.0);
  NegativeSamples one{1, {2}};
  CHECK(batch_loss(p, spec, batch, one) == doctest::Approx(0.28768207245178092744).epsilon(1e-14));

  p.entity_bias[1] = 800.0;
  CHECK(batch_loss(p, spec, batch, one) < 1e-300);
}

TEST_CASE("Adam closed-form steps") {
  const VocabSizes sizes{2, 1, 1};
  const CurvatureSpec spec{};
  auto p = toy::random_params(sizes, 2, spec, 1);
  const auto before = p;
  auto state = AdamState::zeros_like(p);
  auto g = p.zeros_like();
  adam_step(p, g, state, 1e-3);
  CHECK(p == before);
  CHECK(state.step == 1);

  g.entity_bias[0] = 1.0;
  state = AdamState::zeros_like(p);
  adam_step(p, g, state, 1e-3);
  CHECK(p.entity_bias[0] - before.entity_bias[0] == doctest::Approx(-0.001 / (1.0 + 1e-8)).epsilon(1e-12));
  CHECK(state.first_moment.entity_bias[0] == doctest::Approx(0.1));
  CHECK(state.second_moment.entity_bias[0] == doctest::Approx(0.001));
  g.entity_bias[0] = 0.0;
  adam_step(p, g, state, 1e-3);
  CHECK(state.first_moment.entity_bias[0] == doctest::Approx(0.09));

  const auto snapshot = p;
  g.rel_curv[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(adam_step(p, g, state, 1e-3), NumericalError);
  CHECK(p == snapshot);
}

TEST_CASE("config validation") {
  auto c = small_config();
  CHECK_NOTHROW(c.validate());
  c.dim = 5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.negatives = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.learning_rate = -1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("sequential training is bit-reproducible") {
  const auto data = toy_dataset(5, 40);
  const auto config = small_config();
  const auto a = train(config, data);
  const auto b = train(config, data);
  CHECK(a.last == b.last);
  CHECK(a.best == b.best);
  REQUIRE(a.log.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a.log[i].loss == b.log[i].loss);

  auto other = config;
  other.seed = 4;
  CHECK_FALSE(train(other, data).last == a.last);
}

TEST_CASE("model selection") {
  const auto data = toy_dataset(6, 40);
  auto config = small_config();

  SUBCASE("no validation rounds keeps the final parameters") {
    config.valid_every = 0;
    const auto r = train(config, data);
    CHECK(r.best == r.last);
    CHECK_FALSE(r.best_mrr.has_value());
    for (const auto& row : r.log) CHECK_FALSE(row.valid.has_value());
  }
  SUBCASE("the best checkpoint is the one with the highest validation MRR") {
    config.epochs = 6;
    std::vector<ModelParams> snapshots;
    const auto r = train(config, data, {[&](const EpochLog&, const ModelParams& cur, bool) { snapshots.push_back(cur); }});
    REQUIRE(r.best_mrr.has_value());
    double top = -1.0;
    std::size_t top_epoch = 0;
    for (const auto& row : r.log) {
      if (row.valid->mrr > top) {
        top = row.valid->mrr;
        top_epoch = row.epoch;
      }
    }
    CHECK(r.best_epoch == top_epoch);
    CHECK(*r.best_mrr == top);
    CHECK(r.best == snapshots[top_epoch - 1]);
    CHECK(r.last == snapshots.back());
  }
}

TEST_CASE("loss falls by half on a memorizable 20-fact graph") {
  Rng rng(9);
  const auto train_raw = toy::random_graph(rng, 10, 3, 4, 20);
  const auto data = make_dataset(train_raw, {}, {});
  TrainConfig c;
  c.epochs = 200;
  c.batch_size = 256;
  c.negatives = 10;
  c.dim = 4;
  c.seed = 1;
  c.valid_every = 0;
  c.learning_rate = 1e-2;
  c.spec = {CurvatureVariant::RelationTime};
  const auto r = train(c, data);
  CAPTURE(r.log.front().loss);
  CAPTURE(r.log.back().loss);
  CHECK(r.log.back().loss <= 0.5 * r.log.front().loss);
}

TEST_CASE("epoch log serializes metrics only when validated") {
  EpochLog row;
  row.epoch = 2;
  row.loss = 1.5;
  CHECK_FALSE(row.to_json().contains("mrr"));
  row.valid = RankReport::from_ranks({1, 2});
  CHECK(row.to_json()["mrr"] == doctest::Approx(0.75));
}
