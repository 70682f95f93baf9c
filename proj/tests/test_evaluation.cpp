#include <algorithm>
#include <vector>

#include "doctest.h"
#include "herc/evaluation.hpp"
#include "herc/model.hpp"
#include "support/oracles.hpp"
#include "support/toy.hpp"

using namespace herc;

TEST_CASE("rank from scores counts strictly better unfiltered candidates") {
  const std::vector<double> scores{3.0, 2.0, 1.0, 0.5};
  CHECK(rank_from_scores(scores, 1, {}) == 2);
  const std::vector<std::uint32_t> filt{0, 1};
  CHECK(rank_from_scores(scores, 1, filt) == 1);
  // Ties do not count against the gold object.
  const std::vector<double> tied{1.0, 1.0, 1.0};
  CHECK(rank_from_scores(tied, 2, {}) == 1);
}

TEST_CASE("aggregate metrics") {
  const auto r = RankReport::from_ranks({1, 2, 4});
  CHECK(r.mrr == doctest::Approx(7.0 / 12.0).epsilon(1e-15));
  CHECK(r.hits1 == doctest::Approx(1.0 / 3.0));
  CHECK(r.hits3 == doctest::Approx(2.0 / 3.0));
  CHECK(r.hits10 == 1.0);
  CHECK(r.count == 3);
  const auto j = r.to_json();
  CHECK(j["queries"] == 3);
  CHECK(RankReport::from_ranks({}).mrr == 0.0);
}

TEST_CASE("evaluate agrees rank for rank with a brute-force oracle") {
  for (std::uint64_t g = 0; g < 10; ++g) {
    Rng rng(100 + g);
    const std::size_t e = 4 + rng.below(9);
    const auto ds = make_dataset(toy::random_graph(rng, e, 3, 3, 30), toy::random_graph(rng, e, 3, 3, 8),
                                 toy::random_graph(rng, e, 3, 3, 8));
    const auto spec = toy::all_specs()[g % 3];
    const auto params = toy::random_params(ds.sizes(), 4, spec, g);
    const auto report = evaluate(params, spec, ds.test_aug, ds.filter);
    REQUIRE(report.ranks.size() == ds.test_aug.size());
    for (std::size_t i = 0; i < ds.test_aug.size(); ++i) {
      const auto& q = ds.test_aug[i];
      std::vector<double> scores;
      for (std::uint32_t o = 0; o < ds.sizes().entities; ++o) scores.push_back(score(params, spec, q.s, q.p, o, q.t));
      const auto known = ds.filter.lookup(q.s, q.p, q.t);
      CHECK(report.ranks[i] == oracle::brute_force_rank(scores, q.o, {known.begin(), known.end()}));
    }
  }
}

TEST_CASE("evaluation is independent of query order and thread count") {
  Rng rng(3);
  const auto ds = make_dataset(toy::random_graph(rng, 10, 3, 4, 40), {}, toy::random_graph(rng, 10, 3, 4, 30));
  const CurvatureSpec spec{CurvatureVariant::RelationTime};
  const auto params = toy::random_params(ds.sizes(), 4, spec, 3);
  const auto base = evaluate(params, spec, ds.test_aug, ds.filter);
  auto shuffled = ds.test_aug;
  std::vector<std::size_t> idx(shuffled.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  rng.shuffle(idx.begin(), idx.end());
  for (std::size_t i = 0; i < idx.size(); ++i) shuffled[i] = ds.test_aug[idx[i]];
  const auto perm = evaluate(params, spec, shuffled, ds.filter);
  for (std::size_t i = 0; i < idx.size(); ++i) CHECK(perm.ranks[i] == base.ranks[idx[i]]);
  auto sorted_a = base.ranks, sorted_b = perm.ranks;
  std::sort(sorted_a.begin(), sorted_a.end());
  std::sort(sorted_b.begin(), sorted_b.end());
  CHECK(sorted_a == sorted_b);

  const auto threaded = evaluate(params, spec, ds.test_aug, ds.filter, {4, std::nullopt});
  CHECK(threaded.ranks == base.ranks);
}

TEST_CASE("a gold object missing from the filter is an integrity error") {
  Rng rng(4);
  const auto ds = make_dataset(toy::random_graph(rng, 6, 2, 2, 12), {}, {});
  const CurvatureSpec spec{};
  const auto params = toy::random_params(ds.sizes(), 2, spec, 4);
  const FilterIndex empty;
  CHECK_THROWS_AS(filtered_rank(params, spec, 0, 0, 0, 1, empty), IntegrityError);
  CHECK_THROWS_AS(evaluate(params, spec, ds.train_aug, empty), IntegrityError);
}

TEST_CASE("temporal probe on AttH gives identical reports at every timestamp") {
  Rng rng(5);
  const auto ds = make_dataset(toy::random_graph(rng, 9, 3, 6, 50), {}, toy::random_graph(rng, 9, 3, 6, 20));
  const CurvatureSpec spec{CurvatureVariant::RelationOnly};
  const auto params = toy::random_params(ds.sizes(), 4, spec, 5);
  const auto probe = temporal_probe(params, spec, ds.test_aug, ds.filter, ds.sizes().timestamps);
  REQUIRE(probe.reports.size() == ds.sizes().timestamps);
  for (const auto& r : probe.reports) {
    CHECK(r.ranks == probe.reference.ranks);
    CHECK(r.mrr == probe.reference.mrr);
  }
  for (double s : probe.std_from_reference) CHECK(s == 0.0);
}

TEST_CASE("temporal probe scores with the replacement timestamp but filters with the original") {
  Rng rng(6);
  const auto ds = make_dataset(toy::random_graph(rng, 9, 3, 4, 50), {}, toy::random_graph(rng, 9, 3, 4, 20));
  const CurvatureSpec spec{CurvatureVariant::RelationTime};
  const auto params = toy::random_params(ds.sizes(), 4, spec, 6);
  const auto probe = temporal_probe(params, spec, ds.test_aug, ds.filter, 4, {1, {2}, false});
  REQUIRE(probe.reports.size() == 1);
  for (std::size_t i = 0; i < ds.test_aug.size(); ++i) {
    const auto& q = ds.test_aug[i];
    std::vector<double> scores(ds.sizes().entities);
    score_all_objects(params, spec, q.s, q.p, 2, scores);
    CHECK(probe.reports[0].ranks[i] == rank_from_scores(scores, q.o, ds.filter.lookup(q.s, q.p, q.t)));
  }
  CHECK_THROWS_AS(temporal_probe(params, spec, ds.test_aug, ds.filter, 4, {1, {4}, false}), std::out_of_range);
}

TEST_CASE("reusing equivalent timestamps does not change the probe") {
  Rng rng(7);
  const auto ds = make_dataset(toy::random_graph(rng, 8, 2, 5, 40), {}, toy::random_graph(rng, 8, 2, 5, 15));
  const CurvatureSpec spec{CurvatureVariant::RelationTime};
  auto params = toy::random_params(ds.sizes(), 4, spec, 7);
  params.time_curv[3] = params.time_curv[1];
  const auto plain = temporal_probe(params, spec, ds.test_aug, ds.filter, 5, {1, {}, false});
  const auto reused = temporal_probe(params, spec, ds.test_aug, ds.filter, 5, {1, {}, true});
  REQUIRE(plain.reports.size() == reused.reports.size());
  for (std::size_t i = 0; i < plain.reports.size(); ++i) CHECK(plain.reports[i].ranks == reused.reports[i].ranks);
  CHECK(plain.std_from_reference == reused.std_from_reference);
}
