#include "herc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <exception>
#include <limits>
#include <map>
#include <string>
#include <thread>

#include "herc/model.hpp"

namespace herc {

RankReport RankReport::from_ranks(std::vector<std::uint32_t> ranks) {
  RankReport r;
  r.count = ranks.size();
  if (r.count > 0) {
    double rr = 0.0;
    std::size_t h1 = 0, h3 = 0, h10 = 0;
    for (auto k : ranks) {
      rr += 1.0 / static_cast<double>(k);
      h1 += k <= 1;
      h3 += k <= 3;
      h10 += k <= 10;
    }
    const auto n = static_cast<double>(r.count);
    r.mrr = rr / n;
    r.hits1 = static_cast<double>(h1) / n;
    r.hits3 = static_cast<double>(h3) / n;
    r.hits10 = static_cast<double>(h10) / n;
  }
  r.ranks = std::move(ranks);
  return r;
}

nlohmann::json RankReport::to_json() const {
  return {{"mrr", mrr}, {"h1", hits1}, {"h3", hits3}, {"h10", hits10}, {"queries", count}};
}

std::uint32_t rank_from_scores(std::span<const double> scores, std::uint32_t gold,
                               std::span<const std::uint32_t> filtered) {
  // `filtered` is sorted; walk it alongside the candidates.
  const double target = scores[gold];
  std::uint32_t better = 0;
  std::size_t f = 0;
  for (std::uint32_t o = 0; o < scores.size(); ++o) {
    while (f < filtered.size() && filtered[f] < o) ++f;
    const bool masked = o != gold && f < filtered.size() && filtered[f] == o;
    const double value = masked ? -std::numeric_limits<double>::infinity() : scores[o];
    if (value > target) ++better;
  }
  return better + 1;
}

namespace {

std::uint32_t rank_query(const ModelParams& params, const CurvatureSpec& spec, const Quadruple& q,
                         std::uint32_t score_t, const FilterIndex& filter, std::vector<double>& scores) {
  const auto known = filter.lookup(q.s, q.p, q.t);
  if (!std::binary_search(known.begin(), known.end(), q.o)) {
    throw IntegrityError("gold object " + std::to_string(q.o) + " is not a known answer for (s=" +
                         std::to_string(q.s) + ", p=" + std::to_string(q.p) + ", t=" +
                         std::to_string(q.t) + "); dataset and filter index disagree");
  }
  score_all_objects(params, spec, q.s, q.p, score_t, scores);
  return rank_from_scores(scores, q.o, known);
}

}  // namespace

std::uint32_t filtered_rank(const ModelParams& params, const CurvatureSpec& spec, std::uint32_t s,
                            std::uint32_t p, std::uint32_t t, std::uint32_t gold,
                            const FilterIndex& filter) {
  std::vector<double> scores(params.num_entities());
  return rank_query(params, spec, {s, p, gold, t}, t, filter, scores);
}

RankReport evaluate(const ModelParams& params, const CurvatureSpec& spec,
                    std::span<const Quadruple> queries, const FilterIndex& filter,
                    const EvalOptions& options) {
  std::vector<std::uint32_t> ranks(queries.size());
  auto run = [&](std::size_t begin, std::size_t end) {
    std::vector<double> scores(params.num_entities());
    for (std::size_t i = begin; i < end; ++i) {
      const auto& q = queries[i];
      ranks[i] = rank_query(params, spec, q, options.timestamp_override.value_or(q.t), filter, scores);
    }
  };
  const std::size_t workers =
      std::min<std::size_t>(std::max(1u, options.threads), std::max<std::size_t>(1, queries.size()));
  if (workers == 1) {
    run(0, queries.size());
  } else {
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      const std::size_t chunk = (queries.size() + workers - 1) / workers;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            const std::size_t begin = std::min(queries.size(), w * chunk);
            run(begin, std::min(queries.size(), begin + chunk));
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return RankReport::from_ranks(std::move(ranks));
}

TemporalProbeResult temporal_probe(const ModelParams& params, const CurvatureSpec& spec,
                                   std::span<const Quadruple> queries, const FilterIndex& filter,
                                   std::size_t num_timestamps, const ProbeOptions& options) {
  TemporalProbeResult out;
  EvalOptions eval{options.threads, std::nullopt};
  out.reference = evaluate(params, spec, queries, filter, eval);

  if (options.timestamps.empty()) {
    for (std::size_t t = 0; t < num_timestamps; ++t) out.timestamps.push_back(static_cast<std::uint32_t>(t));
  } else {
    out.timestamps = options.timestamps;
  }
  for (auto t : out.timestamps) {
    if (t >= num_timestamps) throw std::out_of_range("probe timestamp " + std::to_string(t) + " out of range");
  }

  // Bit pattern of everything the scores read from timestamp t.
  auto signature = [&](std::uint32_t t) {
    std::vector<std::uint64_t> sig;
    auto push = [&](double v) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      sig.push_back(bits);
    };
    if (spec.uses_time_curvature()) push(params.time_curv.at(t));
    if (spec.uses_time_translation()) {
      for (double v : params.time_trans.row(t)) push(v);
    }
    return sig;
  };

  std::map<std::vector<std::uint64_t>, std::size_t> seen;
  for (auto t : out.timestamps) {
    if (options.reuse_equivalent) {
      const auto sig = signature(t);
      if (auto it = seen.find(sig); it != seen.end()) {
        out.reports.push_back(out.reports[it->second]);
        continue;
      }
      seen.emplace(sig, out.reports.size());
    }
    eval.timestamp_override = t;
    out.reports.push_back(evaluate(params, spec, queries, filter, eval));
  }

  std::array<double, 4> acc{};
  for (const auto& r : out.reports) {
    const double d[4] = {r.mrr - out.reference.mrr, r.hits1 - out.reference.hits1,
                         r.hits3 - out.reference.hits3, r.hits10 - out.reference.hits10};
    for (int i = 0; i < 4; ++i) acc[i] += d[i] * d[i];
  }
  for (int i = 0; i < 4; ++i) {
    out.std_from_reference[i] =
        out.reports.empty() ? 0.0 : std::sqrt(acc[i] / static_cast<double>(out.reports.size()));
  }
  return out;
}

}  // namespace herc
