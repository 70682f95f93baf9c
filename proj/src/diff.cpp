#include "herc/diff.hpp"

#include <cmath>
#include <exception>
#include <set>
#include <sstream>
#include <thread>

#include "herc/training.hpp"
#include "model_internal.hpp"

namespace herc {

namespace {

struct Workspace {
  detail::QueryTrace query;
  detail::QueryGradScratch query_grad;
  std::vector<detail::ObjectTrace> objects;
  std::vector<detail::CurvatureTrace> curvatures;
  std::vector<std::uint32_t> candidates;
  std::vector<double> scores, probs, g_query, g_obj, scratch;

  explicit Workspace(std::size_t n) : query(n), query_grad(n), g_query(n), g_obj(n), scratch(n) {}
};

std::string describe(const Quadruple& q) {
  std::ostringstream os;
  os << "<s=" << q.s << ", p=" << q.p << ", o=" << q.o << ", t=" << q.t << ">";
  return os.str();
}

void fill_probs(Workspace& ws) {
  double top = ws.scores[0];
  for (double v : ws.scores) top = std::max(top, v);
  double sum = 0.0;
  ws.probs.resize(ws.scores.size());
  for (std::size_t j = 0; j < ws.scores.size(); ++j) {
    ws.probs[j] = std::exp(ws.scores[j] - top);
    sum += ws.probs[j];
  }
  for (double& pr : ws.probs) pr /= sum;
}

// Loss of one example; gradients scaled by `weight` are added to `grads`.
double example_loss_grad(const ModelParams& params, const CurvatureSpec& spec, const Quadruple& q,
                         std::span<const std::uint32_t> negs, double weight, GradientSet& grads,
                         Workspace& ws) {
  const std::size_t m = negs.size() + 1;
  ws.candidates.assign(1, q.o);
  ws.candidates.insert(ws.candidates.end(), negs.begin(), negs.end());
  ws.scores.resize(m);
  if (ws.objects.size() < m) ws.objects.resize(m, detail::ObjectTrace(params.dim));
  const bool translate = spec.uses_time_translation();

  if (!spec.curvature_depends_on_object()) {
    const auto ct = detail::curvature_fwd(spec, params, q.p, q.t, q.s, q.s);
    detail::query_fwd(params, translate, q.s, q.p, q.t, ct.c, ws.query);
    for (std::size_t j = 0; j < m; ++j) {
      ws.scores[j] = detail::object_score_fwd(params, ws.query.query(), ct.c, q.s,
                                              ws.candidates[j], ws.objects[j]);
    }
    const double loss = detail::softmax_xent(ws.scores);
    if (!std::isfinite(loss)) throw NumericalError("non-finite loss on quadruple " + describe(q));
    fill_probs(ws);
    std::fill(ws.g_query.begin(), ws.g_query.end(), 0.0);
    double gc = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double g_score = weight * (ws.probs[j] - (j == 0 ? 1.0 : 0.0));
      gc += detail::object_score_vjp(params, ws.query.query(), ct.c, q.s, ws.candidates[j],
                                     ws.objects[j], g_score, ws.g_query, grads, ws.g_obj,
                                     ws.scratch);
    }
    gc += detail::query_vjp(params, ws.query, ws.g_query, grads, ws.query_grad);
    detail::curvature_vjp(spec, params, ct, q.p, q.t, q.s, q.s, gc, grads);
    return loss;
  }

  // Dot-product curvature: every candidate lives on its own manifold, so the
  // query is rebuilt per candidate (and again in the backward sweep).
  ws.curvatures.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    ws.curvatures[j] = detail::curvature_fwd(spec, params, q.p, q.t, q.s, ws.candidates[j]);
    detail::query_fwd(params, translate, q.s, q.p, q.t, ws.curvatures[j].c, ws.query);
    ws.scores[j] = detail::object_score_fwd(params, ws.query.query(), ws.curvatures[j].c, q.s,
                                            ws.candidates[j], ws.objects[j]);
  }
  const double loss = detail::softmax_xent(ws.scores);
  if (!std::isfinite(loss)) throw NumericalError("non-finite loss on quadruple " + describe(q));
  fill_probs(ws);
  for (std::size_t j = 0; j < m; ++j) {
    const double c = ws.curvatures[j].c;
    const double g_score = weight * (ws.probs[j] - (j == 0 ? 1.0 : 0.0));
    detail::query_fwd(params, translate, q.s, q.p, q.t, c, ws.query);
    std::fill(ws.g_query.begin(), ws.g_query.end(), 0.0);
    double gc = detail::object_score_vjp(params, ws.query.query(), c, q.s, ws.candidates[j],
                                         ws.objects[j], g_score, ws.g_query, grads, ws.g_obj,
                                         ws.scratch);
    gc += detail::query_vjp(params, ws.query, ws.g_query, grads, ws.query_grad);
    detail::curvature_vjp(spec, params, ws.curvatures[j], q.p, q.t, q.s, ws.candidates[j], gc,
                          grads);
  }
  return loss;
}

double accumulate_range(const ModelParams& params, const CurvatureSpec& spec,
                        std::span<const Quadruple> batch, const NegativeSamples& negatives,
                        std::size_t begin, std::size_t end, double weight, GradientSet& grads) {
  Workspace ws(params.dim);
  double total = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    total += example_loss_grad(params, spec, batch[i], negatives.row(i), weight, grads, ws);
  }
  return total;
}

void add_into(GradientSet& dst, const GradientSet& src) {
  std::vector<std::span<const double>> from;
  src.for_each_array([&](const char*, std::span<const double> a) { from.push_back(a); });
  std::size_t k = 0;
  dst.for_each_array([&](const char*, std::span<double> a) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += from[k][i];
    ++k;
  });
}

}  // namespace

double loss_and_grads_into(const ModelParams& params, const CurvatureSpec& spec,
                           std::span<const Quadruple> batch, const NegativeSamples& negatives,
                           GradientSet& grads, unsigned threads) {
  if (batch.empty()) throw std::invalid_argument("loss_and_grads: empty batch");
  if (negatives.rows() != batch.size()) {
    throw std::invalid_argument("loss_and_grads: need one negative row per batch example");
  }
  const std::size_t ne = params.num_entities();
  for (const auto& q : batch) {
    if (q.s >= ne || q.o >= ne || q.p >= params.num_relations() ||
        (spec.uses_time_curvature() && q.t >= params.num_timestamps())) {
      throw std::out_of_range("loss_and_grads: quadruple " + describe(q) + " outside the vocabulary");
    }
  }
  for (auto id : negatives.ids) {
    if (id >= ne) throw std::out_of_range("loss_and_grads: negative id " + std::to_string(id) + " out of range");
  }
  grads.set_zero();
  const double weight = 1.0 / static_cast<double>(batch.size());
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), batch.size());
  if (workers == 1) {
    return accumulate_range(params, spec, batch, negatives, 0, batch.size(), weight, grads) * weight;
  }

  std::vector<GradientSet> partial_grads(workers, grads);
  std::vector<double> partial_loss(workers, 0.0);
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (batch.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        const std::size_t begin = std::min(batch.size(), w * chunk);
        const std::size_t end = std::min(batch.size(), begin + chunk);
        try {
          partial_loss[w] = accumulate_range(params, spec, batch, negatives, begin, end, weight,
                                             partial_grads[w]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  double total = 0.0;
  for (std::size_t w = 0; w < workers; ++w) {
    total += partial_loss[w];
    add_into(grads, partial_grads[w]);
  }
  return total * weight;
}

LossAndGrads loss_and_grads(const ModelParams& params, const CurvatureSpec& spec,
                            std::span<const Quadruple> batch, const NegativeSamples& negatives,
                            unsigned threads) {
  LossAndGrads out{0.0, params.zeros_like()};
  out.loss = loss_and_grads_into(params, spec, batch, negatives, out.grads, threads);
  return out;
}

FiniteDiffReport compare_with_finite_differences(const ModelParams& params,
                                                 const CurvatureSpec& spec,
                                                 std::span<const Quadruple> batch,
                                                 const NegativeSamples& negatives,
                                                 const GradientSet& analytic, double h, double tol) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw std::invalid_argument("finite-difference step must lie in [1e-7, 1e-3]");

  std::set<std::size_t> entities, relations, times;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    entities.insert(batch[i].s);
    entities.insert(batch[i].o);
    relations.insert(batch[i].p);
    times.insert(batch[i].t);
    for (auto o : negatives.row(i)) entities.insert(o);
  }

  struct ArrayInfo {
    const char* name;
    std::size_t cols;
    const std::set<std::size_t>* rows;
  };
  const std::size_t n = params.dim;
  const ArrayInfo infos[] = {
      {"entity_emb", n, &entities}, {"entity_bias", 1, &entities}, {"rel_emb", n, &relations},
      {"rel_rot", n, &relations},   {"rel_ref", n, &relations},    {"rel_ctx", n, &relations},
      {"rel_curv", 1, &relations},  {"time_curv", 1, &times},      {"time_trans", n, &times},
  };

  std::vector<std::span<const double>> grad_arrays;
  analytic.for_each_array([&](const char*, std::span<const double> a) { grad_arrays.push_back(a); });

  ModelParams probe = params;
  std::vector<std::span<double>> probe_arrays;
  probe.for_each_array([&](const char*, std::span<double> a) { probe_arrays.push_back(a); });

  FiniteDiffReport report;
  auto entry_name = [&](const ArrayInfo& info, std::size_t idx) {
    std::ostringstream os;
    os << info.name << '[' << idx / info.cols;
    if (info.cols > 1) os << ',' << idx % info.cols;
    os << ']';
    return os.str();
  };

  for (std::size_t a = 0; a < probe_arrays.size(); ++a) {
    const ArrayInfo& info = infos[a];
    auto values = probe_arrays[a];
    for (std::size_t idx = 0; idx < values.size(); ++idx) {
      const double g = grad_arrays[a][idx];
      const bool touched = info.rows->count(idx / info.cols) != 0;
      if (!touched) {
        ++report.untouched_checked;
        if (g != 0.0) {
          report.failures.push_back({entry_name(info, idx), g, 0.0, 1.0});
          report.max_rel_error = std::max(report.max_rel_error, 1.0);
          report.worst_entry = entry_name(info, idx);
        }
        continue;
      }
      const double saved = values[idx];
      values[idx] = saved + h;
      const double up = batch_loss(probe, spec, batch, negatives);
      values[idx] = saved - h;
      const double down = batch_loss(probe, spec, batch, negatives);
      values[idx] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double rel = std::abs(g - numeric) / std::max({std::abs(g), std::abs(numeric), 1e-6});
      ++report.checked;
      if (rel > report.max_rel_error || report.worst_entry.empty()) {
        report.max_rel_error = std::max(report.max_rel_error, rel);
        if (rel >= report.max_rel_error) report.worst_entry = entry_name(info, idx);
      }
      if (rel > tol) report.failures.push_back({entry_name(info, idx), g, numeric, rel});
    }
  }
  report.passed = report.failures.empty();
  return report;
}

FiniteDiffReport finite_diff_check(const ModelParams& params, const CurvatureSpec& spec,
                                   std::span<const Quadruple> batch,
                                   const NegativeSamples& negatives, double h, double tol) {
  const auto lg = loss_and_grads(params, spec, batch, negatives, 1);
  return compare_with_finite_differences(params, spec, batch, negatives, lg.grads, h, tol);
}

}  // namespace herc
