#include "herc/model.hpp"

#include <stdexcept>
#include <string>

#include "model_internal.hpp"

namespace herc {

namespace detail {

namespace {

void zero(Vec& v) { std::fill(v.begin(), v.end(), 0.0); }

}  // namespace

CurvatureTrace curvature_fwd(const CurvatureSpec& spec, const ModelParams& params, std::uint32_t p,
                             std::uint32_t t, std::uint32_t s, std::uint32_t o) {
  CurvatureTrace tr;
  const double mu = params.rel_curv[p];
  if (!spec.uses_time_curvature()) {
    tr.z = mu;
  } else {
    if (params.time_curv.empty()) {
      throw std::invalid_argument("curvature variant " + std::string(to_string(spec.variant)) +
                                  " needs per-timestamp curvature parameters");
    }
    tr.tau = params.time_curv[t];
    if (spec.curvature_depends_on_object()) {
      tr.dot = dot(params.entity_emb.row(s), params.entity_emb.row(o));
      tr.z = mu * tr.tau * tr.dot;
    } else {
      tr.z = mu * tr.tau;
    }
  }
  tr.c = safe_softplus(tr.z);
  return tr;
}

void curvature_vjp(const CurvatureSpec& spec, const ModelParams& params, const CurvatureTrace& tr,
                   std::uint32_t p, std::uint32_t t, std::uint32_t s, std::uint32_t o, double gc,
                   GradientSet& grads) {
  const double gz = gc * geometry::sigmoid(tr.z);
  const double mu = params.rel_curv[p];
  if (!spec.uses_time_curvature()) {
    grads.rel_curv[p] += gz;
    return;
  }
  if (!spec.curvature_depends_on_object()) {
    grads.rel_curv[p] += gz * tr.tau;
    grads.time_curv[t] += gz * mu;
    return;
  }
  grads.rel_curv[p] += gz * tr.tau * tr.dot;
  grads.time_curv[t] += gz * mu * tr.dot;
  const double g_dot = gz * mu * tr.tau;
  auto es = params.entity_emb.row(s);
  auto eo = params.entity_emb.row(o);
  auto gs = grads.entity_emb.row(s);
  for (std::size_t i = 0; i < es.size(); ++i) gs[i] += g_dot * eo[i];
  auto go = grads.entity_emb.row(o);
  for (std::size_t i = 0; i < eo.size(); ++i) go[i] += g_dot * es[i];
}

void QueryTrace::resize(std::size_t dim) {
  n = dim;
  for (Vec* v : {&subj_raw, &subj, &q_rot, &q_ref, &u_rot, &u_ref, &att_tan, &att_raw, &att,
                 &rel_raw, &rel, &sum1_raw, &q1, &tr_raw, &tr, &sum2_raw, &q2}) {
    v->assign(dim, 0.0);
  }
  rot_angles.assign(dim / 2, 0.0);
  ref_angles.assign(dim / 2, 0.0);
}

void query_fwd(const ModelParams& params, bool translate, std::uint32_t s, std::uint32_t p,
               std::uint32_t t, double c, QueryTrace& tr) {
  if (tr.n != params.dim) tr.resize(params.dim);
  tr.s = s;
  tr.p = p;
  tr.t = t;
  tr.c = c;
  tr.translated = translate;

  to_ball_fwd(params.entity_emb.row(s), c, tr.subj_raw, tr.subj);
  block_angles_fwd(params.rel_rot.row(p), tr.rot_angles);
  block_angles_fwd(params.rel_ref.row(p), tr.ref_angles);
  rotate_fwd(tr.subj, tr.rot_angles, tr.q_rot);
  reflect_fwd(tr.subj, tr.ref_angles, tr.q_ref);
  log0_fwd(tr.q_rot, c, tr.u_rot);
  log0_fwd(tr.q_ref, c, tr.u_ref);

  const auto ctx = params.rel_ctx.row(p);
  const double l_rot = dot(ctx, tr.u_rot);
  const double l_ref = dot(ctx, tr.u_ref);
  const double top = std::max(l_rot, l_ref);
  const double e_rot = std::exp(l_rot - top);
  const double e_ref = std::exp(l_ref - top);
  tr.alpha_rot = e_rot / (e_rot + e_ref);
  tr.alpha_ref = e_ref / (e_rot + e_ref);
  for (std::size_t i = 0; i < tr.n; ++i) {
    tr.att_tan[i] = tr.alpha_rot * tr.u_rot[i] + tr.alpha_ref * tr.u_ref[i];
  }
  to_ball_fwd(tr.att_tan, c, tr.att_raw, tr.att);
  to_ball_fwd(params.rel_emb.row(p), c, tr.rel_raw, tr.rel);
  mobius_fwd(tr.att, tr.rel, c, tr.sum1_raw);
  project_fwd(tr.sum1_raw, c, tr.q1);

  if (translate) {
    to_ball_fwd(params.time_trans.row(t), c, tr.tr_raw, tr.tr);
    mobius_fwd(tr.q1, tr.tr, c, tr.sum2_raw);
    project_fwd(tr.sum2_raw, c, tr.q2);
  }
}

QueryGradScratch::QueryGradScratch(std::size_t n) {
  for (Vec* v : {&g_q1, &g_att, &g_rel, &g_att_tan, &g_u_rot, &g_u_ref, &g_q_rot, &g_q_ref,
                 &g_subj, &g_tr, &scratch}) {
    v->assign(n, 0.0);
  }
  g_angles.assign(n / 2, 0.0);
}

double query_vjp(const ModelParams& params, const QueryTrace& tr, ConstSpan g_query,
                 GradientSet& grads, QueryGradScratch& ws) {
  if (ws.g_q1.size() != tr.n) ws = QueryGradScratch(tr.n);
  const double c = tr.c;
  double gc = 0.0;

  zero(ws.g_q1);
  if (tr.translated) {
    Vec& g_sum2 = ws.scratch;
    zero(g_sum2);
    project_vjp(tr.sum2_raw, c, g_query, g_sum2, gc);
    zero(ws.g_tr);
    mobius_vjp(tr.q1, tr.tr, c, g_sum2, ws.g_q1, ws.g_tr, gc);
    to_ball_vjp(params.time_trans.row(tr.t), tr.tr_raw, c, ws.g_tr, ws.scratch,
                grads.time_trans.row(tr.t), gc);
  } else {
    std::copy(g_query.begin(), g_query.end(), ws.g_q1.begin());
  }

  Vec& g_sum1 = ws.scratch;
  zero(g_sum1);
  project_vjp(tr.sum1_raw, c, ws.g_q1, g_sum1, gc);
  zero(ws.g_att);
  zero(ws.g_rel);
  mobius_vjp(tr.att, tr.rel, c, g_sum1, ws.g_att, ws.g_rel, gc);
  to_ball_vjp(params.rel_emb.row(tr.p), tr.rel_raw, c, ws.g_rel, ws.scratch,
              grads.rel_emb.row(tr.p), gc);
  zero(ws.g_att_tan);
  to_ball_vjp(tr.att_tan, tr.att_raw, c, ws.g_att, ws.scratch, ws.g_att_tan, gc);

  // Two-way softmax over the tangent-space logits.
  const double g_alpha_rot = dot(ws.g_att_tan, tr.u_rot);
  const double g_alpha_ref = dot(ws.g_att_tan, tr.u_ref);
  const double mean = tr.alpha_rot * g_alpha_rot + tr.alpha_ref * g_alpha_ref;
  const double g_l_rot = tr.alpha_rot * (g_alpha_rot - mean);
  const double g_l_ref = tr.alpha_ref * (g_alpha_ref - mean);
  const auto ctx = params.rel_ctx.row(tr.p);
  auto g_ctx = grads.rel_ctx.row(tr.p);
  for (std::size_t i = 0; i < tr.n; ++i) {
    ws.g_u_rot[i] = tr.alpha_rot * ws.g_att_tan[i] + g_l_rot * ctx[i];
    ws.g_u_ref[i] = tr.alpha_ref * ws.g_att_tan[i] + g_l_ref * ctx[i];
    g_ctx[i] += g_l_rot * tr.u_rot[i] + g_l_ref * tr.u_ref[i];
  }

  zero(ws.g_q_rot);
  zero(ws.g_q_ref);
  log0_vjp(tr.q_rot, c, ws.g_u_rot, ws.g_q_rot, gc);
  log0_vjp(tr.q_ref, c, ws.g_u_ref, ws.g_q_ref, gc);

  zero(ws.g_subj);
  zero(ws.g_angles);
  rotate_vjp(tr.rot_angles, tr.q_rot, ws.g_q_rot, ws.g_subj, ws.g_angles);
  block_angles_vjp(params.rel_rot.row(tr.p), ws.g_angles, grads.rel_rot.row(tr.p));
  zero(ws.g_angles);
  reflect_vjp(tr.ref_angles, tr.q_ref, ws.g_q_ref, ws.g_subj, ws.g_angles);
  block_angles_vjp(params.rel_ref.row(tr.p), ws.g_angles, grads.rel_ref.row(tr.p));

  to_ball_vjp(params.entity_emb.row(tr.s), tr.subj_raw, c, ws.g_subj, ws.scratch,
              grads.entity_emb.row(tr.s), gc);
  return gc;
}

double object_score_fwd(const ModelParams& params, ConstSpan query, double c, std::uint32_t s,
                        std::uint32_t o, ObjectTrace& ot) {
  if (ot.obj.size() != params.dim) ot = ObjectTrace(params.dim);
  to_ball_fwd(params.entity_emb.row(o), c, ot.obj_raw, ot.obj);
  const double sq = sqdist_fwd(query, ot.obj, c, ot.w);
  return -sq + params.entity_bias[s] + params.entity_bias[o];
}

double object_score_vjp(const ModelParams& params, ConstSpan query, double c, std::uint32_t s,
                        std::uint32_t o, const ObjectTrace& ot, double g_score, Span g_query,
                        GradientSet& grads, Vec& g_obj, Vec& scratch) {
  double gc = 0.0;
  g_obj.assign(params.dim, 0.0);
  scratch.resize(params.dim);
  sqdist_vjp(query, ot.obj, c, ot.w, -g_score, g_query, g_obj, gc, scratch);
  to_ball_vjp(params.entity_emb.row(o), ot.obj_raw, c, g_obj, scratch, grads.entity_emb.row(o), gc);
  grads.entity_bias[s] += g_score;
  grads.entity_bias[o] += g_score;
  return gc;
}

}  // namespace detail

namespace {

void check_ids(const ModelParams& params, std::uint32_t s, std::uint32_t p, std::uint32_t t,
               const CurvatureSpec& spec) {
  if (s >= params.num_entities()) throw std::out_of_range("entity id " + std::to_string(s) + " out of range");
  if (p >= params.num_relations()) throw std::out_of_range("relation id " + std::to_string(p) + " out of range");
  if (!spec.uses_time_curvature()) return;
  if (params.time_curv.empty()) {
    throw std::invalid_argument("curvature variant " + std::string(to_string(spec.variant)) +
                                " needs per-timestamp curvature parameters");
  }
  if (spec.uses_time_translation() &&
      (params.time_trans.rows != params.time_curv.size() || params.time_trans.cols != params.dim)) {
    throw std::invalid_argument("time translation variant needs a |T| x n translation table");
  }
  if (t >= params.time_curv.size()) {
    throw std::out_of_range("timestamp id " + std::to_string(t) + " out of range");
  }
}

void check_entity(const ModelParams& params, std::uint32_t o) {
  if (o >= params.num_entities()) throw std::out_of_range("entity id " + std::to_string(o) + " out of range");
}

std::vector<double> angles_of(const Matrix& m, std::uint32_t p) {
  if (p >= m.rows) throw std::out_of_range("relation id " + std::to_string(p) + " out of range");
  std::vector<double> out(m.cols / 2);
  detail::block_angles_fwd(m.row(p), out);
  return out;
}

}  // namespace

double curvature(const CurvatureSpec& spec, const ModelParams& params, std::uint32_t p,
                 std::uint32_t t, std::uint32_t s, std::uint32_t o) {
  check_ids(params, s, p, t, spec);
  check_entity(params, o);
  return detail::curvature_fwd(spec, params, p, t, s, o).c;
}

std::vector<double> rotation_angles(const ModelParams& params, std::uint32_t p) {
  return angles_of(params.rel_rot, p);
}

std::vector<double> reflection_angles(const ModelParams& params, std::uint32_t p) {
  return angles_of(params.rel_ref, p);
}

QueryEmbedding query_embedding(const ModelParams& params, const CurvatureSpec& spec,
                               std::uint32_t s, std::uint32_t p, std::uint32_t t,
                               std::optional<std::uint32_t> object) {
  check_ids(params, s, p, t, spec);
  if (spec.curvature_depends_on_object() && !object) {
    throw std::invalid_argument("the dot-product curvature variant needs the object entity");
  }
  const std::uint32_t o = object.value_or(s);
  check_entity(params, o);
  const double c = detail::curvature_fwd(spec, params, p, t, s, o).c;
  detail::QueryTrace tr(params.dim);
  detail::query_fwd(params, spec.uses_time_translation(), s, p, t, c, tr);
  return {tr.query(), c, tr.alpha_rot, tr.alpha_ref};
}

std::vector<double> score_candidates(const ModelParams& params, const CurvatureSpec& spec,
                                     std::uint32_t s, std::uint32_t p, std::uint32_t t,
                                     std::span<const std::uint32_t> candidates) {
  if (candidates.empty()) throw std::invalid_argument("score_candidates: empty candidate list");
  check_ids(params, s, p, t, spec);
  for (auto o : candidates) check_entity(params, o);

  std::vector<double> out(candidates.size());
  detail::QueryTrace tr(params.dim);
  detail::ObjectTrace ot(params.dim);
  const bool translate = spec.uses_time_translation();
  if (spec.curvature_depends_on_object()) {
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      const double c = detail::curvature_fwd(spec, params, p, t, s, candidates[j]).c;
      detail::query_fwd(params, translate, s, p, t, c, tr);
      out[j] = detail::object_score_fwd(params, tr.query(), c, s, candidates[j], ot);
    }
    return out;
  }
  const double c = detail::curvature_fwd(spec, params, p, t, s, s).c;
  detail::query_fwd(params, translate, s, p, t, c, tr);
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    out[j] = detail::object_score_fwd(params, tr.query(), c, s, candidates[j], ot);
  }
  return out;
}

double score(const ModelParams& params, const CurvatureSpec& spec, std::uint32_t s,
             std::uint32_t p, std::uint32_t o, std::uint32_t t) {
  const std::uint32_t one[] = {o};
  return score_candidates(params, spec, s, p, t, one)[0];
}

void score_all_objects(const ModelParams& params, const CurvatureSpec& spec, std::uint32_t s,
                       std::uint32_t p, std::uint32_t t, std::span<double> out) {
  if (out.size() != params.num_entities()) {
    throw std::invalid_argument("score_all_objects: output must hold one score per entity");
  }
  check_ids(params, s, p, t, spec);
  detail::QueryTrace tr(params.dim);
  detail::ObjectTrace ot(params.dim);
  const bool translate = spec.uses_time_translation();
  const auto num = static_cast<std::uint32_t>(params.num_entities());
  if (spec.curvature_depends_on_object()) {
    for (std::uint32_t o = 0; o < num; ++o) {
      const double c = detail::curvature_fwd(spec, params, p, t, s, o).c;
      detail::query_fwd(params, translate, s, p, t, c, tr);
      out[o] = detail::object_score_fwd(params, tr.query(), c, s, o, ot);
    }
    return;
  }
  const double c = detail::curvature_fwd(spec, params, p, t, s, s).c;
  detail::query_fwd(params, translate, s, p, t, c, tr);
  for (std::uint32_t o = 0; o < num; ++o) {
    out[o] = detail::object_score_fwd(params, tr.query(), c, s, o, ot);
  }
}

}  // namespace herc
