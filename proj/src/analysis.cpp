#include "herc/analysis.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "herc/geometry.hpp"
#include "herc/model.hpp"

namespace herc {

namespace {

std::string csv_quote(const std::string& field) {
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

}  // namespace

CurvatureMatrix curvature_matrix(const ModelParams& params, const CurvatureSpec& spec) {
  if (spec.curvature_depends_on_object()) {
    throw std::invalid_argument(
        "curvature_matrix: the dot-product variant's curvature depends on the entity pair");
  }
  const std::size_t rels = params.num_relations() / 2;
  CurvatureMatrix out;
  out.has_time_axis = spec.uses_time_curvature();
  const std::size_t cols = out.has_time_axis ? params.time_curv.size() : 1;
  out.values = Matrix(rels, cols);
  for (std::size_t p = 0; p < rels; ++p) {
    for (std::size_t t = 0; t < cols; ++t) {
      const double z = out.has_time_axis ? params.rel_curv[p] * params.time_curv[t] : params.rel_curv[p];
      out.values.row(p)[t] = std::max(geometry::softplus(z), std::numeric_limits<double>::min());
    }
  }
  return out;
}

double CurvatureDelta::fraction_below_threshold(double t) const {
  if (delta.values.empty()) return 1.0;
  std::size_t below = 0;
  for (double v : delta.values) below += v < t;
  return static_cast<double>(below) / static_cast<double>(delta.values.size());
}

CurvatureDelta curvature_delta(const CurvatureMatrix& a, const CurvatureMatrix& b, double threshold) {
  const Matrix& ma = a.values;
  const Matrix& mb = b.values;
  if (ma.rows != mb.rows) {
    throw std::invalid_argument("curvature_delta: relation counts differ (" + std::to_string(ma.rows) +
                                " vs " + std::to_string(mb.rows) + ")");
  }
  if (ma.cols != mb.cols && ma.cols != 1 && mb.cols != 1) {
    throw std::invalid_argument("curvature_delta: timestamp counts differ (" + std::to_string(ma.cols) +
                                " vs " + std::to_string(mb.cols) + ")");
  }
  CurvatureDelta out;
  out.threshold = threshold;
  const std::size_t cols = std::max(ma.cols, mb.cols);
  out.delta = Matrix(ma.rows, cols);
  for (std::size_t p = 0; p < ma.rows; ++p) {
    for (std::size_t t = 0; t < cols; ++t) {
      const double va = ma.row(p)[ma.cols == 1 ? 0 : t];
      const double vb = mb.row(p)[mb.cols == 1 ? 0 : t];
      out.delta.row(p)[t] = std::abs(va - vb);
    }
  }
  out.fraction_below = out.fraction_below_threshold(threshold);
  return out;
}

void write_curvature_csv(const Matrix& m, bool has_time_axis, const Vocabulary* vocab, std::ostream& out) {
  out << "relation,timestamp,value\n" << std::setprecision(17);
  for (std::size_t p = 0; p < m.rows; ++p) {
    for (std::size_t t = 0; t < m.cols; ++t) {
      if (vocab) out << csv_quote(vocab->relation_name(static_cast<std::uint32_t>(p)));
      else out << p;
      out << ',';
      if (has_time_axis) {
        if (vocab) out << csv_quote(vocab->timestamps.name(static_cast<std::uint32_t>(t)));
        else out << t;
      }
      out << ',' << m.row(p)[t] << '\n';
    }
  }
}

std::size_t export_embeddings_2d(const ModelParams& params, const CurvatureSpec& spec,
                                 const Vocabulary& vocab, std::uint32_t p, std::uint32_t t,
                                 const std::filesystem::path& out_path) {
  if (params.dim != 2) {
    throw std::invalid_argument("export-2d needs a 2-dimensional model (this one has dim " +
                                std::to_string(params.dim) + "); train one with --dim 2");
  }
  if (spec.curvature_depends_on_object()) {
    throw std::invalid_argument("export-2d: the dot-product variant has no single curvature per (p, t)");
  }
  if (vocab.entities.size() != params.num_entities()) {
    throw std::invalid_argument("export-2d: vocabulary does not match the model");
  }
  // Any entity id works here: the curvature ignores s and o for these variants.
  const double c = curvature(spec, params, p, t, 0, 0);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path.string());
  out << "entity,x,y\n" << std::setprecision(17);
  for (std::size_t e = 0; e < params.num_entities(); ++e) {
    const auto point = geometry::project_to_ball(geometry::exp0(params.entity_emb.row(e), c), c);
    out << csv_quote(vocab.entities.name(static_cast<std::uint32_t>(e))) << ',' << point[0] << ',' << point[1] << '\n';
  }
  return params.num_entities();
}

}  // namespace herc
