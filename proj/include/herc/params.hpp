#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace herc {

// The four curvature definitions compared in the ablation. RelationOnly is
// AttH; RelationTime is Hercules.
enum class CurvatureVariant {
  RelationOnly,
  RelationTime,
  RelationTimePlusTranslation,
  RelationTimeDotProduct,
};

struct CurvatureSpec {
  CurvatureVariant variant = CurvatureVariant::RelationOnly;

  bool uses_time_curvature() const { return variant != CurvatureVariant::RelationOnly; }
  bool uses_time_translation() const {
    return variant == CurvatureVariant::RelationTimePlusTranslation;
  }
  bool curvature_depends_on_object() const {
    return variant == CurvatureVariant::RelationTimeDotProduct;
  }

  friend bool operator==(const CurvatureSpec&, const CurvatureSpec&) = default;
};

std::string_view to_string(CurvatureVariant v);
CurvatureVariant parse_curvature_variant(std::string_view name);

// |E|, |R| (forward relations only) and |T|.
struct VocabSizes {
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t timestamps = 0;

  friend bool operator==(const VocabSizes&, const VocabSizes&) = default;
};

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  std::span<double> row(std::size_t i) { return {values.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * cols, cols};
  }
  bool empty() const { return values.empty(); }
};

// Every trainable array. Entity and relation arrays are Euclidean and are
// mapped onto the ball at use time. `time_curv` is empty for AttH and
// `time_trans` has zero rows unless the time-translation ablation is active.
struct ModelParams {
  std::size_t dim = 0;
  Matrix entity_emb;                // |E| x n
  std::vector<double> entity_bias;  // |E|, used as b_s and b_o
  Matrix rel_emb;                   // 2|R| x n
  Matrix rel_rot;                   // 2|R| x n, paired into n/2 rotation angles
  Matrix rel_ref;                   // 2|R| x n, paired into n/2 reflection angles
  Matrix rel_ctx;                   // 2|R| x n attention context
  std::vector<double> rel_curv;     // 2|R|
  std::vector<double> time_curv;    // |T|
  Matrix time_trans;                // |T| x n

  std::size_t num_entities() const { return entity_emb.rows; }
  std::size_t num_relations() const { return rel_emb.rows; }  // includes inverses
  std::size_t num_timestamps() const { return time_curv.size(); }

  // Visits (name, values) for every array in checkpoint order.
  template <typename F>
  void for_each_array(F&& f) {
    f("entity_emb", std::span<double>(entity_emb.values));
    f("entity_bias", std::span<double>(entity_bias));
    f("rel_emb", std::span<double>(rel_emb.values));
    f("rel_rot", std::span<double>(rel_rot.values));
    f("rel_ref", std::span<double>(rel_ref.values));
    f("rel_ctx", std::span<double>(rel_ctx.values));
    f("rel_curv", std::span<double>(rel_curv));
    f("time_curv", std::span<double>(time_curv));
    f("time_trans", std::span<double>(time_trans.values));
  }
  template <typename F>
  void for_each_array(F&& f) const {
    f("entity_emb", std::span<const double>(entity_emb.values));
    f("entity_bias", std::span<const double>(entity_bias));
    f("rel_emb", std::span<const double>(rel_emb.values));
    f("rel_rot", std::span<const double>(rel_rot.values));
    f("rel_ref", std::span<const double>(rel_ref.values));
    f("rel_ctx", std::span<const double>(rel_ctx.values));
    f("rel_curv", std::span<const double>(rel_curv));
    f("time_curv", std::span<const double>(time_curv));
    f("time_trans", std::span<const double>(time_trans.values));
  }

  std::size_t scalar_count() const;

  // Same shapes, all zeros.
  ModelParams zeros_like() const;
  void set_zero();

  friend bool operator==(const ModelParams&, const ModelParams&);
};

// Gradients share the parameter layout array for array.
using GradientSet = ModelParams;

// Uniform(-1e-3, 1e-3) embeddings, uniform(-pi, pi) angle pair parameters, zero biases,
// mu = 0 and tau = 1. Deterministic in `seed`.
ModelParams init_params(const VocabSizes& sizes, std::size_t dim, const CurvatureSpec& spec,
                        std::uint64_t seed);

// Trainable scalar count for the active variant:
//   AttH      (|E| + 2|R|) n + |E| + 2|R| (1 + 3n)
//   Hercules  AttH + |T|
// The time-translation ablation adds |T| n on top of Hercules.
std::uint64_t count_params(const VocabSizes& sizes, std::size_t dim, const CurvatureSpec& spec);

// Throws std::invalid_argument when the arrays disagree with the sizes or
// the spec, or hold non-finite values.
void validate_params(const ModelParams& params, const VocabSizes& sizes,
                     const CurvatureSpec& spec);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Content hashes of the three vocabularies a checkpoint was trained on.
struct VocabHashes {
  std::uint64_t entities = 0;
  std::uint64_t relations = 0;
  std::uint64_t timestamps = 0;

  friend bool operator==(const VocabHashes&, const VocabHashes&) = default;
};

struct CheckpointMeta {
  VocabHashes vocab;
  VocabSizes sizes;
  std::uint64_t seed = 0;
  std::int64_t epoch = 0;
  // Free-form training context (config echo, validation metrics, ...).
  nlohmann::json extra = nlohmann::json::object();
};

struct Checkpoint {
  ModelParams params;
  CurvatureSpec spec;
  CheckpointMeta meta;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout: "HERC", u32 version, u64 metadata length, metadata JSON, then every
// array as raw little-endian f64 in for_each_array order.
std::string save_checkpoint(const ModelParams& params, const CurvatureSpec& spec,
                            const CheckpointMeta& meta);

// Parses a checkpoint produced by save_checkpoint. When `expected_vocab` is
// given, a hash mismatch is rejected. Nothing is returned on any error.
Checkpoint load_checkpoint(std::string_view bytes,
                           const std::optional<VocabHashes>& expected_vocab = std::nullopt);

void write_checkpoint_file(const std::string& path, const ModelParams& params,
                           const CurvatureSpec& spec, const CheckpointMeta& meta);
Checkpoint read_checkpoint_file(const std::string& path,
                                const std::optional<VocabHashes>& expected_vocab = std::nullopt);

}  // namespace herc
