#include "herc/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "herc/hash.hpp"
#include "herc/rng.hpp"

namespace herc {

namespace {

constexpr double kInitScale = 1e-3;
constexpr char kMagic[4] = {'H', 'E', 'R', 'C'};

void fill_uniform(std::span<double> values, Rng& rng, double lo, double hi) {
  for (double& v : values) v = rng.uniform(lo, hi);
}

template <typename T>
void append_le(std::string& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
  }
}

template <typename T>
T read_le(std::string_view bytes, std::size_t offset) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return static_cast<T>(v);
}

void append_doubles(std::string& out, std::span<const double> values) {
  for (double v : values) append_le(out, std::bit_cast<std::uint64_t>(v));
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

// Shapes (rows, cols) of each array in for_each_array order for the given
// allocation; vectors are reported as rows x 1.
nlohmann::json shape_table(const ModelParams& p) {
  nlohmann::json shapes = nlohmann::json::array();
  auto mat = [&](const char* name, const Matrix& m) {
    shapes.push_back({{"name", name}, {"rows", m.rows}, {"cols", m.cols}});
  };
  auto vec = [&](const char* name, const std::vector<double>& v) {
    shapes.push_back({{"name", name}, {"rows", v.size()}, {"cols", 1}});
  };
  mat("entity_emb", p.entity_emb);
  vec("entity_bias", p.entity_bias);
  mat("rel_emb", p.rel_emb);
  mat("rel_rot", p.rel_rot);
  mat("rel_ref", p.rel_ref);
  mat("rel_ctx", p.rel_ctx);
  vec("rel_curv", p.rel_curv);
  vec("time_curv", p.time_curv);
  mat("time_trans", p.time_trans);
  return shapes;
}

}  // namespace

std::string_view to_string(CurvatureVariant v) {
  switch (v) {
    case CurvatureVariant::RelationOnly: return "relation";
    case CurvatureVariant::RelationTime: return "relation-time";
    case CurvatureVariant::RelationTimePlusTranslation: return "relation-time-translation";
    case CurvatureVariant::RelationTimeDotProduct: return "relation-time-dot";
  }
  return "unknown";
}

CurvatureVariant parse_curvature_variant(std::string_view name) {
  for (auto v : {CurvatureVariant::RelationOnly, CurvatureVariant::RelationTime,
                 CurvatureVariant::RelationTimePlusTranslation,
                 CurvatureVariant::RelationTimeDotProduct}) {
    if (to_string(v) == name) return v;
  }
  throw std::invalid_argument("unknown curvature variant '" + std::string(name) + "'");
}

std::size_t ModelParams::scalar_count() const {
  std::size_t total = 0;
  for_each_array([&](const char*, std::span<const double> a) { total += a.size(); });
  return total;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams out = *this;
  out.set_zero();
  return out;
}

void ModelParams::set_zero() {
  for_each_array([](const char*, std::span<double> a) { std::fill(a.begin(), a.end(), 0.0); });
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  if (a.dim != b.dim) return false;
  if (shape_table(a) != shape_table(b)) return false;
  bool same = true;
  std::vector<std::span<const double>> lhs;
  a.for_each_array([&](const char*, std::span<const double> v) { lhs.push_back(v); });
  std::size_t i = 0;
  b.for_each_array([&](const char*, std::span<const double> v) {
    // Bitwise, so that NaN payloads and signed zeros count.
    same = same && std::memcmp(lhs[i].data(), v.data(), v.size_bytes()) == 0;
    ++i;
  });
  return same;
}

ModelParams init_params(const VocabSizes& sizes, std::size_t dim, const CurvatureSpec& spec,
                        std::uint64_t seed) {
  if (dim == 0 || dim % 2 != 0) {
    throw std::invalid_argument("embedding dimension must be even and positive, got " +
                                std::to_string(dim));
  }
  if (sizes.entities == 0 || sizes.relations == 0 ||
      (spec.uses_time_curvature() && sizes.timestamps == 0)) {
    throw std::invalid_argument("vocabulary sizes must be positive");
  }
  const std::size_t rels = 2 * sizes.relations;
  Rng rng(seed);
  ModelParams p;
  p.dim = dim;
  p.entity_emb = Matrix(sizes.entities, dim);
  p.entity_bias.assign(sizes.entities, 0.0);
  p.rel_emb = Matrix(rels, dim);
  p.rel_rot = Matrix(rels, dim);
  p.rel_ref = Matrix(rels, dim);
  p.rel_ctx = Matrix(rels, dim);
  p.rel_curv.assign(rels, 0.0);
  if (spec.uses_time_curvature()) p.time_curv.assign(sizes.timestamps, 1.0);
  if (spec.uses_time_translation()) p.time_trans = Matrix(sizes.timestamps, dim);

  fill_uniform(p.entity_emb.values, rng, -kInitScale, kInitScale);
  fill_uniform(p.rel_emb.values, rng, -kInitScale, kInitScale);
  fill_uniform(p.rel_rot.values, rng, -std::numbers::pi, std::numbers::pi);
  fill_uniform(p.rel_ref.values, rng, -std::numbers::pi, std::numbers::pi);
  fill_uniform(p.rel_ctx.values, rng, -kInitScale, kInitScale);
  return p;
}

std::uint64_t count_params(const VocabSizes& sizes, std::size_t dim, const CurvatureSpec& spec) {
  const std::uint64_t e = sizes.entities;
  const std::uint64_t r2 = 2 * static_cast<std::uint64_t>(sizes.relations);
  const std::uint64_t t = sizes.timestamps;
  const std::uint64_t n = dim;
  std::uint64_t total = (e + r2) * n + e + r2 * (1 + 3 * n);
  if (spec.uses_time_curvature()) total += t;
  if (spec.uses_time_translation()) total += t * n;
  return total;
}

void validate_params(const ModelParams& p, const VocabSizes& sizes, const CurvatureSpec& spec) {
  auto fail = [](const std::string& what) { throw std::invalid_argument("parameters: " + what); };
  const std::size_t n = p.dim;
  const std::size_t rels = 2 * sizes.relations;
  if (n == 0 || n % 2 != 0) fail("dimension must be even and positive");
  auto check_mat = [&](const Matrix& m, std::size_t rows, const char* name) {
    if (m.rows != rows || m.cols != n || m.values.size() != rows * n) {
      fail(std::string(name) + " has shape " + std::to_string(m.rows) + "x" +
           std::to_string(m.cols) + ", expected " + std::to_string(rows) + "x" +
           std::to_string(n));
    }
  };
  check_mat(p.entity_emb, sizes.entities, "entity_emb");
  check_mat(p.rel_emb, rels, "rel_emb");
  check_mat(p.rel_rot, rels, "rel_rot");
  check_mat(p.rel_ref, rels, "rel_ref");
  check_mat(p.rel_ctx, rels, "rel_ctx");
  if (p.entity_bias.size() != sizes.entities) fail("entity_bias length");
  if (p.rel_curv.size() != rels) fail("rel_curv length");
  if (spec.uses_time_curvature() && p.time_curv.size() != sizes.timestamps) {
    fail("variant " + std::string(to_string(spec.variant)) + " needs time_curv of length " +
         std::to_string(sizes.timestamps));
  }
  if (!p.time_curv.empty() && p.time_curv.size() != sizes.timestamps) fail("time_curv length");
  if (spec.uses_time_translation()) {
    check_mat(p.time_trans, sizes.timestamps, "time_trans");
  } else if (!p.time_trans.empty()) {
    fail("time_trans allocated but the variant does not use it");
  }
  p.for_each_array([&](const char* name, std::span<const double> a) {
    for (double v : a) {
      if (!std::isfinite(v)) fail(std::string(name) + " holds a non-finite value");
    }
  });
}

std::string save_checkpoint(const ModelParams& params, const CurvatureSpec& spec,
                            const CheckpointMeta& meta) {
  std::string payload;
  payload.reserve(params.scalar_count() * 8);
  params.for_each_array([&](const char*, std::span<const double> a) { append_doubles(payload, a); });

  nlohmann::json header = {
      {"variant", to_string(spec.variant)},
      {"dim", params.dim},
      {"entities", meta.sizes.entities},
      {"relations", meta.sizes.relations},
      {"timestamps", meta.sizes.timestamps},
      {"vocab_hash", {{"entities", hex(meta.vocab.entities)},
                      {"relations", hex(meta.vocab.relations)},
                      {"timestamps", hex(meta.vocab.timestamps)}}},
      {"seed", meta.seed},
      {"epoch", meta.epoch},
      {"arrays", shape_table(params)},
      {"payload_bytes", payload.size()},
      {"payload_fnv1a", hex(fnv1a(payload))},
      {"extra", meta.extra},
  };
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  append_le<std::uint32_t>(out, kCheckpointVersion);
  append_le<std::uint64_t>(out, header_text.size());
  out += header_text;
  out += payload;
  return out;
}

Checkpoint load_checkpoint(std::string_view bytes, const std::optional<VocabHashes>& expected_vocab) {
  constexpr std::size_t kPrefix = 4 + 4 + 8;
  if (bytes.size() < kPrefix) throw CheckpointError("checkpoint truncated before header");
  if (bytes.substr(0, 4) != std::string_view(kMagic, 4)) {
    throw CheckpointError("not a checkpoint: bad magic");
  }
  const auto version = read_le<std::uint32_t>(bytes, 4);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = read_le<std::uint64_t>(bytes, 8);
  if (header_len > bytes.size() - kPrefix) throw CheckpointError("checkpoint truncated in header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(kPrefix, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupted checkpoint header: ") + e.what());
  }

  Checkpoint ck;
  try {
    ck.spec.variant = parse_curvature_variant(header.at("variant").get<std::string>());
    ck.meta.sizes = {header.at("entities").get<std::size_t>(),
                     header.at("relations").get<std::size_t>(),
                     header.at("timestamps").get<std::size_t>()};
    const auto& vh = header.at("vocab_hash");
    ck.meta.vocab = {std::stoull(vh.at("entities").get<std::string>(), nullptr, 16),
                     std::stoull(vh.at("relations").get<std::string>(), nullptr, 16),
                     std::stoull(vh.at("timestamps").get<std::string>(), nullptr, 16)};
    ck.meta.seed = header.at("seed").get<std::uint64_t>();
    ck.meta.epoch = header.at("epoch").get<std::int64_t>();
    ck.meta.extra = header.value("extra", nlohmann::json::object());
    ck.params.dim = header.at("dim").get<std::size_t>();
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("corrupted checkpoint header: ") + e.what());
  }

  if (expected_vocab && !(*expected_vocab == ck.meta.vocab)) {
    throw CheckpointError(
        "vocabulary hash mismatch: checkpoint was trained on a different dataset vocabulary");
  }

  // Allocate from the declared shapes, then fill.
  ModelParams& p = ck.params;
  try {
    for (const auto& entry : header.at("arrays")) {
      const auto name = entry.at("name").get<std::string>();
      const auto rows = entry.at("rows").get<std::size_t>();
      const auto cols = entry.at("cols").get<std::size_t>();
      if (rows > (std::size_t{1} << 32) || cols > (std::size_t{1} << 20)) {
        throw CheckpointError("implausible shape for " + name);
      }
      if (name == "entity_emb") p.entity_emb = Matrix(rows, cols);
      else if (name == "entity_bias") p.entity_bias.assign(rows, 0.0);
      else if (name == "rel_emb") p.rel_emb = Matrix(rows, cols);
      else if (name == "rel_rot") p.rel_rot = Matrix(rows, cols);
      else if (name == "rel_ref") p.rel_ref = Matrix(rows, cols);
      else if (name == "rel_ctx") p.rel_ctx = Matrix(rows, cols);
      else if (name == "rel_curv") p.rel_curv.assign(rows, 0.0);
      else if (name == "time_curv") p.time_curv.assign(rows, 0.0);
      else if (name == "time_trans") p.time_trans = Matrix(rows, rows == 0 ? 0 : cols);
      else throw CheckpointError("unknown array '" + name + "' in checkpoint");
    }
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("corrupted checkpoint header: ") + e.what());
  }

  const std::size_t payload_offset = kPrefix + header_len;
  const std::string_view payload = bytes.substr(payload_offset);
  if (payload.size() != p.scalar_count() * 8) {
    throw CheckpointError("checkpoint payload has " + std::to_string(payload.size()) +
                          " bytes, expected " + std::to_string(p.scalar_count() * 8) +
                          " (truncated or corrupted)");
  }
  if (header.value("payload_fnv1a", std::string()) != hex(fnv1a(payload))) {
    throw CheckpointError("checkpoint payload checksum mismatch");
  }
  std::size_t offset = 0;
  p.for_each_array([&](const char*, std::span<double> a) {
    for (double& v : a) {
      v = std::bit_cast<double>(read_le<std::uint64_t>(payload, offset));
      offset += 8;
    }
  });

  try {
    validate_params(p, ck.meta.sizes, ck.spec);
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("inconsistent checkpoint: ") + e.what());
  }
  return ck;
}

void write_checkpoint_file(const std::string& path, const ModelParams& params,
                           const CurvatureSpec& spec, const CheckpointMeta& meta) {
  const std::string bytes = save_checkpoint(params, spec, meta);
  // Write-then-rename keeps the previous file intact if we are interrupted.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + tmp + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("failed writing " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw CheckpointError("cannot move checkpoint into place at " + path);
  }
}

Checkpoint read_checkpoint_file(const std::string& path,
                                const std::optional<VocabHashes>& expected_vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_checkpoint(buf.str(), expected_vocab);
}

}  // namespace herc
