#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "herc/params.hpp"
#include "support/oracles.hpp"
#include "support/toy.hpp"

using namespace herc;

namespace {

const VocabSizes kIcews14{7128, 230, 365};
const VocabSizes kIcews0515{10488, 251, 4017};

CheckpointMeta sample_meta() {
  CheckpointMeta m;
  m.vocab = {1, 2, 3};
  m.sizes = {5, 2, 3};
  m.seed = 42;
  m.epoch = 7;
  m.extra = {{"note", "unit"}};
  return m;
}

}  // namespace

TEST_CASE("count_params matches the per-model formulas") {
  const CurvatureSpec atth{CurvatureVariant::RelationOnly};
  const CurvatureSpec herc{CurvatureVariant::RelationTime};
  CHECK(count_params(kIcews14, 100, atth) == 904388);
  CHECK(count_params(kIcews14, 100, herc) == 904753);
  for (const auto& sizes : {kIcews14, kIcews0515}) {
    for (std::size_t n : {10, 20, 40, 100}) {
      CHECK(count_params(sizes, n, atth) == oracle::published_count_atth(sizes.entities, sizes.relations, n));
      CHECK(count_params(sizes, n, herc) ==
            oracle::published_count_hercules(sizes.entities, sizes.relations, sizes.timestamps, n));
    }
  }
  const CurvatureSpec trans{CurvatureVariant::RelationTimePlusTranslation};
  CHECK(count_params(kIcews14, 10, trans) == count_params(kIcews14, 10, herc) + 365 * 10);
  CHECK(count_params(kIcews14, 10, CurvatureSpec{CurvatureVariant::RelationTimeDotProduct}) ==
        count_params(kIcews14, 10, herc));
}

TEST_CASE("count_params equals the number of stored scalars") {
  const VocabSizes sizes{9, 4, 6};
  for (const auto& spec : toy::all_specs()) {
    const auto p = init_params(sizes, 6, spec, 1);
    CHECK(p.scalar_count() == count_params(sizes, 6, spec));
  }
}

TEST_CASE("init_params is deterministic in the seed and gated by the variant") {
  const VocabSizes sizes{8, 3, 5};
  const CurvatureSpec herc{CurvatureVariant::RelationTime};
  const auto a = init_params(sizes, 4, herc, 9);
  const auto b = init_params(sizes, 4, herc, 9);
  const auto c = init_params(sizes, 4, herc, 10);
  CHECK(a == b);
  CHECK_FALSE(a == c);

  for (double t : a.time_curv) CHECK(t == 1.0);
  for (double m : a.rel_curv) CHECK(m == 0.0);
  for (double v : a.entity_bias) CHECK(v == 0.0);
  for (double v : a.entity_emb.values) CHECK(std::abs(v) <= 1e-3);
  for (double v : a.rel_rot.values) CHECK(std::abs(v) <= std::numbers::pi);
  CHECK(a.time_trans.empty());
  CHECK(a.rel_emb.rows == 6);

  const auto atth = init_params(sizes, 4, CurvatureSpec{CurvatureVariant::RelationOnly}, 9);
  CHECK(atth.time_curv.empty());
  // Shared arrays are drawn identically regardless of the variant.
  CHECK(atth.entity_emb.values == a.entity_emb.values);
  CHECK(atth.rel_ctx.values == a.rel_ctx.values);

  const auto trans = init_params(sizes, 4, CurvatureSpec{CurvatureVariant::RelationTimePlusTranslation}, 9);
  CHECK(trans.time_trans.rows == 5);
  for (double v : trans.time_trans.values) CHECK(v == 0.0);
}

TEST_CASE("init_params rejects odd or zero dimensions and empty vocabularies") {
  CHECK_THROWS_AS(init_params({3, 1, 1}, 3, {}, 0), std::invalid_argument);
  CHECK_THROWS_AS(init_params({3, 1, 1}, 0, {}, 0), std::invalid_argument);
  CHECK_THROWS_AS(init_params({0, 1, 1}, 2, {}, 0), std::invalid_argument);
}

TEST_CASE("curvature variant names round trip") {
  for (const auto& spec : toy::all_specs()) {
    CHECK(parse_curvature_variant(to_string(spec.variant)) == spec.variant);
  }
  CHECK_THROWS_AS(parse_curvature_variant("bogus"), std::invalid_argument);
}

TEST_CASE("validate_params catches shape and value problems") {
  const VocabSizes sizes{5, 2, 3};
  const CurvatureSpec herc{CurvatureVariant::RelationTime};
  auto p = init_params(sizes, 4, herc, 3);
  CHECK_NOTHROW(validate_params(p, sizes, herc));
  CHECK_THROWS_AS(validate_params(p, {6, 2, 3}, herc), std::invalid_argument);
  CHECK_THROWS_AS(validate_params(p, sizes, CurvatureSpec{CurvatureVariant::RelationTimePlusTranslation}),
                  std::invalid_argument);
  p.rel_curv[1] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(validate_params(p, sizes, herc), std::invalid_argument);
}

TEST_CASE("checkpoints round trip bit-exactly") {
  const VocabSizes sizes{5, 2, 3};
  for (const auto& spec : toy::all_specs()) {
    const auto p = toy::random_params(sizes, 4, spec, 21);
    const auto bytes = save_checkpoint(p, spec, sample_meta());
    const auto ck = load_checkpoint(bytes);
    CHECK(ck.params == p);
    CHECK(ck.spec == spec);
    CHECK(ck.meta.seed == 42);
    CHECK(ck.meta.epoch == 7);
    CHECK(ck.meta.vocab == VocabHashes{1, 2, 3});
    CHECK(ck.meta.extra["note"] == "unit");
    CHECK(save_checkpoint(ck.params, ck.spec, ck.meta) == bytes);
  }
}

TEST_CASE("corrupted checkpoints are rejected") {
  const VocabSizes sizes{5, 2, 3};
  const CurvatureSpec spec{CurvatureVariant::RelationTime};
  const auto bytes = save_checkpoint(toy::random_params(sizes, 4, spec, 5), spec, sample_meta());

  SUBCASE("bad magic") {
    auto b = bytes;
    b[0] = 'X';
    CHECK_THROWS_AS(load_checkpoint(b), CheckpointError);
  }
  SUBCASE("version mismatch") {
    auto b = bytes;
    b[4] = static_cast<char>(kCheckpointVersion + 1);
    CHECK_THROWS_AS(load_checkpoint(b), CheckpointError);
  }
  SUBCASE("truncated payload") {
    CHECK_THROWS_AS(load_checkpoint(bytes.substr(0, bytes.size() - 8)), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint(bytes.substr(0, 10)), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint(""), CheckpointError);
  }
  SUBCASE("trailing bytes") {
    CHECK_THROWS_AS(load_checkpoint(bytes + "x"), CheckpointError);
  }
  SUBCASE("flipped payload bit") {
    auto b = bytes;
    b[b.size() - 3] ^= 0x10;
    CHECK_THROWS_AS(load_checkpoint(b), CheckpointError);
  }
  SUBCASE("corrupt metadata") {
    auto b = bytes;
    b[16] = '#';
    CHECK_THROWS_AS(load_checkpoint(b), CheckpointError);
  }
  SUBCASE("vocabulary hash mismatch") {
    CHECK_NOTHROW(load_checkpoint(bytes, VocabHashes{1, 2, 3}));
    CHECK_THROWS_AS(load_checkpoint(bytes, VocabHashes{1, 2, 4}), CheckpointError);
  }
}

TEST_CASE("checkpoint files are written atomically and read back") {
  const auto dir = std::filesystem::temp_directory_path() / "herc_params_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "model.herc").string();
  const VocabSizes sizes{5, 2, 3};
  const CurvatureSpec spec{CurvatureVariant::RelationOnly};
  const auto p = toy::random_params(sizes, 2, spec, 8);
  write_checkpoint_file(path, p, spec, sample_meta());
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
  CHECK(read_checkpoint_file(path).params == p);
  CHECK_THROWS_AS(read_checkpoint_file((dir / "missing.herc").string()), CheckpointError);
  std::filesystem::remove_all(dir);
}
