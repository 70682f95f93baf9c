#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "herc/params.hpp"

namespace herc {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A fact as it appears in an ICEWS tab-separated file.
struct RawQuadruple {
  std::string subject;
  std::string relation;
  std::string object;
  std::string timestamp;
};

// Indexed fact. Relations |R|..2|R|-1 are the inverses of 0..|R|-1.
struct Quadruple {
  std::uint32_t s = 0;
  std::uint32_t p = 0;
  std::uint32_t o = 0;
  std::uint32_t t = 0;

  friend bool operator==(const Quadruple&, const Quadruple&) = default;
};

// One string <-> index bijection.
class Index {
 public:
  // Returns the existing index or assigns the next one.
  std::uint32_t intern(std::string_view name);
  std::uint32_t at(std::string_view name) const;  // throws std::out_of_range
  bool contains(std::string_view name) const { return ids_.count(std::string(name)) != 0; }
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  std::uint64_t hash() const;
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

struct Vocabulary {
  Index entities;
  Index relations;  // forward relations only
  Index timestamps;

  VocabSizes sizes() const { return {entities.size(), relations.size(), timestamps.size()}; }
  VocabHashes hashes() const { return {entities.hash(), relations.hash(), timestamps.hash()}; }
  // Display name for a relation id, inverse ids get a "^-1" suffix.
  std::string relation_name(std::uint32_t p) const;
};

// Reads four tab-separated columns (subject, relation, object, timestamp)
// per LF-terminated line. `source` names the input in error messages.
std::vector<RawQuadruple> parse_split(std::istream& in, const std::string& source);
std::vector<RawQuadruple> parse_split(const std::filesystem::path& path);

// Indices follow first occurrence over train, then valid, then test; within a
// row the subject is seen before the object.
Vocabulary build_vocab(std::span<const RawQuadruple> train, std::span<const RawQuadruple> valid,
                       std::span<const RawQuadruple> test);

std::vector<Quadruple> index_split(std::span<const RawQuadruple> raw, const Vocabulary& vocab);

// Appends <o, p + |R|, s, t> for every <s, p, o, t>; the output holds the
// originals first, then their inverses in the same order.
std::vector<Quadruple> augment_inverse(std::span<const Quadruple> quads, std::size_t num_relations);

// (s, p, t) -> every object o with <s, p, o, t> known to be true.
class FilterIndex {
 public:
  FilterIndex() = default;
  explicit FilterIndex(std::span<const std::span<const Quadruple>> splits);

  // Sorted, duplicate free; empty for unseen keys.
  std::span<const std::uint32_t> lookup(std::uint32_t s, std::uint32_t p, std::uint32_t t) const;
  bool contains(std::uint32_t s, std::uint32_t p, std::uint32_t o, std::uint32_t t) const;
  std::size_t num_keys() const { return objects_.size(); }

 private:
  static std::uint64_t key(std::uint32_t s, std::uint32_t p, std::uint32_t t);
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> objects_;
};

FilterIndex build_filter_index(std::span<const std::span<const Quadruple>> augmented_splits);

// An ingested benchmark. The `*_aug` splits carry the inverse copies.
struct Dataset {
  Vocabulary vocab;
  std::vector<Quadruple> train, valid, test;
  std::vector<Quadruple> train_aug, valid_aug, test_aug;
  FilterIndex filter;

  VocabSizes sizes() const { return vocab.sizes(); }
};

// Builds a dataset from already parsed splits.
Dataset make_dataset(std::span<const RawQuadruple> train, std::span<const RawQuadruple> valid,
                     std::span<const RawQuadruple> test);

// Loads `train`, `valid` and `test` from `dir` (a `.txt` suffix is accepted).
Dataset load_dataset(const std::filesystem::path& dir);

// Writes "index<TAB>name" lines.
void write_index_tsv(const Index& index, const std::filesystem::path& path);

}  // namespace herc
