#include "herc/data.hpp"

#include <algorithm>
#include <fstream>
#include <istream>

#include "herc/hash.hpp"

namespace herc {

std::uint32_t Index::intern(std::string_view name) {
  auto [it, inserted] = ids_.try_emplace(std::string(name), static_cast<std::uint32_t>(names_.size()));
  if (inserted) names_.emplace_back(name);
  return it->second;
}

std::uint32_t Index::at(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) throw std::out_of_range("unknown vocabulary entry '" + std::string(name) + "'");
  return it->second;
}

std::uint64_t Index::hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& n : names_) {
    h = fnv1a(n, h);
    h = fnv1a("\n", h);
  }
  return h;
}

std::string Vocabulary::relation_name(std::uint32_t p) const {
  const std::size_t r = relations.size();
  if (p < r) return relations.name(p);
  return relations.name(static_cast<std::uint32_t>(p - r)) + "^-1";
}

std::vector<RawQuadruple> parse_split(std::istream& in, const std::string& source) {
  std::vector<RawQuadruple> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto tab = rest.find('\t');
      fields.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (fields.size() != 4) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected 4 tab-separated fields, found " +
                       std::to_string(fields.size()));
    }
    for (auto f : fields) {
      if (f.empty()) throw ParseError(source + ":" + std::to_string(line_no) + ": empty field");
    }
    rows.push_back({std::string(fields[0]), std::string(fields[1]), std::string(fields[2]),
                    std::string(fields[3])});
  }
  if (rows.empty()) throw ParseError(source + ": no quadruples");
  return rows;
}

std::vector<RawQuadruple> parse_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return parse_split(in, path.string());
}

Vocabulary build_vocab(std::span<const RawQuadruple> train, std::span<const RawQuadruple> valid,
                       std::span<const RawQuadruple> test) {
  Vocabulary v;
  for (auto split : {train, valid, test}) {
    for (const auto& q : split) {
      v.entities.intern(q.subject);
      v.relations.intern(q.relation);
      v.entities.intern(q.object);
      v.timestamps.intern(q.timestamp);
    }
  }
  return v;
}

std::vector<Quadruple> index_split(std::span<const RawQuadruple> raw, const Vocabulary& vocab) {
  std::vector<Quadruple> out;
  out.reserve(raw.size());
  for (const auto& q : raw) {
    out.push_back({vocab.entities.at(q.subject), vocab.relations.at(q.relation),
                   vocab.entities.at(q.object), vocab.timestamps.at(q.timestamp)});
  }
  return out;
}

std::vector<Quadruple> augment_inverse(std::span<const Quadruple> quads, std::size_t num_relations) {
  std::vector<Quadruple> out(quads.begin(), quads.end());
  out.reserve(2 * quads.size());
  for (const auto& q : quads) {
    if (q.p >= num_relations) {
      throw std::invalid_argument("augment_inverse: relation " + std::to_string(q.p) +
                                  " is already an inverse (|R| = " + std::to_string(num_relations) +
                                  "); input was augmented before");
    }
    out.push_back({q.o, static_cast<std::uint32_t>(q.p + num_relations), q.s, q.t});
  }
  return out;
}

std::uint64_t FilterIndex::key(std::uint32_t s, std::uint32_t p, std::uint32_t t) {
  return (static_cast<std::uint64_t>(s) << 40) | (static_cast<std::uint64_t>(p) << 20) | t;
}

FilterIndex::FilterIndex(std::span<const std::span<const Quadruple>> splits) {
  for (auto split : splits) {
    for (const auto& q : split) {
      if (q.s >= (1u << 24) || q.p >= (1u << 20) || q.t >= (1u << 20)) {
        throw std::invalid_argument("filter index: id out of supported range");
      }
      objects_[key(q.s, q.p, q.t)].push_back(q.o);
    }
  }
  for (auto& [k, objs] : objects_) {
    std::sort(objs.begin(), objs.end());
    objs.erase(std::unique(objs.begin(), objs.end()), objs.end());
  }
}

std::span<const std::uint32_t> FilterIndex::lookup(std::uint32_t s, std::uint32_t p,
                                                   std::uint32_t t) const {
  auto it = objects_.find(key(s, p, t));
  if (it == objects_.end()) return {};
  return it->second;
}

bool FilterIndex::contains(std::uint32_t s, std::uint32_t p, std::uint32_t o, std::uint32_t t) const {
  auto objs = lookup(s, p, t);
  return std::binary_search(objs.begin(), objs.end(), o);
}

FilterIndex build_filter_index(std::span<const std::span<const Quadruple>> augmented_splits) {
  return FilterIndex(augmented_splits);
}

Dataset make_dataset(std::span<const RawQuadruple> train, std::span<const RawQuadruple> valid,
                     std::span<const RawQuadruple> test) {
  Dataset d;
  d.vocab = build_vocab(train, valid, test);
  d.train = index_split(train, d.vocab);
  d.valid = index_split(valid, d.vocab);
  d.test = index_split(test, d.vocab);
  const std::size_t r = d.vocab.relations.size();
  d.train_aug = augment_inverse(d.train, r);
  d.valid_aug = augment_inverse(d.valid, r);
  d.test_aug = augment_inverse(d.test, r);
  const std::span<const Quadruple> all[] = {d.train_aug, d.valid_aug, d.test_aug};
  d.filter = build_filter_index(all);
  return d;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ParseError("dataset directory not found: " + dir.string());
  }
  auto locate = [&](const std::string& name) {
    for (const auto& candidate : {dir / name, dir / (name + ".txt")}) {
      if (std::filesystem::exists(candidate)) return candidate;
    }
    throw ParseError("missing split '" + name + "' in " + dir.string());
  };
  const auto train = parse_split(locate("train"));
  const auto valid = parse_split(locate("valid"));
  const auto test = parse_split(locate("test"));
  return make_dataset(train, valid, test);
}

void write_index_tsv(const Index& index, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < index.size(); ++i) out << i << '\t' << index.name(static_cast<std::uint32_t>(i)) << '\n';
}

}  // namespace herc
