// Command-line front end: train, evaluate, probe and analyse AttH / Hercules
// models on ICEWS-style temporal knowledge graphs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "herc/analysis.hpp"
#include "herc/data.hpp"
#include "herc/evaluation.hpp"
#include "herc/params.hpp"
#include "herc/sweep.hpp"
#include "herc/training.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// HERC_QUIET=1 silences progress lines on stderr.
bool quiet() {
  const char* v = std::getenv("HERC_QUIET");
  return v != nullptr && std::string(v) != "0" && !std::string(v).empty();
}

void progress(const std::string& line) {
  if (!quiet()) std::cerr << line << std::endl;
}

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelFlags {
  std::string model = "hercules";
  std::string curvature;  // empty: implied by --model
  bool time_translation = false;

  void add(CLI::App* app) {
    app->add_option("--model", model, "Model family")->check(CLI::IsMember({"atth", "hercules"}));
    app->add_option("--curvature", curvature, "Curvature definition (overrides the model's default)")
        ->check(CLI::IsMember({"relation", "relation-time", "relation-time-dot"}));
    app->add_flag("--time-translation", time_translation, "Add a per-timestamp translation after the relation");
  }

  herc::CurvatureSpec resolve() const {
    std::string curv = curvature;
    if (curv.empty()) curv = model == "atth" ? "relation" : "relation-time";
    if (model == "atth" && curv != "relation") {
      throw UsageError("--model atth uses relation-only curvature; drop --curvature or use --model hercules");
    }
    if (model == "hercules" && curv == "relation") {
      throw UsageError("--model hercules needs a time-dependent curvature; use --model atth for relation-only");
    }
    herc::CurvatureSpec spec{herc::parse_curvature_variant(curv)};
    if (time_translation) {
      if (spec.variant != herc::CurvatureVariant::RelationTime) {
        throw UsageError("--time-translation combines only with --curvature relation-time");
      }
      spec.variant = herc::CurvatureVariant::RelationTimePlusTranslation;
    }
    return spec;
  }
};

struct TrainFlags {
  std::string data;
  std::string out;
  ModelFlags model;
  std::size_t dim = 20;
  std::size_t negatives = 500;
  std::size_t epochs = 500;
  std::size_t batch = 256;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t valid_every = 20;
  unsigned threads = 1;
  bool deterministic = false;

  void add(CLI::App* app) {
    app->add_option("--data", data, "Dataset directory with train/valid/test")->required();
    app->add_option("--out", out, "Output directory")->required();
    model.add(app);
    app->add_option("--dim", dim, "Embedding dimension (even)");
    app->add_option("--neg", negatives, "Negative samples per fact");
    app->add_option("--epochs", epochs, "Training epochs");
    app->add_option("--batch", batch, "Mini-batch size");
    app->add_option("--lr", lr, "Adam learning rate");
    app->add_option("--seed", seed, "Random seed");
    app->add_option("--valid-every", valid_every, "Validate every N epochs (0 disables)");
    app->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    app->add_flag("--deterministic", deterministic, "Force single-threaded accumulation");
  }

  herc::TrainConfig config() const {
    herc::TrainConfig c;
    c.epochs = epochs;
    c.batch_size = batch;
    c.negatives = negatives;
    c.learning_rate = lr;
    c.seed = seed;
    c.valid_every = valid_every;
    c.dim = dim;
    c.spec = model.resolve();
    c.threads = deterministic ? 1 : threads;
    if (dim == 0 || dim % 2 != 0) throw UsageError("--dim must be even and positive, got " + std::to_string(dim));
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return c;
  }
};

fs::path prepare_out(const std::string& out, const CLI::App& app) {
  const fs::path dir(out);
  fs::create_directories(dir);
  std::ofstream(dir / "config.ini") << app.config_to_str(true, false);
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setw(2) << j << '\n';
}

herc::Dataset load_data(const std::string& dir) {
  if (!fs::is_directory(dir)) throw UsageError("dataset directory not found: " + dir);
  progress("loading " + dir);
  auto ds = herc::load_dataset(dir);
  const auto s = ds.sizes();
  progress("|E|=" + std::to_string(s.entities) + " |R|=" + std::to_string(s.relations) +
           " |T|=" + std::to_string(s.timestamps) + " train=" + std::to_string(ds.train.size()) +
           " valid=" + std::to_string(ds.valid.size()) + " test=" + std::to_string(ds.test.size()));
  return ds;
}

const std::vector<herc::Quadruple>& pick_split(const herc::Dataset& ds, const std::string& split) {
  if (split == "valid") return ds.valid_aug;
  if (split == "test") return ds.test_aug;
  if (split == "train") return ds.train_aug;
  throw UsageError("unknown split '" + split + "'");
}

herc::CheckpointMeta make_meta(const herc::Dataset& ds, const herc::TrainConfig& cfg, std::size_t epoch,
                               const std::optional<herc::RankReport>& valid) {
  herc::CheckpointMeta m;
  m.vocab = ds.vocab.hashes();
  m.sizes = ds.sizes();
  m.seed = cfg.seed;
  m.epoch = static_cast<std::int64_t>(epoch);
  m.extra = {{"config", cfg.to_json()}};
  if (valid) m.extra["valid"] = valid->to_json();
  return m;
}

int run_train(const TrainFlags& f, const CLI::App& app) {
  const auto cfg = f.config();
  const auto data = load_data(f.data);
  const auto dir = prepare_out(f.out, app);
  write_json(dir / "train_config.json", cfg.to_json());
  herc::write_index_tsv(data.vocab.entities, dir / "entities.tsv");
  herc::write_index_tsv(data.vocab.relations, dir / "relations.tsv");
  herc::write_index_tsv(data.vocab.timestamps, dir / "timestamps.tsv");
  progress("parameters: " + std::to_string(herc::count_params(data.sizes(), cfg.dim, cfg.spec)));

  std::ofstream log(dir / "epochs.jsonl");
  herc::TrainHooks hooks;
  hooks.on_epoch = [&](const herc::EpochLog& row, const herc::ModelParams& current, bool is_best) {
    log << row.to_json().dump() << '\n' << std::flush;
    std::ostringstream line;
    line << "epoch " << row.epoch << " loss " << std::setprecision(6) << row.loss;
    if (row.valid) line << " valid mrr " << row.valid->mrr << (is_best ? " *" : "");
    progress(line.str());
    if (is_best) {
      herc::write_checkpoint_file((dir / "best.herc").string(), current, cfg.spec,
                                  make_meta(data, cfg, row.epoch, row.valid));
    }
  };
  const auto result = herc::train(cfg, data, hooks);
  herc::write_checkpoint_file((dir / "last.herc").string(), result.last, cfg.spec,
                              make_meta(data, cfg, cfg.epochs, std::nullopt));
  if (!result.best_mrr) {
    herc::write_checkpoint_file((dir / "best.herc").string(), result.best, cfg.spec,
                                make_meta(data, cfg, result.best_epoch, std::nullopt));
  }
  json summary = {{"best_epoch", result.best_epoch}, {"final_loss", result.log.back().loss}};
  if (result.best_mrr) summary["best_valid_mrr"] = *result.best_mrr;
  write_json(dir / "summary.json", summary);
  std::cout << summary.dump() << '\n';
  return 0;
}

herc::Checkpoint load_model(const std::string& path, const herc::Dataset& data) {
  if (!fs::exists(path)) throw UsageError("checkpoint not found: " + path);
  auto ck = herc::read_checkpoint_file(path, data.vocab.hashes());
  herc::validate_params(ck.params, data.sizes(), ck.spec);
  return ck;
}

struct EvalFlags {
  std::string data, checkpoint, out, split = "test";
  unsigned threads = 1;
  bool deterministic = false;

  void add(CLI::App* app, bool out_required) {
    app->add_option("--data", data, "Dataset directory")->required();
    app->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    auto* o = app->add_option("--out", out, "Output directory");
    if (out_required) o->required();
    app->add_option("--split", split, "Query split")->check(CLI::IsMember({"train", "valid", "test"}));
    app->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    app->add_flag("--deterministic", deterministic, "Single-threaded");
  }
  unsigned workers() const { return deterministic ? 1 : threads; }
};

int run_eval(const EvalFlags& f, const CLI::App& app) {
  const auto data = load_data(f.data);
  const auto ck = load_model(f.checkpoint, data);
  const auto report = herc::evaluate(ck.params, ck.spec, pick_split(data, f.split), data.filter, {f.workers(), {}});
  json j = report.to_json();
  j["split"] = f.split;
  j["model"] = std::string(herc::to_string(ck.spec.variant));
  if (!f.out.empty()) write_json(prepare_out(f.out, app) / "eval.json", j);
  std::cout << j.dump() << '\n';
  return 0;
}

int run_probe(const EvalFlags& f, bool reuse, const CLI::App& app) {
  const auto data = load_data(f.data);
  const auto ck = load_model(f.checkpoint, data);
  const auto dir = prepare_out(f.out, app);
  herc::ProbeOptions opts;
  opts.threads = f.workers();
  opts.reuse_equivalent = reuse;
  const auto probe = herc::temporal_probe(ck.params, ck.spec, pick_split(data, f.split), data.filter,
                                          data.sizes().timestamps, opts);
  std::ofstream csv(dir / "probe.csv");
  csv << "timestamp,mrr,h1,h3,h10\n" << std::setprecision(17);
  for (std::size_t i = 0; i < probe.timestamps.size(); ++i) {
    const auto& r = probe.reports[i];
    csv << data.vocab.timestamps.name(probe.timestamps[i]) << ',' << r.mrr << ',' << r.hits1 << ',' << r.hits3
        << ',' << r.hits10 << '\n';
  }
  const auto& s = probe.std_from_reference;
  json j = {{"reference", probe.reference.to_json()},
            {"std_from_reference", {{"mrr", s[0]}, {"h1", s[1]}, {"h3", s[2]}, {"h10", s[3]}}},
            {"timestamps", probe.timestamps.size()}};
  write_json(dir / "probe.json", j);
  std::cout << j.dump() << '\n';
  return 0;
}

int run_sweep(const TrainFlags& f, const std::vector<std::size_t>& ks, const CLI::App& app) {
  const auto cfg = f.config();
  const auto data = load_data(f.data);
  const auto dir = prepare_out(f.out, app);
  write_json(dir / "train_config.json", cfg.to_json());
  const auto rows = herc::negative_sweep(cfg, ks, data);
  std::ofstream csv(dir / "sweep.csv");
  herc::write_sweep_csv(rows, csv);
  json j = json::array();
  for (const auto& r : rows) {
    auto e = r.report.to_json();
    e["k"] = r.negatives;
    j.push_back(e);
  }
  std::cout << j.dump() << '\n';
  return 0;
}

int run_curvature_diff(const std::string& data_dir, const std::string& a, const std::string& b,
                       double threshold, const std::string& out, const CLI::App& app) {
  const auto data = load_data(data_dir);
  const auto dir = prepare_out(out, app);
  const auto ca = load_model(a, data);
  const auto ma = herc::curvature_matrix(ca.params, ca.spec);
  {
    std::ofstream csv(dir / "curvature_a.csv");
    herc::write_curvature_csv(ma.values, ma.has_time_axis, &data.vocab, csv);
  }
  json j;
  if (!b.empty()) {
    const auto cb = load_model(b, data);
    const auto mb = herc::curvature_matrix(cb.params, cb.spec);
    {
      std::ofstream csv(dir / "curvature_b.csv");
      herc::write_curvature_csv(mb.values, mb.has_time_axis, &data.vocab, csv);
    }
    const auto delta = herc::curvature_delta(ma, mb, threshold);
    std::ofstream csv(dir / "delta.csv");
    herc::write_curvature_csv(delta.delta, ma.has_time_axis || mb.has_time_axis, &data.vocab, csv);
    j = {{"threshold", threshold}, {"fraction_below", delta.fraction_below}, {"entries", delta.delta.values.size()}};
    for (double t : {0.05, 0.1, 0.2, 1.0}) j["fraction_below_at"][std::to_string(t).substr(0, 4)] = delta.fraction_below_threshold(t);
  } else {
    j = {{"entries", ma.values.values.size()}};
  }
  write_json(dir / "curvature_summary.json", j);
  std::cout << j.dump() << '\n';
  return 0;
}

std::uint32_t resolve_id(const herc::Index& index, const std::string& key, const char* what) {
  if (index.contains(key)) return index.at(key);
  try {
    std::size_t used = 0;
    const auto id = std::stoul(key, &used);
    if (used == key.size() && id < index.size()) return static_cast<std::uint32_t>(id);
  } catch (const std::exception&) {
  }
  throw UsageError(std::string("unknown ") + what + " '" + key + "'");
}

int run_export(const std::string& data_dir, const std::string& checkpoint, const std::string& relation,
               const std::string& timestamp, const std::string& out, const CLI::App& app) {
  const auto data = load_data(data_dir);
  const auto ck = load_model(checkpoint, data);
  const auto dir = prepare_out(out, app);
  const auto p = resolve_id(data.vocab.relations, relation, "relation");
  const auto t = resolve_id(data.vocab.timestamps, timestamp, "timestamp");
  const auto rows = herc::export_embeddings_2d(ck.params, ck.spec, data.vocab, p, t, dir / "embeddings_2d.csv");
  std::cout << json{{"rows", rows}, {"file", (dir / "embeddings_2d.csv").string()}}.dump() << '\n';
  return 0;
}

std::vector<std::size_t> parse_counts(const std::string& list) {
  std::vector<std::size_t> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    unsigned long value = 0;
    try {
      value = std::stoul(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || value == 0) throw UsageError("--ks expects positive integers, got '" + item + "'");
    out.push_back(value);
  }
  if (out.empty()) throw UsageError("--ks is empty");
  return out;
}

// Turns the entries of a `--config` file into `--key=value` arguments placed
// right after the subcommand, ahead of the explicit flags, which therefore win.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty() || args.size() < 2) return args;
  if (!fs::is_regular_file(path)) throw UsageError("config file not found: " + path);
  const std::string command = args[1];
  std::vector<std::string> injected;
  for (const auto& item : CLI::ConfigINI().from_file(path)) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == command)) continue;
    std::string value;
    for (std::size_t k = 0; k < item.inputs.size(); ++k) value += (k ? "," : "") + item.inputs[k];
    injected.push_back("--" + item.name + "=" + value);
  }
  args.insert(args.begin() + 2, injected.begin(), injected.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperbolic temporal knowledge graph embeddings (AttH / Hercules)", "herc"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;

  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "Train a model and save best/last checkpoints");
  train->add_option("--config", config_path, "key = value file supplying defaults");
  train_flags.add(train);

  EvalFlags eval_flags;
  auto* eval = app.add_subcommand("eval", "Filtered MRR / Hits@k of a checkpoint");
  eval->add_option("--config", config_path, "key = value file supplying defaults");
  eval_flags.add(eval, false);

  EvalFlags probe_flags;
  bool probe_reuse = false;
  auto* probe = app.add_subcommand("probe-time", "Re-evaluate with every timestamp substituted in turn");
  probe->add_option("--config", config_path, "key = value file supplying defaults");
  probe_flags.add(probe, true);
  probe->add_flag("--reuse-equivalent", probe_reuse, "Reuse reports of timestamps with identical parameters");

  TrainFlags sweep_flags;
  std::string ks_list = "50,100,200,500";
  auto* sweep = app.add_subcommand("sweep-neg", "Train once per negative-sample count and evaluate on test");
  sweep->add_option("--config", config_path, "key = value file supplying defaults");
  sweep_flags.add(sweep);
  sweep->add_option("--ks", ks_list, "Comma-separated negative-sample counts");

  std::string cd_data, cd_a, cd_b, cd_out;
  double cd_threshold = 0.1;
  auto* cdiff = app.add_subcommand("curvature-diff", "Learned curvatures of one checkpoint, or |A - B| of two");
  cdiff->add_option("--config", config_path, "key = value file supplying defaults");
  cdiff->add_option("--data", cd_data, "Dataset directory")->required();
  cdiff->add_option("--checkpoint", cd_a, "First checkpoint")->required();
  cdiff->add_option("--against", cd_b, "Second checkpoint");
  cdiff->add_option("--threshold", cd_threshold, "Summary threshold");
  cdiff->add_option("--out", cd_out, "Output directory")->required();

  std::string cp_data;
  std::size_t cp_entities = 0, cp_relations = 0, cp_timestamps = 0, cp_dim = 20;
  ModelFlags cp_model;
  auto* count = app.add_subcommand("count-params", "Number of trainable parameters");
  count->add_option("--config", config_path, "key = value file supplying defaults");
  auto* cp_data_opt = count->add_option("--data", cp_data, "Dataset directory");
  auto* cp_e = count->add_option("--entities", cp_entities, "|E| when no dataset is given");
  count->add_option("--relations", cp_relations, "|R| when no dataset is given");
  count->add_option("--timestamps", cp_timestamps, "|T| when no dataset is given");
  cp_data_opt->excludes(cp_e);
  count->add_option("--dim", cp_dim, "Embedding dimension");
  cp_model.add(count);

  std::string ex_data, ex_ck, ex_rel, ex_time, ex_out;
  auto* exp2d = app.add_subcommand("export-2d", "Entity coordinates of a 2-D model on one (relation, time) manifold");
  exp2d->add_option("--config", config_path, "key = value file supplying defaults");
  exp2d->add_option("--data", ex_data, "Dataset directory")->required();
  exp2d->add_option("--checkpoint", ex_ck, "2-D model checkpoint")->required();
  exp2d->add_option("--relation", ex_rel, "Relation name or id")->required();
  exp2d->add_option("--timestamp", ex_time, "Timestamp label or id")->required();
  exp2d->add_option("--out", ex_out, "Output directory")->required();

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  }
  std::vector<char*> cargs;
  for (auto& a : args) cargs.push_back(a.data());
  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) return run_train(train_flags, *train);
    if (*eval) return run_eval(eval_flags, *eval);
    if (*probe) return run_probe(probe_flags, probe_reuse, *probe);
    if (*sweep) return run_sweep(sweep_flags, parse_counts(ks_list), *sweep);
    if (*cdiff) return run_curvature_diff(cd_data, cd_a, cd_b, cd_threshold, cd_out, *cdiff);
    if (*exp2d) return run_export(ex_data, ex_ck, ex_rel, ex_time, ex_out, *exp2d);
    if (*count) {
      const auto spec = cp_model.resolve();
      if (cp_dim == 0 || cp_dim % 2 != 0) throw UsageError("--dim must be even and positive");
      herc::VocabSizes sizes{cp_entities, cp_relations, cp_timestamps};
      if (!cp_data.empty()) {
        sizes = load_data(cp_data).sizes();
      } else if (cp_entities == 0 || cp_relations == 0) {
        throw UsageError("count-params needs --data or --entities/--relations/--timestamps");
      }
      std::cout << herc::count_params(sizes, cp_dim, spec) << '\n';
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\nRun with --help for more information.\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
