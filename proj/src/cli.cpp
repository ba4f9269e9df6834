#include "rumor/cli.hpp"

#include <CLI11.hpp>

#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "rumor/graph.hpp"
#include "rumor/ingestion.hpp"
#include "rumor/io.hpp"
#include "rumor/pairs.hpp"

namespace rumor::cli {

namespace fs = std::filesystem;
using nlohmann::json;

void RunConfig::validate() const {
  train.validate();
  synth.validate();
  if (snapshot_interval <= 0) throw ConfigError("snapshot_interval must be positive");
  if (eval_split != "train" && eval_split != "val" && eval_split != "test" && eval_split != "all") {
    throw ConfigError("eval_split must be one of train|val|test|all");
  }
}

RunConfig RunConfig::resolved() const {
  RunConfig c = *this;
  Paths& p = c.paths;
  const fs::path& w = p.work_dir;
  auto fill = [](fs::path& target, const fs::path& fallback) {
    if (target.empty()) target = fallback;
  };
  fill(p.corpus_dir, w / "corpus");
  fill(p.post_sets, w / "post_sets.jsonl");
  fill(p.graphs, w / "graphs.jsonl");
  fill(p.snapshots, w / "snapshots.jsonl");
  fill(p.features, p.corpus_dir / "features.nfv1");
  fill(p.feature_ids, p.corpus_dir / "features.ids.json");
  fill(p.pairs, w / "pairs.jsonl");
  fill(p.checkpoint, w / "model.ckpt.json");
  fill(p.report_dir, w / "report");
  return c;
}

namespace {

json to_json(const Paths& p) {
  return {{"work_dir", p.work_dir.string()},       {"corpus_dir", p.corpus_dir.string()},
          {"post_sets", p.post_sets.string()},     {"graphs", p.graphs.string()},
          {"snapshots", p.snapshots.string()},     {"features", p.features.string()},
          {"feature_ids", p.feature_ids.string()}, {"pairs", p.pairs.string()},
          {"checkpoint", p.checkpoint.string()},   {"report_dir", p.report_dir.string()}};
}

Paths paths_from_json(const json& j) {
  Paths p;
  const std::map<std::string, fs::path*> fields = {
      {"work_dir", &p.work_dir},   {"corpus_dir", &p.corpus_dir}, {"post_sets", &p.post_sets},
      {"graphs", &p.graphs},       {"snapshots", &p.snapshots},   {"features", &p.features},
      {"feature_ids", &p.feature_ids}, {"pairs", &p.pairs},       {"checkpoint", &p.checkpoint},
      {"report_dir", &p.report_dir}};
  for (const auto& [key, value] : j.items()) {
    auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError("unknown path key '" + key + "'");
    if (!value.is_string()) throw ConfigError("path '" + key + "' must be a string");
    *it->second = value.get<std::string>();
  }
  return p;
}

}  // namespace

json to_json(const RunConfig& c) {
  json j = rumor::to_json(c.train);
  j["paths"] = to_json(c.paths);
  j["augment_snapshots"] = c.augment_snapshots;
  j["snapshot_interval"] = c.snapshot_interval;
  j["neg_per_pos"] = c.neg_per_pos;
  j["eval_split"] = c.eval_split;
  j["synth"] = rumor::to_json(c.synth);
  return j;
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  const json defaults = to_json(RunConfig{});
  std::set<std::string> known;
  for (const auto& [key, value] : defaults.items()) known.insert(key);
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  RunConfig c;
  c.train = train_config_from_json(j);
  try {
    if (j.contains("paths")) c.paths = paths_from_json(j.at("paths"));
    c.augment_snapshots = j.value("augment_snapshots", c.augment_snapshots);
    c.snapshot_interval = j.value("snapshot_interval", c.snapshot_interval);
    c.neg_per_pos = j.value("neg_per_pos", c.neg_per_pos);
    c.eval_split = j.value("eval_split", c.eval_split);
    if (j.contains("synth")) c.synth = synth_config_from_json(j.at("synth"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad run config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

std::vector<LabeledPostSet> read_post_sets(const fs::path& path) {
  std::vector<LabeledPostSet> out;
  for (const json& j : io::read_jsonl(path)) out.push_back(io::post_set_from_json(j));
  return out;
}

std::vector<StaticGraph> read_graphs(const fs::path& path) {
  std::vector<StaticGraph> out;
  for (const json& j : io::read_jsonl(path)) out.push_back(io::graph_from_json(j));
  return out;
}

json line_counts(const LineCounts& c) {
  return {{"factchecks", c.factchecks}, {"tweets", c.tweets}, {"comments", c.comments},
          {"reposts", c.reposts},       {"users", c.users}};
}

std::vector<std::string> class_names(std::size_t classes) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) {
    names.push_back(c < kClassNames.size() ? std::string(kClassNames[c]) : "class_" + std::to_string(c));
  }
  return names;
}

GraphInput to_input(const StaticGraph& g, const FeatureStore& store, const ModelConfig& model) {
  return make_input(attach_features(g, table_for_graph(store, g), model.in_dim), model.neighborhood);
}

std::vector<std::size_t> graph_ids(const std::vector<GraphInput>& v) {
  std::vector<std::size_t> ids;
  for (const auto& g : v) ids.push_back(g.graph_id);
  return ids;
}

TrainLog train_log_from_json(const json& j) {
  TrainLog log;
  log.best_epoch = j.at("best_epoch").get<std::size_t>();
  for (const json& e : j.at("epochs")) {
    log.epochs.push_back({e.at("epoch").get<std::size_t>(), e.at("train_loss").get<double>(),
                          e.at("train_acc").get<double>(), e.at("val_loss").get<double>(),
                          e.at("val_acc").get<double>()});
  }
  return log;
}

}  // namespace

json cmd_ingest(const RunConfig& config) {
  const RunConfig c = config.resolved();
  const RawCorpus raw = load_corpus(synth_corpus_paths(c.paths.corpus_dir));
  const JoinResult joined = join_post_sets(raw);
  const LabelResult labelled = label_post_sets(joined.sets, raw.factchecks);

  std::vector<json> records;
  std::size_t n_labelled = 0;
  for (const auto& s : labelled.sets) {
    records.push_back(io::to_json(s));
    if (s.label) ++n_labelled;
  }
  std::vector<json> quarantine;
  for (const auto& q : raw.quarantine) quarantine.push_back(io::to_json(q));
  for (const auto& q : joined.quarantined) quarantine.push_back(io::to_json(q));
  for (const auto& r : joined.rejected) {
    quarantine.push_back({{"kind", "post_set"}, {"source_id", r.source_id}, {"reason", r.reason}});
  }
  for (const auto& r : labelled.rejected) {
    quarantine.push_back({{"kind", "post_set"}, {"source_id", r.source_id}, {"reason", r.reason}});
  }

  const LineCounts loaded{raw.factchecks.size(), raw.tweets.size(), raw.comments.size(), raw.reposts.size(),
                          raw.users.size()};
  const json summary = {{"input_lines", line_counts(raw.input_lines)},
                        {"loaded", line_counts(loaded)},
                        {"quarantined_lines", raw.quarantine.size()},
                        {"quarantined_after_load", joined.quarantined.size()},
                        {"rejected_post_sets", joined.rejected.size() + labelled.rejected.size()},
                        {"post_sets", labelled.sets.size()},
                        {"labelled", n_labelled}};

  fs::path quarantine_path = c.paths.post_sets;
  quarantine_path += ".quarantine.jsonl";
  io::write_atomic(c.paths.post_sets, io::to_jsonl(records));
  io::write_meta(c.paths.post_sets, "post-sets", to_json(c), {{"summary", summary}});
  io::write_atomic(quarantine_path, io::to_jsonl(quarantine));
  io::write_meta(quarantine_path, "quarantine", to_json(c));
  return summary;
}

json cmd_build_graphs(const RunConfig& config) {
  const RunConfig c = config.resolved();
  const std::vector<LabeledPostSet> sets = read_post_sets(c.paths.post_sets);
  std::vector<json> graphs, snapshots, rejected;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    StaticGraph g;
    try {
      g = build_static_graph(sets[i], i);
    } catch (const DataError& e) {
      rejected.push_back({{"graph_id", i}, {"source_id", sets[i].set.source.id}, {"reason", e.what()}});
      continue;
    }
    graphs.push_back(io::to_json(g));
    if (c.augment_snapshots) {
      const auto series = snapshot_series(g, c.snapshot_interval);
      for (std::size_t k = 0; k < series.size(); ++k) snapshots.push_back(io::to_json(series[k], k));
    }
  }
  io::write_atomic(c.paths.graphs, io::to_jsonl(graphs));
  io::write_meta(c.paths.graphs, "graphs", to_json(c));
  fs::path rejected_path = c.paths.graphs;
  rejected_path += ".rejected.jsonl";
  io::write_atomic(rejected_path, io::to_jsonl(rejected));
  json summary = {{"graphs", graphs.size()}, {"rejected", rejected.size()}};
  if (c.augment_snapshots) {
    io::write_atomic(c.paths.snapshots, io::to_jsonl(snapshots));
    io::write_meta(c.paths.snapshots, "snapshots", to_json(c));
    summary["snapshots"] = snapshots.size();
  }
  return summary;
}

json cmd_gen_pairs(const RunConfig& config) {
  const RunConfig c = config.resolved();
  std::vector<PostSet> sets;
  for (auto& s : read_post_sets(c.paths.post_sets)) sets.push_back(std::move(s.set));
  PairCorpusStats stats;
  const auto pairs = build_pair_corpus(sets, c.neg_per_pos, c.train.seed, &stats);
  std::vector<json> records;
  for (const auto& p : pairs) records.push_back(to_json(p));
  const json summary = {{"positives", stats.positives},
                        {"negatives", stats.negatives},
                        {"duplicates_removed", stats.duplicates_removed},
                        {"skipped_empty", stats.skipped_empty}};
  io::write_atomic(c.paths.pairs, io::to_jsonl(records));
  io::write_meta(c.paths.pairs, "sentence-pairs", to_json(c), {{"summary", summary}});
  return summary;
}

json cmd_synth(const RunConfig& config) {
  const RunConfig c = config.resolved();
  const SynthCorpus corpus = synthesize(c.synth);
  write_synth(corpus, c.paths.corpus_dir);
  const CorpusPaths p = synth_corpus_paths(c.paths.corpus_dir);
  for (const fs::path& f : {p.factchecks, p.tweets, p.comments, p.reposts, p.users}) {
    io::write_meta(f, "records", to_json(c));
  }
  io::write_meta(c.paths.corpus_dir / "features.nfv1", "nfv1", to_json(c));
  return {{"graphs", c.synth.n_graphs},
          {"tweets", corpus.tweets.size()},
          {"comments", corpus.comments.size()},
          {"reposts", corpus.reposts.size()},
          {"users", corpus.users.size()},
          {"feature_rows", corpus.features.rows()}};
}

std::vector<GraphInput> load_inputs(const RunConfig& config) {
  const RunConfig c = config.resolved();
  const FeatureStore store = io::read_features(c.paths.features, c.paths.feature_ids);
  std::vector<GraphInput> out;
  for (const StaticGraph& g : read_graphs(c.paths.graphs)) {
    if (g.label) out.push_back(to_input(g, store, c.train.model));
  }
  return out;
}

json cmd_train(const RunConfig& config) {
  const RunConfig c = config.resolved();
  const std::vector<GraphInput> inputs = load_inputs(c);
  Split<GraphInput> split = split_dataset(inputs, c.train.split, c.train.seed);
  const std::vector<std::size_t> train_ids = graph_ids(split.train);

  std::size_t augmented = 0;
  if (c.augment_snapshots) {
    // Partial snapshots of training graphs only; the last snapshot of each
    // series is the static graph itself.
    const std::set<std::size_t> in_train(train_ids.begin(), train_ids.end());
    std::map<std::size_t, std::size_t> full_size;
    for (const auto& g : split.train) full_size[g.graph_id] = g.messages.num_nodes;
    const FeatureStore store = io::read_features(c.paths.features, c.paths.feature_ids);
    for (const json& j : io::read_jsonl(c.paths.snapshots)) {
      const Snapshot s = io::snapshot_from_json(j);
      if (!in_train.contains(s.base) || !s.graph.label) continue;
      if (s.graph.num_nodes() >= full_size[s.base]) continue;
      split.train.push_back(to_input(s.graph, store, c.train.model));
      ++augmented;
    }
  }

  const TrainResult result = train(c.train, split.train, split.val);
  const json config_json = to_json(c);
  save_checkpoint(c.paths.checkpoint, result.best, config_json);
  const json log = {{"format", "train-log"},
                    {"version", io::kFormatVersion},
                    {"config", config_json},
                    {"log", to_json(result.log)},
                    {"split", {{"train", train_ids}, {"val", graph_ids(split.val)}, {"test", graph_ids(split.test)}}},
                    {"snapshot_graphs", augmented}};
  io::write_atomic(c.paths.report_dir / "train_log.json", log.dump(2) + "\n");
  export_curves(result.log, c.paths.report_dir / "curves.csv");
  io::write_meta(c.paths.report_dir / "curves.csv", "curves", config_json);

  const EpochLog& best = result.log.epochs.at(result.log.best_epoch - 1);
  return {{"epochs", result.log.epochs.size()},
          {"best_epoch", result.log.best_epoch},
          {"best_val_loss", best.val_loss},
          {"best_val_acc", best.val_acc},
          {"train_graphs", split.train.size()},
          {"snapshot_graphs", augmented}};
}

json cmd_evaluate(const RunConfig& config) {
  RunConfig c = config.resolved();
  const ModelParams params = load_checkpoint(c.paths.checkpoint);
  c.train.model = params.config;
  const std::vector<GraphInput> inputs = load_inputs(c);
  std::vector<GraphInput> chosen;
  if (c.eval_split == "all") {
    chosen = inputs;
  } else {
    const Split<GraphInput> split = split_dataset(inputs, c.train.split, c.train.seed);
    chosen = c.eval_split == "train" ? split.train : c.eval_split == "val" ? split.val : split.test;
  }
  if (chosen.empty()) throw DataError("evaluation split '" + c.eval_split + "' is empty");
  const MetricsReport report = evaluate(params, chosen);
  const auto names = class_names(params.config.classes);
  const json metrics = to_json(report, names);
  const json doc = {{"format", "metrics"},
                    {"version", io::kFormatVersion},
                    {"config", to_json(c)},
                    {"model_config", to_json(params.config)},
                    {"split", c.eval_split},
                    {"graph_ids", graph_ids(chosen)},
                    {"classes", names},
                    {"metrics", metrics}};
  io::write_atomic(c.paths.report_dir / "metrics.json", doc.dump(2) + "\n");
  return {{"split", c.eval_split},
          {"total", report.total},
          {"accuracy", report.accuracy},
          {"micro_f1", report.micro_f1},
          {"macro_f1", report.macro_f1}};
}

json cmd_export_curves(const RunConfig& config) {
  const RunConfig c = config.resolved();
  const json doc = json::parse(io::read_file(c.paths.report_dir / "train_log.json"), nullptr, false);
  if (doc.is_discarded() || !doc.contains("log")) throw DataError("train_log.json is not a training log");
  TrainLog log;
  try {
    log = train_log_from_json(doc.at("log"));
  } catch (const json::exception& e) {
    throw DataError(std::string("bad training log: ") + e.what());
  }
  const fs::path out = c.paths.report_dir / "curves.csv";
  export_curves(log, out);
  io::write_meta(out, "curves", doc.value("config", json::object()));
  return {{"curves", out.string()}, {"rows", log.epochs.size()}, {"best_epoch", log.best_epoch}};
}

// ---- argv entry point ------------------------------------------------------

namespace {

enum class FlagType { text, number, list };

struct Flag {
  const char* name;
  const char* pointer;  // JSON pointer into the run config
  FlagType type;
  const char* help;
};

constexpr Flag kFlags[] = {
    {"--work-dir", "/paths/work_dir", FlagType::text, "directory for derived default paths"},
    {"--corpus-dir", "/paths/corpus_dir", FlagType::text, "record files directory"},
    {"--post-sets", "/paths/post_sets", FlagType::text, "post-set file"},
    {"--graphs", "/paths/graphs", FlagType::text, "graph file"},
    {"--snapshots", "/paths/snapshots", FlagType::text, "snapshot file"},
    {"--features", "/paths/features", FlagType::text, "NFV1 feature file"},
    {"--feature-ids", "/paths/feature_ids", FlagType::text, "NFV1 id sidecar"},
    {"--pairs", "/paths/pairs", FlagType::text, "sentence-pair output"},
    {"--checkpoint", "/paths/checkpoint", FlagType::text, "model checkpoint"},
    {"--report-dir", "/paths/report_dir", FlagType::text, "reports directory"},
    {"--in-dim", "/in_dim", FlagType::number, "input feature dimension"},
    {"--hidden", "/hidden", FlagType::number, "hidden channels"},
    {"--edge-hidden", "/edge_hidden", FlagType::number, "edge MLP width"},
    {"--classes", "/classes", FlagType::number, "output classes"},
    {"--heads", "/heads", FlagType::number, "attention heads"},
    {"--depth", "/depth", FlagType::number, "convolution layers"},
    {"--dropout", "/dropout", FlagType::number, "dropout probability"},
    {"--architecture", "/architecture", FlagType::text, "edge_attention | graphsage"},
    {"--neighborhood", "/neighborhood", FlagType::text, "directed | undirected"},
    {"--attention-variant", "/attention_variant", FlagType::text, "learned | attrmean"},
    {"--lr", "/lr", FlagType::number, "learning rate"},
    {"--weight-decay", "/weight_decay", FlagType::number, "AdamW decoupled weight decay"},
    {"--batch-size", "/batch_size", FlagType::number, "graphs per batch"},
    {"--max-epochs", "/max_epochs", FlagType::number, "epoch limit"},
    {"--patience", "/patience", FlagType::number, "early-stopping patience"},
    {"--split", "/split", FlagType::list, "train,val,test ratios"},
    {"--seed", "/seed", FlagType::number, "run seed"},
    {"--snapshot-interval", "/snapshot_interval", FlagType::number, "snapshot spacing in seconds"},
    {"--neg-per-pos", "/neg_per_pos", FlagType::number, "negatives per positive pair"},
    {"--eval-split", "/eval_split", FlagType::text, "train | val | test | all"},
    {"--n-graphs", "/synth/n_graphs", FlagType::number, "synthetic post sets"},
    {"--n-classes", "/synth/n_classes", FlagType::number, "synthetic classes"},
    {"--nodes-range", "/synth/nodes_range", FlagType::list, "min,max nodes per synthetic graph"},
    {"--feature-dim", "/synth/feature_dim", FlagType::number, "synthetic feature dimension"},
    {"--signal-strength", "/synth/signal_strength", FlagType::number, "class signal magnitude"},
    {"--signal-mode", "/synth/signal_mode", FlagType::text, "node | edge"},
    {"--noise", "/synth/noise", FlagType::number, "per-dimension feature noise"},
    {"--offset-noise", "/synth/offset_noise", FlagType::number, "edge-mode offset noise"},
    {"--retweet-fraction", "/synth/retweet_fraction", FlagType::number, "share of retweet members"},
    {"--synth-seed", "/synth/seed", FlagType::number, "synthetic corpus seed"},
};

json parse_number(const std::string& flag, const std::string& text) {
  const json v = json::parse(text, nullptr, false);
  if (v.is_discarded() || !v.is_number()) throw ConfigError(flag + " expects a number, got '" + text + "'");
  return v;
}

json flag_value(const Flag& f, const std::string& text) {
  switch (f.type) {
    case FlagType::text:
      return text;
    case FlagType::number:
      return parse_number(f.name, text);
    case FlagType::list: {
      json arr = json::array();
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) arr.push_back(parse_number(f.name, item));
      return arr;
    }
  }
  return nullptr;
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const DataError&) {
    throw ConfigError("cannot read config file " + path);
  }
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file " + path + " is not valid JSON");
  return j;
}

void report_error(std::ostream& err, std::string_view kind, const std::string& message) {
  err << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rumor propagation graph toolkit", "rumorctl"};
  app.require_subcommand(1);
  std::string config_file;
  app.add_option("--config", config_file, "JSON run config; flags override its values");
  std::vector<std::string> values(std::size(kFlags));
  for (std::size_t i = 0; i < std::size(kFlags); ++i) {
    app.add_option(kFlags[i].name, values[i], kFlags[i].help);
  }
  bool augment = false;
  CLI::Option* augment_opt = app.add_flag("--augment-snapshots", augment, "emit and train on snapshot graphs");

  using Command = json (*)(const RunConfig&);
  const std::vector<std::tuple<const char*, const char*, Command>> commands = {
      {"ingest", "records -> labelled post sets", cmd_ingest},
      {"build-graphs", "post sets -> propagation graphs (+ snapshots)", cmd_build_graphs},
      {"gen-pairs", "post sets -> sentence-pair corpus", cmd_gen_pairs},
      {"synth", "write a synthetic corpus with NFV1 features", cmd_synth},
      {"train", "train and checkpoint the best-validation model", cmd_train},
      {"evaluate", "metrics report for a checkpoint", cmd_evaluate},
      {"export-curves", "training curves as CSV", cmd_export_curves},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, help, fn] : commands) subs.push_back(app.add_subcommand(name, help)->fallthrough());

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    report_error(err, "bad_config", e.what());
    return static_cast<int>(ExitCode::bad_config);
  }

  try {
    json j = load_config_file(config_file);
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
    for (std::size_t i = 0; i < std::size(kFlags); ++i) {
      if (app.get_option(kFlags[i].name)->count() > 0) {
        j[json::json_pointer(kFlags[i].pointer)] = flag_value(kFlags[i], values[i]);
      }
    }
    if (augment_opt->count() > 0) j["augment_snapshots"] = augment;
    const RunConfig config = run_config_from_json(j);
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (subs[i]->parsed()) {
        out << std::get<2>(commands[i])(config).dump() << "\n";
        break;
      }
    }
    return static_cast<int>(ExitCode::ok);
  } catch (const ConfigError& e) {
    report_error(err, "bad_config", e.what());
    return static_cast<int>(ExitCode::bad_config);
  } catch (const NumericError& e) {
    report_error(err, "numeric_failure", e.what());
    return static_cast<int>(ExitCode::numeric_failure);
  } catch (const DataError& e) {
    report_error(err, "bad_input", e.what());
    return static_cast<int>(ExitCode::bad_input);
  } catch (const json::exception& e) {
    report_error(err, "bad_input", e.what());
    return static_cast<int>(ExitCode::bad_input);
  } catch (const fs::filesystem_error& e) {
    report_error(err, "bad_input", e.what());
    return static_cast<int>(ExitCode::bad_input);
  }
}

}  // namespace rumor::cli
