#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "rumor/errors.hpp"
#include "rumor/synth.hpp"
#include "rumor/train.hpp"

namespace rumor::cli {

// Every path may be left empty; resolve() fills it from work_dir.
struct Paths {
  std::filesystem::path work_dir = ".";
  std::filesystem::path corpus_dir;   // record files (+ features for synth)
  std::filesystem::path post_sets;    // ingest output
  std::filesystem::path graphs;       // build-graphs output
  std::filesystem::path snapshots;    // build-graphs output with augment_snapshots
  std::filesystem::path features;     // NFV1
  std::filesystem::path feature_ids;  // NFV1 sidecar
  std::filesystem::path pairs;        // gen-pairs output
  std::filesystem::path checkpoint;
  std::filesystem::path report_dir;   // train log, curves, metrics
};

struct RunConfig {
  TrainConfig train;
  Paths paths;
  bool augment_snapshots = false;
  std::int64_t snapshot_interval = kSnapshotInterval;
  std::size_t neg_per_pos = 5;
  std::string eval_split = "test";  // train | val | test | all
  SynthConfig synth;

  void validate() const;  // ConfigError
  // Copy with every empty path derived from work_dir.
  RunConfig resolved() const;
};

nlohmann::json to_json(const RunConfig& c);
// Missing keys keep their defaults; unknown top-level keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);

// Each command reads and writes the files named by the (resolved) config and
// returns a short JSON summary.
nlohmann::json cmd_ingest(const RunConfig& config);
nlohmann::json cmd_build_graphs(const RunConfig& config);
nlohmann::json cmd_gen_pairs(const RunConfig& config);
nlohmann::json cmd_synth(const RunConfig& config);
nlohmann::json cmd_train(const RunConfig& config);
nlohmann::json cmd_evaluate(const RunConfig& config);
nlohmann::json cmd_export_curves(const RunConfig& config);

// Labelled graphs from the graph file with features attached, in file order.
std::vector<GraphInput> load_inputs(const RunConfig& config);

// Parses argv, runs one subcommand, prints its summary to `out` and failures
// as a single JSON line to `err`. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rumor::cli
