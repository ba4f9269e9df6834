#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rumor/graph.hpp"
#include "rumor/ingestion.hpp"

namespace rumor {

// node: every feature of a graph is shifted by signal_strength along its
//       class direction.
// edge: the source carries no class signal; each responder's features are
//       its parent's plus signal_strength along the class direction, so the
//       label lives only in parent-child differences.
enum class SignalMode { node, edge };

std::string_view to_string(SignalMode m);
SignalMode signal_mode_from_string(std::string_view s);

struct SynthConfig {
  std::size_t n_graphs = 100;
  std::size_t n_classes = 5;
  std::size_t min_nodes = 3;
  std::size_t max_nodes = 12;
  std::size_t feature_dim = 768;
  double signal_strength = 3.0;
  SignalMode mode = SignalMode::node;
  // Per-dimension standard deviation of the class-free part of each feature.
  double noise = 1.0;
  // edge mode: per-dimension deviation added to each parent-child offset.
  double offset_noise = 0.1;
  double retweet_fraction = 0.25;
  std::uint64_t seed = 1;

  void validate() const;  // ConfigError
};

nlohmann::json to_json(const SynthConfig& c);
SynthConfig synth_config_from_json(const nlohmann::json& j);

struct SynthCorpus {
  std::vector<std::string> factchecks, tweets, comments, reposts, users;  // JSON lines
  FeatureStore features;
  std::vector<int> labels;  // per generated source tweet, in generation order
  std::vector<std::string> source_ids;
  std::vector<std::vector<double>> class_directions;
};

SynthCorpus synthesize(const SynthConfig& config);

// Record files factchecks.jsonl, tweets.jsonl, comments.jsonl,
// reposts.jsonl, users.jsonl plus features.nfv1 and features.ids.json.
void write_synth(const SynthCorpus& corpus, const std::filesystem::path& dir);
CorpusPaths synth_corpus_paths(const std::filesystem::path& dir);

// Runs the synthetic records through ingestion and graph building and
// attaches features; convenience for tests and benchmarks.
std::vector<FeaturedGraph> synth_featured_graphs(const SynthCorpus& corpus, std::size_t feature_dim);

}  // namespace rumor
