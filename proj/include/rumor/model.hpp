#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rumor/autodiff.hpp"
#include "rumor/graph.hpp"
#include "rumor/tensor.hpp"

namespace rumor {

enum class Architecture { edge_attention, graphsage };
// directed: N(v) = nodes with an edge into v (its direct responders).
// undirected: responders plus the node v itself responds to.
enum class Neighborhood { directed, undirected };
// learned: per-edge query/key logits, softmax over N(v), weighted edge attrs.
// attrmean: softmax over N(v) of each edge attr's mean, weighted edge attrs.
enum class AttentionVariant { learned, attrmean };

std::string_view to_string(Architecture a);
std::string_view to_string(Neighborhood n);
std::string_view to_string(AttentionVariant v);
Architecture architecture_from_string(std::string_view s);
Neighborhood neighborhood_from_string(std::string_view s);
AttentionVariant attention_variant_from_string(std::string_view s);

struct ModelConfig {
  std::size_t in_dim = 768;
  std::size_t hidden = 64;
  std::size_t edge_hidden = 64;
  std::size_t classes = 5;
  std::size_t heads = 2;
  std::size_t depth = 2;
  double dropout = 0.5;
  Architecture architecture = Architecture::edge_attention;
  Neighborhood neighborhood = Neighborhood::directed;
  AttentionVariant attention = AttentionVariant::learned;

  // Throws ConfigError on inconsistent dimensions.
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct SageLayerParams {
  Tensor w_self;   // d_in x hidden
  Tensor w_neigh;  // d_in x hidden
};

struct AttentionParams {
  std::vector<Tensor> query;  // per head: hidden x hidden/heads
  std::vector<Tensor> key;
};

struct ModelParams {
  ModelConfig config;
  std::vector<SageLayerParams> sage;
  // Edge-attention architecture only.
  std::vector<AttentionParams> attention;
  Tensor w1, b1, w2, b2;  // edge MLP, shared across layers
  Tensor w3;              // (hidden + edge_hidden) x hidden, shared
  Tensor w4;              // hidden x classes

  // Every learnable tensor with a stable name, in a fixed order.
  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;
  std::size_t parameter_count() const;
};

// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero; tensors are
// drawn in named() order from one seeded stream.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

// Messages grouped by receiving node; within a receiver, by sender index.
struct MessageGraph {
  std::size_t num_nodes = 0;
  ad::Segments segments;
  std::vector<std::size_t> receivers;
  std::vector<std::size_t> senders;
};

MessageGraph message_graph(const StaticGraph& g, Neighborhood mode);

// A graph ready for the model.
struct GraphInput {
  std::size_t graph_id = 0;
  Tensor features;  // N x in_dim
  MessageGraph messages;
  std::optional<int> label;
};

GraphInput make_input(const FeaturedGraph& g, Neighborhood mode);

// Per-message first-order differences r_vu = r_v - r_u (v receives from u)
// and their edge-MLP transform relu(r W1 + b1) W2 + b2.
struct EdgeAttrTable {
  Tensor raw;          // E x in_dim
  Tensor transformed;  // E x edge_hidden
};

EdgeAttrTable compute_edge_attrs(const Tensor& features, const MessageGraph& messages, const ModelParams& params);

// Model parameters recorded on a tape, in ModelParams::named() order.
struct BoundParams {
  std::vector<ad::Var> vars;
  const ModelParams* params = nullptr;
};

BoundParams bind(ad::Tape& tape, const ModelParams& params);

enum class Mode { train, eval };

struct LayerTrace {
  Tensor hidden;     // node states after the layer
  Tensor attention;  // E x 1 normalized weights (edge-attention model only)
  Tensor context;    // N x edge_hidden
};

// Full forward pass; returns 1 x classes logits of node 0. Dropout is active
// only in train mode. `trace`, when given, receives one entry per layer.
ad::Var forward(ad::Tape& tape, const BoundParams& bound, const GraphInput& input, Mode mode, std::uint64_t seed,
                std::vector<LayerTrace>* trace = nullptr);

// Forward pass on the plain GraphSAGE head regardless of params.config.architecture
// (the edge tensors, when present, are ignored).
ad::Var forward_baseline(ad::Tape& tape, const BoundParams& bound, const GraphInput& input, Mode mode,
                         std::uint64_t seed);

// Eval-mode logits without keeping a tape around.
Tensor predict_logits(const ModelParams& params, const GraphInput& input);

struct LossAndGrad {
  double loss = 0.0;
  Tensor logits;
  std::vector<Tensor> grads;  // named() order
  std::uint64_t kink_signature = 0;
};

// Cross-entropy of one labelled graph and its gradient for every parameter.
LossAndGrad loss_and_grad(const ModelParams& params, const GraphInput& input, Mode mode, std::uint64_t seed);

// ---- checkpoint ---------------------------------------------------------------

// JSON container {format, version, model_config, run_config, tensors:{name:
// {rows, cols, data}}}. Doubles are written in shortest round-trip form, so
// a save/load cycle is bitwise exact.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const nlohmann::json& run_config = nlohmann::json::object());
ModelParams load_checkpoint(const std::filesystem::path& path, nlohmann::json* run_config = nullptr);

}  // namespace rumor
