#include "rumor/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rumor/errors.hpp"
#include "rumor/io.hpp"
#include "rumor/random.hpp"

namespace rumor {

using nlohmann::json;

std::string_view to_string(Architecture a) {
  return a == Architecture::edge_attention ? "edge_attention" : "graphsage";
}
std::string_view to_string(Neighborhood n) { return n == Neighborhood::directed ? "directed" : "undirected"; }
std::string_view to_string(AttentionVariant v) { return v == AttentionVariant::learned ? "learned" : "attrmean"; }

Architecture architecture_from_string(std::string_view s) {
  if (s == "edge_attention" || s == "sage_edge_attention") return Architecture::edge_attention;
  if (s == "graphsage" || s == "baseline") return Architecture::graphsage;
  throw ConfigError("unknown architecture '" + std::string(s) + "' (edge_attention|graphsage)");
}

Neighborhood neighborhood_from_string(std::string_view s) {
  if (s == "directed") return Neighborhood::directed;
  if (s == "undirected") return Neighborhood::undirected;
  throw ConfigError("unknown neighborhood '" + std::string(s) + "' (directed|undirected)");
}

AttentionVariant attention_variant_from_string(std::string_view s) {
  if (s == "learned") return AttentionVariant::learned;
  if (s == "attrmean") return AttentionVariant::attrmean;
  throw ConfigError("unknown attention_variant '" + std::string(s) + "' (learned|attrmean)");
}

void ModelConfig::validate() const {
  if (in_dim == 0 || hidden == 0 || edge_hidden == 0 || classes == 0 || depth == 0 || heads == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (hidden % heads != 0) {
    throw ConfigError("hidden (" + std::to_string(hidden) + ") must be divisible by heads (" +
                      std::to_string(heads) + ")");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
}

json to_json(const ModelConfig& c) {
  return {{"in_dim", c.in_dim},
          {"hidden", c.hidden},
          {"edge_hidden", c.edge_hidden},
          {"classes", c.classes},
          {"heads", c.heads},
          {"depth", c.depth},
          {"dropout", c.dropout},
          {"architecture", std::string(to_string(c.architecture))},
          {"neighborhood", std::string(to_string(c.neighborhood))},
          {"attention_variant", std::string(to_string(c.attention))}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  try {
    c.in_dim = j.value("in_dim", c.in_dim);
    c.hidden = j.value("hidden", c.hidden);
    c.edge_hidden = j.value("edge_hidden", c.edge_hidden);
    c.classes = j.value("classes", c.classes);
    c.heads = j.value("heads", c.heads);
    c.depth = j.value("depth", c.depth);
    c.dropout = j.value("dropout", c.dropout);
    c.architecture = architecture_from_string(j.value("architecture", std::string(to_string(c.architecture))));
    c.neighborhood = neighborhood_from_string(j.value("neighborhood", std::string(to_string(c.neighborhood))));
    c.attention = attention_variant_from_string(j.value("attention_variant", std::string(to_string(c.attention))));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---- parameters -------------------------------------------------------------

namespace {

template <typename Params, typename Out>
void collect(Params& p, Out& out) {
  for (std::size_t k = 0; k < p.sage.size(); ++k) {
    const std::string prefix = "sage." + std::to_string(k) + ".";
    out.emplace_back(prefix + "w_self", &p.sage[k].w_self);
    out.emplace_back(prefix + "w_neigh", &p.sage[k].w_neigh);
  }
  for (std::size_t k = 0; k < p.attention.size(); ++k) {
    for (std::size_t j = 0; j < p.attention[k].query.size(); ++j) {
      const std::string suffix = std::to_string(k) + ".head" + std::to_string(j);
      out.emplace_back("att." + suffix + ".w_query", &p.attention[k].query[j]);
      out.emplace_back("att." + suffix + ".w_key", &p.attention[k].key[j]);
    }
  }
  if (p.config.architecture == Architecture::edge_attention) {
    out.emplace_back("edge.w1", &p.w1);
    out.emplace_back("edge.b1", &p.b1);
    out.emplace_back("edge.w2", &p.w2);
    out.emplace_back("edge.b2", &p.b2);
    out.emplace_back("combine.w3", &p.w3);
  }
  out.emplace_back("out.w4", &p.w4);
}

void glorot(Tensor& t, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
  for (double& v : t.values()) v = uniform(rng, -limit, limit);
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> ModelParams::named() {
  std::vector<std::pair<std::string, Tensor*>> out;
  collect(*this, out);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  collect(*this, out);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named()) n += t->size();
  return n;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams p;
  p.config = config;
  const std::size_t h = config.hidden;
  for (std::size_t k = 0; k < config.depth; ++k) {
    const std::size_t d_in = k == 0 ? config.in_dim : h;
    p.sage.push_back({Tensor(d_in, h), Tensor(d_in, h)});
  }
  if (config.architecture == Architecture::edge_attention) {
    const std::size_t head_dim = h / config.heads;
    for (std::size_t k = 0; k < config.depth; ++k) {
      AttentionParams a;
      for (std::size_t j = 0; j < config.heads; ++j) {
        a.query.emplace_back(h, head_dim);
        a.key.emplace_back(h, head_dim);
      }
      p.attention.push_back(std::move(a));
    }
    p.w1 = Tensor(config.in_dim, config.edge_hidden);
    p.b1 = Tensor(1, config.edge_hidden);
    p.w2 = Tensor(config.edge_hidden, config.edge_hidden);
    p.b2 = Tensor(1, config.edge_hidden);
    p.w3 = Tensor(h + config.edge_hidden, h);
  }
  p.w4 = Tensor(h, config.classes);

  Rng rng(seed);
  for (auto& [name, t] : p.named()) {
    const bool bias = name == "edge.b1" || name == "edge.b2";
    if (!bias) glorot(*t, rng);
  }
  return p;
}

// ---- graph plumbing -------------------------------------------------------------

MessageGraph message_graph(const StaticGraph& g, Neighborhood mode) {
  std::vector<std::pair<std::size_t, std::size_t>> msgs;  // (receiver, sender)
  msgs.reserve(g.edges.size() * (mode == Neighborhood::undirected ? 2 : 1));
  for (const auto& e : g.edges) {
    msgs.emplace_back(e.dst, e.src);
    if (mode == Neighborhood::undirected) msgs.emplace_back(e.src, e.dst);
  }
  std::sort(msgs.begin(), msgs.end());
  msgs.erase(std::unique(msgs.begin(), msgs.end()), msgs.end());

  MessageGraph m;
  m.num_nodes = g.nodes.size();
  m.segments.offsets.assign(m.num_nodes + 1, 0);
  for (const auto& [r, s] : msgs) {
    m.receivers.push_back(r);
    m.senders.push_back(s);
    ++m.segments.offsets[r + 1];
  }
  std::partial_sum(m.segments.offsets.begin(), m.segments.offsets.end(), m.segments.offsets.begin());
  return m;
}

GraphInput make_input(const FeaturedGraph& g, Neighborhood mode) {
  if (g.features.rows() != g.graph.nodes.size()) {
    throw DataError("graph " + std::to_string(g.graph.graph_id) + ": feature rows do not match node count");
  }
  return GraphInput{g.graph.graph_id, g.features, message_graph(g.graph, mode), g.graph.label};
}

EdgeAttrTable compute_edge_attrs(const Tensor& features, const MessageGraph& messages, const ModelParams& params) {
  if (params.config.architecture != Architecture::edge_attention) {
    throw ConfigError("edge attributes need the edge-attention architecture");
  }
  if (features.rows() != messages.num_nodes || features.cols() != params.config.in_dim) {
    throw DataError("edge attrs: features " + shape_string(features) + " do not match graph of " +
                    std::to_string(messages.num_nodes) + " nodes, dim " + std::to_string(params.config.in_dim));
  }
  const std::size_t e = messages.receivers.size();
  EdgeAttrTable table{Tensor(e, features.cols()), Tensor()};
  for (std::size_t m = 0; m < e; ++m) {
    auto out = table.raw.row(m);
    auto rv = features.row(messages.receivers[m]);
    auto ru = features.row(messages.senders[m]);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = rv[c] - ru[c];
  }
  Tensor hidden = kernels::matmul(table.raw, params.w1);
  for (std::size_t r = 0; r < hidden.rows(); ++r) {
    for (std::size_t c = 0; c < hidden.cols(); ++c) hidden(r, c) = std::max(0.0, hidden(r, c) + params.b1(0, c));
  }
  table.transformed = kernels::matmul(hidden, params.w2);
  for (std::size_t r = 0; r < table.transformed.rows(); ++r) {
    for (std::size_t c = 0; c < table.transformed.cols(); ++c) table.transformed(r, c) += params.b2(0, c);
  }
  return table;
}

BoundParams bind(ad::Tape& tape, const ModelParams& params) {
  BoundParams b;
  b.params = &params;
  for (const auto& [name, t] : params.named()) b.vars.push_back(tape.parameter(*t));
  return b;
}

// ---- forward ------------------------------------------------------------------------

namespace {

struct Slots {
  std::vector<std::pair<ad::Var, ad::Var>> sage;
  std::vector<std::vector<std::pair<ad::Var, ad::Var>>> heads;  // (query, key)
  ad::Var w1, b1, w2, b2, w3, w4;
};

Slots unpack(const BoundParams& bound) {
  const ModelParams& p = *bound.params;
  Slots s;
  std::size_t i = 0;
  for (std::size_t k = 0; k < p.sage.size(); ++k, i += 2) s.sage.emplace_back(bound.vars[i], bound.vars[i + 1]);
  for (const auto& layer : p.attention) {
    std::vector<std::pair<ad::Var, ad::Var>> heads;
    for (std::size_t j = 0; j < layer.query.size(); ++j, i += 2) heads.emplace_back(bound.vars[i], bound.vars[i + 1]);
    s.heads.push_back(std::move(heads));
  }
  if (p.config.architecture == Architecture::edge_attention) {
    s.w1 = bound.vars[i++];
    s.b1 = bound.vars[i++];
    s.w2 = bound.vars[i++];
    s.b2 = bound.vars[i++];
    s.w3 = bound.vars[i++];
  }
  s.w4 = bound.vars[i++];
  if (i != bound.vars.size()) throw NumericError("bound parameter count does not match model");
  return s;
}

void check_input(const ModelParams& p, const GraphInput& input) {
  if (input.features.cols() != p.config.in_dim) {
    throw NumericError("layer 0: feature dim " + std::to_string(input.features.cols()) + " but model expects " +
                       std::to_string(p.config.in_dim));
  }
  if (input.features.rows() != input.messages.num_nodes || input.messages.num_nodes == 0) {
    throw NumericError("layer 0: feature rows do not match graph nodes");
  }
}

// relu(h W_self + mean_{u in N(v)} h_u W_neigh), then dropout.
ad::Var sage_layer(ad::Var h, const std::pair<ad::Var, ad::Var>& w, const MessageGraph& msgs, Mode mode,
                   double p_drop, std::uint64_t seed, std::size_t layer) {
  if (h.value().cols() != w.first.value().rows()) {
    throw NumericError("layer " + std::to_string(layer + 1) + ": input width " + std::to_string(h.value().cols()) +
                       " vs weight rows " + std::to_string(w.first.value().rows()));
  }
  ad::Var neigh = ad::segment_mean(h, msgs.segments, msgs.senders);
  ad::Var pre = ad::add(ad::matmul(h, w.first), ad::matmul(neigh, w.second));
  return ad::dropout(ad::relu(pre), p_drop, derive_seed(seed, layer), mode == Mode::train);
}

}  // namespace

ad::Var forward(ad::Tape& tape, const BoundParams& bound, const GraphInput& input, Mode mode, std::uint64_t seed,
                std::vector<LayerTrace>* trace) {
  const ModelParams& p = *bound.params;
  if (p.config.architecture == Architecture::graphsage) return forward_baseline(tape, bound, input, mode, seed);
  check_input(p, input);
  const Slots w = unpack(bound);
  const MessageGraph& msgs = input.messages;
  const std::size_t n = msgs.num_nodes;

  ad::Var features = tape.constant(input.features);
  ad::Var raw = ad::sub(ad::gather_rows(features, msgs.receivers), ad::gather_rows(features, msgs.senders));
  ad::Var edge_attr = ad::affine(ad::relu(ad::affine(raw, w.w1, w.b1)), w.w2, w.b2);

  const double head_scale = 1.0 / std::sqrt(static_cast<double>(p.config.hidden / p.config.heads));
  ad::Var h = features;
  for (std::size_t k = 0; k < p.config.depth; ++k) {
    h = sage_layer(h, w.sage[k], msgs, mode, p.config.dropout, seed, k);

    ad::Var weights;
    if (p.config.attention == AttentionVariant::learned) {
      ad::Var logits;
      for (std::size_t j = 0; j < w.heads[k].size(); ++j) {
        ad::Var q = ad::gather_rows(ad::matmul(h, w.heads[k][j].first), msgs.receivers);
        ad::Var key = ad::gather_rows(ad::matmul(h, w.heads[k][j].second), msgs.senders);
        ad::Var s = ad::row_dot(q, key);
        logits = j == 0 ? s : ad::add(logits, s);
      }
      logits = ad::scale(logits, head_scale / static_cast<double>(w.heads[k].size()));
      weights = ad::segment_softmax(logits, msgs.segments);
    } else {
      weights = ad::segment_softmax(ad::row_mean(edge_attr), msgs.segments);
    }
    ad::Var context = ad::segment_weighted_sum(weights, edge_attr, msgs.segments);
    if (context.value().rows() != n) throw NumericError("layer " + std::to_string(k + 1) + ": context rows");
    h = ad::matmul(ad::concat_cols(h, context), w.w3);

    if (trace != nullptr) trace->push_back({h.value(), weights.value(), context.value()});
  }
  return ad::matmul(ad::relu(ad::select_row(h, 0)), w.w4);
}

ad::Var forward_baseline(ad::Tape& tape, const BoundParams& bound, const GraphInput& input, Mode mode,
                         std::uint64_t seed) {
  const ModelParams& p = *bound.params;
  check_input(p, input);
  const Slots w = unpack(bound);
  ad::Var h = tape.constant(input.features);
  for (std::size_t k = 0; k < p.config.depth; ++k) {
    h = sage_layer(h, w.sage[k], input.messages, mode, p.config.dropout, seed, k);
  }
  return ad::matmul(ad::relu(ad::select_row(h, 0)), w.w4);
}

Tensor predict_logits(const ModelParams& params, const GraphInput& input) {
  ad::Tape tape;
  const BoundParams bound = bind(tape, params);
  return forward(tape, bound, input, Mode::eval, 0).value();
}

LossAndGrad loss_and_grad(const ModelParams& params, const GraphInput& input, Mode mode, std::uint64_t seed) {
  if (!input.label) throw DataError("graph " + std::to_string(input.graph_id) + " has no label");
  ad::Tape tape;
  const BoundParams bound = bind(tape, params);
  ad::Var logits = forward(tape, bound, input, mode, seed);
  ad::Var loss = ad::cross_entropy(logits, static_cast<std::size_t>(*input.label));
  tape.backward(loss);
  LossAndGrad out;
  out.loss = loss.value()(0, 0);
  out.logits = logits.value();
  out.kink_signature = tape.activation_signature();
  for (const ad::Var& v : bound.vars) out.grads.push_back(tape.grad(v));
  return out;
}

// ---- checkpoint ------------------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const json& run_config) {
  json tensors = json::object();
  for (const auto& [name, t] : params.named()) {
    tensors[name] = {{"rows", t->rows()}, {"cols", t->cols()}, {"data", t->values()}};
  }
  json j = {{"format", "rumor-checkpoint"},
            {"version", io::kFormatVersion},
            {"model_config", to_json(params.config)},
            {"run_config", run_config},
            {"tensors", std::move(tensors)}};
  io::write_atomic(path, j.dump() + "\n");
}

ModelParams load_checkpoint(const std::filesystem::path& path, json* run_config) {
  const json j = json::parse(io::read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object() || j.value("format", "") != "rumor-checkpoint") {
    throw DataError(path.string() + " is not a checkpoint");
  }
  if (j.value("version", 0) != io::kFormatVersion) throw DataError("unsupported checkpoint version");
  ModelParams p = init_params(model_config_from_json(j.at("model_config")), 0);
  const json& tensors = j.at("tensors");
  for (auto& [name, t] : p.named()) {
    if (!tensors.contains(name)) throw DataError("checkpoint lacks tensor " + name);
    const json& e = tensors.at(name);
    const auto rows = e.at("rows").get<std::size_t>();
    const auto cols = e.at("cols").get<std::size_t>();
    if (rows != t->rows() || cols != t->cols()) throw DataError("checkpoint tensor " + name + " has wrong shape");
    *t = Tensor(rows, cols, e.at("data").get<std::vector<double>>());
    t->require_finite(name);
  }
  if (run_config != nullptr) *run_config = j.value("run_config", json::object());
  return p;
}

}  // namespace rumor
