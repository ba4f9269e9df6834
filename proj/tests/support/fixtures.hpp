#pragma once

// Random graphs, features and models shared by the unit and acceptance tests.

#include <cstddef>
#include <string>
#include <vector>

#include "rumor/graph.hpp"
#include "rumor/model.hpp"
#include "rumor/random.hpp"
#include "rumor/tensor.hpp"

namespace fixtures {

inline rumor::Tensor random_tensor(std::size_t rows, std::size_t cols, rumor::Rng& rng, double scale = 1.0) {
  rumor::Tensor t(rows, cols);
  for (double& v : t.values()) v = rumor::uniform(rng, -scale, scale);
  return t;
}

// Valid propagation tree: node i > 0 responds to an earlier reply-capable
// node (a retweet always points at node 0) and is at least as late as it.
inline rumor::StaticGraph random_graph(rumor::Rng& rng, std::size_t n, std::size_t graph_id = 0,
                                       double retweet_fraction = 0.25, rumor::Timestamp span = 48 * 3600) {
  using namespace rumor;
  StaticGraph g;
  g.graph_id = graph_id;
  g.label = static_cast<int>(uniform_index(rng, kNumClasses));
  g.nodes.push_back({0, "s" + std::to_string(graph_id), 1'000'000, MemberKind::source});
  std::vector<std::size_t> reply_capable = {0};
  for (std::size_t i = 1; i < n; ++i) {
    const bool retweet = uniform01(rng) < retweet_fraction;
    const std::size_t parent = retweet ? 0 : reply_capable[uniform_index(rng, reply_capable.size())];
    const Timestamp ts =
        g.nodes[parent].ts + static_cast<Timestamp>(uniform_index(rng, static_cast<std::uint64_t>(span / 4) + 1));
    const MemberKind kind = retweet ? MemberKind::retweet : MemberKind::reply;
    g.nodes.push_back({i, "g" + std::to_string(graph_id) + "n" + std::to_string(i), ts, kind});
    g.edges.push_back({i, parent, kind});
    if (!retweet) reply_capable.push_back(i);
  }
  return g;
}

inline rumor::FeaturedGraph random_featured(rumor::Rng& rng, std::size_t n, std::size_t dim,
                                            std::size_t graph_id = 0) {
  rumor::FeaturedGraph fg{random_graph(rng, n, graph_id), {}};
  fg.features = random_tensor(n, dim, rng);
  return fg;
}

inline rumor::ModelConfig small_config(std::size_t in_dim = 12) {
  rumor::ModelConfig c;
  c.in_dim = in_dim;
  c.hidden = 8;
  c.edge_hidden = 6;
  c.heads = 2;
  c.depth = 2;
  return c;
}

// Same graph with node indices 1..n-1 relabelled by a random permutation and
// the edge list shuffled; node 0 stays the source.
inline rumor::FeaturedGraph permuted(const rumor::FeaturedGraph& fg, rumor::Rng& rng) {
  using namespace rumor;
  const std::size_t n = fg.graph.num_nodes();
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::vector<std::size_t> tail(perm.begin() + 1, perm.end());
  shuffle(tail, rng);
  std::copy(tail.begin(), tail.end(), perm.begin() + 1);  // old index i -> new index perm[i]

  FeaturedGraph out;
  out.graph.graph_id = fg.graph.graph_id;
  out.graph.label = fg.graph.label;
  out.graph.nodes.resize(n);
  out.features = Tensor(n, fg.features.cols());
  for (std::size_t i = 0; i < n; ++i) {
    GraphNode node = fg.graph.nodes[i];
    node.index = perm[i];
    out.graph.nodes[perm[i]] = node;
    for (std::size_t d = 0; d < fg.features.cols(); ++d) out.features(perm[i], d) = fg.features(i, d);
  }
  for (const auto& e : fg.graph.edges) out.graph.edges.push_back({perm[e.src], perm[e.dst], e.kind});
  shuffle(out.graph.edges, rng);
  return out;
}

}  // namespace fixtures
