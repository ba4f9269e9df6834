#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rumor/ingestion.hpp"
#include "rumor/tensor.hpp"

namespace rumor {

inline constexpr Timestamp kSnapshotInterval = 6 * 3600;

struct GraphNode {
  std::size_t index = 0;
  std::string tweet_id;
  Timestamp ts = 0;
  MemberKind kind = MemberKind::source;

  friend bool operator==(const GraphNode&, const GraphNode&) = default;
};

// Directed responder -> responded-to.
struct GraphEdge {
  std::size_t src = 0;
  std::size_t dst = 0;
  MemberKind kind = MemberKind::reply;

  friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

// Propagation graph of one post set. Node 0 is the source tweet.
struct StaticGraph {
  std::size_t graph_id = 0;
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  std::optional<int> label;

  std::size_t num_nodes() const { return nodes.size(); }
  Timestamp latest_timestamp() const;

  friend bool operator==(const StaticGraph&, const StaticGraph&) = default;
};

// Throws DataError describing the first violated invariant: node 0 is the
// source, indices are dense, edges point from a later (or simultaneous) node
// to an earlier one, no self or duplicate edges, weakly connected.
void validate(const StaticGraph& g);

// One node per tweet (source first, then members by (ts, id)); reply edges go
// to the replied-to node, retweet edges to the source.
StaticGraph build_static_graph(const LabeledPostSet& set, std::size_t graph_id);

struct Snapshot {
  std::size_t base = 0;  // graph_id of the static graph
  Timestamp cutoff = 0;
  // Induced subgraph of nodes with ts <= cutoff, renumbered in original order.
  StaticGraph graph;
};

Snapshot snapshot_at(const StaticGraph& g, Timestamp cutoff);

// Cutoffs t_source + k * interval, k = 1, 2, ..., through the first cutoff at
// or after the latest timestamp. The last snapshot equals g.
std::vector<Snapshot> snapshot_series(const StaticGraph& g, Timestamp interval = kSnapshotInterval);

// ---- node features --------------------------------------------------------

// Feature rows of one graph, keyed by node index.
struct FeatureTable {
  std::size_t dim = 0;
  std::map<std::size_t, std::vector<double>> rows;
};

// Corpus-level features in NFV1 row order plus the id of each row.
struct FeatureStore {
  std::size_t dim = 0;
  std::vector<std::string> ids;
  std::vector<float> data;  // ids.size() * dim, row-major

  std::size_t rows() const { return ids.size(); }
  std::optional<std::size_t> row_of(const std::string& id) const;
  void build_index();

 private:
  std::map<std::string, std::size_t> index_;
};

// Rows for every node of g whose tweet id has features; absent nodes are left
// out (attach_features reports them).
FeatureTable table_for_graph(const FeatureStore& store, const StaticGraph& g);

struct FeaturedGraph {
  StaticGraph graph;
  Tensor features;  // num_nodes x dim
};

// Throws DataError on a dim mismatch or when any node lacks a row (the
// message lists the missing node indices).
FeaturedGraph attach_features(const StaticGraph& g, const FeatureTable& table,
                              std::size_t expected_dim);

}  // namespace rumor
