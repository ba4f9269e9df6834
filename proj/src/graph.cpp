#include "rumor/graph.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>
#include <unordered_map>

#include "rumor/errors.hpp"

namespace rumor {

Timestamp StaticGraph::latest_timestamp() const {
  Timestamp latest = nodes.empty() ? 0 : nodes.front().ts;
  for (const auto& n : nodes) latest = std::max(latest, n.ts);
  return latest;
}

void validate(const StaticGraph& g) {
  const std::string where = "graph " + std::to_string(g.graph_id) + ": ";
  if (g.nodes.empty()) throw DataError(where + "no nodes");
  if (g.nodes.front().kind != MemberKind::source) throw DataError(where + "node 0 is not the source");
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (g.nodes[i].index != i) throw DataError(where + "node indices are not dense");
    if (i > 0 && g.nodes[i].kind == MemberKind::source) {
      throw DataError(where + "second source node " + g.nodes[i].tweet_id);
    }
  }
  if (g.label && (*g.label < 0 || *g.label >= static_cast<int>(kNumClasses))) {
    throw DataError(where + "label out of range");
  }
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::vector<std::size_t> parent(g.nodes.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : g.edges) {
    if (e.src >= g.nodes.size() || e.dst >= g.nodes.size()) throw DataError(where + "edge endpoint out of range");
    if (e.src == e.dst) throw DataError(where + "self edge on " + g.nodes[e.src].tweet_id);
    if (e.kind == MemberKind::source) throw DataError(where + "edge of kind source");
    if (!seen.emplace(e.src, e.dst).second) {
      throw DataError(where + "duplicate edge " + g.nodes[e.src].tweet_id + " -> " + g.nodes[e.dst].tweet_id);
    }
    if (g.nodes[e.src].ts < g.nodes[e.dst].ts) {
      throw DataError(where + "tweet " + g.nodes[e.src].tweet_id + " precedes the tweet it responds to (" +
                      g.nodes[e.dst].tweet_id + ")");
    }
    parent[find(e.src)] = find(e.dst);
  }
  for (std::size_t i = 1; i < g.nodes.size(); ++i) {
    if (find(i) != find(0)) throw DataError(where + "tweet " + g.nodes[i].tweet_id + " is disconnected");
  }
}

StaticGraph build_static_graph(const LabeledPostSet& labeled, std::size_t graph_id) {
  const PostSet& set = labeled.set;
  StaticGraph g;
  g.graph_id = graph_id;
  g.label = labeled.label;

  std::vector<const PostMember*> members;
  members.reserve(set.members.size());
  for (const auto& m : set.members) members.push_back(&m);
  std::sort(members.begin(), members.end(), [](const PostMember* a, const PostMember* b) {
    return a->ts != b->ts ? a->ts < b->ts : a->id < b->id;
  });

  std::unordered_map<std::string, std::size_t> index;
  g.nodes.push_back({0, set.source.id, set.source.ts, MemberKind::source});
  index.emplace(set.source.id, 0);
  for (const PostMember* m : members) {
    if (m->kind == MemberKind::source) throw DataError("member " + m->id + " is marked as a source");
    if (!index.emplace(m->id, g.nodes.size()).second) throw DataError("duplicate member id " + m->id);
    g.nodes.push_back({g.nodes.size(), m->id, m->ts, m->kind});
  }
  for (const PostMember* m : members) {
    const std::size_t src = index.at(m->id);
    std::size_t dst = 0;
    if (m->kind == MemberKind::reply) {
      auto it = index.find(m->parent_id);
      if (it == index.end()) {
        throw DataError("tweet " + m->id + " replies to " + m->parent_id + ", which is outside the post set of " +
                        set.source.id);
      }
      dst = it->second;
    }
    g.edges.push_back({src, dst, m->kind});
  }
  std::sort(g.edges.begin(), g.edges.end(), [](const GraphEdge& a, const GraphEdge& b) {
    return a.src != b.src ? a.src < b.src : a.dst < b.dst;
  });
  validate(g);
  return g;
}

Snapshot snapshot_at(const StaticGraph& g, Timestamp cutoff) {
  Snapshot s;
  s.base = g.graph_id;
  s.cutoff = cutoff;
  s.graph.graph_id = g.graph_id;
  s.graph.label = g.label;
  std::vector<std::size_t> remap(g.nodes.size(), SIZE_MAX);
  for (const auto& n : g.nodes) {
    if (n.ts > cutoff && n.index != 0) continue;
    remap[n.index] = s.graph.nodes.size();
    GraphNode copy = n;
    copy.index = s.graph.nodes.size();
    s.graph.nodes.push_back(std::move(copy));
  }
  for (const auto& e : g.edges) {
    if (remap[e.src] == SIZE_MAX || remap[e.dst] == SIZE_MAX) continue;
    s.graph.edges.push_back({remap[e.src], remap[e.dst], e.kind});
  }
  return s;
}

std::vector<Snapshot> snapshot_series(const StaticGraph& g, Timestamp interval) {
  if (interval <= 0) throw DataError("snapshot interval must be positive");
  std::vector<Snapshot> out;
  if (g.nodes.empty()) return out;
  const Timestamp start = g.nodes.front().ts;
  const Timestamp latest = g.latest_timestamp();
  for (Timestamp k = 1;; ++k) {
    const Timestamp cutoff = start + k * interval;
    out.push_back(snapshot_at(g, cutoff));
    if (cutoff >= latest) break;
  }
  return out;
}

std::optional<std::size_t> FeatureStore::row_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void FeatureStore::build_index() {
  index_.clear();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!index_.emplace(ids[i], i).second) throw DataError("duplicate id in feature sidecar: " + ids[i]);
  }
}

FeatureTable table_for_graph(const FeatureStore& store, const StaticGraph& g) {
  FeatureTable table;
  table.dim = store.dim;
  for (const auto& n : g.nodes) {
    auto row = store.row_of(n.tweet_id);
    if (!row) continue;
    const float* src = store.data.data() + *row * store.dim;
    table.rows.emplace(n.index, std::vector<double>(src, src + store.dim));
  }
  return table;
}

FeaturedGraph attach_features(const StaticGraph& g, const FeatureTable& table, std::size_t expected_dim) {
  if (table.dim != expected_dim) {
    throw DataError("feature dim mismatch: table has " + std::to_string(table.dim) + ", config expects " +
                    std::to_string(expected_dim));
  }
  std::string missing;
  FeaturedGraph out{g, Tensor(g.nodes.size(), expected_dim)};
  for (const auto& n : g.nodes) {
    auto it = table.rows.find(n.index);
    if (it == table.rows.end()) {
      missing += (missing.empty() ? "" : ",") + std::to_string(n.index);
      continue;
    }
    if (it->second.size() != expected_dim) {
      throw DataError("feature row for node " + std::to_string(n.index) + " has dim " +
                      std::to_string(it->second.size()) + ", expected " + std::to_string(expected_dim));
    }
    std::copy(it->second.begin(), it->second.end(), out.features.row(n.index).begin());
  }
  if (!missing.empty()) {
    throw DataError("graph " + std::to_string(g.graph_id) + ": missing feature rows for node indices [" +
                    missing + "]");
  }
  out.features.require_finite("node features");
  return out;
}

}  // namespace rumor
