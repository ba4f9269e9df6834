#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "rumor/errors.hpp"
#include "rumor/synth.hpp"

using namespace rumor;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

SynthConfig small(SignalMode mode, double signal, std::size_t n, std::uint64_t seed) {
  SynthConfig c;
  c.n_graphs = n;
  c.feature_dim = 16;
  c.signal_strength = signal;
  c.mode = mode;
  c.seed = seed;
  return c;
}

std::vector<double> source_row(const FeaturedGraph& g) {
  const auto r = g.features.row(0);
  return {r.begin(), r.end()};
}

std::vector<double> mean_edge_offset(const FeaturedGraph& g) {
  std::vector<double> out(g.features.cols(), 0.0);
  for (const auto& e : g.graph.edges) {
    for (std::size_t d = 0; d < out.size(); ++d) out[d] += g.features(e.src, d) - g.features(e.dst, d);
  }
  for (double& v : out) v /= static_cast<double>(std::max<std::size_t>(1, g.graph.edges.size()));
  return out;
}

double dist2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Nearest-centroid probe: centroids from the first `n_fit` graphs, accuracy on the rest.
template <typename Feature>
double probe_accuracy(const std::vector<FeaturedGraph>& graphs, std::size_t n_fit, Feature feature) {
  std::map<int, std::vector<double>> sum;
  std::map<int, double> count;
  for (std::size_t i = 0; i < n_fit; ++i) {
    const auto f = feature(graphs[i]);
    auto& s = sum[*graphs[i].graph.label];
    s.resize(f.size(), 0.0);
    for (std::size_t d = 0; d < f.size(); ++d) s[d] += f[d];
    count[*graphs[i].graph.label] += 1;
  }
  for (auto& [c, s] : sum) {
    for (double& v : s) v /= count[c];
  }
  std::size_t correct = 0;
  for (std::size_t i = n_fit; i < graphs.size(); ++i) {
    const auto f = feature(graphs[i]);
    int best = -1;
    double best_d = 0.0;
    for (const auto& [c, s] : sum) {
      const double d = dist2(f, s);
      if (best < 0 || d < best_d) best = c, best_d = d;
    }
    correct += best == *graphs[i].graph.label;
  }
  return static_cast<double>(correct) / static_cast<double>(graphs.size() - n_fit);
}

}  // namespace

TEST_CASE("same seed, same corpus") {
  const SynthConfig c = small(SignalMode::edge, 1.0, 30, 9);
  const SynthCorpus a = synthesize(c);
  const SynthCorpus b = synthesize(c);
  CHECK(a.tweets == b.tweets);
  CHECK(a.comments == b.comments);
  CHECK(a.features.data == b.features.data);
  const fs::path root = fs::temp_directory_path() / "rumor_synth_test";
  fs::remove_all(root);
  write_synth(a, root / "a");
  write_synth(b, root / "b");
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    CHECK(slurp(entry.path()) == slurp(root / "b" / entry.path().filename()));
  }
  SynthConfig other = c;
  other.seed = 10;
  CHECK_FALSE(synthesize(other).features.data == a.features.data);
}

TEST_CASE("the corpus survives ingestion intact") {
  const SynthConfig c = small(SignalMode::node, 1.0, 50, 2);
  const SynthCorpus corpus = synthesize(c);
  const auto graphs = synth_featured_graphs(corpus, c.feature_dim);
  REQUIRE(graphs.size() == 50);
  std::map<int, int> per_class;
  for (const auto& g : graphs) {
    CHECK(g.graph.num_nodes() >= c.min_nodes);
    CHECK(g.graph.num_nodes() <= c.max_nodes);
    CHECK(g.features.cols() == 16);
    REQUIRE(g.graph.label.has_value());
    ++per_class[*g.graph.label];
  }
  for (int k = 0; k < 5; ++k) CHECK(per_class[k] == 10);
}

TEST_CASE("node signal is visible at the source") {
  const auto corpus = synthesize(small(SignalMode::node, 3.0, 200, 3));
  const auto graphs = synth_featured_graphs(corpus, 16);
  CHECK(probe_accuracy(graphs, 150, source_row) >= 0.9);
}

TEST_CASE("edge signal lives only in parent-child differences") {
  const auto corpus = synthesize(small(SignalMode::edge, 1.0, 300, 4));
  const auto graphs = synth_featured_graphs(corpus, 16);
  CHECK(probe_accuracy(graphs, 200, mean_edge_offset) >= 0.9);
  CHECK(probe_accuracy(graphs, 200, source_row) < 0.4);
}

TEST_CASE("zero signal is at chance") {
  const auto corpus = synthesize(small(SignalMode::node, 0.0, 400, 5));
  const auto graphs = synth_featured_graphs(corpus, 16);
  const double acc = probe_accuracy(graphs, 200, source_row);
  CHECK(acc > 0.1);
  CHECK(acc < 0.3);
}

TEST_CASE("synth config validation and JSON") {
  SynthConfig c;
  c.n_graphs = 5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SynthConfig{};
  c.min_nodes = 10;
  c.max_nodes = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(signal_mode_from_string("both"), ConfigError);
  const SynthConfig d = small(SignalMode::edge, 0.5, 20, 8);
  const SynthConfig back = synth_config_from_json(to_json(d));
  CHECK(back.mode == SignalMode::edge);
  CHECK(back.signal_strength == 0.5);
  CHECK(back.n_graphs == 20);
  CHECK(back.seed == 8);
}
