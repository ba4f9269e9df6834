#include "rumor/synth.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <cmath>

#include "rumor/errors.hpp"
#include "rumor/io.hpp"
#include "rumor/random.hpp"

namespace rumor {

using nlohmann::json;

std::string_view to_string(SignalMode m) { return m == SignalMode::node ? "node" : "edge"; }

SignalMode signal_mode_from_string(std::string_view s) {
  if (s == "node") return SignalMode::node;
  if (s == "edge") return SignalMode::edge;
  throw ConfigError("unknown signal mode '" + std::string(s) + "' (node|edge)");
}

void SynthConfig::validate() const {
  if (n_graphs < 10) throw ConfigError("synth: n_graphs must be >= 10");
  if (n_classes < 1 || n_classes > kNumClasses) throw ConfigError("synth: n_classes must be in [1, 5]");
  if (min_nodes < 1 || max_nodes < min_nodes) throw ConfigError("synth: need 1 <= min_nodes <= max_nodes");
  if (feature_dim < 1) throw ConfigError("synth: feature_dim must be positive");
  if (signal_strength < 0.0 || noise < 0.0 || offset_noise < 0.0) {
    throw ConfigError("synth: signal_strength and noise must be non-negative");
  }
  if (retweet_fraction < 0.0 || retweet_fraction > 1.0) throw ConfigError("synth: retweet_fraction in [0, 1]");
}

json to_json(const SynthConfig& c) {
  return {{"n_graphs", c.n_graphs},
          {"n_classes", c.n_classes},
          {"nodes_range", {c.min_nodes, c.max_nodes}},
          {"feature_dim", c.feature_dim},
          {"signal_strength", c.signal_strength},
          {"signal_mode", std::string(to_string(c.mode))},
          {"noise", c.noise},
          {"offset_noise", c.offset_noise},
          {"retweet_fraction", c.retweet_fraction},
          {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const json& j) {
  SynthConfig c;
  try {
    c.n_graphs = j.value("n_graphs", c.n_graphs);
    c.n_classes = j.value("n_classes", c.n_classes);
    if (j.contains("nodes_range")) {
      const auto r = j.at("nodes_range").get<std::array<std::size_t, 2>>();
      c.min_nodes = r[0];
      c.max_nodes = r[1];
    }
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.signal_strength = j.value("signal_strength", c.signal_strength);
    c.mode = signal_mode_from_string(j.value("signal_mode", std::string(to_string(c.mode))));
    c.noise = j.value("noise", c.noise);
    c.offset_noise = j.value("offset_noise", c.offset_noise);
    c.retweet_fraction = j.value("retweet_fraction", c.retweet_fraction);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad synth config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

constexpr std::array<std::string_view, 24> kWords = {
    "vote",   "ballot", "claim",  "senator", "report", "fraud",  "video",    "poll",
    "budget", "tax",    "border", "vaccine", "rally",  "speech", "official", "count",
    "state",  "court",  "media",  "source",  "photo",  "law",    "bill",     "debate"};

std::string sentence(Rng& rng, std::size_t words) {
  std::string out;
  for (std::size_t i = 0; i < words; ++i) {
    if (!out.empty()) out += ' ';
    out += kWords[uniform_index(rng, kWords.size())];
  }
  return out;
}

std::string iso_time(Timestamp t) {
  const auto days = std::chrono::floor<std::chrono::days>(std::chrono::sys_seconds(std::chrono::seconds(t)));
  const std::chrono::year_month_day ymd(days);
  const auto secs = t - days.time_since_epoch().count() * 86400;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02lld:%02lld:%02lld", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long long>(secs / 3600), static_cast<long long>((secs / 60) % 60),
                static_cast<long long>(secs % 60));
  return buf;
}

std::vector<double> unit_direction(Rng& rng, std::size_t dim) {
  std::vector<double> d(dim);
  double norm = 0.0;
  for (double& v : d) {
    v = normal01(rng);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : d) v /= norm;
  return d;
}

}  // namespace

SynthCorpus synthesize(const SynthConfig& config) {
  config.validate();
  SynthCorpus out;
  const std::size_t dim = config.feature_dim;
  out.features.dim = dim;

  Rng dir_rng(derive_seed(config.seed, 1));
  for (std::size_t c = 0; c < config.n_classes; ++c) out.class_directions.push_back(unit_direction(dir_rng, dim));

  std::vector<int> labels(config.n_graphs);
  for (std::size_t j = 0; j < labels.size(); ++j) labels[j] = static_cast<int>(j % config.n_classes);
  Rng label_rng(derive_seed(config.seed, 2));
  shuffle(labels, label_rng);
  out.labels = labels;

  Rng rng(derive_seed(config.seed, 3));
  Rng feat_rng(derive_seed(config.seed, 4));
  const Timestamp epoch0 = 1'600'000'000;
  std::vector<std::string> users;

  auto add_features = [&](const std::string& id, const std::vector<double>& v) {
    out.features.ids.push_back(id);
    for (double x : v) out.features.data.push_back(static_cast<float>(x));
  };
  auto noise_vec = [&](double sd) {
    std::vector<double> v(dim);
    for (double& x : v) x = sd * normal01(feat_rng);
    return v;
  };

  for (std::size_t j = 0; j < config.n_graphs; ++j) {
    const int label = labels[j];
    const auto& direction = out.class_directions[static_cast<std::size_t>(label)];
    const std::string source_id = std::to_string(1'000'000'000ULL + j);
    out.source_ids.push_back(source_id);
    const Timestamp t0 = epoch0 + static_cast<Timestamp>(j) * 3600;
    const std::string source_user = "u" + std::to_string(uniform_index(rng, 5000));
    users.push_back(source_user);

    out.tweets.push_back(json{{"id", source_id},
                              {"link", "https://twitter.com/" + source_user + "/status/" + source_id},
                              {"date", iso_time(t0)},
                              {"user_id", source_user},
                              {"username", source_user},
                              {"tweet", sentence(rng, 8)},
                              {"language", "en"}}
                             .dump());
    out.factchecks.push_back(json{{"verdict", std::string(kClassNames[static_cast<std::size_t>(label)])},
                                  {"statement", sentence(rng, 6)},
                                  {"statement_originator", "X posts"},
                                  {"factchecker_name", "synth"},
                                  {"factcheck_date", iso_time(t0 + 86400 * 3).substr(0, 10)},
                                  {"topics", {"synthetic"}},
                                  {"page", static_cast<int>(j / 20 + 1)},
                                  {"factcheck_analysis_link", "https://example.org/factcheck/" + std::to_string(j)},
                                  {"oursource_links", {"https://twitter.com/i/status/" + source_id}},
                                  {"translate_links", {"https://twitter.com/i/status/" + source_id}},
                                  {"translate_twitter_links", {"https://twitter.com/" + source_user + "/status/" + source_id}}}
                                 .dump());

    std::vector<double> source_feat = noise_vec(config.noise);
    if (config.mode == SignalMode::node) {
      for (std::size_t d = 0; d < dim; ++d) source_feat[d] += config.signal_strength * direction[d];
    }
    add_features(source_id, source_feat);

    struct Node {
      std::string id;
      Timestamp ts;
      std::vector<double> feat;
    };
    std::vector<Node> reply_capable = {{source_id, t0, source_feat}};

    const std::size_t n_nodes =
        config.min_nodes + static_cast<std::size_t>(uniform_index(rng, config.max_nodes - config.min_nodes + 1));
    for (std::size_t i = 1; i < n_nodes; ++i) {
      const bool retweet = uniform01(rng) < config.retweet_fraction;
      const Node parent = retweet ? reply_capable.front() : reply_capable[uniform_index(rng, reply_capable.size())];
      const Timestamp ts = parent.ts + 60 + static_cast<Timestamp>(uniform_index(rng, 12 * 3600));
      const std::string user = "u" + std::to_string(uniform_index(rng, 5000));
      users.push_back(user);

      std::vector<double> feat;
      if (config.mode == SignalMode::edge) {
        feat = parent.feat;
        for (std::size_t d = 0; d < dim; ++d) {
          feat[d] += config.signal_strength * direction[d] + config.offset_noise * normal01(feat_rng);
        }
      } else {
        feat = noise_vec(config.noise);
        for (std::size_t d = 0; d < dim; ++d) feat[d] += config.signal_strength * direction[d];
      }

      if (retweet) {
        RepostRecord r{source_id, user, "name " + user, user, ts};
        // Reposts by the same user collapse; keep user ids unique per post.
        r.user_id = user + "_" + std::to_string(i);
        r.username = r.user_id;
        out.reposts.push_back(json{{"post_id", r.post_id},
                                   {"user_id", r.user_id},
                                   {"name", r.name},
                                   {"username", r.username},
                                   {"date", iso_time(ts)}}
                                  .dump());
        add_features(r.node_id(), feat);
      } else {
        const std::string id = std::to_string(2'000'000'000ULL + j * 1000 + i);
        out.comments.push_back(json{{"post_id", source_id},
                                    {"comment_id", id},
                                    {"user_id", user},
                                    {"comment", sentence(rng, 5)},
                                    {"reply_to", parent.id},
                                    {"date", iso_time(ts)},
                                    {"thread_id", source_id},
                                    {"reply_post_id", parent.id}}
                                   .dump());
        add_features(id, feat);
        reply_capable.push_back({id, ts, feat});
      }
    }
  }

  std::sort(users.begin(), users.end());
  users.erase(std::unique(users.begin(), users.end()), users.end());
  for (const auto& u : users) {
    out.users.push_back(json{{"id", u}, {"username", u}, {"followers", static_cast<int>(u.size()) * 10},
                             {"following", 10}, {"private", false}, {"verified", false}}
                            .dump());
  }
  out.features.build_index();
  return out;
}

CorpusPaths synth_corpus_paths(const std::filesystem::path& dir) {
  return {dir / "factchecks.jsonl", dir / "tweets.jsonl", dir / "comments.jsonl", dir / "reposts.jsonl",
          dir / "users.jsonl"};
}

void write_synth(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  const CorpusPaths p = synth_corpus_paths(dir);
  auto lines = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& l : v) s += l + "\n";
    return s;
  };
  io::write_atomic(p.factchecks, lines(corpus.factchecks));
  io::write_atomic(p.tweets, lines(corpus.tweets));
  io::write_atomic(p.comments, lines(corpus.comments));
  io::write_atomic(p.reposts, lines(corpus.reposts));
  io::write_atomic(p.users, lines(corpus.users));
  io::write_features(dir / "features.nfv1", dir / "features.ids.json", corpus.features);
}

std::vector<FeaturedGraph> synth_featured_graphs(const SynthCorpus& corpus, std::size_t feature_dim) {
  RawCorpus raw;
  ingest_lines(raw, RecordKind::factcheck, corpus.factchecks);
  ingest_lines(raw, RecordKind::tweet, corpus.tweets);
  ingest_lines(raw, RecordKind::comment, corpus.comments);
  ingest_lines(raw, RecordKind::repost, corpus.reposts);
  ingest_lines(raw, RecordKind::user, corpus.users);
  if (!raw.quarantine.empty()) throw DataError("synthetic corpus produced quarantined records");
  const JoinResult joined = join_post_sets(raw);
  const LabelResult labelled = label_post_sets(joined.sets, raw.factchecks);
  std::vector<FeaturedGraph> out;
  for (std::size_t i = 0; i < labelled.sets.size(); ++i) {
    const StaticGraph g = build_static_graph(labelled.sets[i], i);
    out.push_back(attach_features(g, table_for_graph(corpus.features, g), feature_dim));
  }
  return out;
}

}  // namespace rumor
