#include "rumor/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rumor/errors.hpp"

namespace rumor::io {

using nlohmann::json;

void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string to_jsonl(const std::vector<json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed JSON");
    }
    out.push_back(std::move(j));
  }
  return out;
}

std::filesystem::path meta_path(const std::filesystem::path& artifact) {
  std::filesystem::path p = artifact;
  p += ".meta.json";
  return p;
}

void write_meta(const std::filesystem::path& artifact, const std::string& format, const json& config,
                const json& extra) {
  json meta = extra;
  meta["format"] = format;
  meta["version"] = kFormatVersion;
  meta["config"] = config;
  write_atomic(meta_path(artifact), meta.dump(2) + "\n");
}

// ---- NFV1 -------------------------------------------------------------------

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const std::string& in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)])) << (8 * i);
  }
  return v;
}

}  // namespace

std::string encode_nfv1(const FeatureStore& store) {
  if (store.data.size() != store.ids.size() * store.dim) {
    throw DataError("feature store has " + std::to_string(store.data.size()) + " values for " +
                    std::to_string(store.ids.size()) + " rows of dim " + std::to_string(store.dim));
  }
  std::string out = "NFV1";
  out.reserve(12 + store.data.size() * 4);
  put_u32(out, static_cast<std::uint32_t>(store.ids.size()));
  put_u32(out, static_cast<std::uint32_t>(store.dim));
  for (float f : store.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

FeatureStore decode_nfv1(const std::string& bytes, std::vector<std::string> ids) {
  if (bytes.size() < 12 || bytes.compare(0, 4, "NFV1") != 0) throw DataError("not an NFV1 feature file");
  const std::uint32_t rows = get_u32(bytes, 4);
  const std::uint32_t dim = get_u32(bytes, 8);
  const std::uint64_t expected = 12 + static_cast<std::uint64_t>(rows) * dim * 4;
  if (bytes.size() != expected) {
    throw DataError("NFV1 size " + std::to_string(bytes.size()) + " does not match header (" +
                    std::to_string(rows) + " rows x " + std::to_string(dim) + ")");
  }
  if (ids.size() != rows) {
    throw DataError("NFV1 sidecar lists " + std::to_string(ids.size()) + " ids for " + std::to_string(rows) +
                    " rows");
  }
  FeatureStore store;
  store.dim = dim;
  store.ids = std::move(ids);
  store.data.resize(static_cast<std::size_t>(rows) * dim);
  for (std::size_t i = 0; i < store.data.size(); ++i) {
    store.data[i] = std::bit_cast<float>(get_u32(bytes, 12 + 4 * i));
  }
  store.build_index();
  return store;
}

void write_features(const std::filesystem::path& nfv1, const std::filesystem::path& sidecar,
                    const FeatureStore& store) {
  write_atomic(nfv1, encode_nfv1(store));
  json side = {{"format", "nfv1-ids"}, {"version", kFormatVersion}, {"ids", store.ids}};
  write_atomic(sidecar, side.dump() + "\n");
}

FeatureStore read_features(const std::filesystem::path& nfv1, const std::filesystem::path& sidecar) {
  const json side = json::parse(read_file(sidecar), nullptr, false);
  if (side.is_discarded() || !side.is_object() || !side.contains("ids") || !side["ids"].is_array()) {
    throw DataError("feature sidecar " + sidecar.string() + " has no \"ids\" array");
  }
  std::vector<std::string> ids;
  for (const auto& id : side["ids"]) {
    if (!id.is_string()) throw DataError("feature sidecar ids must be strings");
    ids.push_back(id.get<std::string>());
  }
  return decode_nfv1(read_file(nfv1), std::move(ids));
}

// ---- post sets -----------------------------------------------------------------

namespace {

json member_json(const PostMember& m) {
  json j = {{"id", m.id}, {"kind", std::string(to_string(m.kind))}, {"ts", m.ts}, {"text", m.text},
            {"user_id", m.user_id}};
  j["parent"] = m.parent_id.empty() ? json(nullptr) : json(m.parent_id);
  return j;
}

PostMember member_from_json(const json& j) {
  PostMember m;
  m.id = j.at("id").get<std::string>();
  m.parent_id = j.contains("parent") && !j["parent"].is_null() ? j["parent"].get<std::string>() : "";
  auto kind = member_kind_from_string(j.at("kind").get<std::string>());
  if (!kind) throw DataError("unknown member kind for " + m.id);
  m.kind = *kind;
  m.ts = j.at("ts").get<Timestamp>();
  m.text = j.value("text", "");
  m.user_id = j.value("user_id", "");
  return m;
}

json label_json(const std::optional<int>& label) { return label ? json(*label) : json(nullptr); }

std::optional<int> label_from_json(const json& j) {
  if (!j.contains("label") || j["label"].is_null()) return std::nullopt;
  return j["label"].get<int>();
}

}  // namespace

json to_json(const LabeledPostSet& s) {
  json members = json::array();
  for (const auto& m : s.set.members) members.push_back(member_json(m));
  return {{"source_id", s.set.source.id}, {"label", label_json(s.label)},
          {"verdict", s.verdict.empty() ? json(nullptr) : json(s.verdict)},
          {"source", member_json(s.set.source)}, {"members", std::move(members)}};
}

LabeledPostSet post_set_from_json(const json& j) {
  try {
    LabeledPostSet s;
    s.set.source = member_from_json(j.at("source"));
    for (const auto& m : j.at("members")) s.set.members.push_back(member_from_json(m));
    s.label = label_from_json(j);
    s.verdict = j.contains("verdict") && j["verdict"].is_string() ? j["verdict"].get<std::string>() : "";
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed post set record: ") + e.what());
  }
}

json to_json(const QuarantineEntry& q) {
  return {{"kind", std::string(to_string(q.kind))}, {"line_no", q.line_no}, {"reason", q.reason}};
}

// ---- graphs ---------------------------------------------------------------------

namespace {

json nodes_json(const StaticGraph& g) {
  json nodes = json::array();
  for (const auto& n : g.nodes) {
    nodes.push_back({{"i", n.index}, {"tweet_id", n.tweet_id}, {"ts", n.ts}, {"kind", std::string(to_string(n.kind))}});
  }
  return nodes;
}

json edges_json(const StaticGraph& g) {
  json edges = json::array();
  for (const auto& e : g.edges) {
    edges.push_back({{"src", e.src}, {"dst", e.dst}, {"kind", std::string(to_string(e.kind))}});
  }
  return edges;
}

void read_structure(const json& j, StaticGraph& g) {
  for (const auto& n : j.at("nodes")) {
    auto kind = member_kind_from_string(n.at("kind").get<std::string>());
    if (!kind) throw DataError("unknown node kind");
    g.nodes.push_back({n.at("i").get<std::size_t>(), n.at("tweet_id").get<std::string>(), n.at("ts").get<Timestamp>(),
                       *kind});
  }
  for (const auto& e : j.at("edges")) {
    auto kind = member_kind_from_string(e.at("kind").get<std::string>());
    if (!kind) throw DataError("unknown edge kind");
    g.edges.push_back({e.at("src").get<std::size_t>(), e.at("dst").get<std::size_t>(), *kind});
  }
}

}  // namespace

json to_json(const StaticGraph& g) {
  return {{"graph_id", g.graph_id}, {"label", label_json(g.label)}, {"nodes", nodes_json(g)},
          {"edges", edges_json(g)}};
}

StaticGraph graph_from_json(const json& j) {
  try {
    StaticGraph g;
    g.graph_id = j.at("graph_id").get<std::size_t>();
    g.label = label_from_json(j);
    read_structure(j, g);
    validate(g);
    return g;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed graph record: ") + e.what());
  }
}

json to_json(const Snapshot& s, std::size_t snapshot_index) {
  json j = to_json(s.graph);
  j["base"] = s.base;
  j["cutoff"] = s.cutoff;
  j["snapshot_index"] = snapshot_index;
  return j;
}

Snapshot snapshot_from_json(const json& j) {
  Snapshot s;
  s.graph = graph_from_json(j);
  try {
    s.base = j.at("base").get<std::size_t>();
    s.cutoff = j.at("cutoff").get<Timestamp>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed snapshot record: ") + e.what());
  }
  return s;
}

}  // namespace rumor::io
