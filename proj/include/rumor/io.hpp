#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rumor/graph.hpp"
#include "rumor/ingestion.hpp"

namespace rumor::io {

inline constexpr int kFormatVersion = 1;

// Writes to "<path>.tmp" and renames over `path`; readers never observe a
// partial file.
void write_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

// Line-delimited JSON helpers. Blank lines are skipped on read.
std::string to_jsonl(const std::vector<nlohmann::json>& records);
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

// Provenance sidecar "<path>.meta.json" for line-delimited artifacts, so the
// record files themselves stay one-record-per-line.
std::filesystem::path meta_path(const std::filesystem::path& artifact);
void write_meta(const std::filesystem::path& artifact, const std::string& format,
                const nlohmann::json& config, const nlohmann::json& extra = nlohmann::json::object());

// ---- NFV1 feature files --------------------------------------------------
//
// Bytes: "NFV1", u32 LE row count, u32 LE dim, then rows * dim IEEE-754
// binary32 LE values, row-major. The sidecar is a JSON object whose "ids"
// array names the node of each row.

std::string encode_nfv1(const FeatureStore& store);
FeatureStore decode_nfv1(const std::string& bytes, std::vector<std::string> ids);

void write_features(const std::filesystem::path& nfv1, const std::filesystem::path& sidecar,
                    const FeatureStore& store);
FeatureStore read_features(const std::filesystem::path& nfv1, const std::filesystem::path& sidecar);

// ---- post sets ------------------------------------------------------------

nlohmann::json to_json(const LabeledPostSet& s);
LabeledPostSet post_set_from_json(const nlohmann::json& j);

nlohmann::json to_json(const QuarantineEntry& q);

// ---- graphs -----------------------------------------------------------------

nlohmann::json to_json(const StaticGraph& g);
StaticGraph graph_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Snapshot& s, std::size_t snapshot_index);
Snapshot snapshot_from_json(const nlohmann::json& j);

}  // namespace rumor::io
