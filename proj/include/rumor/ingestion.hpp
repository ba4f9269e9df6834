#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rumor {

// UTC seconds since the Unix epoch.
using Timestamp = std::int64_t;

inline constexpr std::size_t kNumClasses = 5;

// Model class order; index = class id.
inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "False", "Pants on Fire", "Half True", "Mostly False", "Mostly True"};

// Class index for a verdict string, or nullopt when the verdict is not one of
// the five modelled classes (including "True").
std::optional<int> verdict_class(std::string_view verdict);

// Accepts integer seconds, digit strings, and ISO-like "YYYY-MM-DD",
// "YYYY-MM-DD[ T]HH:MM[:SS[.fff]][Z|+HH:MM|-HH:MM| UTC]".
std::optional<Timestamp> parse_timestamp(std::string_view text);

// Numeric tweet id from a status URL (".../status/<digits>") or a bare id.
std::optional<std::string> tweet_id_from_link(std::string_view link);

struct FactCheckRecord {
  std::string verdict;
  int label = 0;
  std::string statement;
  std::string statement_originator;
  std::optional<Timestamp> statement_date;
  std::string factchecker_name;
  std::optional<Timestamp> factcheck_date;
  std::vector<std::string> topics;
  std::int64_t page = 0;
  std::string factcheck_analysis_link;
  std::optional<Timestamp> date_retrieved;
  std::vector<std::string> oursource_links;
  std::vector<std::string> translate_links;
  std::vector<std::string> translate_twitter_links;
  // Tweet ids parsed from translate_twitter_links, same order.
  std::vector<std::string> tweet_ids;
};

struct TweetRecord {
  std::string id;
  std::string link;
  Timestamp date = 0;
  std::string user_id;
  std::string username;
  std::string tweet;
  std::int64_t replies = 0;
  std::int64_t retweets = 0;
  std::int64_t likes = 0;
  std::int64_t quoted = 0;
  std::string language;
  std::string quote_url;
  std::string reply_url;
  // Remaining text fields (place, mentions, hashtags, ...), verbatim.
  std::map<std::string, std::string> extra;
};

struct CommentRecord {
  std::string post_id;
  std::string comment_id;
  std::string user_id;
  std::string comment;
  std::string reply_to;
  Timestamp date = 0;
  std::string source;
  std::int64_t retweets = 0;
  std::int64_t likes = 0;
  std::int64_t replies = 0;
  std::string mentions;
  std::string thread_id;
  std::string reply_post_id;
};

struct RepostRecord {
  std::string post_id;
  std::string user_id;
  std::string name;
  std::string username;
  // Not part of the collected schema; honoured when present.
  std::optional<Timestamp> date;

  // Synthetic node id: "repost:<post_id>:<user_id>".
  std::string node_id() const;
};

struct UserRecord {
  std::string id;
  std::string name;
  std::string username;
  std::int64_t tweets = 0;
  std::int64_t following = 0;
  std::int64_t followers = 0;
  std::int64_t likes = 0;
  std::int64_t media = 0;
  bool is_private = false;
  bool verified = false;
  std::map<std::string, std::string> extra;
};

enum class RecordKind { factcheck, tweet, comment, repost, user };
std::string_view to_string(RecordKind kind);

struct QuarantineEntry {
  RecordKind kind;
  std::size_t line_no = 0;  // 1-based; 0 for records rejected after loading
  std::string reason;
};

struct CorpusPaths {
  // An empty path means "no records of this kind".
  std::filesystem::path factchecks;
  std::filesystem::path tweets;
  std::filesystem::path comments;
  std::filesystem::path reposts;
  std::filesystem::path users;
};

struct LineCounts {
  std::size_t factchecks = 0;
  std::size_t tweets = 0;
  std::size_t comments = 0;
  std::size_t reposts = 0;
  std::size_t users = 0;
};

struct RawCorpus {
  std::vector<FactCheckRecord> factchecks;
  std::vector<TweetRecord> tweets;
  std::vector<CommentRecord> comments;
  std::vector<RepostRecord> reposts;
  std::vector<UserRecord> users;

  std::unordered_map<std::string, std::size_t> tweet_index;
  std::unordered_map<std::string, std::size_t> comment_index;
  std::unordered_map<std::string, std::size_t> user_index;

  std::vector<QuarantineEntry> quarantine;
  // Non-blank input lines seen per kind.
  LineCounts input_lines;

  const TweetRecord* find_tweet(const std::string& id) const;
  const CommentRecord* find_comment(const std::string& id) const;
};

// Parses the five line-delimited JSON record files. Malformed lines and
// duplicate ids are quarantined, never silently dropped; a missing file throws
// DataError.
RawCorpus load_corpus(const CorpusPaths& paths);

// Same parsers over in-memory line sets (used by tests and load_corpus).
void ingest_lines(RawCorpus& corpus, RecordKind kind, const std::vector<std::string>& lines);

enum class MemberKind { source, reply, retweet };
std::string_view to_string(MemberKind kind);
std::optional<MemberKind> member_kind_from_string(std::string_view s);

struct PostMember {
  std::string id;
  std::string parent_id;  // empty for the source
  MemberKind kind = MemberKind::source;
  Timestamp ts = 0;
  std::string text;
  std::string user_id;
};

// A source tweet and all of its responsive tweets, ordered by (ts, id).
struct PostSet {
  PostMember source;
  std::vector<PostMember> members;
};

struct RejectedPostSet {
  std::string source_id;
  std::string reason;
};

struct JoinResult {
  std::vector<PostSet> sets;  // ordered by source id
  std::vector<RejectedPostSet> rejected;
  std::vector<QuarantineEntry> quarantined;
};

JoinResult join_post_sets(const RawCorpus& corpus);

struct LabeledPostSet {
  PostSet set;
  std::optional<int> label;
  std::string verdict;
};

struct LabelResult {
  std::vector<LabeledPostSet> sets;
  std::vector<RejectedPostSet> rejected;  // conflicting verdicts
};

LabelResult label_post_sets(const std::vector<PostSet>& sets,
                            const std::vector<FactCheckRecord>& factchecks);

}  // namespace rumor
