#include "rumor/ingestion.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <fstream>
#include <functional>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "rumor/errors.hpp"

namespace rumor {

using nlohmann::json;

namespace {

// Thrown by the field readers; becomes a quarantine reason.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

const json* field(const json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end() || it->is_null()) return nullptr;
  return &*it;
}

std::string id_field(const json& obj, const char* name) {
  const json* v = field(obj, name);
  if (v == nullptr) throw SchemaError(std::string("missing field '") + name + "'");
  if (v->is_string()) {
    std::string s = trim(v->get<std::string>());
    if (s.empty()) throw SchemaError(std::string("empty field '") + name + "'");
    return s;
  }
  if (v->is_number_unsigned()) return std::to_string(v->get<std::uint64_t>());
  if (v->is_number_integer()) return std::to_string(v->get<std::int64_t>());
  throw SchemaError(std::string("field '") + name + "' is not an id");
}

std::string optional_id(const json& obj, const char* name) {
  if (field(obj, name) == nullptr) return {};
  return id_field(obj, name);
}

std::string text_field(const json& obj, const char* name) {
  const json* v = field(obj, name);
  if (v == nullptr) return {};
  if (v->is_string()) return v->get<std::string>();
  if (v->is_number() || v->is_boolean()) return v->dump();
  if (v->is_array()) {
    std::string out;
    for (const auto& e : *v) {
      if (!out.empty()) out += ",";
      out += e.is_string() ? e.get<std::string>() : e.dump();
    }
    return out;
  }
  throw SchemaError(std::string("field '") + name + "' is not text");
}

std::int64_t count_field(const json& obj, const char* name) {
  const json* v = field(obj, name);
  if (v == nullptr) return 0;
  if (v->is_number_integer()) return v->get<std::int64_t>();
  if (v->is_number_float()) {
    const double d = v->get<double>();
    if (d == static_cast<double>(static_cast<std::int64_t>(d))) return static_cast<std::int64_t>(d);
  }
  if (v->is_string()) {
    const std::string s = trim(v->get<std::string>());
    if (s.empty()) return 0;
    std::int64_t out = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec == std::errc{} && p == s.data() + s.size()) return out;
  }
  throw SchemaError(std::string("field '") + name + "' is not a count");
}

bool bool_field(const json& obj, const char* name) {
  const json* v = field(obj, name);
  if (v == nullptr) return false;
  if (v->is_boolean()) return v->get<bool>();
  if (v->is_number_integer()) return v->get<std::int64_t>() != 0;
  if (v->is_string()) {
    std::string s = trim(v->get<std::string>());
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no" || s.empty()) return false;
  }
  throw SchemaError(std::string("field '") + name + "' is not a boolean");
}

std::optional<Timestamp> optional_time(const json& obj, const char* name) {
  const json* v = field(obj, name);
  if (v == nullptr) return std::nullopt;
  if (v->is_number_integer()) return v->get<std::int64_t>();
  if (v->is_string()) {
    const std::string s = v->get<std::string>();
    if (trim(s).empty()) return std::nullopt;
    if (auto t = parse_timestamp(s)) return t;
  }
  throw SchemaError(std::string("unparseable date in '") + name + "'");
}

Timestamp time_field(const json& obj, const char* name) {
  auto t = optional_time(obj, name);
  if (!t) throw SchemaError(std::string("missing field '") + name + "'");
  return *t;
}

std::vector<std::string> list_field(const json& obj, const char* name) {
  const json* v = field(obj, name);
  std::vector<std::string> out;
  if (v == nullptr) return out;
  if (v->is_string()) {
    // Some exports flatten lists into a comma separated string.
    std::string s = v->get<std::string>();
    std::size_t start = 0;
    while (start <= s.size()) {
      const std::size_t comma = s.find(',', start);
      std::string item = trim(std::string_view(s).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (!item.empty()) out.push_back(std::move(item));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return out;
  }
  if (!v->is_array()) throw SchemaError(std::string("field '") + name + "' is not a list");
  for (const auto& e : *v) {
    if (!e.is_string()) throw SchemaError(std::string("field '") + name + "' has a non-text entry");
    out.push_back(e.get<std::string>());
  }
  return out;
}

FactCheckRecord parse_factcheck(const json& j) {
  FactCheckRecord r;
  const json* verdict = field(j, "verdict");
  if (verdict == nullptr || !verdict->is_string()) throw SchemaError("missing field 'verdict'");
  r.verdict = trim(verdict->get<std::string>());
  auto cls = verdict_class(r.verdict);
  if (!cls) throw SchemaError("verdict '" + r.verdict + "' is outside the five modelled classes");
  r.label = *cls;
  r.statement = text_field(j, "statement");
  r.statement_originator = text_field(j, "statement_originator");
  r.statement_date = optional_time(j, "statement_date");
  r.factchecker_name = text_field(j, "factchecker_name");
  r.factcheck_date = optional_time(j, "factcheck_date");
  r.topics = list_field(j, "topics");
  r.page = count_field(j, "page");
  r.factcheck_analysis_link = text_field(j, "factcheck_analysis_link");
  r.date_retrieved = optional_time(j, "date_retrieved");
  r.oursource_links = list_field(j, "oursource_links");
  r.translate_links = list_field(j, "translate_links");
  r.translate_twitter_links = list_field(j, "translate_twitter_links");
  for (const auto& link : r.translate_twitter_links) {
    auto id = tweet_id_from_link(link);
    if (!id) throw SchemaError("translate_twitter_links entry without a tweet id: " + link);
    r.tweet_ids.push_back(*id);
  }
  return r;
}

TweetRecord parse_tweet(const json& j) {
  static const std::set<std::string> known = {
      "id", "link", "date", "user_id", "username", "tweet", "replies", "retweets",
      "likes", "quoted", "language", "quote_url", "reply_url"};
  TweetRecord r;
  r.id = id_field(j, "id");
  r.link = text_field(j, "link");
  r.date = time_field(j, "date");
  r.user_id = optional_id(j, "user_id");
  r.username = text_field(j, "username");
  r.tweet = text_field(j, "tweet");
  r.replies = count_field(j, "replies");
  r.retweets = count_field(j, "retweets");
  r.likes = count_field(j, "likes");
  r.quoted = count_field(j, "quoted");
  r.language = text_field(j, "language");
  r.quote_url = text_field(j, "quote_url");
  r.reply_url = text_field(j, "reply_url");
  for (const auto& [key, value] : j.items()) {
    if (known.count(key) == 0 && !value.is_null()) r.extra[key] = text_field(j, key.c_str());
  }
  return r;
}

CommentRecord parse_comment(const json& j) {
  CommentRecord r;
  r.post_id = id_field(j, "post_id");
  r.comment_id = id_field(j, "comment_id");
  r.user_id = optional_id(j, "user_id");
  r.comment = text_field(j, "comment");
  r.reply_to = text_field(j, "reply_to");
  r.date = time_field(j, "date");
  r.source = text_field(j, "source");
  r.retweets = count_field(j, "retweets");
  r.likes = count_field(j, "likes");
  r.replies = count_field(j, "replies");
  r.mentions = text_field(j, "mentions");
  r.thread_id = optional_id(j, "thread_id");
  r.reply_post_id = id_field(j, "reply_post_id");
  return r;
}

RepostRecord parse_repost(const json& j) {
  RepostRecord r;
  r.post_id = id_field(j, "post_id");
  r.user_id = id_field(j, "user_id");
  r.name = text_field(j, "name");
  r.username = text_field(j, "username");
  r.date = optional_time(j, "date");
  return r;
}

UserRecord parse_user(const json& j) {
  static const std::set<std::string> known = {"id", "name", "username", "tweets", "following",
                                              "followers", "likes", "media", "private", "verified"};
  UserRecord r;
  r.id = id_field(j, "id");
  r.name = text_field(j, "name");
  r.username = text_field(j, "username");
  r.tweets = count_field(j, "tweets");
  r.following = count_field(j, "following");
  r.followers = count_field(j, "followers");
  r.likes = count_field(j, "likes");
  r.media = count_field(j, "media");
  r.is_private = bool_field(j, "private");
  r.verified = bool_field(j, "verified");
  for (const auto& [key, value] : j.items()) {
    if (known.count(key) == 0 && !value.is_null()) r.extra[key] = text_field(j, key.c_str());
  }
  return r;
}

std::size_t& line_counter(LineCounts& c, RecordKind kind) {
  switch (kind) {
    case RecordKind::factcheck: return c.factchecks;
    case RecordKind::tweet: return c.tweets;
    case RecordKind::comment: return c.comments;
    case RecordKind::repost: return c.reposts;
    case RecordKind::user: return c.users;
  }
  throw std::logic_error("unknown record kind");
}

void ingest_one(RawCorpus& corpus, RecordKind kind, const json& j) {
  auto duplicate = [](const std::string& id) { throw SchemaError("duplicate id " + id + " (first kept)"); };
  switch (kind) {
    case RecordKind::factcheck:
      corpus.factchecks.push_back(parse_factcheck(j));
      break;
    case RecordKind::tweet: {
      TweetRecord r = parse_tweet(j);
      if (corpus.tweet_index.count(r.id) != 0) duplicate(r.id);
      corpus.tweet_index.emplace(r.id, corpus.tweets.size());
      corpus.tweets.push_back(std::move(r));
      break;
    }
    case RecordKind::comment: {
      CommentRecord r = parse_comment(j);
      if (corpus.comment_index.count(r.comment_id) != 0) duplicate(r.comment_id);
      corpus.comment_index.emplace(r.comment_id, corpus.comments.size());
      corpus.comments.push_back(std::move(r));
      break;
    }
    case RecordKind::repost:
      corpus.reposts.push_back(parse_repost(j));
      break;
    case RecordKind::user: {
      UserRecord r = parse_user(j);
      if (corpus.user_index.count(r.id) != 0) duplicate(r.id);
      corpus.user_index.emplace(r.id, corpus.users.size());
      corpus.users.push_back(std::move(r));
      break;
    }
  }
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open record file " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(std::move(line));
  return lines;
}

}  // namespace

std::optional<int> verdict_class(std::string_view verdict) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i) {
    if (kClassNames[i].size() != verdict.size()) continue;
    bool eq = true;
    for (std::size_t k = 0; k < verdict.size() && eq; ++k) {
      eq = std::tolower(static_cast<unsigned char>(kClassNames[i][k])) ==
           std::tolower(static_cast<unsigned char>(verdict[k]));
    }
    if (eq) return static_cast<int>(i);
  }
  return std::nullopt;
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  const std::string s = trim(text);
  if (s.empty()) return std::nullopt;
  if (all_digits(s) || (s[0] == '-' && all_digits(std::string_view(s).substr(1)))) {
    Timestamp out = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc{}) return std::nullopt;
    return out;
  }

  std::size_t pos = 0;
  auto number = [&](std::size_t width, int& out) {
    if (pos + width > s.size()) return false;
    out = 0;
    for (std::size_t i = 0; i < width; ++i) {
      const char c = s[pos + i];
      if (!std::isdigit(static_cast<unsigned char>(c))) return false;
      out = out * 10 + (c - '0');
    }
    pos += width;
    return true;
  };
  auto expect = [&](char c) {
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  };

  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (!number(4, year) || !expect('-') || !number(2, month) || !expect('-') || !number(2, day)) {
    return std::nullopt;
  }
  const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                                        std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok()) return std::nullopt;

  int offset_seconds = 0;
  if (pos < s.size()) {
    if (!expect('T') && !expect(' ')) return std::nullopt;
    if (!number(2, hour) || !expect(':') || !number(2, minute)) return std::nullopt;
    if (expect(':') && !number(2, second)) return std::nullopt;
    if (expect('.')) {
      while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    const std::string rest = trim(std::string_view(s).substr(pos));
    if (rest.empty() || rest == "Z" || rest == "UTC" || rest == "+0000" || rest == "+00:00") {
      // UTC
    } else if ((rest[0] == '+' || rest[0] == '-') && (rest.size() == 6 || rest.size() == 5)) {
      const bool colon = rest.size() == 6;
      if (colon && rest[3] != ':') return std::nullopt;
      const std::string hh = rest.substr(1, 2);
      const std::string mm = rest.substr(colon ? 4 : 3, 2);
      if (!all_digits(hh) || !all_digits(mm)) return std::nullopt;
      offset_seconds = (std::stoi(hh) * 3600 + std::stoi(mm) * 60) * (rest[0] == '-' ? -1 : 1);
    } else {
      return std::nullopt;
    }
    if (hour > 23 || minute > 59 || second > 60) return std::nullopt;
  }

  const auto days = std::chrono::sys_days(ymd).time_since_epoch().count();
  return static_cast<Timestamp>(days) * 86400 + hour * 3600 + minute * 60 + second - offset_seconds;
}

std::optional<std::string> tweet_id_from_link(std::string_view link) {
  const std::string s = trim(link);
  if (all_digits(s)) return s;
  const auto status = s.find("/status/");
  const auto statuses = s.find("/statuses/");
  std::size_t start = std::string::npos;
  if (status != std::string::npos) start = status + 8;
  else if (statuses != std::string::npos) start = statuses + 10;
  if (start == std::string::npos) return std::nullopt;
  std::size_t end = start;
  while (end < s.size() && std::isdigit(static_cast<unsigned char>(s[end]))) ++end;
  if (end == start) return std::nullopt;
  return s.substr(start, end - start);
}

std::string RepostRecord::node_id() const { return "repost:" + post_id + ":" + user_id; }

std::string_view to_string(RecordKind kind) {
  switch (kind) {
    case RecordKind::factcheck: return "factcheck";
    case RecordKind::tweet: return "tweet";
    case RecordKind::comment: return "comment";
    case RecordKind::repost: return "repost";
    case RecordKind::user: return "user";
  }
  return "unknown";
}

std::string_view to_string(MemberKind kind) {
  switch (kind) {
    case MemberKind::source: return "source";
    case MemberKind::reply: return "reply";
    case MemberKind::retweet: return "retweet";
  }
  return "unknown";
}

std::optional<MemberKind> member_kind_from_string(std::string_view s) {
  if (s == "source") return MemberKind::source;
  if (s == "reply") return MemberKind::reply;
  if (s == "retweet") return MemberKind::retweet;
  return std::nullopt;
}

const TweetRecord* RawCorpus::find_tweet(const std::string& id) const {
  auto it = tweet_index.find(id);
  return it == tweet_index.end() ? nullptr : &tweets[it->second];
}

const CommentRecord* RawCorpus::find_comment(const std::string& id) const {
  auto it = comment_index.find(id);
  return it == comment_index.end() ? nullptr : &comments[it->second];
}

void ingest_lines(RawCorpus& corpus, RecordKind kind, const std::vector<std::string>& lines) {
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    ++line_counter(corpus.input_lines, kind);
    const json j = json::parse(lines[i], nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      corpus.quarantine.push_back({kind, i + 1, "malformed JSON object"});
      continue;
    }
    try {
      ingest_one(corpus, kind, j);
    } catch (const SchemaError& e) {
      corpus.quarantine.push_back({kind, i + 1, e.what()});
    } catch (const json::exception& e) {
      corpus.quarantine.push_back({kind, i + 1, std::string("untypeable field: ") + e.what()});
    }
  }
}

RawCorpus load_corpus(const CorpusPaths& paths) {
  RawCorpus corpus;
  const std::pair<const std::filesystem::path*, RecordKind> files[] = {
      {&paths.factchecks, RecordKind::factcheck}, {&paths.tweets, RecordKind::tweet},
      {&paths.comments, RecordKind::comment},     {&paths.reposts, RecordKind::repost},
      {&paths.users, RecordKind::user}};
  for (const auto& [path, kind] : files) {
    if (path->empty()) continue;
    if (!std::filesystem::exists(*path)) {
      throw DataError("missing " + std::string(to_string(kind)) + " file: " + path->string());
    }
    ingest_lines(corpus, kind, read_lines(*path));
  }
  return corpus;
}

// ---- joining ------------------------------------------------------------

namespace {

struct TweetLink {
  std::string parent;  // empty when the tweet is a source
  MemberKind kind = MemberKind::source;
};

TweetLink tweet_parent(const RawCorpus& corpus, const TweetRecord& t) {
  if (auto id = tweet_id_from_link(t.reply_url); id && *id != t.id && corpus.find_tweet(*id)) {
    return {*id, MemberKind::reply};
  }
  if (auto id = tweet_id_from_link(t.quote_url); id && *id != t.id && corpus.find_tweet(*id)) {
    return {*id, MemberKind::retweet};
  }
  return {};
}

bool member_less(const PostMember& a, const PostMember& b) {
  if (a.ts != b.ts) return a.ts < b.ts;
  return a.id < b.id;
}

}  // namespace

JoinResult join_post_sets(const RawCorpus& corpus) {
  JoinResult result;

  // Resolve each tweet to its root source tweet by following reply/quote links.
  std::unordered_map<std::string, TweetLink> links;
  for (const auto& t : corpus.tweets) links.emplace(t.id, tweet_parent(corpus, t));

  std::unordered_map<std::string, std::string> root_of;  // tweet id -> source id
  for (const auto& t : corpus.tweets) {
    std::vector<std::string> path;
    std::unordered_set<std::string> seen;
    std::string cur = t.id;
    bool cyclic = false;
    while (true) {
      if (auto it = root_of.find(cur); it != root_of.end()) {
        cur = it->second;
        break;
      }
      if (!seen.insert(cur).second) {
        cyclic = true;
        break;
      }
      path.push_back(cur);
      const TweetLink& l = links.at(cur);
      if (l.parent.empty()) break;
      cur = l.parent;
    }
    if (cyclic) {
      result.quarantined.push_back({RecordKind::tweet, 0, "tweet " + t.id + " leads into a cyclic reply/quote chain"});
      continue;
    }
    for (const auto& p : path) root_of[p] = cur;
  }

  std::map<std::string, PostSet> sets;
  std::set<std::string> rejected;
  for (const auto& t : corpus.tweets) {
    auto it = root_of.find(t.id);
    if (it == root_of.end()) continue;
    const TweetLink& l = links.at(t.id);
    // Quote tweets are retweet-kind leaves of the source, like reposts.
    const std::string parent = l.kind == MemberKind::retweet ? it->second : l.parent;
    PostMember m{t.id, parent, l.kind, t.date, t.tweet, t.user_id};
    if (l.parent.empty()) {
      sets[t.id].source = std::move(m);
    } else {
      sets[it->second].members.push_back(std::move(m));
    }
  }

  // Comments: parent must be the thread's post or another comment of it.
  std::unordered_map<std::string, int> comment_state;  // 0 unknown, 1 ok, 2 orphan
  std::function<int(const CommentRecord&, std::unordered_set<std::string>&)> resolve =
      [&](const CommentRecord& c, std::unordered_set<std::string>& visiting) -> int {
    if (auto it = comment_state.find(c.comment_id); it != comment_state.end()) return it->second;
    if (!visiting.insert(c.comment_id).second) return 3;  // cycle
    int state = 2;
    if (root_of.count(c.post_id) == 0) {
      state = 2;
    } else if (c.reply_post_id == c.post_id) {
      state = 1;
    } else if (const CommentRecord* parent = corpus.find_comment(c.reply_post_id);
               parent != nullptr && parent->post_id == c.post_id) {
      state = resolve(*parent, visiting);
    }
    if (state != 3) comment_state[c.comment_id] = state;
    return state;
  };

  for (const auto& c : corpus.comments) {
    std::unordered_set<std::string> visiting;
    const int state = resolve(c, visiting);
    if (state == 3) {
      const std::string& root = root_of.at(c.post_id);
      if (rejected.insert(root).second) {
        result.rejected.push_back({root, "cyclic reply references in thread of post " + c.post_id +
                                             " (comment " + c.comment_id + ")"});
      }
      continue;
    }
    if (state == 2) {
      result.quarantined.push_back({RecordKind::comment, 0,
                                    "orphan comment " + c.comment_id + ": reply_post_id " +
                                        c.reply_post_id + " not found in thread of post " + c.post_id});
      continue;
    }
    sets[root_of.at(c.post_id)].members.push_back(
        {c.comment_id, c.reply_post_id, MemberKind::reply, c.date, c.comment, c.user_id});
  }

  std::unordered_set<std::string> seen_reposts;
  for (const auto& r : corpus.reposts) {
    auto it = root_of.find(r.post_id);
    if (it == root_of.end()) {
      result.quarantined.push_back({RecordKind::repost, 0, "repost of unknown tweet " + r.post_id});
      continue;
    }
    const std::string id = r.node_id();
    if (!seen_reposts.insert(id).second) {
      result.quarantined.push_back({RecordKind::repost, 0, "duplicate repost " + id});
      continue;
    }
    const std::string& root = it->second;
    const Timestamp ts = r.date.value_or(corpus.find_tweet(root)->date);
    sets[root].members.push_back({id, root, MemberKind::retweet, ts, std::string{}, r.user_id});
  }

  for (auto& [id, set] : sets) {
    if (rejected.count(id) != 0) continue;
    std::sort(set.members.begin(), set.members.end(), member_less);
    result.sets.push_back(std::move(set));
  }
  return result;
}

LabelResult label_post_sets(const std::vector<PostSet>& sets,
                            const std::vector<FactCheckRecord>& factchecks) {
  std::unordered_map<std::string, std::vector<const FactCheckRecord*>> by_tweet;
  for (const auto& f : factchecks) {
    for (const auto& id : f.tweet_ids) by_tweet[id].push_back(&f);
  }
  LabelResult result;
  for (const auto& s : sets) {
    LabeledPostSet out{s, std::nullopt, {}};
    if (auto it = by_tweet.find(s.source.id); it != by_tweet.end()) {
      const FactCheckRecord* first = it->second.front();
      const bool conflict = std::any_of(it->second.begin(), it->second.end(),
                                        [&](const FactCheckRecord* f) { return f->label != first->label; });
      if (conflict) {
        std::string verdicts;
        for (const auto* f : it->second) verdicts += (verdicts.empty() ? "" : ", ") + f->verdict;
        result.rejected.push_back({s.source.id, "conflicting verdicts: " + verdicts});
        continue;
      }
      out.label = first->label;
      out.verdict = first->verdict;
    }
    result.sets.push_back(std::move(out));
  }
  return result;
}

}  // namespace rumor
