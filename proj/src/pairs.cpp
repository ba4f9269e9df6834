#include "rumor/pairs.hpp"

#include <cctype>
#include <map>
#include <set>
#include <unordered_map>
#include <utility>

#include "rumor/errors.hpp"
#include "rumor/random.hpp"

namespace rumor {

std::string_view to_string(PairOrigin origin) {
  switch (origin) {
    case PairOrigin::method1: return "method1";
    case PairOrigin::method2: return "method2";
    case PairOrigin::negative: return "negative";
  }
  return "unknown";
}

namespace {

bool starts_with_ci(std::string_view s, std::size_t pos, std::string_view prefix) {
  if (pos + prefix.size() > s.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[pos + i])) != prefix[i]) return false;
  }
  return true;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

void emit_leaf(std::vector<SentencePair>& out, std::string prev, const std::string& next, PairOrigin origin,
               std::size_t* skipped) {
  if (prev.empty() || next.empty()) {
    if (skipped != nullptr) ++*skipped;
    return;
  }
  out.push_back({std::move(prev), next, 1, origin, 0, 0});
}

void generate1(std::string_view source, const CommentTree& node, std::string_view parent_text, bool top_level,
               std::vector<SentencePair>& out, std::size_t* skipped) {
  if (!node.children.empty()) {
    for (const auto& child : node.children) generate1(source, child, node.text, false, out, skipped);
    return;
  }
  emit_leaf(out, top_level ? std::string(source) : join_text(source, parent_text), node.text, PairOrigin::method1,
            skipped);
}

void generate2(const std::string& prefix, const CommentTree& node, std::vector<SentencePair>& out,
               std::size_t* skipped) {
  if (!node.children.empty()) {
    const std::string extended = join_text(prefix, node.text);
    for (const auto& child : node.children) generate2(extended, child, out, skipped);
    return;
  }
  emit_leaf(out, prefix, node.text, PairOrigin::method2, skipped);
}

}  // namespace

std::string clean_text(std::string_view text) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    const bool url = starts_with_ci(text, i, "http://") || starts_with_ci(text, i, "https://") ||
                     starts_with_ci(text, i, "www.");
    const bool mention = text[i] == '@' && (i == 0 || is_space(text[i - 1]));
    if (url || mention) {
      while (i < text.size() && !is_space(text[i])) ++i;
      continue;
    }
    if (is_space(text[i])) {
      if (!out.empty() && out.back() != ' ') out.push_back(' ');
      ++i;
      continue;
    }
    out.push_back(text[i++]);
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::string join_text(std::string_view a, std::string_view b) {
  if (a.empty()) return std::string(b);
  if (b.empty()) return std::string(a);
  std::string out;
  out.reserve(a.size() + b.size() + 1);
  out.append(a).push_back(' ');
  out.append(b);
  return out;
}

std::vector<SentencePair> pair_generate1(std::string_view source_text, const CommentTree& node,
                                         std::size_t* skipped) {
  std::vector<SentencePair> out;
  generate1(source_text, node, {}, true, out, skipped);
  return out;
}

std::vector<SentencePair> pair_generate2(std::string_view prefix_text, const CommentTree& node,
                                         std::size_t* skipped) {
  std::vector<SentencePair> out;
  generate2(std::string(prefix_text), node, out, skipped);
  return out;
}

std::vector<CommentTree> reply_forest(const PostSet& set) {
  std::map<std::string, std::vector<const PostMember*>> children;
  for (const auto& m : set.members) {
    if (m.kind == MemberKind::reply) children[m.parent_id].push_back(&m);
  }
  // Post-order build; member ids are unique so recursion terminates on
  // acyclic input, and a visited set guards against malformed cycles.
  std::set<std::string> visited;
  auto build = [&](auto&& self, const PostMember& m) -> CommentTree {
    CommentTree t{clean_text(m.text), {}};
    if (!visited.insert(m.id).second) return t;
    if (auto it = children.find(m.id); it != children.end()) {
      for (const PostMember* c : it->second) t.children.push_back(self(self, *c));
    }
    return t;
  };
  std::vector<CommentTree> forest;
  if (auto it = children.find(set.source.id); it != children.end()) {
    for (const PostMember* c : it->second) forest.push_back(build(build, *c));
  }
  return forest;
}

std::vector<SentencePair> build_pair_corpus(const std::vector<PostSet>& sets, std::size_t neg_per_pos,
                                            std::uint64_t seed, PairCorpusStats* stats) {
  PairCorpusStats local;
  std::vector<SentencePair> positives;
  std::set<std::pair<std::string, std::string>> seen;

  for (std::size_t s = 0; s < sets.size(); ++s) {
    const std::string source = clean_text(sets[s].source.text);
    for (const CommentTree& top : reply_forest(sets[s])) {
      auto batch = pair_generate1(source, top, &local.skipped_empty);
      auto second = pair_generate2(source, top, &local.skipped_empty);
      batch.insert(batch.end(), std::make_move_iterator(second.begin()), std::make_move_iterator(second.end()));
      for (auto& p : batch) {
        if (!seen.emplace(p.prev, p.next).second) {
          ++local.duplicates_removed;
          continue;
        }
        p.prev_set = p.next_set = s;
        positives.push_back(std::move(p));
      }
    }
  }

  std::vector<SentencePair> out = positives;
  if (neg_per_pos > 0 && sets.size() < 2) throw DataError("negatives require >=2 post sets");
  if (neg_per_pos > 0 && !positives.empty()) {
    std::set<std::size_t> contributing;
    for (const auto& p : positives) contributing.insert(p.prev_set);
    if (contributing.size() < 2) throw DataError("negatives require >=2 post sets with sentence pairs");
    Rng rng(seed);
    for (const auto& p : positives) {
      for (std::size_t k = 0; k < neg_per_pos; ++k) {
        const SentencePair* donor = nullptr;
        do {
          donor = &positives[uniform_index(rng, positives.size())];
        } while (donor->prev_set == p.prev_set);
        out.push_back({p.prev, donor->next, 0, PairOrigin::negative, p.prev_set, donor->prev_set});
      }
    }
  }

  local.positives = positives.size();
  local.negatives = out.size() - positives.size();
  if (stats != nullptr) *stats = local;
  return out;
}

nlohmann::json to_json(const SentencePair& p) {
  return {{"prev", p.prev}, {"next", p.next}, {"label", p.label}, {"origin", std::string(to_string(p.origin))}};
}

}  // namespace rumor
