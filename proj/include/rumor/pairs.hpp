#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rumor/ingestion.hpp"

namespace rumor {

enum class PairOrigin { method1, method2, negative };
std::string_view to_string(PairOrigin origin);

struct SentencePair {
  std::string prev;
  std::string next;
  int label = 1;  // 1 coherent, 0 adversarial
  PairOrigin origin = PairOrigin::method1;
  // Post set the prev text comes from, and the one the next text comes from.
  std::size_t prev_set = 0;
  std::size_t next_set = 0;

  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

// A reply and the replies beneath it; texts already cleaned.
struct CommentTree {
  std::string text;
  std::vector<CommentTree> children;
};

// Removes URLs and @mentions and collapses whitespace.
std::string clean_text(std::string_view text);

// Joins two cleaned texts with one space; an empty side contributes nothing.
std::string join_text(std::string_view a, std::string_view b);

// Leaf pairs where prev is the source joined with the leaf's immediate parent
// (just the source for a top-level leaf). Pairs with an empty prev or next
// are dropped and counted in *skipped.
std::vector<SentencePair> pair_generate1(std::string_view source_text, const CommentTree& node,
                                         std::size_t* skipped = nullptr);

// Leaf pairs where prev is the whole chain from the source down to the leaf's
// parent.
std::vector<SentencePair> pair_generate2(std::string_view prefix_text, const CommentTree& node,
                                         std::size_t* skipped = nullptr);

// Top-level reply trees of a post set (retweets excluded), children in
// member order.
std::vector<CommentTree> reply_forest(const PostSet& set);

struct PairCorpusStats {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t duplicates_removed = 0;
  std::size_t skipped_empty = 0;
};

// Positives from both generators over every top-level reply of every set,
// deduplicated on (prev, next) keeping the first; then neg_per_pos negatives
// per positive, each pairing its prev with the next text of a uniformly drawn
// positive from another post set. Positives come first, then negatives in
// positive order. Throws DataError when negatives are requested but fewer than
// two post sets contribute positives.
std::vector<SentencePair> build_pair_corpus(const std::vector<PostSet>& sets, std::size_t neg_per_pos,
                                            std::uint64_t seed, PairCorpusStats* stats = nullptr);

nlohmann::json to_json(const SentencePair& p);

}  // namespace rumor
