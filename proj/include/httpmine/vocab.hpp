#pragma once

#include "httpmine/tokenize.hpp"
#include "httpmine/types.hpp"

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace httpmine {

/// TFIDF-ranked token index with reserved PAD and OOV slots.
struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kOov = 1;

  std::unordered_map<std::string, int> token_to_index;
  std::vector<std::string> index_to_token;  // [0]="<PAD>", [1]="<OOV>"
  std::vector<Scalar> scores;               // aligned with index_to_token

  /// Number of corpus tokens (excluding PAD/OOV).
  int size() const { return static_cast<int>(index_to_token.size()) - 2; }

  /// Total number of embedding rows (corpus tokens + PAD + OOV).
  int rows() const { return static_cast<int>(index_to_token.size()); }

  int index_of(const std::string& token) const {
    const auto it = token_to_index.find(token);
    return it == token_to_index.end() ? kOov : it->second;
  }
};

/// Fixed-length index vector; positions >= valid_len hold PAD.
struct EncodedSeq {
  std::vector<int> indices;
  int valid_len = 0;
};

/// score(t) = tf(t) * (ln((1+N)/(1+df(t))) + 1) with raw corpus-wide counts.
/// Throws DataError on an empty corpus.
std::map<std::string, Scalar> tfidf(const std::vector<TokenSeq>& corpus);

/// Keeps the top `max_tokens` tokens by score (ties broken by token text
/// ascending) and assigns indices 2..V+1 in score-descending order.
Vocabulary build_vocab(const std::vector<TokenSeq>& corpus, int max_tokens);

/// Maps the first min(len, z) tokens to vocabulary indices (OOV for unseen)
/// and pads the rest with zeros.
EncodedSeq encode(const TokenSeq& seq, const Vocabulary& vocab, int z);

/// TSV with header "token\tindex\tscore"; PAD and OOV rows carry score 0.
void save_vocab(const std::string& path, const Vocabulary& vocab);
Vocabulary load_vocab(const std::string& path);

}  // namespace httpmine
