#include "httpmine/vocab.hpp"

#include "httpmine/ingest.hpp"
#include "httpmine/util.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace httpmine {

std::map<std::string, Scalar> tfidf(const std::vector<TokenSeq>& corpus) {
  if (corpus.empty()) throw DataError("tfidf: empty corpus");
  std::unordered_map<std::string, long long> tf;
  std::unordered_map<std::string, long long> df;
  for (const TokenSeq& doc : corpus) {
    std::unordered_set<std::string> seen;
    for (const std::string& token : doc) {
      ++tf[token];
      if (seen.insert(token).second) ++df[token];
    }
  }
  const Scalar n = static_cast<Scalar>(corpus.size());
  std::map<std::string, Scalar> scores;
  for (const auto& [token, count] : tf) {
    const Scalar idf = std::log((1.0 + n) / (1.0 + static_cast<Scalar>(df[token]))) + 1.0;
    scores[token] = static_cast<Scalar>(count) * idf;
  }
  return scores;
}

Vocabulary build_vocab(const std::vector<TokenSeq>& corpus, int max_tokens) {
  const auto scores = tfidf(corpus);
  std::vector<std::pair<std::string, Scalar>> ranked(scores.begin(), scores.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(ranked.size()) > max_tokens) ranked.resize(max_tokens);

  Vocabulary vocab;
  vocab.index_to_token = {"<PAD>", "<OOV>"};
  vocab.scores = {0.0, 0.0};
  for (const auto& [token, score] : ranked) {
    vocab.token_to_index.emplace(token, static_cast<int>(vocab.index_to_token.size()));
    vocab.index_to_token.push_back(token);
    vocab.scores.push_back(score);
  }
  return vocab;
}

EncodedSeq encode(const TokenSeq& seq, const Vocabulary& vocab, int z) {
  EncodedSeq out;
  out.indices.assign(static_cast<std::size_t>(z), Vocabulary::kPad);
  out.valid_len = std::min<int>(static_cast<int>(seq.size()), z);
  for (int i = 0; i < out.valid_len; ++i) {
    out.indices[i] = vocab.index_of(seq[i]);
  }
  return out;
}

void save_vocab(const std::string& path, const Vocabulary& vocab) {
  std::ostringstream out;
  out << "token\tindex\tscore\n";
  out.precision(17);
  for (std::size_t i = 0; i < vocab.index_to_token.size(); ++i) {
    out << vocab.index_to_token[i] << '\t' << i << '\t' << vocab.scores[i] << '\n';
  }
  spit_file(path, out.str());
}

Vocabulary load_vocab(const std::string& path) {
  std::istringstream in(slurp_file(path));
  Vocabulary vocab;
  std::string line;
  if (!std::getline(in, line) || line != "token\tindex\tscore")
    throw DataError(path + ": missing vocabulary header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw DataError(path + ": bad vocabulary row: " + line);
    const std::string token = line.substr(0, t1);
    const int index = std::stoi(line.substr(t1 + 1, t2 - t1 - 1));
    const Scalar score = std::stod(line.substr(t2 + 1));
    if (index != static_cast<int>(vocab.index_to_token.size()))
      throw DataError(path + ": vocabulary indices not dense");
    vocab.index_to_token.push_back(token);
    vocab.scores.push_back(score);
    if (index >= 2) vocab.token_to_index.emplace(token, index);
  }
  if (vocab.rows() < 2 || vocab.index_to_token[0] != "<PAD>" ||
      vocab.index_to_token[1] != "<OOV>")
    throw DataError(path + ": vocabulary missing PAD/OOV rows");
  return vocab;
}

}  // namespace httpmine
