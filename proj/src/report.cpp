#include "httpmine/report.hpp"

#include "httpmine/ingest.hpp"
#include "httpmine/util.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_map>
#include <unordered_set>

namespace httpmine {

std::string heatmap_html(const std::vector<std::string>& tokens, const Vector& weights) {
  if (tokens.empty() || weights.size() == 0)
    throw DataError("heatmap: record has no attention weights");
  if (static_cast<Eigen::Index>(tokens.size()) != weights.size())
    throw DataError("heatmap: token/weight length mismatch");
  const Scalar max_weight = weights.maxCoeff();
  std::string out = "<div class=\"attention-heatmap\">";
  char buf[16];
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Scalar opacity = max_weight > 0 ? weights(i) / max_weight : 0.0;
    std::snprintf(buf, sizeof(buf), "%.4f", opacity);
    if (i > 0) out += " ";
    out += "<span style=\"background-color:rgba(217,56,30,";
    out += buf;
    out += ")\">";
    out += html_escape(tokens[i]);
    out += "</span>";
  }
  out += "</div>\n";
  return out;
}

std::vector<std::string> top_attention_tokens(const DetectionRecord& record, int k) {
  std::unordered_map<std::string, Scalar> weight_of;
  for (std::size_t i = 0; i < record.attn_tokens_content.size(); ++i) {
    weight_of[record.attn_tokens_content[i]] +=
        record.attn_weights_content(static_cast<Eigen::Index>(i));
  }
  std::vector<std::pair<std::string, Scalar>> ranked(weight_of.begin(), weight_of.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(ranked.size()) > k) ranked.resize(k);
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [token, weight] : ranked) tokens.push_back(std::move(token));
  return tokens;
}

std::vector<TopkRatio> topk_hit_ratio(const std::vector<DetectionRecord>& records,
                                      const std::vector<std::string>& keywords, int k) {
  std::vector<TopkRatio> ratios;
  ratios.reserve(keywords.size());
  std::vector<std::unordered_set<std::string>> tops;
  tops.reserve(records.size());
  for (const DetectionRecord& record : records) {
    std::unordered_set<std::string> lowered;
    for (const std::string& token : top_attention_tokens(record, k)) {
      lowered.insert(to_lower(token));
    }
    tops.push_back(std::move(lowered));
  }
  for (const std::string& keyword : keywords) {
    const std::string needle = to_lower(keyword);
    std::size_t hits = 0;
    for (const auto& top : tops) hits += top.count(needle);
    TopkRatio r;
    r.keyword = keyword;
    r.ratio = records.empty() ? 0.0
                              : static_cast<Scalar>(hits) /
                                    static_cast<Scalar>(records.size());
    ratios.push_back(std::move(r));
  }
  return ratios;
}

}  // namespace httpmine
