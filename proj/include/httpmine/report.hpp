#pragma once

#include "httpmine/detect.hpp"
#include "httpmine/types.hpp"

#include <string>
#include <vector>

namespace httpmine {

/// Attention heatmap as an HTML fragment: one span per token, background
/// opacity = weight / max-weight, formatted to 4 decimals so repeated runs
/// emit identical bytes. Throws DataError on an empty attention list.
std::string heatmap_html(const std::vector<std::string>& tokens, const Vector& weights);

struct TopkRatio {
  std::string keyword;
  Scalar ratio = 0;
};

/// For each keyword, the fraction of records whose top-k attention tokens
/// (distinct tokens ranked by weight summed over repeats) contain it.
/// Keyword comparison is case-insensitive.
std::vector<TopkRatio> topk_hit_ratio(const std::vector<DetectionRecord>& records,
                                      const std::vector<std::string>& keywords, int k);

/// The k distinct content-branch tokens with the highest summed attention
/// weight; no token class is excluded here, unlike the pattern-mining path.
std::vector<std::string> top_attention_tokens(const DetectionRecord& record, int k);

}  // namespace httpmine
