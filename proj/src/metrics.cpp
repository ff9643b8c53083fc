#include "httpmine/metrics.hpp"

#include "httpmine/ingest.hpp"

#include <algorithm>
#include <numeric>

namespace httpmine {

std::optional<Scalar> rank_auc(const std::vector<Prediction>& predictions) {
  std::size_t positives = 0;
  for (const Prediction& p : predictions) positives += p.truth_malicious ? 1 : 0;
  const std::size_t negatives = predictions.size() - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;

  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return predictions[a].prob_malicious < predictions[b].prob_malicious;
  });

  // Midranks over tied probabilities, then the Mann-Whitney statistic.
  Scalar positive_rank_sum = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && predictions[order[j]].prob_malicious ==
                                   predictions[order[i]].prob_malicious) {
      ++j;
    }
    const Scalar midrank = (static_cast<Scalar>(i + 1) + static_cast<Scalar>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (predictions[order[k]].truth_malicious) positive_rank_sum += midrank;
    }
    i = j;
  }
  const Scalar p = static_cast<Scalar>(positives);
  const Scalar n = static_cast<Scalar>(negatives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

Metrics compute_metrics(const std::vector<Prediction>& predictions) {
  if (predictions.empty()) throw DataError("compute_metrics: no predictions");
  Metrics m;
  for (const Prediction& p : predictions) {
    if (p.truth_malicious) {
      (p.predicted_malicious ? m.tp : m.fn) += 1;
    } else {
      (p.predicted_malicious ? m.fp : m.tn) += 1;
    }
  }
  m.precision = m.tp + m.fp > 0
                    ? static_cast<Scalar>(m.tp) / static_cast<Scalar>(m.tp + m.fp)
                    : 0.0;
  m.recall = m.tp + m.fn > 0
                 ? static_cast<Scalar>(m.tp) / static_cast<Scalar>(m.tp + m.fn)
                 : 0.0;
  m.f1 = m.precision + m.recall > 0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  m.auc = rank_auc(predictions);
  return m;
}

}  // namespace httpmine
