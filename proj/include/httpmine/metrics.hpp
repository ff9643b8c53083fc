#pragma once

#include "httpmine/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace httpmine {

struct Metrics {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  Scalar precision = 0;
  Scalar recall = 0;
  Scalar f1 = 0;
  std::optional<Scalar> auc;  // absent when ground truth is single-class
};

struct Prediction {
  Scalar prob_malicious = 0;
  bool predicted_malicious = false;
  bool truth_malicious = false;
};

/// Threshold metrics from the argmax labels plus AUC as the rank statistic
/// over prob_malicious (ties at the same probability contribute 1/2 via
/// midranks). Zero-denominator precision/recall/f1 are defined as 0.
Metrics compute_metrics(const std::vector<Prediction>& predictions);

/// Mann-Whitney AUC with midranks; nullopt when either class is missing.
std::optional<Scalar> rank_auc(const std::vector<Prediction>& predictions);

}  // namespace httpmine
