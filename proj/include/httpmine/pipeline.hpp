#pragma once

#include "httpmine/config.hpp"
#include "httpmine/detect.hpp"
#include "httpmine/metrics.hpp"
#include "httpmine/model.hpp"

#include <string>
#include <vector>

namespace httpmine {

DetectorConfig detectors_from(const Config& cfg);
TrainHyper hyper_from(const Config& cfg);

/// Builds the per-branch vocabularies over segmented content and derived
/// structure sequences.
BranchVocabs build_vocabs(const std::vector<TrafficEntry>& entries, const Config& cfg);

std::vector<EncodedSample> encode_entries(const std::vector<TrafficEntry>& entries,
                                          const BranchVocabs& vocabs, int seq_len,
                                          const DetectorConfig& detectors);

/// Model dimensions for a given mode using the vocabularies actually built.
ModelDims dims_from(const Config& cfg, const BranchVocabs& vocabs, FeatureMode mode);

/// Trains on `train` and evaluates threshold metrics + AUC on `test`.
Metrics train_and_evaluate(const std::vector<TrafficEntry>& train,
                           const std::vector<TrafficEntry>& test,
                           FeatureMode mode, const Config& cfg,
                           std::vector<EpochStats>* curve = nullptr);

struct AblationDataset {
  std::string name;
  std::vector<TrafficEntry> train;
  std::vector<TrafficEntry> test;
};

struct AblationRow {
  std::string dataset;
  std::string mode;
  Metrics metrics;
};

/// Trains one model per feature mode per dataset and collects the comparison
/// table. Modes run in the order content, structure, both.
std::vector<AblationRow> ablation(const std::vector<AblationDataset>& datasets,
                                  const Config& cfg);

/// Aligned-column rendering of the ablation table.
std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace httpmine
