#pragma once

#include "httpmine/ingest.hpp"
#include "httpmine/model.hpp"
#include "httpmine/tokenize.hpp"
#include "httpmine/vocab.hpp"

#include <optional>
#include <string>
#include <vector>

namespace httpmine {

/// Per-entry prediction plus the intermediate model outputs the mining stage
/// consumes.
struct DetectionRecord {
  std::string id;
  bool error = false;          // empty content etc.; excluded from stats
  std::string error_message;
  Scalar prob_malicious = 0;
  bool malicious = false;      // prob > 0.5
  Vector state_content;        // r (empty when the branch is inactive)
  Vector state_structure;      // r
  std::vector<std::string> attn_tokens_content;
  Vector attn_weights_content;
  std::vector<std::string> attn_tokens_structure;
  Vector attn_weights_structure;
  std::optional<bool> truth;   // ground-truth label when the entry carried one
};

struct DetectStats {
  std::size_t total = 0;
  std::size_t predicted_malicious = 0;  // MT_MODEL
  std::size_t predicted_benign = 0;
  std::size_t errors = 0;
};

/// Vocabularies for both branches (structure may be unused depending on the
/// feature mode).
struct BranchVocabs {
  Vocabulary content;
  Vocabulary structure;
};

/// Full inference pipeline for one entry: segment, structure, encode, forward
/// pass without dropout. Never throws for empty content; it returns an error
/// record instead.
DetectionRecord predict(const TrafficEntry& entry, const BranchVocabs& vocabs,
                        const ModelParams& params,
                        const DetectorConfig& detectors = DetectorConfig{});

/// Runs predict over all entries, writes one JSONL record per entry to
/// `out_path` in input order, and returns summary counts.
DetectStats batch_detect(const std::vector<TrafficEntry>& entries,
                         const BranchVocabs& vocabs, const ModelParams& params,
                         const std::string& out_path,
                         const DetectorConfig& detectors = DetectorConfig{});

/// Serialization used by the mining and evaluation stages.
std::string record_to_json(const DetectionRecord& record);
DetectionRecord record_from_json(const std::string& line);
std::vector<DetectionRecord> read_records(const std::string& path);

/// Encodes one entry for training (both branches, regardless of mode).
EncodedSample encode_entry(const TrafficEntry& entry, const BranchVocabs& vocabs,
                           int seq_len,
                           const DetectorConfig& detectors = DetectorConfig{});

}  // namespace httpmine
