#include "httpmine/pipeline.hpp"

#include "httpmine/tokenize.hpp"

#include <cstdio>
#include <sstream>

namespace httpmine {

DetectorConfig detectors_from(const Config& cfg) {
  DetectorConfig d;
  d.md5_len = cfg.md5_len;
  d.sha_len_short = cfg.sha_len_short;
  d.sha_len_long = cfg.sha_len_long;
  d.binary_min_len = cfg.binary_min_len;
  d.hex_min_len = cfg.hex_min_len;
  d.base64_min_len = cfg.base64_min_len;
  return d;
}

TrainHyper hyper_from(const Config& cfg) {
  TrainHyper h;
  h.batch_size = cfg.batch_size;
  h.epochs = cfg.epochs;
  h.learning_rate = cfg.learning_rate;
  h.dropout = cfg.dropout;
  h.beta1 = cfg.adam_beta1;
  h.beta2 = cfg.adam_beta2;
  h.adam_eps = cfg.adam_eps;
  h.loss_clamp = cfg.loss_clamp;
  h.init_range = cfg.init_range;
  h.forget_bias = cfg.forget_bias;
  h.seed = cfg.seed;
  return h;
}

BranchVocabs build_vocabs(const std::vector<TrafficEntry>& entries, const Config& cfg) {
  const DetectorConfig detectors = detectors_from(cfg);
  std::vector<TokenSeq> content_corpus;
  std::vector<TokenSeq> structure_corpus;
  content_corpus.reserve(entries.size());
  structure_corpus.reserve(entries.size());
  for (const TrafficEntry& entry : entries) {
    TokenSeq tokens = segment(entry.content);
    structure_corpus.push_back(structure_of(tokens, detectors));
    content_corpus.push_back(std::move(tokens));
  }
  BranchVocabs vocabs;
  vocabs.content = build_vocab(content_corpus, cfg.vocab_size_content);
  vocabs.structure = build_vocab(structure_corpus, cfg.vocab_size_structure);
  return vocabs;
}

std::vector<EncodedSample> encode_entries(const std::vector<TrafficEntry>& entries,
                                          const BranchVocabs& vocabs, int seq_len,
                                          const DetectorConfig& detectors) {
  std::vector<EncodedSample> samples;
  samples.reserve(entries.size());
  for (const TrafficEntry& entry : entries) {
    samples.push_back(encode_entry(entry, vocabs, seq_len, detectors));
  }
  return samples;
}

ModelDims dims_from(const Config& cfg, const BranchVocabs& vocabs, FeatureMode mode) {
  ModelDims dims;
  dims.seq_len = cfg.seq_len;
  dims.embed_dim = cfg.embed_dim;
  dims.hidden_dim = cfg.hidden_dim;
  dims.attn_dim = cfg.attn_dim;
  dims.vocab_content = vocabs.content.size();
  dims.vocab_structure = vocabs.structure.size();
  dims.mode = mode;
  return dims;
}

Metrics train_and_evaluate(const std::vector<TrafficEntry>& train_set,
                           const std::vector<TrafficEntry>& test_set,
                           FeatureMode mode, const Config& cfg,
                           std::vector<EpochStats>* curve) {
  const DetectorConfig detectors = detectors_from(cfg);
  const BranchVocabs vocabs = build_vocabs(train_set, cfg);
  const ModelDims dims = dims_from(cfg, vocabs, mode);
  const std::vector<EncodedSample> samples =
      encode_entries(train_set, vocabs, cfg.seq_len, detectors);
  const ModelParams params = train(samples, dims, hyper_from(cfg), curve);

  std::vector<Prediction> predictions;
  predictions.reserve(test_set.size());
  for (const TrafficEntry& entry : test_set) {
    const DetectionRecord record = predict(entry, vocabs, params, detectors);
    if (record.error || !entry.malicious.has_value()) continue;
    Prediction p;
    p.prob_malicious = record.prob_malicious;
    p.predicted_malicious = record.malicious;
    p.truth_malicious = *entry.malicious;
    predictions.push_back(p);
  }
  return compute_metrics(predictions);
}

std::vector<AblationRow> ablation(const std::vector<AblationDataset>& datasets,
                                  const Config& cfg) {
  std::vector<AblationRow> rows;
  for (const AblationDataset& dataset : datasets) {
    for (const FeatureMode mode :
         {FeatureMode::Content, FeatureMode::Structure, FeatureMode::Both}) {
      AblationRow row;
      row.dataset = dataset.name;
      row.mode = feature_mode_name(mode);
      row.metrics = train_and_evaluate(dataset.train, dataset.test, mode, cfg);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-16s %-10s %9s %9s %9s %9s\n", "dataset",
                "mode", "precision", "recall", "f1", "auc");
  out << buf;
  for (const AblationRow& row : rows) {
    const Metrics& m = row.metrics;
    if (m.auc.has_value()) {
      std::snprintf(buf, sizeof(buf), "%-16s %-10s %9.4f %9.4f %9.4f %9.4f\n",
                    row.dataset.c_str(), row.mode.c_str(), m.precision, m.recall,
                    m.f1, *m.auc);
    } else {
      std::snprintf(buf, sizeof(buf), "%-16s %-10s %9.4f %9.4f %9.4f %9s\n",
                    row.dataset.c_str(), row.mode.c_str(), m.precision, m.recall,
                    m.f1, "n/a");
    }
    out << buf;
  }
  return out.str();
}

}  // namespace httpmine
