#include "httpmine/detect.hpp"

#include "httpmine/pipeline.hpp"
#include "httpmine/util.hpp"
#include "support/toy_corpus.hpp"

#include <doctest.h>

#include <cstdio>

using namespace httpmine;

namespace {

struct SmallPipeline {
  Config cfg;
  std::vector<TrafficEntry> entries;
  BranchVocabs vocabs;
  ModelParams params;

  SmallPipeline() : params(make()) {}

  ModelParams make() {
    cfg.seq_len = 24;
    cfg.embed_dim = 8;
    cfg.hidden_dim = 8;
    cfg.attn_dim = 12;
    cfg.epochs = 6;
    cfg.batch_size = 40;
    cfg.vocab_size_content = 500;
    cfg.vocab_size_structure = 200;
    toy::Options opts;
    opts.count = 240;
    opts.seed = 7;
    entries = toy::entries(opts);
    vocabs = build_vocabs(entries, cfg);
    const auto samples =
        encode_entries(entries, vocabs, cfg.seq_len, detectors_from(cfg));
    return train(samples, dims_from(cfg, vocabs, FeatureMode::Both), hyper_from(cfg));
  }
};

SmallPipeline& pipeline() {
  static SmallPipeline p;
  return p;
}

}  // namespace

TEST_CASE("prediction works when every token is out of vocabulary") {
  auto& p = pipeline();
  TrafficEntry entry{"oov", "/zzzzqqq/wwwwlll <EOS> ", std::nullopt};
  const DetectionRecord record = predict(entry, p.vocabs, p.params);
  CHECK_FALSE(record.error);
  CHECK(record.prob_malicious >= 0.0);
  CHECK(record.prob_malicious <= 1.0);
}

TEST_CASE("identical entries give identical records") {
  auto& p = pipeline();
  const TrafficEntry& entry = p.entries.front();
  const DetectionRecord a = predict(entry, p.vocabs, p.params);
  const DetectionRecord b = predict(entry, p.vocabs, p.params);
  CHECK(record_to_json(a) == record_to_json(b));
}

TEST_CASE("empty content yields an error record") {
  auto& p = pipeline();
  TrafficEntry entry{"empty", "", std::nullopt};
  const DetectionRecord record = predict(entry, p.vocabs, p.params);
  CHECK(record.error);
}

TEST_CASE("record invariants: label rule and attention lengths") {
  auto& p = pipeline();
  for (std::size_t i = 0; i < 24; ++i) {
    const DetectionRecord record = predict(p.entries[i], p.vocabs, p.params);
    CHECK(record.malicious == (record.prob_malicious > 0.5));
    CHECK(record.attn_tokens_content.size() ==
          static_cast<std::size_t>(record.attn_weights_content.size()));
    if (record.attn_weights_content.size() > 0) {
      CHECK(record.attn_weights_content.sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("record attention equals the forward trace attention") {
  auto& p = pipeline();
  const TrafficEntry& entry = p.entries[3];
  const DetectionRecord record = predict(entry, p.vocabs, p.params);
  const EncodedSample sample =
      encode_entry(entry, p.vocabs, p.params.dims.seq_len);
  const ForwardTrace trace =
      forward(p.params, branch_inputs(p.params.dims, sample));
  REQUIRE(record.attn_weights_content.size() == trace.branches[0].attn.size());
  for (Eigen::Index i = 0; i < trace.branches[0].attn.size(); ++i) {
    CHECK(record.attn_weights_content(i) == trace.branches[0].attn(i));
  }
  CHECK(record.prob_malicious == trace.probs(1));
}

TEST_CASE("batch_detect on zero entries writes an empty file") {
  auto& p = pipeline();
  const std::string path = "test_detect_empty.jsonl";
  const DetectStats stats = batch_detect({}, p.vocabs, p.params, path);
  CHECK(stats.total == 0);
  CHECK(stats.predicted_malicious == 0);
  CHECK(slurp_file(path).empty());
  std::remove(path.c_str());
}

TEST_CASE("batch_detect counts match the records file") {
  auto& p = pipeline();
  const std::string path = "test_detect_records.jsonl";
  std::vector<TrafficEntry> subset(p.entries.begin(), p.entries.begin() + 40);
  const DetectStats stats = batch_detect(subset, p.vocabs, p.params, path);
  const auto records = read_records(path);
  REQUIRE(records.size() == subset.size());
  std::size_t malicious = 0;
  for (const auto& r : records) malicious += (!r.error && r.malicious) ? 1 : 0;
  CHECK(stats.predicted_malicious == malicious);
  CHECK(stats.total == subset.size());
  std::remove(path.c_str());
}

TEST_CASE("batch_detect output is byte-identical across reruns") {
  auto& p = pipeline();
  std::vector<TrafficEntry> subset(p.entries.begin(), p.entries.begin() + 20);
  batch_detect(subset, p.vocabs, p.params, "test_detect_a.jsonl");
  batch_detect(subset, p.vocabs, p.params, "test_detect_b.jsonl");
  CHECK(slurp_file("test_detect_a.jsonl") == slurp_file("test_detect_b.jsonl"));
  std::remove("test_detect_a.jsonl");
  std::remove("test_detect_b.jsonl");
}

TEST_CASE("records round-trip through JSON") {
  auto& p = pipeline();
  const DetectionRecord record = predict(p.entries[5], p.vocabs, p.params);
  const DetectionRecord loaded = record_from_json(record_to_json(record));
  CHECK(loaded.id == record.id);
  CHECK(loaded.prob_malicious == record.prob_malicious);
  CHECK(loaded.malicious == record.malicious);
  CHECK(loaded.state_content.size() == record.state_content.size());
  CHECK(loaded.state_content.isApprox(record.state_content, 0.0));
  CHECK(loaded.attn_tokens_content == record.attn_tokens_content);
}
