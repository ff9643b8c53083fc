#include "httpmine/metrics.hpp"
#include "httpmine/pipeline.hpp"
#include "httpmine/report.hpp"
#include "httpmine/rules.hpp"

#include "httpmine/util.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace httpmine;

namespace {

std::vector<Prediction> preds(const std::vector<Scalar>& probs,
                              const std::vector<int>& truth) {
  std::vector<Prediction> out;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    Prediction p;
    p.prob_malicious = probs[i];
    p.predicted_malicious = probs[i] > 0.5;
    p.truth_malicious = truth[i] == 1;
    out.push_back(p);
  }
  return out;
}

TrafficEntry entry(const std::string& id, const std::string& content) {
  return {id, content, std::nullopt};
}

}  // namespace

TEST_CASE("perfect predictions score one everywhere") {
  const Metrics m = compute_metrics(preds({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}));
  CHECK(m.precision == 1.0);
  CHECK(m.recall == 1.0);
  CHECK(m.f1 == 1.0);
  REQUIRE(m.auc.has_value());
  CHECK(*m.auc == 1.0);
}

TEST_CASE("the four-sample AUC example") {
  const Metrics m = compute_metrics(preds({0.9, 0.8, 0.3, 0.1}, {1, 0, 1, 0}));
  REQUIRE(m.auc.has_value());
  CHECK(*m.auc == doctest::Approx(0.75));
}

TEST_CASE("all-benign predictions have zero recall and precision") {
  const Metrics m = compute_metrics(preds({0.1, 0.2, 0.3}, {1, 1, 0}));
  CHECK(m.recall == 0.0);
  CHECK(m.precision == 0.0);
  CHECK(m.f1 == 0.0);
}

TEST_CASE("single-class truth leaves AUC undefined but keeps counts") {
  const Metrics m = compute_metrics(preds({0.9, 0.2}, {1, 1}));
  CHECK_FALSE(m.auc.has_value());
  CHECK(m.tp == 1);
  CHECK(m.fn == 1);
}

TEST_CASE("rank AUC equals pair enumeration, ties included") {
  Rng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Scalar> probs;
    std::vector<int> truth;
    for (int i = 0; i < 60; ++i) {
      // One-decimal probabilities force plenty of ties.
      probs.push_back(static_cast<Scalar>(rng.below(11)) / 10.0);
      truth.push_back(rng.bernoulli(0.4) ? 1 : 0);
    }
    truth[0] = 1;
    truth[1] = 0;
    const auto predictions = preds(probs, truth);
    const auto fast = rank_auc(predictions);
    REQUIRE(fast.has_value());
    CHECK(std::abs(*fast - oracle::pair_auc(predictions)) < 1e-12);
  }
}

TEST_CASE("default rules match their families") {
  const RuleSet rules = default_rules();
  const std::vector<TrafficEntry> entries = {
      entry("1", "/q?x=1 union select a from b <EOS> "),
      entry("2", "/index.html <EOS> "),
      entry("3", "/get?f=../../etc/passwd <EOS> "),
      entry("4", "/s <EOS> q=<script>alert(1)</script>"),
      entry("5", "/s <EOS> select id=3"),  // no from/limit/union: near miss
      entry("6", "/s <EOS> UNION ALL SELECT"),
  };
  const RuleMatches matches = apply_rules(entries, rules);
  CHECK(matches.matched[0]);
  CHECK_FALSE(matches.matched[1]);
  CHECK(matches.matched[2]);
  CHECK(matches.matched[3]);
  CHECK_FALSE(matches.matched[4]);
  CHECK(matches.matched[5]);  // case-insensitive
  CHECK(matches.per_rule.at("sqli") == 2);
  CHECK(matches.per_rule.at("fileinclude") == 1);
  CHECK(matches.per_rule.at("xss") == 1);
}

TEST_CASE("rules files parse names, tabs and comments") {
  const RuleSet rules = parse_rules("# comment\nmyrule\tfoo.?bar\n");
  REQUIRE(rules.rules.size() == 1);
  CHECK(rules.rules[0].name == "myrule");
  CHECK(rule_matches(rules.rules[0], "FOOxBAR"));
  CHECK_THROWS_AS(parse_rules("a\t(unclosed\n"), DataError);
  CHECK_THROWS_AS(parse_rules("a\tx\na\ty\n"), DataError);
  CHECK_THROWS_AS(parse_rules("missing-tab\n"), DataError);
}

namespace {

std::vector<DetectionRecord> fake_records(std::size_t n, std::size_t malicious) {
  std::vector<DetectionRecord> records(n);
  for (std::size_t i = 0; i < n; ++i) {
    records[i].id = "r" + std::to_string(i);
    records[i].malicious = i < malicious;
  }
  return records;
}

}  // namespace

TEST_CASE("mt counter fixture: 10 malicious, 6 matched, 3 verified") {
  const auto records = fake_records(12, 10);
  std::vector<bool> flags(12, false);
  for (int i = 0; i < 6; ++i) flags[i] = true;
  const MtCounters c =
      mt_counters(records, flags, {"r6", "r7", "r8"});
  CHECK(c.mt_model == 10);
  CHECK(c.mt_rule == 6);
  CHECK(c.mt_new == 3);
  CHECK(c.fp_est == 1);
}

TEST_CASE("no matches and no verification leaves everything as FP") {
  const auto records = fake_records(5, 4);
  const MtCounters c = mt_counters(records, std::vector<bool>(5, false), {});
  CHECK(c.mt_model == 4);
  CHECK(c.fp_est == 4);
}

TEST_CASE("zero model detections give all-zero counters") {
  const auto records = fake_records(4, 0);
  const MtCounters c = mt_counters(records, std::vector<bool>(4, false), {});
  CHECK(c.mt_model == 0);
  CHECK(c.mt_rule == 0);
  CHECK(c.mt_new == 0);
  CHECK(c.fp_est == 0);
}

TEST_CASE("verified ids must be model-malicious and rule-unmatched") {
  const auto records = fake_records(4, 2);
  std::vector<bool> flags = {true, false, false, false};
  CHECK_THROWS_AS(mt_counters(records, flags, {"r0"}), DataError);  // rule-matched
  CHECK_THROWS_AS(mt_counters(records, flags, {"r3"}), DataError);  // benign
  CHECK_THROWS_AS(mt_counters(records, flags, {"zz"}), DataError);  // unknown
  const MtCounters ok = mt_counters(records, flags, {"r1"});
  CHECK(ok.mt_new == 1);
}

TEST_CASE("counters always satisfy mt_rule + mt_new <= mt_model") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + rng.below(20);
    const std::size_t malicious = rng.below(n + 1);
    const auto records = fake_records(n, malicious);
    std::vector<bool> flags(n);
    std::vector<std::string> verified;
    for (std::size_t i = 0; i < n; ++i) {
      flags[i] = rng.bernoulli(0.3);
      if (i < malicious && !flags[i] && rng.bernoulli(0.3)) {
        verified.push_back(records[i].id);
      }
    }
    const MtCounters c = mt_counters(records, flags, verified);
    CHECK(c.mt_rule + c.mt_new <= c.mt_model);
    CHECK(c.fp_est == c.mt_model - c.mt_rule - c.mt_new);
  }
}

namespace {

DetectionRecord attn_record(std::vector<std::string> tokens, std::vector<Scalar> weights) {
  DetectionRecord r;
  r.id = "h";
  r.malicious = true;
  r.attn_tokens_content = std::move(tokens);
  r.attn_weights_content = Eigen::Map<Vector>(weights.data(), weights.size());
  return r;
}

}  // namespace

TEST_CASE("uniform weights render at full opacity everywhere") {
  const std::string html = heatmap_html({"a", "b", "c"}, Vector::Constant(3, 1.0 / 3));
  CHECK(html.find("rgba(217,56,30,1.0000)\">a</span>") != std::string::npos);
  CHECK(html.find("rgba(217,56,30,1.0000)\">b</span>") != std::string::npos);
  CHECK(html.find("rgba(217,56,30,1.0000)\">c</span>") != std::string::npos);
}

TEST_CASE("the dominant token renders at opacity one") {
  Vector w(3);
  w << 0.1, 0.8, 0.1;
  const std::string html = heatmap_html({"x", "key", "y"}, w);
  CHECK(html.find("rgba(217,56,30,1.0000)\">key</span>") != std::string::npos);
  CHECK(html.find("rgba(217,56,30,0.1250)\">x</span>") != std::string::npos);
}

TEST_CASE("heatmaps are byte-identical across calls and escape HTML") {
  Vector w(2);
  w << 0.5, 0.5;
  const std::string a = heatmap_html({"<script>", "x&y"}, w);
  const std::string b = heatmap_html({"<script>", "x&y"}, w);
  CHECK(a == b);
  CHECK(a.find("&lt;script&gt;") != std::string::npos);
  CHECK(a.find("x&amp;y") != std::string::npos);
  CHECK_THROWS_AS(heatmap_html({}, Vector()), DataError);
}

TEST_CASE("top-k hit ratios count keyword recovery") {
  std::vector<DetectionRecord> records;
  // 10 records; "etc" concentrated in 7 of them, absent otherwise.
  for (int i = 0; i < 10; ++i) {
    if (i < 7) {
      records.push_back(attn_record({"etc", "passwd", "a", "b", "c", "d"},
                                    {0.4, 0.3, 0.1, 0.1, 0.05, 0.05}));
    } else {
      records.push_back(attn_record({"x", "y", "z", "w", "v", "u"},
                                    {0.3, 0.2, 0.2, 0.1, 0.1, 0.1}));
    }
  }
  const auto ratios = topk_hit_ratio(records, {"etc", "passwd", "absent"}, 5);
  REQUIRE(ratios.size() == 3);
  CHECK(ratios[0].ratio == doctest::Approx(0.7));
  CHECK(ratios[1].ratio == doctest::Approx(0.7));
  CHECK(ratios[2].ratio == 0.0);
}

TEST_CASE("keyword present in the top five of every record scores one") {
  std::vector<DetectionRecord> records(3, attn_record({"select", "a"}, {0.9, 0.1}));
  const auto ratios = topk_hit_ratio(records, {"SELECT"}, 5);
  CHECK(ratios[0].ratio == 1.0);
}

TEST_CASE("zeroing the structure fusion block reproduces content-only output") {
  Config cfg;
  cfg.seq_len = 16;
  cfg.embed_dim = 6;
  cfg.hidden_dim = 5;
  cfg.attn_dim = 7;
  const std::vector<TrafficEntry> corpus = {
      entry("1", "/a/b <EOS> x=1"), entry("2", "/c <EOS> select from"),
      entry("3", "/d/e.php <EOS> "), entry("4", "/f?g=2 <EOS> h")};
  const BranchVocabs vocabs = build_vocabs(corpus, cfg);

  Rng rng(50);
  ModelParams both = init_params(dims_from(cfg, vocabs, FeatureMode::Both), 0.08, 1.0, rng);
  ModelParams content_only(both);
  content_only.dims.mode = FeatureMode::Content;
  content_only.branches.resize(1);
  content_only.fuse_w = both.fuse_w.leftCols(cfg.attn_dim);

  both.fuse_w.rightCols(cfg.attn_dim).setZero();

  for (const TrafficEntry& e : corpus) {
    const DetectionRecord a = predict(e, vocabs, both);
    const DetectionRecord b = predict(e, vocabs, content_only);
    CHECK(a.prob_malicious == b.prob_malicious);
  }
}

TEST_CASE("ablation table renders one row per dataset and mode") {
  std::vector<AblationRow> rows;
  AblationRow row;
  row.dataset = "toy";
  row.mode = "both";
  row.metrics.precision = 0.5;
  row.metrics.recall = 1.0;
  row.metrics.f1 = 2.0 / 3.0;
  rows.push_back(row);
  const std::string table = ablation_table(rows);
  CHECK(table.find("dataset") != std::string::npos);
  CHECK(table.find("toy") != std::string::npos);
  CHECK(table.find("0.6667") != std::string::npos);
  CHECK(table.find("n/a") != std::string::npos);
}
