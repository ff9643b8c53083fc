// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails.
#include "httpmine/config.hpp"
#include "httpmine/detect.hpp"
#include "httpmine/ingest.hpp"
#include "httpmine/metrics.hpp"
#include "httpmine/mining.hpp"
#include "httpmine/model.hpp"
#include "httpmine/pipeline.hpp"
#include "httpmine/report.hpp"
#include "httpmine/rules.hpp"
#include "httpmine/tokenize.hpp"
#include "httpmine/util.hpp"

#include "support/oracles.hpp"
#include "support/toy_corpus.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

using namespace httpmine;
namespace fs = std::filesystem;

namespace {

struct CriterionFailure {
  std::string message;
};

void require(bool condition, const std::string& message) {
  if (!condition) throw CriterionFailure{message};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

// Shared artifacts: criterion 4 trains the toy model; 6 reuses it.
struct ToyRun {
  Config cfg;
  std::vector<TrafficEntry> train_set, test_set;
  BranchVocabs vocabs;
  Scalar f1 = 0;
  int epochs = 0;
  ModelParams params;  // last: build() fills the members above

  ToyRun() : params(build()) {}

  ModelParams build() {
    cfg.seq_len = 48;
    cfg.embed_dim = 16;
    cfg.hidden_dim = 16;
    cfg.attn_dim = 32;
    cfg.batch_size = 200;  // pinned
    cfg.epochs = 25;
    cfg.learning_rate = 0.01;
    cfg.dropout = 0.3;
    cfg.vocab_size_content = 2000;
    cfg.vocab_size_structure = 500;
    cfg.seed = 7;
    epochs = cfg.epochs;

    toy::Options opts;
    opts.count = 2000;
    opts.malicious_fraction = 0.5;
    opts.seed = 42;
    const auto all = toy::entries(opts);
    toy::split(all, 0.8, &train_set, &test_set);

    vocabs = build_vocabs(train_set, cfg);
    const auto samples =
        encode_entries(train_set, vocabs, cfg.seq_len, detectors_from(cfg));
    return train(samples, dims_from(cfg, vocabs, FeatureMode::Both),
                 hyper_from(cfg));
  }
};

ToyRun* toy_run = nullptr;

// --- criterion 1 ---------------------------------------------------------------

void criterion_structure_golden() {
  // Fig-2 style goldens first, then fixture tokens covering every
  // substitution row: the five encodings and the five character classes.
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"3c5fee35600000218bf9c5d7b5d3524e", "MD5_HASH"},
      {"68247", "DDDDD"},
      {"da39a3ee5e6b4b0d3255bfef95601890afd80709", "SHA_HASH"},
      {"e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855", "SHA_HASH"},
      {"QWxhZGRpbjpvcGVuIHNlc2FtZQ==", "BASE64_ENCODE"},
      {"U2VjcmV0UGF5bG9hZDEy", "BASE64_ENCODE"},
      {"deadbeefcafe1234", "HEXADECIMAL"},
      {"ABCDEF12", "HEXADECIMAL"},
      {"0101010101", "BINARY"},
      {"00000000", "BINARY"},
      {"admin", "WWWWW"},
      {"B2", "WD"},
      {"42user", "DDWWWW"},
      {"987654321", "DDDDDDDDD"},
      {"naïve", "WWGWW"},
      {"£", "G"},
      {"中文", "CC"},
      {"錯誤", "CC"},
      {std::string("abc\x07"), "WWWI"},
      {std::string("x\xE2\x80\x8By", 5), "WIW"},  // zero-width space inside
      {"a1b2", "WDWD"},
      {"xyz", "WWW"},
  };
  for (const auto& [token, expected] : cases) {
    const StructSeq got = structure_of({token});
    require(got.size() == 1 && got[0] == expected,
            "token '" + token + "' -> '" + (got.empty() ? "" : got[0]) +
                "', expected '" + expected + "'");
  }
  // Pass-through rows: special characters and the marker.
  const StructSeq passthrough = structure_of({"/", ";", "<EOS>"});
  require(passthrough == StructSeq{"/", ";", "<EOS>"},
          "special characters and <EOS> must pass through unchanged");
}

// --- criterion 2 ---------------------------------------------------------------

void criterion_segmentation_golden() {
  const std::string content =
      "/tienda1/publico/vaciar.jsp <EOS> B2=Vaciar carrito; DROP TABLE "
      "usuarios; SELECT * FROM datos WHERE nombre LIKE";
  const TokenSeq expected = {
      "/",  "tienda1", "/",        "publico", "/",      "vaciar", ".",
      "jsp", "<EOS>",  "B2",       "=",       "Vaciar", "carrito", ";",
      "DROP", "TABLE", "usuarios", ";",       "SELECT", "*",      "FROM",
      "datos", "WHERE", "nombre",  "LIKE"};
  const TokenSeq got = segment(content);
  std::ostringstream detail;
  for (const auto& t : got) detail << t << "|";
  require(got == expected, "segmentation mismatch: " + detail.str());
}

// --- criterion 3 ---------------------------------------------------------------

void criterion_gradient_fidelity() {
  for (int instance = 0; instance < 10; ++instance) {
    Rng rng(100 + instance);
    ModelDims dims;
    dims.seq_len = 6;
    dims.embed_dim = 2 + static_cast<int>(rng.below(3));   // <= 4
    dims.hidden_dim = 2 + static_cast<int>(rng.below(3));  // <= 4
    dims.attn_dim = 2 + static_cast<int>(rng.below(3));    // <= 4
    dims.vocab_content = 5;
    dims.vocab_structure = 4;
    dims.mode = FeatureMode::Both;

    ModelParams params = init_params(dims, 0.08, 1.0, rng);
    // Keep weights away from the ReLU kink so central differences stay valid.
    for (TensorRef& ref : tensor_refs(params)) {
      for (Eigen::Index i = 0; i < ref.size(); ++i) {
        const Scalar magnitude = 0.02 + 0.06 * rng.uniform();
        ref.data[i] = rng.bernoulli(0.5) ? magnitude : -magnitude;
      }
    }
    for (BranchParams& br : params.branches) br.embedding.row(0).setZero();

    std::vector<EncodedSample> batch;
    for (int s = 0; s < 2; ++s) {
      EncodedSample sample;
      for (auto [seq, vocab] : {std::pair{&sample.content, dims.vocab_content},
                                std::pair{&sample.structure, dims.vocab_structure}}) {
        // At least three positions: a singleton softmax has an identically
        // zero attention-score gradient, which would blind the mutation test.
        const int len = 3 + static_cast<int>(rng.below(dims.seq_len - 2));
        seq->indices.assign(dims.seq_len, 0);
        for (int k = 0; k < len; ++k) {
          seq->indices[k] = 2 + static_cast<int>(rng.below(vocab));
        }
        seq->valid_len = len;
      }
      sample.label = s % 2;
      batch.push_back(std::move(sample));
    }

    const Scalar err = grad_check(params, batch);
    require(err < 1e-3, "instance " + std::to_string(instance) +
                            ": grad check error " + fmt(err) + " >= 1e-3");

    if (instance == 0) {
      // Doubling any single tensor's gradient must trip the check.
      const auto masks = grad_check_masks(dims, batch.size());
      const ModelParams numeric = numeric_gradients(params, batch, masks);
      ModelParams analytic = analytic_gradients(params, batch, masks);
      for (TensorRef& ref : tensor_refs(analytic)) {
        Eigen::Map<Vector> view(ref.data, ref.size());
        view *= 2.0;
        const Scalar mutated = max_rel_error(analytic, numeric);
        require(mutated > 0.1, "doubling " + ref.name +
                                   " gradients only moved the error to " +
                                   fmt(mutated));
        view /= 2.0;
      }
    }
  }
}

// --- criterion 4 ---------------------------------------------------------------

void criterion_toy_detection() {
  require(toy_run->epochs <= 50, "training must stay within 50 epochs");
  std::vector<Prediction> predictions;
  const DetectorConfig detectors = detectors_from(toy_run->cfg);
  for (const TrafficEntry& entry : toy_run->test_set) {
    const DetectionRecord record =
        predict(entry, toy_run->vocabs, toy_run->params, detectors);
    require(!record.error, "prediction error on " + entry.id);
    Prediction p;
    p.prob_malicious = record.prob_malicious;
    p.predicted_malicious = record.malicious;
    p.truth_malicious = entry.malicious.value_or(false);
    predictions.push_back(p);
  }
  const Metrics m = compute_metrics(predictions);
  toy_run->f1 = m.f1;
  std::cout << "      held-out F1 " << fmt(m.f1) << " after "
            << toy_run->epochs << " epochs\n";
  require(m.f1 >= 0.95, "held-out F1 " + fmt(m.f1) + " < 0.95 (" +
                            std::to_string(toy_run->epochs) + " epochs)");
}

// --- criterion 5 ---------------------------------------------------------------

void criterion_ablation_ordering() {
  Config cfg;
  cfg.seq_len = 32;
  cfg.embed_dim = 12;
  cfg.hidden_dim = 12;
  cfg.attn_dim = 24;
  cfg.batch_size = 100;
  cfg.epochs = 14;
  cfg.learning_rate = 0.01;
  cfg.dropout = 0.3;
  cfg.vocab_size_content = 200;
  cfg.vocab_size_structure = 200;
  cfg.seed = 11;

  AblationDataset shared;
  shared.name = "shared-structure";
  {
    const auto all = toy::shared_structure_entries(800, 77);
    toy::split(all, 0.75, &shared.train, &shared.test);
  }
  AblationDataset degenerate;
  degenerate.name = "structure-degenerate";
  {
    const auto all = toy::structure_degenerate_entries(800, 78);
    toy::split(all, 0.75, &degenerate.train, &degenerate.test);
  }

  const auto rows = ablation({shared, degenerate}, cfg);
  std::map<std::string, std::map<std::string, Scalar>> f1;
  for (const AblationRow& row : rows) f1[row.dataset][row.mode] = row.metrics.f1;
  for (const AblationRow& row : rows) {
    std::cout << "      " << row.dataset << " / " << row.mode << ": F1 "
              << fmt(row.metrics.f1) << "\n";
  }

  const Scalar both = f1["shared-structure"]["both"];
  const Scalar content = f1["shared-structure"]["content"];
  require(both >= content - 0.02,
          "shared-structure corpus: both F1 " + fmt(both) + " < content F1 " +
              fmt(content) + " - 0.02");

  const Scalar deg_content = f1["structure-degenerate"]["content"];
  const Scalar deg_structure = f1["structure-degenerate"]["structure"];
  require(deg_content - deg_structure >= 0.3,
          "structure-degenerate corpus: content F1 " + fmt(deg_content) +
              " - structure F1 " + fmt(deg_structure) + " < 0.3");
}

// --- criterion 6 ---------------------------------------------------------------

void criterion_attention_keywords() {
  const DetectorConfig detectors = detectors_from(toy_run->cfg);
  std::map<std::string, std::pair<std::size_t, std::size_t>> hits;  // motif -> (hit, total)
  for (const TrafficEntry& entry : toy_run->test_set) {
    const std::string motif_name = toy::motif_of(entry.id);
    if (motif_name.empty()) continue;
    const DetectionRecord record =
        predict(entry, toy_run->vocabs, toy_run->params, detectors);
    const auto keywords = top_m_keywords(record, 5);
    std::set<std::string> lowered;
    for (const auto& k : keywords) lowered.insert(to_lower(k));
    bool hit = false;
    for (const toy::Motif& motif : toy::motifs()) {
      if (motif.name != motif_name) continue;
      for (const auto& token : motif.tokens) hit = hit || lowered.count(token) > 0;
    }
    auto& [h, total] = hits[motif_name];
    h += hit ? 1 : 0;
    ++total;
  }
  require(hits.size() == 3, "expected malicious test entries for all 3 motifs");
  int passing = 0;
  std::ostringstream detail;
  for (const auto& [motif, counts] : hits) {
    const Scalar ratio =
        static_cast<Scalar>(counts.first) / static_cast<Scalar>(counts.second);
    detail << motif << "=" << fmt(ratio) << " ";
    if (ratio >= 0.70) ++passing;
  }
  std::cout << "      top-5 recovery: " << detail.str() << "\n";
  require(passing >= 2,
          "top-5 recovery below 0.70 on more than one motif: " + detail.str());
}

// --- criterion 7 ---------------------------------------------------------------

std::vector<int> canonical(const std::vector<int>& labels) {
  std::vector<int> out(labels.size(), kNoise);
  std::map<int, int> remap;
  int next = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kNoise) continue;
    if (remap.find(labels[i]) == remap.end()) remap[labels[i]] = next++;
    out[i] = remap[labels[i]];
  }
  return out;
}

void criterion_dbscan_oracle() {
  for (int trial = 0; trial < 25; ++trial) {
    Rng rng(500 + trial);
    const int n = 8 + static_cast<int>(rng.below(33));  // <= 40
    const int dim = 2 + static_cast<int>(rng.below(7)); // 2..8
    std::vector<Vector> points;
    for (int i = 0; i < n; ++i) {
      Vector v(dim);
      // A few loose cluster centers plus scatter.
      const Scalar center = static_cast<Scalar>(rng.below(3)) * 4.0;
      for (int d = 0; d < dim; ++d) v(d) = center + rng.uniform(-1.2, 1.2);
      points.push_back(std::move(v));
    }
    const Metric metric = trial % 5 == 0 ? Metric::Cosine : Metric::Euclidean;
    const Scalar eps = metric == Metric::Cosine ? 0.05 + 0.1 * rng.uniform()
                                                : 0.8 + 1.2 * rng.uniform();
    const int min_pts = 2 + static_cast<int>(rng.below(4));
    const auto mine = dbscan(points, eps, min_pts, metric);
    const auto expected = oracle::dbscan(points, eps, min_pts, metric);
    require(canonical(mine) == canonical(expected),
            "trial " + std::to_string(trial) + ": assignments differ from oracle");
  }
}

// --- criterion 8 ---------------------------------------------------------------

void criterion_pattern_extraction() {
  Rng rng(900);
  const std::vector<std::string> planted = {"textarea", "script", "alert"};
  const std::vector<std::string> noise = {"lorem", "ipsum", "dolor", "sit", "amet"};
  std::vector<DetectionRecord> records;
  std::vector<int> assignment;
  std::map<std::string, std::string> contents;
  const int n = 50;
  for (int e = 0; e < n; ++e) {
    std::vector<std::string> tokens;
    if (e % 10 != 0) tokens = planted;  // present in 90% of the cluster
    tokens.push_back(noise[rng.below(noise.size())]);
    tokens.push_back(noise[rng.below(noise.size())]);

    std::vector<Scalar> weights(tokens.size());
    Scalar total = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const bool is_planted = i < 3 && e % 10 != 0;
      weights[i] = is_planted ? 0.3 : 0.05 + 0.01 * static_cast<Scalar>(rng.below(5));
      total += weights[i];
    }
    for (Scalar& w : weights) w /= total;

    DetectionRecord r;
    r.id = "p" + std::to_string(e);
    r.malicious = true;
    r.attn_tokens_content = tokens;
    r.attn_weights_content = Eigen::Map<Vector>(weights.data(), weights.size());
    records.push_back(std::move(r));
    assignment.push_back(0);
    std::string content;
    for (const auto& t : tokens) content += t + " ";
    contents["p" + std::to_string(e)] = content + "<EOS> ";
  }

  PatternOptions options;  // n=50, m=5, theta=0.5 defaults
  const auto reports = mine_patterns(records, assignment, contents, options);
  require(reports.size() == 1, "expected a single cluster report");
  const ClusterPatterns& report = reports[0];

  const MatrixX<int> expected = oracle::cooccurrence(report.candidates, report.keyword_sets);
  require((report.matrix.array() == expected.array()).all(),
          "co-occurrence matrix deviates from the brute-force oracle");

  const std::set<std::string> got(report.pattern_words.begin(), report.pattern_words.end());
  std::ostringstream detail;
  for (const auto& w : got) detail << w << " ";
  require(got == std::set<std::string>(planted.begin(), planted.end()),
          "pattern words {" + detail.str() + "} != planted trio");
}

// --- criterion 9 ---------------------------------------------------------------

void run_pipeline(const std::string& raw_path, const fs::path& dir, const Config& cfg) {
  fs::create_directories(dir);
  ParseStats parse_stats;
  const auto raw = parse_dataset(raw_path, &parse_stats);
  CleanStats clean_stats;
  const auto entries = clean(raw, &clean_stats, cfg.decode_max_passes);
  write_entries((dir / "entries.jsonl").string(), entries);

  const BranchVocabs vocabs = build_vocabs(entries, cfg);
  save_vocab((dir / "vocab_content.tsv").string(), vocabs.content);
  save_vocab((dir / "vocab_structure.tsv").string(), vocabs.structure);

  const auto samples = encode_entries(entries, vocabs, cfg.seq_len, detectors_from(cfg));
  const TrainHyper hyper = hyper_from(cfg);
  const ModelParams params =
      train(samples, dims_from(cfg, vocabs, FeatureMode::Both), hyper);
  save_checkpoint((dir / "model.json").string(), params, hyper);

  batch_detect(entries, vocabs, params, (dir / "records.jsonl").string(),
               detectors_from(cfg));

  const auto malicious = [&] {
    std::vector<DetectionRecord> out;
    for (DetectionRecord& r : read_records((dir / "records.jsonl").string())) {
      if (!r.error && r.malicious) out.push_back(std::move(r));
    }
    return out;
  }();
  std::vector<Vector> points;
  for (const DetectionRecord& r : malicious) points.push_back(cluster_point(r));
  const auto assignment =
      dbscan(points, cfg.dbscan_eps, cfg.dbscan_min_pts, parse_metric(cfg.dbscan_metric));
  write_clusters((dir / "clusters.jsonl").string(), malicious, assignment);

  std::map<std::string, std::string> contents;
  for (const TrafficEntry& e : entries) contents[e.id] = e.content;
  PatternOptions options;
  options.top_n = cfg.top_n;
  options.top_m = cfg.top_m;
  options.theta = cfg.pattern_theta;
  options.keep_special = cfg.keep_special;
  write_pattern_report(dir.string(),
                       mine_patterns(malicious, assignment, contents, options));

  for (const DetectionRecord& r : malicious) {
    if (r.attn_weights_content.size() > 0) {
      spit_file((dir / "heatmap.html").string(),
                heatmap_html(r.attn_tokens_content, r.attn_weights_content));
      break;
    }
  }
}

void criterion_pipeline_determinism() {
  Config cfg;
  cfg.seq_len = 32;
  cfg.embed_dim = 8;
  cfg.hidden_dim = 8;
  cfg.attn_dim = 12;
  cfg.batch_size = 50;
  cfg.epochs = 4;
  cfg.vocab_size_content = 500;
  cfg.vocab_size_structure = 200;
  cfg.seed = 99;
  cfg.dbscan_eps = 0.3;
  cfg.dbscan_min_pts = 5;

  toy::Options opts;
  opts.count = 400;
  opts.seed = 55;
  const fs::path base = fs::temp_directory_path() / "httpmine_acceptance";
  fs::remove_all(base);
  fs::create_directories(base);
  const std::string raw_path = (base / "raw.jsonl").string();
  spit_file(raw_path, toy::raw_jsonl(opts));

  run_pipeline(raw_path, base / "run1", cfg);
  run_pipeline(raw_path, base / "run2", cfg);

  for (const std::string name :
       {"records.jsonl", "clusters.jsonl", "heatmap.html", "entries.jsonl",
        "vocab_content.tsv", "vocab_structure.tsv", "patterns.json", "model.json"}) {
    const std::string a = slurp_file((base / "run1" / name).string());
    const std::string b = slurp_file((base / "run2" / name).string());
    require(!a.empty(), name + " is empty");
    require(a == b, name + " differs between identical runs");
  }
  fs::remove_all(base);
}

// --- criterion 10 ----------------------------------------------------------------

void criterion_metrics_oracle() {
  for (int trial = 0; trial < 50; ++trial) {
    Rng rng(700 + trial);
    std::vector<Prediction> predictions(100);
    for (auto& p : predictions) {
      // Mix of continuous and quantized probabilities to exercise midranks.
      p.prob_malicious = rng.bernoulli(0.5)
                             ? rng.uniform()
                             : static_cast<Scalar>(rng.below(10)) / 10.0;
      p.predicted_malicious = p.prob_malicious > 0.5;
      p.truth_malicious = rng.bernoulli(0.4);
    }
    predictions[0].truth_malicious = true;
    predictions[1].truth_malicious = false;
    const auto fast = rank_auc(predictions);
    require(fast.has_value(), "AUC undefined on a two-class fixture");
    const Scalar slow = oracle::pair_auc(predictions);
    require(std::abs(*fast - slow) <= 1e-12,
            "trial " + std::to_string(trial) + ": |rank - pairs| = " +
                std::to_string(std::abs(*fast - slow)));
  }
}

struct Criterion {
  int id;
  std::string name;
  std::function<void()> run;
};

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {1, "structure-extraction golden suite", criterion_structure_golden},
      {2, "segmentation golden suite", criterion_segmentation_golden},
      {3, "gradient fidelity + mutation sensitivity", criterion_gradient_fidelity},
      {4, "toy detection F1 >= 0.95", criterion_toy_detection},
      {5, "ablation ordering", criterion_ablation_ordering},
      {6, "attention keyword recovery", criterion_attention_keywords},
      {7, "DBSCAN oracle equivalence", criterion_dbscan_oracle},
      {8, "pattern extraction + co-occurrence oracle", criterion_pattern_extraction},
      {9, "pipeline determinism", criterion_pipeline_determinism},
      {10, "AUC rank statistic vs pair enumeration", criterion_metrics_oracle},
  };

  std::cout << "building shared toy model (criteria 4 and 6)...\n" << std::flush;
  const auto setup_start = std::chrono::steady_clock::now();
  ToyRun shared_run;
  toy_run = &shared_run;
  const std::chrono::duration<double> setup_elapsed =
      std::chrono::steady_clock::now() - setup_start;
  std::cout << "toy model trained in " << fmt(setup_elapsed.count()) << " s\n";

  int failures = 0;
  for (const Criterion& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string message;
    bool ok = true;
    try {
      criterion.run();
    } catch (const CriterionFailure& f) {
      ok = false;
      message = f.message;
    } catch (const std::exception& e) {
      ok = false;
      message = std::string("exception: ") + e.what();
    }
    const std::chrono::duration<double> elapsed =
        std::chrono::steady_clock::now() - start;
    std::cout << (ok ? "PASS" : "FAIL") << "  [" << criterion.id << "] "
              << criterion.name << " (" << fmt(elapsed.count()) << " s)";
    if (!ok) {
      std::cout << " -- " << message;
      ++failures;
    }
    std::cout << "\n" << std::flush;
  }
  if (failures > 0) {
    std::cout << failures << " criterion(s) failed\n";
    return 1;
  }
  std::cout << "all criteria passed\n";
  return 0;
}
