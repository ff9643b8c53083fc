// Command-line pipeline: ingest -> vocab build -> train -> detect ->
// mine cluster|patterns|verify-sheet|verify-apply -> eval ... -> report.
#include "httpmine/config.hpp"
#include "httpmine/detect.hpp"
#include "httpmine/ingest.hpp"
#include "httpmine/metrics.hpp"
#include "httpmine/mining.hpp"
#include "httpmine/model.hpp"
#include "httpmine/pipeline.hpp"
#include "httpmine/report.hpp"
#include "httpmine/rules.hpp"
#include "httpmine/util.hpp"
#include "httpmine/vocab.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace httpmine;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct Global {
  Config cfg;
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;

  void finish() {
    if (!config_path.empty()) cfg.load_file(config_path);
    if (seed_set) cfg.seed = seed;
    fs::create_directories(out_dir);
  }
  std::string out(const std::string& name) const { return out_dir + "/" + name; }
};

std::map<std::string, std::string> contents_by_id(const std::vector<TrafficEntry>& entries) {
  std::map<std::string, std::string> map;
  for (const TrafficEntry& e : entries) map[e.id] = e.content;
  return map;
}

// Aligns records with a cluster file, keeping record order.
std::vector<int> assignment_for(const std::vector<DetectionRecord>& records,
                                const std::map<std::string, int>& clusters) {
  std::vector<int> assignment;
  assignment.reserve(records.size());
  for (const DetectionRecord& r : records) {
    const auto it = clusters.find(r.id);
    if (it == clusters.end())
      throw DataError("record id '" + r.id + "' missing from the cluster file");
    assignment.push_back(it->second);
  }
  return assignment;
}

std::vector<DetectionRecord> malicious_records(const std::string& records_path) {
  std::vector<DetectionRecord> malicious;
  for (DetectionRecord& r : read_records(records_path)) {
    if (!r.error && r.malicious) malicious.push_back(std::move(r));
  }
  return malicious;
}

void cmd_ingest(const Global& g, const std::string& input) {
  ParseStats parse_stats;
  const auto records = parse_dataset(input, &parse_stats);
  CleanStats clean_stats;
  const auto entries = clean(records, &clean_stats, g.cfg.decode_max_passes);
  write_entries(g.out("entries.jsonl"), entries);
  ordered_json stats;
  stats["parsed"] = parse_stats.parsed;
  stats["malformed"] = parse_stats.malformed;
  stats["input"] = clean_stats.input;
  stats["duplicates"] = clean_stats.duplicates;
  stats["dropped"] = clean_stats.dropped;
  stats["entries"] = entries.size();
  spit_file(g.out("ingest_stats.json"), stats.dump(2) + "\n");
  std::cout << stats.dump(2) << "\n";
}

void cmd_vocab_build(const Global& g, const std::string& entries_path) {
  const auto entries = read_entries(entries_path);
  const BranchVocabs vocabs = build_vocabs(entries, g.cfg);
  save_vocab(g.out("vocab_content.tsv"), vocabs.content);
  save_vocab(g.out("vocab_structure.tsv"), vocabs.structure);
  std::cout << "content vocabulary: " << vocabs.content.size() << " tokens\n"
            << "structure vocabulary: " << vocabs.structure.size() << " tokens\n";
}

BranchVocabs load_vocabs(const std::string& content_path, const std::string& structure_path) {
  BranchVocabs vocabs;
  vocabs.content = load_vocab(content_path);
  vocabs.structure = load_vocab(structure_path);
  return vocabs;
}

void cmd_train(const Global& g, const std::string& entries_path,
               const std::string& vocab_content, const std::string& vocab_structure,
               const std::string& mode_name) {
  const auto entries = read_entries(entries_path);
  for (const TrafficEntry& e : entries) {
    if (!e.malicious.has_value())
      throw DataError("entry '" + e.id + "' has no label; training needs labels");
  }
  const BranchVocabs vocabs = load_vocabs(vocab_content, vocab_structure);
  const FeatureMode mode = parse_feature_mode(mode_name.empty() ? g.cfg.feature_mode : mode_name);
  const auto samples = encode_entries(entries, vocabs, g.cfg.seq_len, detectors_from(g.cfg));
  std::vector<EpochStats> curve;
  const TrainHyper hyper = hyper_from(g.cfg);
  const ModelParams params = train(samples, dims_from(g.cfg, vocabs, mode), hyper, &curve);
  save_checkpoint(g.out("model.json"), params, hyper);

  ordered_json jcurve = ordered_json::array();
  for (std::size_t e = 0; e < curve.size(); ++e) {
    jcurve.push_back({{"epoch", e}, {"loss", curve[e].loss}, {"accuracy", curve[e].accuracy}});
  }
  spit_file(g.out("curve.json"), jcurve.dump(2) + "\n");
  std::cout << "trained " << feature_mode_name(mode) << " model for "
            << curve.size() << " epochs; final loss " << curve.back().loss
            << ", accuracy " << curve.back().accuracy << "\n";
}

void cmd_detect(const Global& g, const std::string& entries_path,
                const std::string& model_path, const std::string& vocab_content,
                const std::string& vocab_structure) {
  const auto entries = read_entries(entries_path);
  const BranchVocabs vocabs = load_vocabs(vocab_content, vocab_structure);
  const Checkpoint ckpt = load_checkpoint(model_path);
  const DetectStats stats = batch_detect(entries, vocabs, ckpt.params,
                                         g.out("records.jsonl"), detectors_from(g.cfg));
  ordered_json summary;
  summary["total"] = stats.total;
  summary["malicious"] = stats.predicted_malicious;
  summary["benign"] = stats.predicted_benign;
  summary["errors"] = stats.errors;
  summary["mt_model"] = stats.predicted_malicious;
  spit_file(g.out("detect_summary.json"), summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
}

void cmd_mine_cluster(const Global& g, const std::string& records_path) {
  const auto malicious = malicious_records(records_path);
  std::vector<Vector> points;
  points.reserve(malicious.size());
  for (const DetectionRecord& r : malicious) points.push_back(cluster_point(r));
  const auto assignment = dbscan(points, g.cfg.dbscan_eps, g.cfg.dbscan_min_pts,
                                 parse_metric(g.cfg.dbscan_metric));
  write_clusters(g.out("clusters.jsonl"), malicious, assignment);
  int clusters = 0;
  std::size_t noise = 0;
  for (const int label : assignment) {
    clusters = std::max(clusters, label + 1);
    noise += label == kNoise ? 1 : 0;
  }
  std::cout << "clustered " << malicious.size() << " malicious records into "
            << clusters << " clusters (" << noise << " noise)\n";
}

void cmd_mine_patterns(const Global& g, const std::string& records_path,
                       const std::string& clusters_path, const std::string& entries_path) {
  const auto malicious = malicious_records(records_path);
  const auto assignment = assignment_for(malicious, read_clusters(clusters_path));
  const auto contents = contents_by_id(read_entries(entries_path));
  PatternOptions options;
  options.top_n = g.cfg.top_n;
  options.top_m = g.cfg.top_m;
  options.theta = g.cfg.pattern_theta;
  options.keep_special = g.cfg.keep_special;
  const auto reports = mine_patterns(malicious, assignment, contents, options);
  write_pattern_report(g.out_dir, reports);
  for (const ClusterPatterns& report : reports) {
    std::cout << "cluster " << report.cluster << " (" << report.size << " entries): ";
    for (const auto& w : report.pattern_words) std::cout << w << " ";
    std::cout << "\n";
  }
}

void cmd_verify_sheet(const Global& g, const std::string& records_path,
                      const std::string& clusters_path, const std::string& entries_path) {
  const auto malicious = malicious_records(records_path);
  const auto assignment = assignment_for(malicious, read_clusters(clusters_path));
  const auto contents = contents_by_id(read_entries(entries_path));
  const auto rows = sample_for_verification(malicious, assignment, contents,
                                            g.cfg.verify_samples, g.cfg.seed);
  write_worksheet(g.out("worksheet.csv"), rows);
  std::cout << "wrote " << rows.size() << " sample rows to worksheet.csv\n";
}

void cmd_verify_apply(const Global& g, const std::string& worksheet_path,
                      const std::string& records_path, const std::string& clusters_path) {
  const auto malicious = malicious_records(records_path);
  const auto assignment = assignment_for(malicious, read_clusters(clusters_path));
  const auto worksheet = read_worksheet(worksheet_path);
  const VerificationOutcome outcome = apply_verification(worksheet, malicious, assignment);

  ordered_json j;
  j["clusters"] = ordered_json::object();
  for (const auto& [cluster, status] : outcome.cluster_status) {
    j["clusters"][std::to_string(cluster)] = status;
  }
  j["entries"] = ordered_json::object();
  std::ostringstream confirmed;
  for (const auto& [id, verdict] : outcome.entry_verdicts) {
    j["entries"][id] = verdict;
    if (verdict == "correct") confirmed << id << "\n";
  }
  spit_file(g.out("verification.json"), j.dump(2) + "\n");
  spit_file(g.out("confirmed_malicious_ids.txt"), confirmed.str());
  std::cout << j["clusters"].dump(2) << "\n";
}

void cmd_eval_metrics(const Global& g, const std::string& records_path) {
  std::vector<Prediction> predictions;
  for (const DetectionRecord& r : read_records(records_path)) {
    if (r.error || !r.truth.has_value()) continue;
    Prediction p;
    p.prob_malicious = r.prob_malicious;
    p.predicted_malicious = r.malicious;
    p.truth_malicious = *r.truth;
    predictions.push_back(p);
  }
  if (predictions.empty())
    throw DataError("no records with ground truth; cannot compute metrics");
  const Metrics m = compute_metrics(predictions);
  ordered_json j;
  j["tp"] = m.tp;
  j["fp"] = m.fp;
  j["tn"] = m.tn;
  j["fn"] = m.fn;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  if (m.auc.has_value()) j["auc"] = *m.auc;
  else j["auc"] = nullptr;
  spit_file(g.out("metrics.json"), j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  if (!m.auc.has_value()) {
    std::cerr << "warning: single-class ground truth, AUC undefined\n";
  }
}

void cmd_eval_rules(const Global& g, const std::string& entries_path,
                    const std::string& rules_path, const std::string& records_path,
                    const std::string& verified_path) {
  const auto entries = read_entries(entries_path);
  RuleSet rules;
  try {
    rules = rules_path.empty() ? default_rules() : load_rules(rules_path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());  // bad rule files are configuration errors
  }
  const RuleMatches matches = apply_rules(entries, rules);

  std::ostringstream flags;
  std::size_t matched_total = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    ordered_json row;
    row["id"] = entries[i].id;
    row["matched"] = static_cast<bool>(matches.matched[i]);
    flags << row.dump() << "\n";
    matched_total += matches.matched[i] ? 1 : 0;
  }
  spit_file(g.out("rule_flags.jsonl"), flags.str());

  ordered_json j;
  j["matched_entries"] = matched_total;
  j["per_rule"] = ordered_json::object();
  for (const Rule& rule : rules.rules) j["per_rule"][rule.name] = matches.per_rule.at(rule.name);

  if (!records_path.empty()) {
    const auto records = read_records(records_path);
    std::map<std::string, bool> matched_of;
    for (std::size_t i = 0; i < entries.size(); ++i) matched_of[entries[i].id] = matches.matched[i];
    std::vector<bool> record_flags;
    record_flags.reserve(records.size());
    for (const DetectionRecord& r : records) {
      const auto it = matched_of.find(r.id);
      if (it == matched_of.end())
        throw DataError("record id '" + r.id + "' missing from entries file");
      record_flags.push_back(it->second);
    }
    std::vector<std::string> verified;
    if (!verified_path.empty()) {
      std::istringstream in(slurp_file(verified_path));
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) verified.push_back(line);
      }
    }
    const MtCounters counters = mt_counters(records, record_flags, verified);
    j["mt_model"] = counters.mt_model;
    j["mt_rule"] = counters.mt_rule;
    j["mt_new"] = counters.mt_new;
    j["fp_est"] = counters.fp_est;
  }
  spit_file(g.out("rules_report.json"), j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
}

void cmd_eval_ablation(const Global& g, const std::vector<std::string>& dataset_specs) {
  std::vector<AblationDataset> datasets;
  for (const std::string& spec : dataset_specs) {
    // name=train.jsonl,test.jsonl
    const auto eq = spec.find('=');
    const auto comma = spec.find(',', eq + 1);
    if (eq == std::string::npos || comma == std::string::npos)
      throw ConfigError("--dataset expects name=train.jsonl,test.jsonl");
    AblationDataset d;
    d.name = spec.substr(0, eq);
    d.train = read_entries(spec.substr(eq + 1, comma - eq - 1));
    d.test = read_entries(spec.substr(comma + 1));
    datasets.push_back(std::move(d));
  }
  const auto rows = ablation(datasets, g.cfg);
  ordered_json j = ordered_json::array();
  for (const AblationRow& row : rows) {
    ordered_json r;
    r["dataset"] = row.dataset;
    r["mode"] = row.mode;
    r["precision"] = row.metrics.precision;
    r["recall"] = row.metrics.recall;
    r["f1"] = row.metrics.f1;
    if (row.metrics.auc.has_value()) r["auc"] = *row.metrics.auc;
    else r["auc"] = nullptr;
    j.push_back(std::move(r));
  }
  spit_file(g.out("ablation.json"), j.dump(2) + "\n");
  const std::string table = ablation_table(rows);
  spit_file(g.out("ablation.txt"), table);
  std::cout << table;
}

void cmd_eval_topk(const Global& g, const std::string& records_path,
                   const std::string& entries_path, const std::string& rule_name,
                   std::vector<std::string> keywords, const std::string& rules_path,
                   std::vector<int> ks) {
  RuleSet rules;
  try {
    rules = rules_path.empty() ? default_rules() : load_rules(rules_path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  const Rule* rule = nullptr;
  for (const Rule& r : rules.rules) {
    if (r.name == rule_name) rule = &r;
  }
  if (rule == nullptr) throw DataError("unknown rule '" + rule_name + "'");
  if (keywords.empty()) keywords = default_rule_keywords(rule_name);
  if (ks.empty()) ks = {5, 10, 20};

  const auto contents = contents_by_id(read_entries(entries_path));
  std::vector<DetectionRecord> matching;
  for (DetectionRecord& r : read_records(records_path)) {
    if (r.error) continue;
    const auto it = contents.find(r.id);
    if (it == contents.end()) continue;
    if (rule_matches(*rule, it->second)) matching.push_back(std::move(r));
  }
  if (matching.empty()) throw DataError("no records match rule '" + rule_name + "'");

  ordered_json j;
  j["rule"] = rule_name;
  j["records"] = matching.size();
  j["ratios"] = ordered_json::object();
  std::cout << "rule " << rule_name << " (" << matching.size() << " records)\n";
  for (const int k : ks) {
    ordered_json jk = ordered_json::object();
    for (const TopkRatio& r : topk_hit_ratio(matching, keywords, k)) {
      jk[r.keyword] = r.ratio;
      std::cout << "  top-" << k << " " << r.keyword << ": " << r.ratio << "\n";
    }
    j["ratios"]["top" + std::to_string(k)] = std::move(jk);
  }
  spit_file(g.out("topk.json"), j.dump(2) + "\n");
}

void cmd_report_heatmap(const Global& g, const std::string& records_path,
                        const std::string& id, const std::string& branch,
                        const std::string& out_name) {
  const auto records = read_records(records_path);
  const DetectionRecord* chosen = nullptr;
  for (const DetectionRecord& r : records) {
    if (r.error) continue;
    if ((id.empty() && r.attn_weights_content.size() > 0) || r.id == id) {
      chosen = &r;
      break;
    }
  }
  if (chosen == nullptr)
    throw DataError(id.empty() ? "no record with attention weights"
                               : "record '" + id + "' not found");
  const bool structure = branch == "structure";
  const std::string html =
      heatmap_html(structure ? chosen->attn_tokens_structure : chosen->attn_tokens_content,
                   structure ? chosen->attn_weights_structure : chosen->attn_weights_content);
  spit_file(g.out(out_name), html);
  std::cout << "wrote " << out_name << " for record " << chosen->id << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HTTP request anomaly detection and attack-pattern mining"};
  app.require_subcommand(1);

  Global g;
  app.add_option("--config", g.config_path, "key=value configuration file");
  app.add_option("--out-dir", g.out_dir, "output directory (created if missing)");
  app.add_option("--seed", g.seed, "override the configured random seed")
      ->each([&g](const std::string&) { g.seed_set = true; });

  // ingest
  std::string input;
  CLI::App* ingest_cmd = app.add_subcommand("ingest", "clean raw request records");
  ingest_cmd->add_option("--input", input, "raw JSONL file")->required();

  // vocab build
  std::string entries_path, vocab_content_path, vocab_structure_path;
  CLI::App* vocab_cmd = app.add_subcommand("vocab", "vocabulary operations");
  vocab_cmd->require_subcommand(1);
  CLI::App* vocab_build_cmd = vocab_cmd->add_subcommand("build", "build TFIDF vocabularies");
  vocab_build_cmd->add_option("--entries", entries_path, "cleaned entries JSONL")->required();

  // train
  std::string mode_name, model_path;
  CLI::App* train_cmd = app.add_subcommand("train", "train the detection model");
  train_cmd->add_option("--entries", entries_path, "labeled entries JSONL")->required();
  train_cmd->add_option("--vocab-content", vocab_content_path, "content vocabulary TSV")->required();
  train_cmd->add_option("--vocab-structure", vocab_structure_path, "structure vocabulary TSV")->required();
  train_cmd->add_option("--mode", mode_name, "content|structure|both");

  // detect
  CLI::App* detect_cmd = app.add_subcommand("detect", "run the model over entries");
  detect_cmd->add_option("--entries", entries_path, "entries JSONL")->required();
  detect_cmd->add_option("--model", model_path, "model checkpoint")->required();
  detect_cmd->add_option("--vocab-content", vocab_content_path, "content vocabulary TSV")->required();
  detect_cmd->add_option("--vocab-structure", vocab_structure_path, "structure vocabulary TSV")->required();

  // mine
  std::string records_path, clusters_path, worksheet_path;
  CLI::App* mine_cmd = app.add_subcommand("mine", "cluster and mine patterns");
  mine_cmd->require_subcommand(1);
  CLI::App* cluster_cmd = mine_cmd->add_subcommand("cluster", "DBSCAN over attentional states");
  cluster_cmd->add_option("--records", records_path, "detection records JSONL")->required();
  CLI::App* patterns_cmd = mine_cmd->add_subcommand("patterns", "per-cluster pattern mining");
  patterns_cmd->add_option("--records", records_path)->required();
  patterns_cmd->add_option("--clusters", clusters_path)->required();
  patterns_cmd->add_option("--entries", entries_path)->required();
  CLI::App* sheet_cmd = mine_cmd->add_subcommand("verify-sheet", "sample entries for manual review");
  sheet_cmd->add_option("--records", records_path)->required();
  sheet_cmd->add_option("--clusters", clusters_path)->required();
  sheet_cmd->add_option("--entries", entries_path)->required();
  CLI::App* apply_cmd = mine_cmd->add_subcommand("verify-apply", "propagate completed verdicts");
  apply_cmd->add_option("--worksheet", worksheet_path)->required();
  apply_cmd->add_option("--records", records_path)->required();
  apply_cmd->add_option("--clusters", clusters_path)->required();

  // eval
  std::string rules_path, verified_path, rule_name;
  std::vector<std::string> dataset_specs, keywords;
  std::vector<int> ks;
  CLI::App* eval_cmd = app.add_subcommand("eval", "metrics and comparisons");
  eval_cmd->require_subcommand(1);
  CLI::App* metrics_cmd = eval_cmd->add_subcommand("metrics", "precision/recall/F1/AUC");
  metrics_cmd->add_option("--records", records_path)->required();
  CLI::App* rules_cmd = eval_cmd->add_subcommand("rules", "regex rules and MT counters");
  rules_cmd->add_option("--entries", entries_path)->required();
  rules_cmd->add_option("--rules", rules_path, "rules file (default: built-in set)");
  rules_cmd->add_option("--records", records_path, "detection records for MT counters");
  rules_cmd->add_option("--verified-new", verified_path, "file of verified-new ids");
  CLI::App* ablation_cmd = eval_cmd->add_subcommand("ablation", "feature-mode comparison");
  ablation_cmd->add_option("--dataset", dataset_specs, "name=train.jsonl,test.jsonl")->required();
  CLI::App* topk_cmd = eval_cmd->add_subcommand("topk", "keyword hit ratios in top-k attention");
  topk_cmd->add_option("--records", records_path)->required();
  topk_cmd->add_option("--entries", entries_path)->required();
  topk_cmd->add_option("--rule", rule_name)->required();
  topk_cmd->add_option("--keywords", keywords, "override the rule's keywords");
  topk_cmd->add_option("--k", ks, "top-k sizes (default 5 10 20)");

  // report heatmap
  std::string record_id, branch = "content", heatmap_name = "heatmap.html";
  CLI::App* report_cmd = app.add_subcommand("report", "visualization fragments");
  report_cmd->require_subcommand(1);
  CLI::App* heatmap_cmd = report_cmd->add_subcommand("heatmap", "attention heatmap HTML");
  heatmap_cmd->add_option("--records", records_path)->required();
  heatmap_cmd->add_option("--id", record_id, "record id (default: first with attention)");
  heatmap_cmd->add_option("--branch", branch, "content|structure")
      ->check(CLI::IsMember({"content", "structure"}));
  heatmap_cmd->add_option("--out", heatmap_name, "output file name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    g.finish();
    if (*ingest_cmd) cmd_ingest(g, input);
    else if (*vocab_build_cmd) cmd_vocab_build(g, entries_path);
    else if (*train_cmd) cmd_train(g, entries_path, vocab_content_path, vocab_structure_path, mode_name);
    else if (*detect_cmd) cmd_detect(g, entries_path, model_path, vocab_content_path, vocab_structure_path);
    else if (*cluster_cmd) cmd_mine_cluster(g, records_path);
    else if (*patterns_cmd) cmd_mine_patterns(g, records_path, clusters_path, entries_path);
    else if (*sheet_cmd) cmd_verify_sheet(g, records_path, clusters_path, entries_path);
    else if (*apply_cmd) cmd_verify_apply(g, worksheet_path, records_path, clusters_path);
    else if (*metrics_cmd) cmd_eval_metrics(g, records_path);
    else if (*rules_cmd) cmd_eval_rules(g, entries_path, rules_path, records_path, verified_path);
    else if (*ablation_cmd) cmd_eval_ablation(g, dataset_specs);
    else if (*topk_cmd) cmd_eval_topk(g, records_path, entries_path, rule_name, keywords, rules_path, ks);
    else if (*heatmap_cmd) cmd_report_heatmap(g, records_path, record_id, branch, heatmap_name);
    else {
      std::cerr << "missing subcommand\n" << app.help();
      return kExitUsage;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
