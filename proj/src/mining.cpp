#include "httpmine/mining.hpp"

#include "httpmine/ingest.hpp"
#include "httpmine/linalg.hpp"
#include "httpmine/util.hpp"
#include "httpmine/vocab.hpp"

#include <json.hpp>

#include <algorithm>
#include <deque>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace httpmine {

Metric parse_metric(const std::string& name) {
  if (name == "cosine") return Metric::Cosine;
  if (name == "euclidean") return Metric::Euclidean;
  throw DataError("unknown metric: " + name);
}

std::vector<int> dbscan(const std::vector<Vector>& points, Scalar eps,
                        int min_pts, Metric metric) {
  if (eps <= 0) throw DataError("dbscan: eps must be positive");
  if (min_pts < 1) throw DataError("dbscan: min_pts must be >= 1");
  const std::size_t n = points.size();
  const auto distance = metric == Metric::Cosine ? cosine_distance : euclidean_distance;

  // Neighborhoods include the point itself.
  std::vector<std::vector<int>> neighbors(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (distance(points[i], points[j]) <= eps)
        neighbors[i].push_back(static_cast<int>(j));
    }
  }
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) {
    core[i] = static_cast<int>(neighbors[i].size()) >= min_pts;
  }

  constexpr int kUnvisited = -2;
  std::vector<int> label(n, kUnvisited);
  int next_cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != kUnvisited || !core[i]) continue;
    const int cluster = next_cluster++;
    label[i] = cluster;
    std::deque<int> queue(neighbors[i].begin(), neighbors[i].end());
    while (!queue.empty()) {
      const int j = queue.front();
      queue.pop_front();
      if (label[j] == kUnvisited || label[j] == kNoise) {
        label[j] = cluster;
        if (core[j]) {
          queue.insert(queue.end(), neighbors[j].begin(), neighbors[j].end());
        }
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] == kUnvisited) label[i] = kNoise;
  }
  return label;
}

Vector cluster_point(const DetectionRecord& record) {
  Vector point(record.state_content.size() + record.state_structure.size());
  point << record.state_content, record.state_structure;
  return point;
}

// --- tag verification ---------------------------------------------------------

std::vector<VerificationRow> sample_for_verification(
    const std::vector<DetectionRecord>& records, const std::vector<int>& assignment,
    const std::map<std::string, std::string>& contents, int k, std::uint64_t seed) {
  if (k < 1) throw DataError("verification: k must be >= 1");
  if (records.size() != assignment.size())
    throw DataError("verification: records/assignment size mismatch");

  std::map<int, std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] != kNoise) clusters[assignment[i]].push_back(i);
  }

  Rng rng(seed);
  std::vector<VerificationRow> rows;
  for (auto& [cluster, members] : clusters) {
    const std::size_t take = std::min<std::size_t>(k, members.size());
    // Partial Fisher-Yates: the first `take` slots become the sample.
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = i + rng.below(members.size() - i);
      std::swap(members[i], members[j]);
    }
    std::vector<std::size_t> chosen(members.begin(), members.begin() + take);
    std::sort(chosen.begin(), chosen.end());
    for (const std::size_t idx : chosen) {
      VerificationRow row;
      row.cluster = cluster;
      row.id = records[idx].id;
      const auto it = contents.find(row.id);
      if (it != contents.end()) row.excerpt = it->second.substr(0, 80);
      row.predicted_malicious = records[idx].malicious;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_worksheet(const std::string& path, const std::vector<VerificationRow>& rows) {
  std::ostringstream out;
  out << "cluster,id,excerpt,predicted,verdict\n";
  for (const VerificationRow& row : rows) {
    out << row.cluster << ',' << csv_escape(row.id) << ','
        << csv_escape(row.excerpt) << ','
        << (row.predicted_malicious ? "malicious" : "benign") << ','
        << csv_escape(row.verdict) << "\n";
  }
  spit_file(path, out.str());
}

std::vector<VerificationRow> read_worksheet(const std::string& path) {
  std::istringstream in(slurp_file(path));
  std::string line;
  if (!std::getline(in, line) || csv_split(line).size() != 5)
    throw DataError(path + ": missing worksheet header");
  std::vector<VerificationRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = csv_split(line);
    if (fields.size() != 5)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected 5 columns");
    VerificationRow row;
    row.cluster = std::stoi(fields[0]);
    row.id = fields[1];
    row.excerpt = fields[2];
    row.predicted_malicious = fields[3] == "malicious";
    row.verdict = fields[4];
    rows.push_back(std::move(row));
  }
  return rows;
}

VerificationOutcome apply_verification(const std::vector<VerificationRow>& worksheet,
                                       const std::vector<DetectionRecord>& records,
                                       const std::vector<int>& assignment) {
  std::unordered_map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < records.size(); ++i) index_of[records[i].id] = i;

  std::map<int, std::vector<const VerificationRow*>> by_cluster;
  for (const VerificationRow& row : worksheet) {
    if (row.verdict != "correct" && row.verdict != "incorrect")
      throw DataError("worksheet: verdict for id '" + row.id +
                      "' must be correct|incorrect, got '" + row.verdict + "'");
    const auto it = index_of.find(row.id);
    if (it == index_of.end())
      throw DataError("worksheet: unknown entry id '" + row.id + "'");
    if (assignment[it->second] != row.cluster)
      throw DataError("worksheet: entry '" + row.id + "' is not in cluster " +
                      std::to_string(row.cluster));
    by_cluster[row.cluster].push_back(&row);
  }

  VerificationOutcome outcome;
  for (const auto& [cluster, rows] : by_cluster) {
    bool all_correct = true, all_incorrect = true;
    for (const VerificationRow* row : rows) {
      (row->verdict == "correct" ? all_incorrect : all_correct) = false;
    }
    if (all_correct || all_incorrect) {
      const std::string verdict = all_correct ? "correct" : "incorrect";
      outcome.cluster_status[cluster] =
          all_correct ? "unanimous-correct" : "unanimous-incorrect";
      for (std::size_t i = 0; i < records.size(); ++i) {
        if (assignment[i] == cluster) outcome.entry_verdicts[records[i].id] = verdict;
      }
    } else {
      outcome.cluster_status[cluster] = "flagged";
    }
    // Sampled entries always keep their own verdict.
    for (const VerificationRow* row : rows) {
      outcome.entry_verdicts[row->id] = row->verdict;
    }
  }
  return outcome;
}

// --- pattern mining -----------------------------------------------------------

namespace {

bool eligible_token(const std::string& token, bool keep_special) {
  if (token == kEos) return false;
  if (!keep_special && is_special_token(token)) return false;
  return true;
}

}  // namespace

std::vector<std::string> top_n_candidates(const std::vector<TokenSeq>& cluster_docs,
                                          int n, bool keep_special) {
  if (n < 1) throw DataError("top_n_candidates: n must be >= 1");
  if (cluster_docs.empty()) return {};
  const auto scores = tfidf(cluster_docs);
  std::vector<std::pair<std::string, Scalar>> ranked;
  ranked.reserve(scores.size());
  for (const auto& [token, score] : scores) {
    if (eligible_token(token, keep_special)) ranked.emplace_back(token, score);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(ranked.size()) > n) ranked.resize(n);
  std::vector<std::string> candidates;
  candidates.reserve(ranked.size());
  for (auto& [token, score] : ranked) candidates.push_back(std::move(token));
  return candidates;
}

std::vector<std::string> top_m_keywords(const DetectionRecord& record, int m,
                                        bool keep_special) {
  if (m < 1) throw DataError("top_m_keywords: m must be >= 1");
  std::unordered_map<std::string, Scalar> weight_of;
  for (std::size_t i = 0; i < record.attn_tokens_content.size(); ++i) {
    const std::string& token = record.attn_tokens_content[i];
    if (!eligible_token(token, keep_special)) continue;
    weight_of[token] += record.attn_weights_content(static_cast<Eigen::Index>(i));
  }
  std::vector<std::pair<std::string, Scalar>> ranked(weight_of.begin(), weight_of.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(ranked.size()) > m) ranked.resize(m);
  std::vector<std::string> keywords;
  keywords.reserve(ranked.size());
  for (auto& [token, weight] : ranked) keywords.push_back(std::move(token));
  return keywords;
}

MatrixX<int> cooccurrence(const std::vector<std::string>& candidates,
                          const std::vector<std::vector<std::string>>& keyword_sets) {
  const int n = static_cast<int>(candidates.size());
  MatrixX<int> matrix = MatrixX<int>::Zero(n, n);
  std::unordered_map<std::string, int> slot;
  for (int i = 0; i < n; ++i) slot[candidates[i]] = i;

  for (const auto& keywords : keyword_sets) {
    std::vector<int> present;
    std::unordered_set<std::string> seen;
    for (const std::string& k : keywords) {
      if (!seen.insert(k).second) continue;
      const auto it = slot.find(k);
      if (it != slot.end()) present.push_back(it->second);
    }
    for (std::size_t a = 0; a < present.size(); ++a) {
      matrix(present[a], present[a]) += 1;
      for (std::size_t b = a + 1; b < present.size(); ++b) {
        matrix(present[a], present[b]) += 1;
        matrix(present[b], present[a]) += 1;
      }
    }
  }
  return matrix;
}

std::vector<std::string> extract_pattern(const MatrixX<int>& matrix,
                                         const std::vector<std::string>& candidates,
                                         Scalar theta, int n_entries) {
  if (theta <= 0.0 || theta > 1.0)
    throw DataError("extract_pattern: theta must lie in (0, 1]");
  const int n = static_cast<int>(candidates.size());
  if (n == 0) return {};
  const Scalar threshold = theta * static_cast<Scalar>(n_entries);

  int seed = 0;
  for (int i = 1; i < n; ++i) {
    if (matrix(i, i) > matrix(seed, seed) ||
        (matrix(i, i) == matrix(seed, seed) && candidates[i] < candidates[seed]))
      seed = i;
  }
  if (static_cast<Scalar>(matrix(seed, seed)) < threshold) return {};

  std::vector<int> members{seed};
  std::vector<bool> in_set(n, false);
  in_set[seed] = true;
  while (true) {
    int best = -1;
    int best_min = -1;
    for (int c = 0; c < n; ++c) {
      if (in_set[c]) continue;
      int min_pair = matrix(c, members[0]);
      for (const int s : members) min_pair = std::min(min_pair, matrix(c, s));
      if (static_cast<Scalar>(min_pair) < threshold) continue;
      if (min_pair > best_min ||
          (min_pair == best_min && candidates[c] < candidates[best])) {
        best = c;
        best_min = min_pair;
      }
    }
    if (best < 0) break;
    members.push_back(best);
    in_set[best] = true;
  }

  std::vector<std::string> pattern;
  pattern.reserve(members.size());
  for (const int i : members) pattern.push_back(candidates[i]);
  return pattern;
}

std::vector<ClusterPatterns> mine_patterns(
    const std::vector<DetectionRecord>& records, const std::vector<int>& assignment,
    const std::map<std::string, std::string>& contents, const PatternOptions& options) {
  if (records.size() != assignment.size())
    throw DataError("mine_patterns: records/assignment size mismatch");
  std::map<int, std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] != kNoise) clusters[assignment[i]].push_back(i);
  }

  std::vector<ClusterPatterns> reports;
  for (const auto& [cluster, members] : clusters) {
    ClusterPatterns report;
    report.cluster = cluster;
    report.size = members.size();
    std::vector<TokenSeq> docs;
    docs.reserve(members.size());
    for (const std::size_t idx : members) {
      const auto it = contents.find(records[idx].id);
      if (it == contents.end())
        throw DataError("mine_patterns: no content for id '" + records[idx].id + "'");
      docs.push_back(segment(it->second));
      report.keyword_sets.push_back(
          top_m_keywords(records[idx], options.top_m, options.keep_special));
    }
    report.candidates = top_n_candidates(docs, options.top_n, options.keep_special);
    report.matrix = cooccurrence(report.candidates, report.keyword_sets);
    report.pattern_words =
        extract_pattern(report.matrix, report.candidates, options.theta,
                        static_cast<int>(members.size()));
    reports.push_back(std::move(report));
  }
  return reports;
}

// --- file formats ---------------------------------------------------------------

void write_clusters(const std::string& path, const std::vector<DetectionRecord>& records,
                    const std::vector<int>& assignment) {
  if (records.size() != assignment.size())
    throw DataError("write_clusters: records/assignment size mismatch");
  std::ostringstream out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    nlohmann::ordered_json j;
    j["id"] = records[i].id;
    j["cluster"] = assignment[i];
    out << j.dump() << "\n";
  }
  spit_file(path, out.str());
}

std::map<std::string, int> read_clusters(const std::string& path) {
  std::istringstream in(slurp_file(path));
  std::map<std::string, int> clusters;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    clusters[j.at("id").get<std::string>()] = j.at("cluster").get<int>();
  }
  return clusters;
}

std::string cooccurrence_csv(const std::vector<std::string>& candidates,
                             const MatrixX<int>& matrix) {
  std::ostringstream out;
  for (const std::string& c : candidates) out << ',' << csv_escape(c);
  out << "\n";
  for (int i = 0; i < matrix.rows(); ++i) {
    out << csv_escape(candidates[i]);
    for (int j = 0; j < matrix.cols(); ++j) out << ',' << matrix(i, j);
    out << "\n";
  }
  return out.str();
}

void write_pattern_report(const std::string& out_dir,
                          const std::vector<ClusterPatterns>& reports) {
  nlohmann::ordered_json summary;
  summary["clusters"] = nlohmann::ordered_json::array();
  for (const ClusterPatterns& report : reports) {
    const std::string csv_name =
        "cooccurrence_cluster_" + std::to_string(report.cluster) + ".csv";
    spit_file(out_dir + "/" + csv_name,
              cooccurrence_csv(report.candidates, report.matrix));
    nlohmann::ordered_json j;
    j["cluster"] = report.cluster;
    j["size"] = report.size;
    j["candidates"] = report.candidates;
    j["pattern_words"] = report.pattern_words;
    j["matrix_csv_path"] = csv_name;
    summary["clusters"].push_back(std::move(j));
  }
  spit_file(out_dir + "/patterns.json", summary.dump(2) + "\n");
}

}  // namespace httpmine
