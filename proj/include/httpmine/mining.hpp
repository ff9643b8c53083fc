#pragma once

#include "httpmine/detect.hpp"
#include "httpmine/tokenize.hpp"
#include "httpmine/types.hpp"

#include <map>
#include <string>
#include <vector>

namespace httpmine {

/// Cluster id for points that belong to no cluster.
inline constexpr int kNoise = -1;

enum class Metric { Cosine, Euclidean };
Metric parse_metric(const std::string& name);

/// Plain DBSCAN. A point is core when its eps-neighborhood (which includes
/// the point itself) holds at least min_pts points; border points join the
/// first cluster that reaches them in input order. Returns one cluster id
/// (or kNoise) per point, numbered from 0 in order of cluster creation.
std::vector<int> dbscan(const std::vector<Vector>& points, Scalar eps,
                        int min_pts, Metric metric);

/// Clustering input for one detection record: [state_content;
/// state_structure] for dual-branch models, the single state otherwise.
Vector cluster_point(const DetectionRecord& record);

// --- tag verification ---------------------------------------------------------

struct VerificationRow {
  int cluster = 0;
  std::string id;
  std::string excerpt;
  bool predicted_malicious = true;
  std::string verdict;  // empty until a human fills "correct"/"incorrect"
};

/// Seeded sample of min(k, |cluster|) members per cluster (noise excluded),
/// clusters visited in ascending id order.
std::vector<VerificationRow> sample_for_verification(
    const std::vector<DetectionRecord>& records, const std::vector<int>& assignment,
    const std::map<std::string, std::string>& contents, int k, std::uint64_t seed);

void write_worksheet(const std::string& path, const std::vector<VerificationRow>& rows);
std::vector<VerificationRow> read_worksheet(const std::string& path);

struct VerificationOutcome {
  // cluster -> unanimous-correct | unanimous-incorrect | flagged
  std::map<int, std::string> cluster_status;
  // entry id -> correct | incorrect. Directly sampled entries always keep
  // their own verdict; unanimous clusters propagate it to every member.
  std::map<std::string, std::string> entry_verdicts;
};

/// Applies a completed worksheet to the full clustering. Throws DataError on
/// unknown verdict strings or rows referencing unknown ids/clusters.
VerificationOutcome apply_verification(const std::vector<VerificationRow>& worksheet,
                                       const std::vector<DetectionRecord>& records,
                                       const std::vector<int>& assignment);

// --- pattern mining -----------------------------------------------------------

/// Top-n cluster tokens by cluster-local TFIDF, tie-break lexicographic;
/// special-character tokens and "<EOS>" are excluded unless keep_special.
std::vector<std::string> top_n_candidates(const std::vector<TokenSeq>& cluster_docs,
                                          int n, bool keep_special = false);

/// The m distinct tokens with the highest content-branch attention weight,
/// summing weights over repeated tokens before ranking.
std::vector<std::string> top_m_keywords(const DetectionRecord& record, int m,
                                        bool keep_special = false);

/// M[i][j] = number of keyword sets containing both candidates (i != j);
/// M[i][i] = number of sets containing candidate i.
MatrixX<int> cooccurrence(const std::vector<std::string>& candidates,
                          const std::vector<std::vector<std::string>>& keyword_sets);

/// Greedy quasi-clique: seed with the highest-diagonal candidate, grow by the
/// candidate maximizing its minimum pairwise count with the set, require
/// every pair to co-occur in at least theta * n_entries keyword sets.
std::vector<std::string> extract_pattern(const MatrixX<int>& matrix,
                                         const std::vector<std::string>& candidates,
                                         Scalar theta, int n_entries);

struct PatternOptions {
  int top_n = 50;
  int top_m = 5;
  Scalar theta = 0.5;
  bool keep_special = false;
};

struct ClusterPatterns {
  int cluster = 0;
  std::size_t size = 0;
  std::vector<std::string> candidates;
  std::vector<std::vector<std::string>> keyword_sets;  // one per member entry
  MatrixX<int> matrix;
  std::vector<std::string> pattern_words;
};

/// Runs the candidate/keyword/co-occurrence/pattern chain for every cluster
/// (ascending id, noise skipped). `contents` maps entry id to its cleaned
/// content for re-segmentation.
std::vector<ClusterPatterns> mine_patterns(
    const std::vector<DetectionRecord>& records, const std::vector<int>& assignment,
    const std::map<std::string, std::string>& contents, const PatternOptions& options);

// --- file formats ---------------------------------------------------------------

void write_clusters(const std::string& path, const std::vector<DetectionRecord>& records,
                    const std::vector<int>& assignment);
std::map<std::string, int> read_clusters(const std::string& path);

/// Co-occurrence matrix as CSV with candidate tokens as header row/column.
std::string cooccurrence_csv(const std::vector<std::string>& candidates,
                             const MatrixX<int>& matrix);

/// Writes patterns.json plus one co-occurrence CSV per cluster under
/// `out_dir`; the JSON references the CSVs by relative name.
void write_pattern_report(const std::string& out_dir,
                          const std::vector<ClusterPatterns>& reports);

}  // namespace httpmine
