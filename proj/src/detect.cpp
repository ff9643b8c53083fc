#include "httpmine/detect.hpp"

#include "httpmine/util.hpp"

#include <json.hpp>

#include <sstream>

namespace httpmine {

namespace {

Vector json_to_vector(const nlohmann::json& arr) {
  Vector v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v(i) = arr[i].get<Scalar>();
  return v;
}

nlohmann::ordered_json vector_to_json(const Vector& v) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

// Attention weights align with the first valid_len-1 tokens of the branch
// sequence; the final position is the query and carries no weight.
void fill_attention(const BranchTrace& trace, const TokenSeq& tokens,
                    std::vector<std::string>* out_tokens, Vector* out_weights) {
  const int count = trace.t - 1;
  out_tokens->assign(tokens.begin(), tokens.begin() + count);
  *out_weights = trace.attn;
}

}  // namespace

EncodedSample encode_entry(const TrafficEntry& entry, const BranchVocabs& vocabs,
                           int seq_len, const DetectorConfig& detectors) {
  const TokenSeq tokens = segment(entry.content);
  const StructSeq structure = structure_of(tokens, detectors);
  EncodedSample sample;
  sample.content = encode(tokens, vocabs.content, seq_len);
  sample.structure = encode(structure, vocabs.structure, seq_len);
  sample.label = entry.malicious.value_or(false) ? 1 : 0;
  return sample;
}

DetectionRecord predict(const TrafficEntry& entry, const BranchVocabs& vocabs,
                        const ModelParams& params, const DetectorConfig& detectors) {
  DetectionRecord record;
  record.id = entry.id;
  record.truth = entry.malicious;

  const TokenSeq tokens = segment(entry.content);
  if (tokens.empty()) {
    record.error = true;
    record.error_message = "empty content";
    return record;
  }
  const StructSeq structure = structure_of(tokens, detectors);

  EncodedSample sample;
  sample.content = encode(tokens, vocabs.content, params.dims.seq_len);
  sample.structure = encode(structure, vocabs.structure, params.dims.seq_len);

  const auto inputs = branch_inputs(params.dims, sample);
  const ForwardTrace trace = forward(params, inputs);

  record.prob_malicious = trace.probs(1);
  record.malicious = trace.predicted == 1;

  const auto names = branch_names(params.dims.mode);
  for (std::size_t b = 0; b < names.size(); ++b) {
    const BranchTrace& bt = trace.branches[b];
    if (names[b] == "content") {
      record.state_content = bt.attn_state;
      fill_attention(bt, tokens, &record.attn_tokens_content,
                     &record.attn_weights_content);
    } else {
      record.state_structure = bt.attn_state;
      fill_attention(bt, structure, &record.attn_tokens_structure,
                     &record.attn_weights_structure);
    }
  }
  return record;
}

std::string record_to_json(const DetectionRecord& record) {
  nlohmann::ordered_json j;
  j["id"] = record.id;
  if (record.error) {
    j["error"] = record.error_message;
    return j.dump();
  }
  j["prob_malicious"] = record.prob_malicious;
  j["label"] = record.malicious ? "malicious" : "benign";
  if (record.truth.has_value())
    j["truth"] = *record.truth ? "malicious" : "benign";
  j["h_content"] = vector_to_json(record.state_content);
  j["h_structure"] = vector_to_json(record.state_structure);
  j["attn_content"] = {{"tokens", record.attn_tokens_content},
                       {"weights", vector_to_json(record.attn_weights_content)}};
  j["attn_structure"] = {{"tokens", record.attn_tokens_structure},
                         {"weights", vector_to_json(record.attn_weights_structure)}};
  return j.dump();
}

DetectionRecord record_from_json(const std::string& line) {
  const nlohmann::json j = nlohmann::json::parse(line);
  DetectionRecord record;
  record.id = j.at("id").get<std::string>();
  if (j.contains("error")) {
    record.error = true;
    record.error_message = j["error"].get<std::string>();
    return record;
  }
  record.prob_malicious = j.at("prob_malicious").get<Scalar>();
  record.malicious = j.at("label").get<std::string>() == "malicious";
  if (j.contains("truth")) record.truth = j["truth"].get<std::string>() == "malicious";
  record.state_content = json_to_vector(j.at("h_content"));
  record.state_structure = json_to_vector(j.at("h_structure"));
  const auto read_attn = [&j](const char* key, std::vector<std::string>* tokens,
                              Vector* weights) {
    const auto& a = j.at(key);
    *tokens = a.at("tokens").get<std::vector<std::string>>();
    *weights = json_to_vector(a.at("weights"));
  };
  read_attn("attn_content", &record.attn_tokens_content,
            &record.attn_weights_content);
  read_attn("attn_structure", &record.attn_tokens_structure,
            &record.attn_weights_structure);
  return record;
}

std::vector<DetectionRecord> read_records(const std::string& path) {
  std::istringstream in(slurp_file(path));
  std::vector<DetectionRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(record_from_json(line));
  }
  return records;
}

DetectStats batch_detect(const std::vector<TrafficEntry>& entries,
                         const BranchVocabs& vocabs, const ModelParams& params,
                         const std::string& out_path,
                         const DetectorConfig& detectors) {
  DetectStats stats;
  std::ostringstream out;
  for (const TrafficEntry& entry : entries) {
    const DetectionRecord record = predict(entry, vocabs, params, detectors);
    out << record_to_json(record) << "\n";
    ++stats.total;
    if (record.error) {
      ++stats.errors;
    } else if (record.malicious) {
      ++stats.predicted_malicious;
    } else {
      ++stats.predicted_benign;
    }
  }
  spit_file(out_path, out.str());
  return stats;
}

}  // namespace httpmine
