#include "httpmine/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace httpmine {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
  }
}

Scalar parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const Scalar x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: bad boolean for " + key + ": '" + v + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const std::uint64_t x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
  }
}

}  // namespace

void Config::set(const std::string& key, const std::string& value) {
  if (key == "decode_max_passes") decode_max_passes = parse_int(key, value);
  else if (key == "md5_len") md5_len = parse_int(key, value);
  else if (key == "sha_len_short") sha_len_short = parse_int(key, value);
  else if (key == "sha_len_long") sha_len_long = parse_int(key, value);
  else if (key == "binary_min_len") binary_min_len = parse_int(key, value);
  else if (key == "hex_min_len") hex_min_len = parse_int(key, value);
  else if (key == "base64_min_len") base64_min_len = parse_int(key, value);
  else if (key == "vocab_size_content") vocab_size_content = parse_int(key, value);
  else if (key == "vocab_size_structure") vocab_size_structure = parse_int(key, value);
  else if (key == "seq_len") seq_len = parse_int(key, value);
  else if (key == "embed_dim") embed_dim = parse_int(key, value);
  else if (key == "hidden_dim") hidden_dim = parse_int(key, value);
  else if (key == "attn_dim") attn_dim = parse_int(key, value);
  else if (key == "batch_size") batch_size = parse_int(key, value);
  else if (key == "epochs") epochs = parse_int(key, value);
  else if (key == "learning_rate") learning_rate = parse_real(key, value);
  else if (key == "dropout") dropout = parse_real(key, value);
  else if (key == "adam_beta1") adam_beta1 = parse_real(key, value);
  else if (key == "adam_beta2") adam_beta2 = parse_real(key, value);
  else if (key == "adam_eps") adam_eps = parse_real(key, value);
  else if (key == "loss_clamp") loss_clamp = parse_real(key, value);
  else if (key == "init_range") init_range = parse_real(key, value);
  else if (key == "forget_bias") forget_bias = parse_real(key, value);
  else if (key == "feature_mode") {
    if (value != "content" && value != "structure" && value != "both")
      throw ConfigError("config: feature_mode must be content|structure|both");
    feature_mode = value;
  } else if (key == "dbscan_eps") dbscan_eps = parse_real(key, value);
  else if (key == "dbscan_min_pts") dbscan_min_pts = parse_int(key, value);
  else if (key == "dbscan_metric") {
    if (value != "cosine" && value != "euclidean")
      throw ConfigError("config: dbscan_metric must be cosine|euclidean");
    dbscan_metric = value;
  } else if (key == "top_n") top_n = parse_int(key, value);
  else if (key == "top_m") top_m = parse_int(key, value);
  else if (key == "pattern_theta") pattern_theta = parse_real(key, value);
  else if (key == "keep_special") keep_special = parse_bool(key, value);
  else if (key == "verify_samples") verify_samples = parse_int(key, value);
  else if (key == "seed") seed = parse_u64(key, value);
  else throw ConfigError("config: unknown key '" + key + "'");
}

void Config::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                        ": expected key=value");
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

std::string Config::dump() const {
  std::ostringstream out;
  out << "decode_max_passes=" << decode_max_passes << "\n"
      << "md5_len=" << md5_len << "\n"
      << "sha_len_short=" << sha_len_short << "\n"
      << "sha_len_long=" << sha_len_long << "\n"
      << "binary_min_len=" << binary_min_len << "\n"
      << "hex_min_len=" << hex_min_len << "\n"
      << "base64_min_len=" << base64_min_len << "\n"
      << "vocab_size_content=" << vocab_size_content << "\n"
      << "vocab_size_structure=" << vocab_size_structure << "\n"
      << "seq_len=" << seq_len << "\n"
      << "embed_dim=" << embed_dim << "\n"
      << "hidden_dim=" << hidden_dim << "\n"
      << "attn_dim=" << attn_dim << "\n"
      << "batch_size=" << batch_size << "\n"
      << "epochs=" << epochs << "\n"
      << "learning_rate=" << learning_rate << "\n"
      << "dropout=" << dropout << "\n"
      << "adam_beta1=" << adam_beta1 << "\n"
      << "adam_beta2=" << adam_beta2 << "\n"
      << "adam_eps=" << adam_eps << "\n"
      << "loss_clamp=" << loss_clamp << "\n"
      << "init_range=" << init_range << "\n"
      << "forget_bias=" << forget_bias << "\n"
      << "feature_mode=" << feature_mode << "\n"
      << "dbscan_eps=" << dbscan_eps << "\n"
      << "dbscan_min_pts=" << dbscan_min_pts << "\n"
      << "dbscan_metric=" << dbscan_metric << "\n"
      << "top_n=" << top_n << "\n"
      << "top_m=" << top_m << "\n"
      << "pattern_theta=" << pattern_theta << "\n"
      << "keep_special=" << (keep_special ? "true" : "false") << "\n"
      << "verify_samples=" << verify_samples << "\n"
      << "seed=" << seed << "\n";
  return out.str();
}

}  // namespace httpmine
