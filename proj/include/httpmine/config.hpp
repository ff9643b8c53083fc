#pragma once

#include "httpmine/types.hpp"

#include <cstdint>
#include <string>

namespace httpmine {

/// Every tunable default in one place. A config file is plain `key=value`
/// text with `#` comments; unknown keys are rejected so typos surface early.
struct Config {
  // ingest
  int decode_max_passes = 2;

  // encoding detectors (tokenize)
  int md5_len = 32;
  int sha_len_short = 40;
  int sha_len_long = 64;
  int binary_min_len = 8;
  int hex_min_len = 8;
  int base64_min_len = 16;

  // vocabulary / encoding
  int vocab_size_content = 10000;
  int vocab_size_structure = 10000;
  int seq_len = 300;  // z

  // model dimensions
  int embed_dim = 64;   // m
  int hidden_dim = 64;  // p
  int attn_dim = 128;   // r

  // training
  int batch_size = 200;
  int epochs = 30;
  Scalar learning_rate = 1e-3;
  Scalar dropout = 0.5;
  Scalar adam_beta1 = 0.9;
  Scalar adam_beta2 = 0.999;
  Scalar adam_eps = 1e-8;
  Scalar loss_clamp = 1e-7;
  Scalar init_range = 0.08;
  Scalar forget_bias = 1.0;
  std::string feature_mode = "both";  // content | structure | both

  // mining
  Scalar dbscan_eps = 0.3;
  int dbscan_min_pts = 5;
  std::string dbscan_metric = "cosine";  // cosine | euclidean
  int top_n = 50;
  int top_m = 5;
  Scalar pattern_theta = 0.5;
  bool keep_special = false;
  int verify_samples = 5;

  std::uint64_t seed = 1;

  /// Overlays `path` onto the current values. Throws ConfigError on
  /// unreadable files, unknown keys, or unparsable values.
  void load_file(const std::string& path);

  /// Applies a single `key=value` assignment.
  void set(const std::string& key, const std::string& value);

  /// Renders the full configuration in file format.
  std::string dump() const;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace httpmine
