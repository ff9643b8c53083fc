#pragma once

#include "httpmine/types.hpp"
#include "httpmine/vocab.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace httpmine {

/// Training/inference aborts with this when the numerics diverge.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Which input branches feed the classifier.
enum class FeatureMode { Content, Structure, Both };

FeatureMode parse_feature_mode(const std::string& name);
const char* feature_mode_name(FeatureMode mode);
std::vector<std::string> branch_names(FeatureMode mode);

struct ModelDims {
  int seq_len = 300;    // z
  int embed_dim = 64;   // m
  int hidden_dim = 64;  // p, per direction
  int attn_dim = 128;   // r
  int vocab_content = 0;    // corpus tokens; embedding rows = vocab + 2
  int vocab_structure = 0;
  FeatureMode mode = FeatureMode::Both;
  static constexpr int kClasses = 2;

  int branch_count() const { return mode == FeatureMode::Both ? 2 : 1; }
  /// Embedding row count for branch `b` (in branch_names order).
  int vocab_rows(int b) const;
};

/// One direction of an LSTM. Gate rows are packed [input; forget; cell;
/// output], each block of size hidden_dim.
struct LstmWeights {
  Matrix w_input;  // 4p x m
  Matrix w_recur;  // 4p x p
  Vector bias;     // 4p
};

struct BranchParams {
  Matrix embedding;   // rows x m; row 0 (PAD) pinned to zero
  LstmWeights fwd;
  LstmWeights bwd;
  Matrix attn_score;  // 2p x 2p
  Matrix attn_out;    // r x 4p
};

struct ModelParams {
  ModelDims dims;
  std::vector<BranchParams> branches;  // branch_names(dims.mode) order
  Matrix fuse_w;  // q x (r * branch count)
  Vector fuse_b;  // q

  void set_zero();
  bool all_finite() const;
};

/// Allocates parameters: uniform [-init_range, init_range], forget-gate bias
/// set to forget_bias, PAD embedding rows zeroed.
ModelParams init_params(const ModelDims& dims, Scalar init_range,
                        Scalar forget_bias, Rng& rng);

/// Flat view of one named tensor; used by the optimizer, the checkpoint
/// writer and the finite-difference loop.
struct TensorRef {
  std::string name;
  Scalar* data;
  Eigen::Index rows;
  Eigen::Index cols;
  Eigen::Index size() const { return rows * cols; }
};

/// All tensors of a parameter set in a fixed, documented order.
std::vector<TensorRef> tensor_refs(ModelParams& params);

// --- forward pass -----------------------------------------------------------

struct LstmStepCache {
  Vector gate_in, gate_forget, gate_cell, gate_out;  // post-activation, p
  Vector cell, tanh_cell, hidden;                    // p
};

struct BranchTrace {
  int t = 0;                          // valid_len
  std::vector<int> indices;           // first t vocabulary indices
  Matrix embedded;                    // m x t, post-ReLU
  std::vector<LstmStepCache> fwd_steps;  // position order 1..t
  std::vector<LstmStepCache> bwd_steps;  // processing order t..1
  Matrix hidden;                      // 2p x t
  Vector attn;                        // t-1 softmax weights (empty for t=1)
  Vector context;                     // 2p
  Vector concat;                      // 4p = [context; h_t]
  Vector attn_state;                  // r, post-tanh
  Vector dropout_mask;                // r; empty => inference (identity)
  Vector fused_input;                 // r, attn_state after dropout
};

struct ForwardTrace {
  std::vector<BranchTrace> branches;
  Vector logits;  // q
  Vector probs;   // q
  int predicted = 0;  // argmax; tie -> 0 (benign)
};

/// One pre-encoded training sample. Unused branches may stay empty.
struct EncodedSample {
  EncodedSeq content;
  EncodedSeq structure;
  int label = 0;  // 1 = malicious
};

/// Pointers to the sequences feeding each branch, in branch order.
std::vector<const EncodedSeq*> branch_inputs(const ModelDims& dims,
                                             const EncodedSample& sample);

/// Single standalone LSTM cell update (also used by the forward pass).
LstmStepCache lstm_step(const LstmWeights& w, const Vector& x,
                        const Vector& h_prev, const Vector& c_prev);

struct AttentionResult {
  Vector weights;  // t-1
  Vector context;  // 2p
  Vector state;    // r
};

/// General attention over hidden-state columns with the last column as the
/// query. For a single column the context is zero.
AttentionResult attention(const Matrix& hidden, const Matrix& attn_score,
                          const Matrix& attn_out);

/// Full forward pass over one sample. `masks` supplies one dropout mask per
/// branch (entries 0 or 1/(1-rho)); pass nullptr for inference.
ForwardTrace forward(const ModelParams& params,
                     const std::vector<const EncodedSeq*>& inputs,
                     const std::vector<Vector>* masks = nullptr);

/// Mean binary cross-entropy over malicious probabilities, clamped to
/// [clamp, 1-clamp]. Throws DataError on an empty batch.
Scalar batch_loss(std::span<const Scalar> prob_malicious,
                  std::span<const int> labels, Scalar clamp = 1e-7);

/// Accumulates d(loss)/d(params) for one sample into `grads`, where the
/// sample contributes weight `inv_batch` (1/N) to the batch loss.
void backward(const ModelParams& params, const ForwardTrace& trace, int label,
              Scalar inv_batch, Scalar clamp, ModelParams* grads);

// --- training ----------------------------------------------------------------

struct TrainHyper {
  int batch_size = 200;
  int epochs = 30;
  Scalar learning_rate = 1e-3;
  Scalar dropout = 0.5;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar adam_eps = 1e-8;
  Scalar loss_clamp = 1e-7;
  Scalar init_range = 0.08;
  Scalar forget_bias = 1.0;
  std::uint64_t seed = 1;
};

struct EpochStats {
  Scalar loss = 0;
  Scalar accuracy = 0;
};

/// Mini-batch Adam over the full graph. Deterministic for a fixed seed.
/// Throws DataError for a single-class dataset and NumericError when the
/// loss turns non-finite.
ModelParams train(const std::vector<EncodedSample>& data, const ModelDims& dims,
                  const TrainHyper& hyper, std::vector<EpochStats>* curve = nullptr);

// --- gradient checking -------------------------------------------------------

/// Analytic batch gradient with fixed dropout masks (one per sample/branch).
ModelParams analytic_gradients(const ModelParams& params,
                               const std::vector<EncodedSample>& batch,
                               const std::vector<std::vector<Vector>>& masks,
                               Scalar clamp = 1e-7);

/// Central finite differences of the same batch loss.
ModelParams numeric_gradients(const ModelParams& params,
                              const std::vector<EncodedSample>& batch,
                              const std::vector<std::vector<Vector>>& masks,
                              Scalar clamp = 1e-7, Scalar fd_eps = 1e-4);

/// max over coordinates of |a-b| / max(|a|,|b|,1e-8).
Scalar max_rel_error(const ModelParams& a, const ModelParams& b);

/// Deterministic half-dropped masks used by grad_check so the analytic and
/// numeric paths see the same graph.
std::vector<std::vector<Vector>> grad_check_masks(
    const ModelDims& dims, std::size_t samples, Scalar dropout = 0.5);

/// Compares analytic and finite-difference gradients over a small batch.
Scalar grad_check(const ModelParams& params,
                  const std::vector<EncodedSample>& batch, Scalar fd_eps = 1e-4);

// --- checkpoints ---------------------------------------------------------------

/// Versioned JSON checkpoint: dims, hyperparameters, seed and every tensor.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const TrainHyper& hyper);

struct Checkpoint {
  ModelParams params;
  TrainHyper hyper;
};

/// Throws DataError on version or dimension mismatches.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace httpmine
