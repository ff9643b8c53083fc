#include "httpmine/model.hpp"

#include "httpmine/ingest.hpp"
#include "httpmine/linalg.hpp"

#include <cmath>

namespace httpmine {

FeatureMode parse_feature_mode(const std::string& name) {
  if (name == "content") return FeatureMode::Content;
  if (name == "structure") return FeatureMode::Structure;
  if (name == "both") return FeatureMode::Both;
  throw DataError("unknown feature mode: " + name);
}

const char* feature_mode_name(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::Content: return "content";
    case FeatureMode::Structure: return "structure";
    case FeatureMode::Both: return "both";
  }
  return "both";
}

std::vector<std::string> branch_names(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::Content: return {"content"};
    case FeatureMode::Structure: return {"structure"};
    case FeatureMode::Both: return {"content", "structure"};
  }
  return {};
}

int ModelDims::vocab_rows(int b) const {
  const bool content_branch =
      mode == FeatureMode::Content || (mode == FeatureMode::Both && b == 0);
  return (content_branch ? vocab_content : vocab_structure) + 2;
}

void ModelParams::set_zero() {
  for (TensorRef& ref : tensor_refs(*this)) {
    Eigen::Map<Vector>(ref.data, ref.size()).setZero();
  }
}

bool ModelParams::all_finite() const {
  auto& self = const_cast<ModelParams&>(*this);
  for (TensorRef& ref : tensor_refs(self)) {
    if (!Eigen::Map<Vector>(ref.data, ref.size()).allFinite()) return false;
  }
  return true;
}

namespace {

ModelParams allocate(const ModelDims& dims) {
  const int p = dims.hidden_dim;
  const int m = dims.embed_dim;
  const int r = dims.attn_dim;
  ModelParams params;
  params.dims = dims;
  params.branches.resize(dims.branch_count());
  for (int b = 0; b < dims.branch_count(); ++b) {
    BranchParams& br = params.branches[b];
    br.embedding = Matrix::Zero(dims.vocab_rows(b), m);
    for (LstmWeights* w : {&br.fwd, &br.bwd}) {
      w->w_input = Matrix::Zero(4 * p, m);
      w->w_recur = Matrix::Zero(4 * p, p);
      w->bias = Vector::Zero(4 * p);
    }
    br.attn_score = Matrix::Zero(2 * p, 2 * p);
    br.attn_out = Matrix::Zero(r, 4 * p);
  }
  params.fuse_w = Matrix::Zero(ModelDims::kClasses, r * dims.branch_count());
  params.fuse_b = Vector::Zero(ModelDims::kClasses);
  return params;
}

void validate_dims(const ModelDims& dims) {
  if (dims.seq_len < 1 || dims.embed_dim < 1 || dims.hidden_dim < 1 ||
      dims.attn_dim < 1)
    throw DataError("model dimensions must be strictly positive");
  for (int b = 0; b < dims.branch_count(); ++b) {
    if (dims.vocab_rows(b) < 3)
      throw DataError("vocabulary for an active branch is empty");
  }
}

}  // namespace

ModelParams init_params(const ModelDims& dims, Scalar init_range,
                        Scalar forget_bias, Rng& rng) {
  validate_dims(dims);
  ModelParams params = allocate(dims);
  for (TensorRef& ref : tensor_refs(params)) {
    for (Eigen::Index i = 0; i < ref.size(); ++i) {
      ref.data[i] = rng.uniform(-init_range, init_range);
    }
  }
  const int p = dims.hidden_dim;
  for (BranchParams& br : params.branches) {
    br.fwd.bias.segment(p, p).setConstant(forget_bias);
    br.bwd.bias.segment(p, p).setConstant(forget_bias);
    br.embedding.row(Vocabulary::kPad).setZero();
  }
  return params;
}

std::vector<TensorRef> tensor_refs(ModelParams& params) {
  std::vector<TensorRef> refs;
  const auto names = branch_names(params.dims.mode);
  const auto add = [&refs](const std::string& name, Matrix& t) {
    refs.push_back({name, t.data(), t.rows(), t.cols()});
  };
  const auto addv = [&refs](const std::string& name, Vector& t) {
    refs.push_back({name, t.data(), t.rows(), 1});
  };
  for (std::size_t b = 0; b < params.branches.size(); ++b) {
    BranchParams& br = params.branches[b];
    const std::string& prefix = names[b];
    add(prefix + ".embedding", br.embedding);
    add(prefix + ".lstm_fwd.w_input", br.fwd.w_input);
    add(prefix + ".lstm_fwd.w_recur", br.fwd.w_recur);
    addv(prefix + ".lstm_fwd.bias", br.fwd.bias);
    add(prefix + ".lstm_bwd.w_input", br.bwd.w_input);
    add(prefix + ".lstm_bwd.w_recur", br.bwd.w_recur);
    addv(prefix + ".lstm_bwd.bias", br.bwd.bias);
    add(prefix + ".attn_score", br.attn_score);
    add(prefix + ".attn_out", br.attn_out);
  }
  add("fuse_w", params.fuse_w);
  addv("fuse_b", params.fuse_b);
  return refs;
}

std::vector<const EncodedSeq*> branch_inputs(const ModelDims& dims,
                                             const EncodedSample& sample) {
  switch (dims.mode) {
    case FeatureMode::Content: return {&sample.content};
    case FeatureMode::Structure: return {&sample.structure};
    case FeatureMode::Both: return {&sample.content, &sample.structure};
  }
  return {};
}

LstmStepCache lstm_step(const LstmWeights& w, const Vector& x,
                        const Vector& h_prev, const Vector& c_prev) {
  const Eigen::Index p = w.w_recur.cols();
  const Vector pre = w.w_input * x + w.w_recur * h_prev + w.bias;
  LstmStepCache cache;
  cache.gate_in = logistic(pre.segment(0, p));
  cache.gate_forget = logistic(pre.segment(p, p));
  cache.gate_cell = pre.segment(2 * p, p).array().tanh();
  cache.gate_out = logistic(pre.segment(3 * p, p));
  cache.cell = cache.gate_forget.cwiseProduct(c_prev) +
               cache.gate_in.cwiseProduct(cache.gate_cell);
  cache.tanh_cell = cache.cell.array().tanh();
  cache.hidden = cache.gate_out.cwiseProduct(cache.tanh_cell);
  return cache;
}

AttentionResult attention(const Matrix& hidden, const Matrix& attn_score,
                          const Matrix& attn_out) {
  const Eigen::Index t = hidden.cols();
  const Eigen::Index two_p = hidden.rows();
  AttentionResult res;
  const Vector h_t = hidden.col(t - 1);
  if (t >= 2) {
    const Vector query = attn_score.transpose() * h_t;
    const Vector scores = hidden.leftCols(t - 1).transpose() * query;
    res.weights = softmax(scores);
    res.context = hidden.leftCols(t - 1) * res.weights;
  } else {
    res.weights = Vector();
    res.context = Vector::Zero(two_p);
  }
  Vector concat(2 * two_p);
  concat << res.context, h_t;
  res.state = (attn_out * concat).array().tanh();
  return res;
}

namespace {

BranchTrace forward_branch(const BranchParams& br, const ModelDims& dims,
                           const EncodedSeq& input, const Vector* mask) {
  const int t = input.valid_len;
  if (t < 1) throw DataError("cannot run the model on an empty sequence");
  const int p = dims.hidden_dim;
  const int m = dims.embed_dim;

  BranchTrace trace;
  trace.t = t;
  trace.indices.assign(input.indices.begin(), input.indices.begin() + t);

  trace.embedded.resize(m, t);
  for (int k = 0; k < t; ++k) {
    const int idx = trace.indices[k];
    if (idx < 0 || idx >= br.embedding.rows())
      throw DataError("token index out of embedding range");
    trace.embedded.col(k) = relu(br.embedding.row(idx).transpose());
  }

  trace.fwd_steps.reserve(t);
  trace.bwd_steps.reserve(t);
  Vector h = Vector::Zero(p), c = Vector::Zero(p);
  for (int k = 0; k < t; ++k) {
    LstmStepCache step = lstm_step(br.fwd, trace.embedded.col(k), h, c);
    h = step.hidden;
    c = step.cell;
    trace.fwd_steps.push_back(std::move(step));
  }
  h.setZero();
  c.setZero();
  for (int j = 0; j < t; ++j) {
    LstmStepCache step = lstm_step(br.bwd, trace.embedded.col(t - 1 - j), h, c);
    h = step.hidden;
    c = step.cell;
    trace.bwd_steps.push_back(std::move(step));
  }

  trace.hidden.resize(2 * p, t);
  for (int k = 0; k < t; ++k) {
    trace.hidden.col(k).head(p) = trace.fwd_steps[k].hidden;
    trace.hidden.col(k).tail(p) = trace.bwd_steps[t - 1 - k].hidden;
  }

  AttentionResult attn = attention(trace.hidden, br.attn_score, br.attn_out);
  trace.attn = std::move(attn.weights);
  trace.context = std::move(attn.context);
  trace.concat.resize(4 * p);
  trace.concat << trace.context, trace.hidden.col(t - 1);
  trace.attn_state = std::move(attn.state);

  if (mask != nullptr) {
    trace.dropout_mask = *mask;
    trace.fused_input = trace.attn_state.cwiseProduct(*mask);
  } else {
    trace.fused_input = trace.attn_state;
  }
  return trace;
}

}  // namespace

ForwardTrace forward(const ModelParams& params,
                     const std::vector<const EncodedSeq*>& inputs,
                     const std::vector<Vector>* masks) {
  const ModelDims& dims = params.dims;
  if (static_cast<int>(inputs.size()) != dims.branch_count())
    throw DataError("wrong number of branch inputs");
  ForwardTrace trace;
  trace.branches.reserve(inputs.size());
  const int r = dims.attn_dim;
  Vector fused(r * dims.branch_count());
  for (int b = 0; b < dims.branch_count(); ++b) {
    const Vector* mask = masks != nullptr ? &(*masks)[b] : nullptr;
    trace.branches.push_back(
        forward_branch(params.branches[b], dims, *inputs[b], mask));
    fused.segment(b * r, r) = trace.branches[b].fused_input;
  }
  trace.logits = params.fuse_w * fused + params.fuse_b;
  trace.probs = softmax(trace.logits);
  trace.predicted = trace.probs(1) > trace.probs(0) ? 1 : 0;
  return trace;
}

Scalar batch_loss(std::span<const Scalar> prob_malicious,
                  std::span<const int> labels, Scalar clamp) {
  if (prob_malicious.empty() || prob_malicious.size() != labels.size())
    throw DataError("batch_loss: empty or mismatched batch");
  Scalar total = 0;
  for (std::size_t i = 0; i < prob_malicious.size(); ++i) {
    const Scalar p = std::min(std::max(prob_malicious[i], clamp), 1.0 - clamp);
    const Scalar y = static_cast<Scalar>(labels[i]);
    total += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return -total / static_cast<Scalar>(prob_malicious.size());
}

namespace {

// BPTT through one direction. `positions[j]` is the sequence position the
// j-th cached step consumed; the recurrent carry runs j = last..0. The
// incoming per-position gradient lives in dhidden rows [row_offset,
// row_offset+p).
void lstm_backward(const LstmWeights& w, const std::vector<LstmStepCache>& steps,
                   const Matrix& embedded, const Matrix& dhidden, int row_offset,
                   const std::vector<int>& positions, LstmWeights* gw,
                   Matrix* dembedded) {
  const Eigen::Index p = w.w_recur.cols();
  const int t = static_cast<int>(steps.size());
  const Vector zero = Vector::Zero(p);
  Vector dh_carry = Vector::Zero(p);
  Vector dc_carry = Vector::Zero(p);
  Vector dpre(4 * p);
  for (int j = t - 1; j >= 0; --j) {
    const LstmStepCache& step = steps[j];
    const int pos = positions[j];
    const Vector dh = dhidden.col(pos).segment(row_offset, p) + dh_carry;
    const Vector& h_prev = j > 0 ? steps[j - 1].hidden : zero;
    const Vector& c_prev = j > 0 ? steps[j - 1].cell : zero;

    const Vector d_out = dh.cwiseProduct(step.tanh_cell);
    const Vector dc =
        (dh.array() * step.gate_out.array() *
         (1.0 - step.tanh_cell.array().square()))
            .matrix() +
        dc_carry;
    const Vector d_in = dc.cwiseProduct(step.gate_cell);
    const Vector d_forget = dc.cwiseProduct(c_prev);
    const Vector d_cell = dc.cwiseProduct(step.gate_in);
    dc_carry = dc.cwiseProduct(step.gate_forget);

    dpre.segment(0, p) =
        (d_in.array() * step.gate_in.array() * (1.0 - step.gate_in.array())).matrix();
    dpre.segment(p, p) = (d_forget.array() * step.gate_forget.array() *
                          (1.0 - step.gate_forget.array()))
                             .matrix();
    dpre.segment(2 * p, p) =
        (d_cell.array() * (1.0 - step.gate_cell.array().square())).matrix();
    dpre.segment(3 * p, p) =
        (d_out.array() * step.gate_out.array() * (1.0 - step.gate_out.array()))
            .matrix();

    gw->w_input.noalias() += dpre * embedded.col(pos).transpose();
    gw->w_recur.noalias() += dpre * h_prev.transpose();
    gw->bias += dpre;
    dembedded->col(pos).noalias() += w.w_input.transpose() * dpre;
    dh_carry.noalias() = w.w_recur.transpose() * dpre;
  }
}

}  // namespace

void backward(const ModelParams& params, const ForwardTrace& trace, int label,
              Scalar inv_batch, Scalar clamp, ModelParams* grads) {
  const ModelDims& dims = params.dims;
  const int p = dims.hidden_dim;
  const int r = dims.attn_dim;

  // Loss gradient through the clamp: flat outside [clamp, 1-clamp].
  const Scalar p1 = trace.probs(1);
  Scalar g = 0;
  if (p1 > clamp && p1 < 1.0 - clamp) {
    g = (p1 - static_cast<Scalar>(label)) * inv_batch;
  }
  Vector dlogits(2);
  dlogits << -g, g;

  Vector fused(r * dims.branch_count());
  for (int b = 0; b < dims.branch_count(); ++b) {
    fused.segment(b * r, r) = trace.branches[b].fused_input;
  }
  grads->fuse_w.noalias() += dlogits * fused.transpose();
  grads->fuse_b += dlogits;
  const Vector dfused = params.fuse_w.transpose() * dlogits;

  for (int b = 0; b < dims.branch_count(); ++b) {
    const BranchParams& br = params.branches[b];
    BranchParams& gb = grads->branches[b];
    const BranchTrace& bt = trace.branches[b];
    const int t = bt.t;

    Vector dstate = dfused.segment(b * r, r);
    if (bt.dropout_mask.size() > 0) dstate = dstate.cwiseProduct(bt.dropout_mask);

    // tanh attentional state
    const Vector da =
        (dstate.array() * (1.0 - bt.attn_state.array().square())).matrix();
    gb.attn_out.noalias() += da * bt.concat.transpose();
    const Vector dconcat = br.attn_out.transpose() * da;

    Matrix dhidden = Matrix::Zero(2 * p, t);
    dhidden.col(t - 1) += dconcat.tail(2 * p);
    if (t >= 2) {
      const Vector dcontext = dconcat.head(2 * p);
      const auto h_left = bt.hidden.leftCols(t - 1);
      const Vector h_t = bt.hidden.col(t - 1);

      const Vector dalpha = h_left.transpose() * dcontext;
      dhidden.leftCols(t - 1).noalias() += dcontext * bt.attn.transpose();

      const Vector dscores = bt.attn.cwiseProduct(
          dalpha - Vector::Constant(t - 1, bt.attn.dot(dalpha)));
      const Vector query = br.attn_score.transpose() * h_t;
      const Vector dquery = h_left * dscores;
      gb.attn_score.noalias() += h_t * dquery.transpose();
      dhidden.col(t - 1).noalias() += br.attn_score * dquery;
      dhidden.leftCols(t - 1).noalias() += query * dscores.transpose();
    }

    Matrix dembedded = Matrix::Zero(dims.embed_dim, t);
    std::vector<int> fwd_pos(t), bwd_pos(t);
    for (int k = 0; k < t; ++k) {
      fwd_pos[k] = k;
      bwd_pos[k] = t - 1 - k;
    }
    lstm_backward(br.fwd, bt.fwd_steps, bt.embedded, dhidden, 0, fwd_pos,
                  &gb.fwd, &dembedded);
    lstm_backward(br.bwd, bt.bwd_steps, bt.embedded, dhidden, p, bwd_pos,
                  &gb.bwd, &dembedded);

    for (int k = 0; k < t; ++k) {
      const auto mask = (bt.embedded.col(k).array() > 0.0).cast<Scalar>();
      gb.embedding.row(bt.indices[k]) +=
          (dembedded.col(k).array() * mask).matrix().transpose();
    }
  }
}

}  // namespace httpmine
