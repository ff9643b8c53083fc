#include "httpmine/ingest.hpp"
#include "httpmine/model.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace httpmine {

namespace {

// Distinct deterministic streams so shuffling and dropout never interleave.
constexpr std::uint64_t kShuffleStream = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kDropoutStream = 0xC2B2AE3D27D4EB4Full;

ModelParams zeros_like(const ModelParams& params) {
  ModelParams out = params;
  out.set_zero();
  return out;
}

std::vector<Vector> draw_masks(const ModelDims& dims, Scalar dropout, Rng& rng) {
  std::vector<Vector> masks(dims.branch_count());
  const Scalar keep = 1.0 - dropout;
  for (int b = 0; b < dims.branch_count(); ++b) {
    masks[b].resize(dims.attn_dim);
    for (int j = 0; j < dims.attn_dim; ++j) {
      masks[b](j) = rng.uniform() < dropout ? 0.0 : 1.0 / keep;
    }
  }
  return masks;
}

struct AdamState {
  ModelParams first;   // running mean of gradients
  ModelParams second;  // running mean of squared gradients
  long long step = 0;
};

void adam_update(ModelParams& params, ModelParams& grads, AdamState& state,
                 const TrainHyper& hyper) {
  ++state.step;
  const Scalar bc1 = 1.0 - std::pow(hyper.beta1, static_cast<Scalar>(state.step));
  const Scalar bc2 = 1.0 - std::pow(hyper.beta2, static_cast<Scalar>(state.step));
  auto w = tensor_refs(params);
  auto g = tensor_refs(grads);
  auto m = tensor_refs(state.first);
  auto v = tensor_refs(state.second);
  for (std::size_t k = 0; k < w.size(); ++k) {
    Eigen::Map<Vector> wk(w[k].data, w[k].size());
    Eigen::Map<Vector> gk(g[k].data, g[k].size());
    Eigen::Map<Vector> mk(m[k].data, m[k].size());
    Eigen::Map<Vector> vk(v[k].data, v[k].size());
    mk = hyper.beta1 * mk + (1.0 - hyper.beta1) * gk;
    vk = hyper.beta2 * vk + (1.0 - hyper.beta2) * gk.cwiseProduct(gk);
    wk.array() -= hyper.learning_rate * (mk.array() / bc1) /
                  ((vk.array() / bc2).sqrt() + hyper.adam_eps);
  }
  for (BranchParams& br : params.branches) {
    br.embedding.row(Vocabulary::kPad).setZero();
  }
}

}  // namespace

ModelParams train(const std::vector<EncodedSample>& data, const ModelDims& dims,
                  const TrainHyper& hyper, std::vector<EpochStats>* curve) {
  if (data.empty()) throw DataError("train: empty dataset");
  bool has_pos = false, has_neg = false;
  for (const EncodedSample& s : data) {
    (s.label != 0 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg)
    throw DataError("train: dataset must contain both classes");
  if (hyper.batch_size < 1) throw DataError("train: batch_size must be >= 1");
  if (hyper.dropout < 0.0 || hyper.dropout >= 1.0)
    throw DataError("train: dropout must lie in [0, 1)");

  Rng init_rng(hyper.seed);
  Rng shuffle_rng(hyper.seed ^ kShuffleStream);
  Rng dropout_rng(hyper.seed ^ kDropoutStream);
  ModelParams params = init_params(dims, hyper.init_range, hyper.forget_bias, init_rng);
  AdamState adam{zeros_like(params), zeros_like(params), 0};
  ModelParams grads = zeros_like(params);

  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    Scalar loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += hyper.batch_size) {
      const std::size_t count = std::min<std::size_t>(hyper.batch_size, n - start);
      const Scalar inv_batch = 1.0 / static_cast<Scalar>(count);
      grads.set_zero();
      std::vector<Scalar> probs(count);
      std::vector<int> labels(count);
      for (std::size_t i = 0; i < count; ++i) {
        const EncodedSample& sample = data[order[start + i]];
        const auto inputs = branch_inputs(dims, sample);
        std::vector<Vector> masks;
        const std::vector<Vector>* mask_ptr = nullptr;
        if (hyper.dropout > 0.0) {
          masks = draw_masks(dims, hyper.dropout, dropout_rng);
          mask_ptr = &masks;
        }
        const ForwardTrace trace = forward(params, inputs, mask_ptr);
        probs[i] = trace.probs(1);
        labels[i] = sample.label;
        if (trace.predicted == sample.label) ++correct;
        backward(params, trace, sample.label, inv_batch, hyper.loss_clamp, &grads);
      }
      const Scalar loss = batch_loss(probs, labels, hyper.loss_clamp);
      if (!std::isfinite(loss))
        throw NumericError("train: loss diverged (non-finite) at epoch " +
                           std::to_string(epoch));
      loss_sum += loss * static_cast<Scalar>(count);
      adam_update(params, grads, adam, hyper);
      if (!params.all_finite())
        throw NumericError("train: parameters diverged at epoch " +
                           std::to_string(epoch));
    }
    if (curve != nullptr) {
      curve->push_back({loss_sum / static_cast<Scalar>(n),
                        static_cast<Scalar>(correct) / static_cast<Scalar>(n)});
    }
  }
  return params;
}

ModelParams analytic_gradients(const ModelParams& params,
                               const std::vector<EncodedSample>& batch,
                               const std::vector<std::vector<Vector>>& masks,
                               Scalar clamp) {
  ModelParams grads = zeros_like(params);
  const Scalar inv_batch = 1.0 / static_cast<Scalar>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto inputs = branch_inputs(params.dims, batch[i]);
    const ForwardTrace trace = forward(params, inputs, &masks[i]);
    backward(params, trace, batch[i].label, inv_batch, clamp, &grads);
  }
  return grads;
}

namespace {

Scalar masked_batch_loss(const ModelParams& params,
                         const std::vector<EncodedSample>& batch,
                         const std::vector<std::vector<Vector>>& masks,
                         Scalar clamp) {
  std::vector<Scalar> probs(batch.size());
  std::vector<int> labels(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto inputs = branch_inputs(params.dims, batch[i]);
    probs[i] = forward(params, inputs, &masks[i]).probs(1);
    labels[i] = batch[i].label;
  }
  return batch_loss(probs, labels, clamp);
}

}  // namespace

ModelParams numeric_gradients(const ModelParams& params,
                              const std::vector<EncodedSample>& batch,
                              const std::vector<std::vector<Vector>>& masks,
                              Scalar clamp, Scalar fd_eps) {
  ModelParams work = params;
  ModelParams grads = zeros_like(params);
  auto wrefs = tensor_refs(work);
  auto grefs = tensor_refs(grads);
  for (std::size_t k = 0; k < wrefs.size(); ++k) {
    for (Eigen::Index i = 0; i < wrefs[k].size(); ++i) {
      const Scalar saved = wrefs[k].data[i];
      wrefs[k].data[i] = saved + fd_eps;
      const Scalar plus = masked_batch_loss(work, batch, masks, clamp);
      wrefs[k].data[i] = saved - fd_eps;
      const Scalar minus = masked_batch_loss(work, batch, masks, clamp);
      wrefs[k].data[i] = saved;
      grefs[k].data[i] = (plus - minus) / (2.0 * fd_eps);
    }
  }
  return grads;
}

Scalar max_rel_error(const ModelParams& a, const ModelParams& b) {
  auto& ma = const_cast<ModelParams&>(a);
  auto& mb = const_cast<ModelParams&>(b);
  auto ra = tensor_refs(ma);
  auto rb = tensor_refs(mb);
  Scalar worst = 0;
  for (std::size_t k = 0; k < ra.size(); ++k) {
    for (Eigen::Index i = 0; i < ra[k].size(); ++i) {
      const Scalar x = ra[k].data[i];
      const Scalar y = rb[k].data[i];
      const Scalar denom = std::max({std::abs(x), std::abs(y), 1e-8});
      worst = std::max(worst, std::abs(x - y) / denom);
    }
  }
  return worst;
}

std::vector<std::vector<Vector>> grad_check_masks(const ModelDims& dims,
                                                  std::size_t samples,
                                                  Scalar dropout) {
  // Alternating kept/dropped coordinates: deterministic, and exercises both
  // the zeroing and the 1/(1-rho) scaling in the backward pass.
  const Scalar keep_scale = 1.0 / (1.0 - dropout);
  std::vector<std::vector<Vector>> masks(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    masks[s].resize(dims.branch_count());
    for (int b = 0; b < dims.branch_count(); ++b) {
      masks[s][b].resize(dims.attn_dim);
      for (int j = 0; j < dims.attn_dim; ++j) {
        masks[s][b](j) = (j + static_cast<int>(s) + b) % 2 == 0 ? keep_scale : 0.0;
      }
    }
  }
  return masks;
}

Scalar grad_check(const ModelParams& params,
                  const std::vector<EncodedSample>& batch, Scalar fd_eps) {
  const auto masks = grad_check_masks(params.dims, batch.size());
  const ModelParams analytic = analytic_gradients(params, batch, masks);
  const ModelParams numeric = numeric_gradients(params, batch, masks, 1e-7, fd_eps);
  return max_rel_error(analytic, numeric);
}

// --- checkpoints --------------------------------------------------------------

namespace {

constexpr const char* kCheckpointFormat = "httpmine-checkpoint";
constexpr int kCheckpointVersion = 1;

nlohmann::ordered_json tensor_to_json(const TensorRef& ref) {
  // Row-major nesting; vectors stay flat.
  Eigen::Map<const Matrix> view(ref.data, ref.rows, ref.cols);
  if (ref.cols == 1) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < ref.rows; ++i) arr.push_back(view(i, 0));
    return arr;
  }
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < ref.rows; ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index j = 0; j < ref.cols; ++j) row.push_back(view(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

void tensor_from_json(const nlohmann::json& j, TensorRef& ref,
                      const std::string& path) {
  Eigen::Map<Matrix> view(ref.data, ref.rows, ref.cols);
  if (ref.cols == 1) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != ref.rows)
      throw DataError(path + ": tensor " + ref.name + " has wrong shape");
    for (Eigen::Index i = 0; i < ref.rows; ++i) view(i, 0) = j[i].get<Scalar>();
    return;
  }
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != ref.rows)
    throw DataError(path + ": tensor " + ref.name + " has wrong shape");
  for (Eigen::Index i = 0; i < ref.rows; ++i) {
    const auto& row = j[i];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != ref.cols)
      throw DataError(path + ": tensor " + ref.name + " has wrong shape");
    for (Eigen::Index j2 = 0; j2 < ref.cols; ++j2)
      view(i, j2) = row[j2].get<Scalar>();
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const TrainHyper& hyper) {
  nlohmann::ordered_json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["dims"] = {{"seq_len", params.dims.seq_len},
               {"embed_dim", params.dims.embed_dim},
               {"hidden_dim", params.dims.hidden_dim},
               {"attn_dim", params.dims.attn_dim},
               {"vocab_content", params.dims.vocab_content},
               {"vocab_structure", params.dims.vocab_structure},
               {"feature_mode", feature_mode_name(params.dims.mode)}};
  j["hyper"] = {{"batch_size", hyper.batch_size},
                {"epochs", hyper.epochs},
                {"learning_rate", hyper.learning_rate},
                {"dropout", hyper.dropout},
                {"beta1", hyper.beta1},
                {"beta2", hyper.beta2},
                {"adam_eps", hyper.adam_eps},
                {"loss_clamp", hyper.loss_clamp},
                {"init_range", hyper.init_range},
                {"forget_bias", hyper.forget_bias}};
  j["seed"] = hyper.seed;
  nlohmann::ordered_json tensors;
  auto& mutable_params = const_cast<ModelParams&>(params);
  for (const TensorRef& ref : tensor_refs(mutable_params)) {
    tensors[ref.name] = tensor_to_json(ref);
  }
  j["tensors"] = std::move(tensors);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump() << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw DataError(path + ": not a checkpoint file");
  if (j.value("format", "") != kCheckpointFormat ||
      j.value("version", -1) != kCheckpointVersion)
    throw DataError(path + ": unsupported checkpoint format/version");

  const auto& jd = j.at("dims");
  ModelDims dims;
  dims.seq_len = jd.at("seq_len").get<int>();
  dims.embed_dim = jd.at("embed_dim").get<int>();
  dims.hidden_dim = jd.at("hidden_dim").get<int>();
  dims.attn_dim = jd.at("attn_dim").get<int>();
  dims.vocab_content = jd.at("vocab_content").get<int>();
  dims.vocab_structure = jd.at("vocab_structure").get<int>();
  dims.mode = parse_feature_mode(jd.at("feature_mode").get<std::string>());

  Checkpoint ckpt;
  Rng rng(0);
  ckpt.params = init_params(dims, 0.0, 0.0, rng);  // correct shapes, zeroed
  const auto& jh = j.at("hyper");
  ckpt.hyper.batch_size = jh.at("batch_size").get<int>();
  ckpt.hyper.epochs = jh.at("epochs").get<int>();
  ckpt.hyper.learning_rate = jh.at("learning_rate").get<Scalar>();
  ckpt.hyper.dropout = jh.at("dropout").get<Scalar>();
  ckpt.hyper.beta1 = jh.at("beta1").get<Scalar>();
  ckpt.hyper.beta2 = jh.at("beta2").get<Scalar>();
  ckpt.hyper.adam_eps = jh.at("adam_eps").get<Scalar>();
  ckpt.hyper.loss_clamp = jh.at("loss_clamp").get<Scalar>();
  ckpt.hyper.init_range = jh.at("init_range").get<Scalar>();
  ckpt.hyper.forget_bias = jh.at("forget_bias").get<Scalar>();
  ckpt.hyper.seed = j.at("seed").get<std::uint64_t>();

  const auto& tensors = j.at("tensors");
  for (TensorRef& ref : tensor_refs(ckpt.params)) {
    if (!tensors.contains(ref.name))
      throw DataError(path + ": missing tensor " + ref.name);
    tensor_from_json(tensors.at(ref.name), ref, path);
  }
  if (!ckpt.params.all_finite())
    throw DataError(path + ": checkpoint contains non-finite values");
  return ckpt;
}

}  // namespace httpmine
