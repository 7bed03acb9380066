#include "cpfd/model.hpp"

#include <cmath>
#include <stdexcept>

namespace cpfd {

namespace {

constexpr double kInitStd = 0.02;
constexpr double kMaskValue = -1e9;

Tensor normal_param(Shape shape, Rng& rng, double stddev = kInitStd) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.gaussian(0.0, stddev);
  return Tensor::from_data(std::move(shape), std::move(data), /*requires_grad=*/true);
}

}  // namespace

void ModelConfig::validate() const {
  if (layers < 1 || heads < 1 || d_model < 1 || d_ff < 1 || vocab_size < 1 ||
      max_seq_len < 1) {
    throw std::invalid_argument("ModelConfig: all sizes must be positive");
  }
  if (d_model % heads != 0) {
    throw std::invalid_argument("ModelConfig: d_model (" + std::to_string(d_model) +
                                ") not divisible by heads (" + std::to_string(heads) + ")");
  }
}

TaggerModel::TaggerModel(const ModelConfig& cfg, int class_count, Rng& rng)
    : cfg_(cfg), classes_(class_count) {
  cfg_.validate();
  if (class_count < 1) {
    throw std::invalid_argument("TaggerModel: class_count must be positive");
  }

  embedding_ = normal_param({cfg_.vocab_size, cfg_.d_model}, rng);

  // Fixed sinusoidal positional table.
  pos_encoding_.assign(static_cast<std::size_t>(cfg_.max_seq_len) * cfg_.d_model, 0.0);
  for (int pos = 0; pos < cfg_.max_seq_len; ++pos) {
    for (int i = 0; i < cfg_.d_model; i += 2) {
      const double angle =
          pos / std::pow(10000.0, static_cast<double>(i) / cfg_.d_model);
      pos_encoding_[static_cast<std::size_t>(pos) * cfg_.d_model + i] = std::sin(angle);
      if (i + 1 < cfg_.d_model) {
        pos_encoding_[static_cast<std::size_t>(pos) * cfg_.d_model + i + 1] =
            std::cos(angle);
      }
    }
  }

  layers_.reserve(cfg_.layers);
  for (int l = 0; l < cfg_.layers; ++l) {
    EncoderLayer layer;
    layer.wq = normal_param({cfg_.d_model, cfg_.d_model}, rng);
    layer.bq = Tensor::zeros({cfg_.d_model}, true);
    layer.wk = normal_param({cfg_.d_model, cfg_.d_model}, rng);
    layer.bk = Tensor::zeros({cfg_.d_model}, true);
    layer.wv = normal_param({cfg_.d_model, cfg_.d_model}, rng);
    layer.bv = Tensor::zeros({cfg_.d_model}, true);
    layer.wo = normal_param({cfg_.d_model, cfg_.d_model}, rng);
    layer.bo = Tensor::zeros({cfg_.d_model}, true);
    layer.ln1_gain = Tensor::full({cfg_.d_model}, 1.0, true);
    layer.ln1_bias = Tensor::zeros({cfg_.d_model}, true);
    layer.ff_w1 = normal_param({cfg_.d_model, cfg_.d_ff}, rng);
    layer.ff_b1 = Tensor::zeros({cfg_.d_ff}, true);
    layer.ff_w2 = normal_param({cfg_.d_ff, cfg_.d_model}, rng);
    layer.ff_b2 = Tensor::zeros({cfg_.d_model}, true);
    layer.ln2_gain = Tensor::full({cfg_.d_model}, 1.0, true);
    layer.ln2_bias = Tensor::zeros({cfg_.d_model}, true);
    layers_.push_back(std::move(layer));
  }

  cls_w_ = normal_param({cfg_.d_model, classes_}, rng);
  cls_b_ = Tensor::zeros({classes_}, true);
}

ForwardResult TaggerModel::forward(const std::vector<int>& token_ids) const {
  return forward(token_ids, static_cast<int>(token_ids.size()));
}

ForwardResult TaggerModel::forward(const std::vector<int>& token_ids, int real_len) const {
  const int n = static_cast<int>(token_ids.size());
  if (n < 1 || n > cfg_.max_seq_len) {
    throw std::invalid_argument("forward: sequence length " + std::to_string(n) +
                                " outside [1, " + std::to_string(cfg_.max_seq_len) + "]");
  }
  if (real_len < 1 || real_len > n) {
    throw std::invalid_argument("forward: real_len " + std::to_string(real_len) +
                                " outside [1, " + std::to_string(n) + "]");
  }

  // Embeddings are scaled by sqrt(d_model) before the positional table is
  // added, so token identity is not drowned by the unit-amplitude sinusoids.
  std::vector<double> pe(pos_encoding_.begin(),
                         pos_encoding_.begin() + static_cast<std::size_t>(n) * cfg_.d_model);
  Tensor x = add(scale(embedding_lookup(embedding_, token_ids),
                       std::sqrt(static_cast<double>(cfg_.d_model))),
                 Tensor::from_data({n, cfg_.d_model}, std::move(pe)));

  // Key-padding mask: every query may only attend to real positions. Masked
  // scores underflow to exactly zero after softmax, so the sliced rows equal
  // the softmax over the unpadded sequence bit for bit.
  Tensor key_mask;
  if (real_len < n) {
    std::vector<double> mask(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
      for (int j = real_len; j < n; ++j) mask[static_cast<std::size_t>(i) * n + j] = kMaskValue;
    }
    key_mask = Tensor::from_data({n, n}, std::move(mask));
  }

  const int d_head = cfg_.d_model / cfg_.heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(d_head));

  AttentionStack stack;
  stack.layers.reserve(layers_.size());

  for (const EncoderLayer& layer : layers_) {
    Tensor q = add_rowwise(matmul(x, layer.wq), layer.bq);
    Tensor k = add_rowwise(matmul(x, layer.wk), layer.bk);
    Tensor v = add_rowwise(matmul(x, layer.wv), layer.bv);

    std::vector<Tensor> head_maps;
    std::vector<Tensor> head_ctx;
    head_maps.reserve(cfg_.heads);
    head_ctx.reserve(cfg_.heads);
    for (int h = 0; h < cfg_.heads; ++h) {
      const int lo = h * d_head, hi = lo + d_head;
      Tensor qh = slice_cols(q, lo, hi);
      Tensor kh = slice_cols(k, lo, hi);
      Tensor vh = slice_cols(v, lo, hi);
      Tensor scores = scale(matmul(qh, transpose2d(kh)), inv_sqrt_dh);
      if (key_mask.defined()) {
        scores = add(scores, key_mask);
      }
      Tensor attn = softmax_last(scores);  // [n, n]
      head_maps.push_back(attn);
      head_ctx.push_back(matmul(attn, vh));
    }

    Tensor layer_attn = stack0(head_maps);  // [K, n, n]
    if (real_len < n) {
      layer_attn = slice_last2(layer_attn, real_len);
    }
    stack.layers.push_back(layer_attn);

    Tensor attn_out = add_rowwise(matmul(concat_cols(head_ctx), layer.wo), layer.bo);
    x = layer_norm(add(x, attn_out), layer.ln1_gain, layer.ln1_bias);

    Tensor ff = add_rowwise(
        matmul(gelu(add_rowwise(matmul(x, layer.ff_w1), layer.ff_b1)), layer.ff_w2),
        layer.ff_b2);
    x = layer_norm(add(x, ff), layer.ln2_gain, layer.ln2_bias);
  }

  Tensor logits = add_rowwise(matmul(x, cls_w_), cls_b_);
  if (real_len < n) {
    logits = slice_rows(logits, real_len);
  }
  return ForwardResult{logits, std::move(stack)};
}

void TaggerModel::expand_classifier(int added_classes, Rng& rng) {
  if (added_classes < 1) {
    throw std::invalid_argument("expand_classifier: added_classes must be >= 1");
  }
  if (frozen_) {
    throw std::logic_error("expand_classifier: model is frozen");
  }
  const int old_classes = classes_;
  const int new_classes = old_classes + added_classes;

  std::vector<double> w(static_cast<std::size_t>(cfg_.d_model) * new_classes);
  for (int r = 0; r < cfg_.d_model; ++r) {
    for (int c = 0; c < old_classes; ++c) {
      w[static_cast<std::size_t>(r) * new_classes + c] =
          cls_w_.value()[static_cast<std::size_t>(r) * old_classes + c];
    }
  }
  // New columns after the copy so parameter draws do not depend on d_model
  // interleaving with old values.
  for (int c = old_classes; c < new_classes; ++c) {
    for (int r = 0; r < cfg_.d_model; ++r) {
      w[static_cast<std::size_t>(r) * new_classes + c] = rng.gaussian(0.0, kInitStd);
    }
  }
  std::vector<double> b(new_classes, 0.0);
  for (int c = 0; c < old_classes; ++c) b[c] = cls_b_.value()[c];

  cls_w_ = Tensor::from_data({cfg_.d_model, new_classes}, std::move(w), true);
  cls_b_ = Tensor::from_data({new_classes}, std::move(b), true);
  classes_ = new_classes;
}

TaggerModel TaggerModel::clone(bool trainable) const {
  TaggerModel copy;
  copy.cfg_ = cfg_;
  copy.classes_ = classes_;
  copy.frozen_ = !trainable;
  copy.pos_encoding_ = pos_encoding_;
  auto dup = [trainable](const Tensor& t) {
    return Tensor::from_data(t.shape(), t.value(), trainable);
  };
  copy.embedding_ = dup(embedding_);
  copy.layers_.reserve(layers_.size());
  for (const EncoderLayer& layer : layers_) {
    EncoderLayer c;
    c.wq = dup(layer.wq); c.bq = dup(layer.bq);
    c.wk = dup(layer.wk); c.bk = dup(layer.bk);
    c.wv = dup(layer.wv); c.bv = dup(layer.bv);
    c.wo = dup(layer.wo); c.bo = dup(layer.bo);
    c.ln1_gain = dup(layer.ln1_gain); c.ln1_bias = dup(layer.ln1_bias);
    c.ff_w1 = dup(layer.ff_w1); c.ff_b1 = dup(layer.ff_b1);
    c.ff_w2 = dup(layer.ff_w2); c.ff_b2 = dup(layer.ff_b2);
    c.ln2_gain = dup(layer.ln2_gain); c.ln2_bias = dup(layer.ln2_bias);
    copy.layers_.push_back(std::move(c));
  }
  copy.cls_w_ = dup(cls_w_);
  copy.cls_b_ = dup(cls_b_);
  return copy;
}

TaggerModel TaggerModel::frozen_snapshot() const { return clone(false); }

TaggerModel TaggerModel::trainable_copy() const { return clone(true); }

std::vector<Tensor> TaggerModel::parameters() const {
  std::vector<Tensor> out;
  for (const auto& [name, tensor] : named_parameters()) {
    out.push_back(tensor);
  }
  return out;
}

std::vector<std::pair<std::string, Tensor>> TaggerModel::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("embedding", embedding_);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    const EncoderLayer& layer = layers_[l];
    out.emplace_back(p + "attn.wq", layer.wq);
    out.emplace_back(p + "attn.bq", layer.bq);
    out.emplace_back(p + "attn.wk", layer.wk);
    out.emplace_back(p + "attn.bk", layer.bk);
    out.emplace_back(p + "attn.wv", layer.wv);
    out.emplace_back(p + "attn.bv", layer.bv);
    out.emplace_back(p + "attn.wo", layer.wo);
    out.emplace_back(p + "attn.bo", layer.bo);
    out.emplace_back(p + "ln1.gain", layer.ln1_gain);
    out.emplace_back(p + "ln1.bias", layer.ln1_bias);
    out.emplace_back(p + "ff.w1", layer.ff_w1);
    out.emplace_back(p + "ff.b1", layer.ff_b1);
    out.emplace_back(p + "ff.w2", layer.ff_w2);
    out.emplace_back(p + "ff.b2", layer.ff_b2);
    out.emplace_back(p + "ln2.gain", layer.ln2_gain);
    out.emplace_back(p + "ln2.bias", layer.ln2_bias);
  }
  out.emplace_back("classifier.weight", cls_w_);
  out.emplace_back("classifier.bias", cls_b_);
  return out;
}

void TaggerModel::load_parameter(const std::string& name, const std::vector<double>& data) {
  for (auto& [pname, tensor] : named_parameters()) {
    if (pname == name) {
      if (tensor.value().size() != data.size()) {
        throw std::invalid_argument("load_parameter: size mismatch for " + name);
      }
      Tensor t = tensor;
      t.mutable_value() = data;
      return;
    }
  }
  throw std::invalid_argument("load_parameter: unknown parameter " + name);
}

}  // namespace cpfd
