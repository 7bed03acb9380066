#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cpfd/rng.hpp"
#include "cpfd/tensor.hpp"

namespace cpfd {

struct ModelConfig {
  int layers = 2;        // encoder depth L
  int heads = 2;         // attention heads K per layer
  int d_model = 32;
  int d_ff = 64;
  int vocab_size = 0;
  int max_seq_len = 64;

  void validate() const;
};

// Post-softmax attention weights, one [K, n, n] tensor per encoder layer.
// Rows are stochastic over the key axis for every (layer, head, query).
struct AttentionStack {
  std::vector<Tensor> layers;

  int layer_count() const { return static_cast<int>(layers.size()); }
  int head_count() const { return layers.empty() ? 0 : layers[0].shape()[0]; }
  int seq_len() const { return layers.empty() ? 0 : layers[0].shape()[1]; }
};

struct ForwardResult {
  Tensor logits;             // [n, class_count]
  AttentionStack attention;  // L x [K, n, n]
};

// Transformer encoder token classifier. The classifier head grows across
// continual steps via expand_classifier; everything else keeps its weights.
class TaggerModel {
 public:
  // Empty handle; usable only as an assignment target.
  TaggerModel() = default;

  TaggerModel(const ModelConfig& cfg, int class_count, Rng& rng);

  // Forward over a token sequence. With real_len < ids.size() the tail is
  // treated as padding: padded keys are masked out of every attention row and
  // the returned logits/attention cover only the first real_len positions.
  ForwardResult forward(const std::vector<int>& token_ids) const;
  ForwardResult forward(const std::vector<int>& token_ids, int real_len) const;

  // Adds classes to the classifier. Existing rows and biases are copied
  // bit-exactly; new weight columns draw from Normal(0, 0.02^2).
  void expand_classifier(int added_classes, Rng& rng);

  // Deep copy whose parameters never receive gradients.
  TaggerModel frozen_snapshot() const;
  // Deep copy with trainable parameters (used to resume from a best-epoch snapshot).
  TaggerModel trainable_copy() const;

  std::vector<Tensor> parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  // Overwrites a parameter's values by name; shape must match.
  void load_parameter(const std::string& name, const std::vector<double>& data);

  int class_count() const { return classes_; }
  bool frozen() const { return frozen_; }
  const ModelConfig& config() const { return cfg_; }

 private:
  TaggerModel clone(bool trainable) const;

  struct EncoderLayer {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln1_gain, ln1_bias;
    Tensor ff_w1, ff_b1, ff_w2, ff_b2;
    Tensor ln2_gain, ln2_bias;
  };

  ModelConfig cfg_;
  int classes_ = 0;
  bool frozen_ = false;
  Tensor embedding_;                   // [vocab_size, d_model]
  std::vector<double> pos_encoding_;   // [max_seq_len * d_model], constant
  std::vector<EncoderLayer> layers_;
  Tensor cls_w_;                       // [d_model, class_count]
  Tensor cls_b_;                       // [class_count]
};

}  // namespace cpfd
