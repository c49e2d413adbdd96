#pragma once

#include <optional>
#include <span>

#include "flsim/mlp.hpp"

namespace flsim {

enum class TaskKind { Multiclass, Multilabel, Retrieval };

// Per-modality encoders projecting into a shared representation space, plus
// a concatenation fusion head for classification tasks. Retrieval models
// have no head. Parameters pack encoder 0..M-1 then the head into one
// ParamVector.
struct MultimodalModelSpec {
  std::vector<MLPSpec> encoders;
  int projection_dim = 0;
  std::optional<MLPSpec> head;
  TaskKind task = TaskKind::Multiclass;

  int n_modalities() const { return static_cast<int>(encoders.size()); }
  std::size_t param_count() const;
  std::size_t encoder_offset(int m) const;
  std::size_t head_offset() const;
  int n_outputs() const;  // head output size; 0 for retrieval
  void validate() const;  // throws std::invalid_argument
};

struct MultimodalSample {
  std::vector<Vec> modality_inputs;
  int class_label = -1;          // multiclass
  std::vector<int> label_bits;   // multilabel (0/1 per label)
};

struct EncodeCache {
  std::vector<MLPCache> encoder_caches;
  std::vector<Vec> raw;  // pre-normalization encoder outputs
  std::vector<Vec> z;    // L2-normalized representations
  int zero_reps = 0;     // modalities whose raw output was the zero vector
};

// z^m = normalize(encoder_m(x_m)); zero vectors pass through unnormalized
// and are counted in the cache.
std::vector<Vec> encode(const MultimodalModelSpec& spec, const ParamVector& params,
                        const MultimodalSample& sample, EncodeCache* cache = nullptr);

// Backprop of grad w.r.t. the normalized representations into grad_params.
void encode_backward(const MultimodalModelSpec& spec, const ParamVector& params,
                     const EncodeCache& cache, const std::vector<Vec>& grad_z,
                     ParamVector& grad_params);

struct PredictCache {
  EncodeCache enc;
  MLPCache head_cache;
  Vec concat;
};

// logits = head(concat(z^1..z^M)); classification tasks only.
Vec predict(const MultimodalModelSpec& spec, const ParamVector& params,
            const MultimodalSample& sample, PredictCache* cache = nullptr);

void predict_backward(const MultimodalModelSpec& spec, const ParamVector& params,
                      const PredictCache& cache, const Vec& grad_logits,
                      ParamVector& grad_params);

struct LossResult {
  double loss = 0.0;
  ParamVector grad;   // w.r.t. all model parameters
  int zero_reps = 0;  // zero-vector representations seen (recorded, not fatal)
};

// Mean batch loss with exact analytic gradient. Softmax cross-entropy for
// multiclass; mean per-label sigmoid binary cross-entropy for multilabel.
LossResult task_loss(const MultimodalModelSpec& spec, const ParamVector& params,
                     const std::vector<MultimodalSample>& data,
                     std::span<const int> batch);

// Symmetric in-batch contrastive objective over all ordered modality pairs
// (a pairwise stand-in for trilinear alignment objectives): for each pair
// (a, b) the matching sample's b-representation is classified against all
// b-representations in the batch under dot-product similarity scaled by
// 1/tau. Mean over pairs and samples.
LossResult alignment_loss(const MultimodalModelSpec& spec, const ParamVector& params,
                          const std::vector<MultimodalSample>& data,
                          std::span<const int> batch, double tau);

// Dispatches on spec.task.
LossResult batch_loss(const MultimodalModelSpec& spec, const ParamVector& params,
                      const std::vector<MultimodalSample>& data,
                      std::span<const int> batch, double alignment_tau);

// Concatenated per-encoder then head initialization, seeded per block.
ParamVector init_model_params(const MultimodalModelSpec& spec, uint64_t seed);

}  // namespace flsim
