#include "flsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "flsim/rng.hpp"

namespace flsim {

namespace {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

std::size_t MultimodalModelSpec::param_count() const {
  std::size_t n = 0;
  for (const auto& e : encoders) n += e.param_count();
  if (head) n += head->param_count();
  return n;
}

std::size_t MultimodalModelSpec::encoder_offset(int m) const {
  std::size_t off = 0;
  for (int i = 0; i < m; ++i) off += encoders[i].param_count();
  return off;
}

std::size_t MultimodalModelSpec::head_offset() const {
  return encoder_offset(n_modalities());
}

int MultimodalModelSpec::n_outputs() const {
  return head ? head->output_dim() : 0;
}

void MultimodalModelSpec::validate() const {
  if (encoders.size() < 2 || encoders.size() > 4) {
    throw std::invalid_argument("model: modality count must be in [2, 4]");
  }
  if (projection_dim <= 0) throw std::invalid_argument("model: projection_dim must be positive");
  for (const auto& e : encoders) {
    e.validate();
    if (e.output_dim() != projection_dim) {
      throw std::invalid_argument("model: all encoders must output projection_dim");
    }
  }
  if (task == TaskKind::Retrieval) {
    if (head) throw std::invalid_argument("model: retrieval task has no head");
  } else {
    if (!head) throw std::invalid_argument("model: classification task needs a head");
    head->validate();
    if (head->input_dim() != n_modalities() * projection_dim) {
      throw std::invalid_argument("model: head input must be M * projection_dim");
    }
  }
}

std::vector<Vec> encode(const MultimodalModelSpec& spec, const ParamVector& params,
                        const MultimodalSample& sample, EncodeCache* cache) {
  const int M = spec.n_modalities();
  if (static_cast<int>(sample.modality_inputs.size()) != M) {
    throw std::invalid_argument("encode: sample has wrong modality count");
  }
  std::vector<Vec> z(M);
  if (cache) {
    cache->encoder_caches.assign(M, MLPCache{});
    cache->raw.assign(M, Vec{});
    cache->z.assign(M, Vec{});
    cache->zero_reps = 0;
  }
  for (int m = 0; m < M; ++m) {
    MLPCache* mc = cache ? &cache->encoder_caches[m] : nullptr;
    Vec raw = mlp_forward(spec.encoders[m], params, spec.encoder_offset(m),
                          sample.modality_inputs[m], mc);
    bool was_zero = false;
    z[m] = normalized(raw, &was_zero);
    if (cache) {
      cache->raw[m] = std::move(raw);
      cache->z[m] = z[m];
      if (was_zero) cache->zero_reps += 1;
    }
  }
  return z;
}

void encode_backward(const MultimodalModelSpec& spec, const ParamVector& params,
                     const EncodeCache& cache, const std::vector<Vec>& grad_z,
                     ParamVector& grad_params) {
  const int M = spec.n_modalities();
  if (static_cast<int>(grad_z.size()) != M) {
    throw std::invalid_argument("encode_backward: grad_z modality count mismatch");
  }
  for (int m = 0; m < M; ++m) {
    Vec grad_raw = normalize_backward(cache.raw[m], grad_z[m]);
    mlp_backward(spec.encoders[m], params, spec.encoder_offset(m),
                 cache.encoder_caches[m], grad_raw, grad_params, nullptr);
  }
}

Vec predict(const MultimodalModelSpec& spec, const ParamVector& params,
            const MultimodalSample& sample, PredictCache* cache) {
  if (spec.task == TaskKind::Retrieval) {
    throw std::invalid_argument("predict: retrieval model has no head");
  }
  PredictCache local;
  PredictCache& c = cache ? *cache : local;
  std::vector<Vec> z = encode(spec, params, sample, &c.enc);
  c.concat.clear();
  c.concat.reserve(static_cast<std::size_t>(spec.n_modalities()) * spec.projection_dim);
  for (const auto& zm : z) c.concat.insert(c.concat.end(), zm.begin(), zm.end());
  return mlp_forward(*spec.head, params, spec.head_offset(), c.concat, &c.head_cache);
}

void predict_backward(const MultimodalModelSpec& spec, const ParamVector& params,
                      const PredictCache& cache, const Vec& grad_logits,
                      ParamVector& grad_params) {
  Vec grad_concat;
  mlp_backward(*spec.head, params, spec.head_offset(), cache.head_cache,
               grad_logits, grad_params, &grad_concat);
  const int M = spec.n_modalities();
  const int d = spec.projection_dim;
  std::vector<Vec> grad_z(M);
  for (int m = 0; m < M; ++m) {
    grad_z[m].assign(grad_concat.begin() + static_cast<std::ptrdiff_t>(m) * d,
                     grad_concat.begin() + static_cast<std::ptrdiff_t>(m + 1) * d);
  }
  encode_backward(spec, params, cache.enc, grad_z, grad_params);
}

LossResult task_loss(const MultimodalModelSpec& spec, const ParamVector& params,
                     const std::vector<MultimodalSample>& data,
                     std::span<const int> batch) {
  if (batch.empty()) throw std::invalid_argument("task_loss: empty batch");
  if (spec.task == TaskKind::Retrieval) {
    throw std::invalid_argument("task_loss: retrieval task has no labels");
  }
  LossResult res;
  res.grad.assign(spec.param_count(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (int idx : batch) {
    const MultimodalSample& s = data[idx];
    PredictCache cache;
    Vec logits = predict(spec, params, s, &cache);
    res.zero_reps += cache.enc.zero_reps;
    Vec grad_logits(logits.size());
    if (spec.task == TaskKind::Multiclass) {
      const int y = s.class_label;
      if (y < 0 || y >= static_cast<int>(logits.size())) {
        throw std::invalid_argument("task_loss: class label out of range");
      }
      const double mx = *std::max_element(logits.begin(), logits.end());
      double sum = 0.0;
      for (double h : logits) sum += std::exp(h - mx);
      const double lse = mx + std::log(sum);
      res.loss += (lse - logits[y]) * inv_b;
      for (std::size_t k = 0; k < logits.size(); ++k) {
        grad_logits[k] = (std::exp(logits[k] - lse) - (static_cast<int>(k) == y ? 1.0 : 0.0)) * inv_b;
      }
    } else {
      const std::size_t L = logits.size();
      if (s.label_bits.size() != L) {
        throw std::invalid_argument("task_loss: label vector length mismatch");
      }
      const double inv_l = 1.0 / static_cast<double>(L);
      for (std::size_t l = 0; l < L; ++l) {
        const double y = static_cast<double>(s.label_bits[l]);
        res.loss += (softplus(logits[l]) - y * logits[l]) * inv_l * inv_b;
        grad_logits[l] = (sigmoid(logits[l]) - y) * inv_l * inv_b;
      }
    }
    predict_backward(spec, params, cache, grad_logits, res.grad);
  }
  return res;
}

LossResult alignment_loss(const MultimodalModelSpec& spec, const ParamVector& params,
                          const std::vector<MultimodalSample>& data,
                          std::span<const int> batch, double tau) {
  if (batch.size() < 2) throw std::invalid_argument("alignment_loss: batch size < 2");
  if (tau <= 0.0) throw std::invalid_argument("alignment_loss: tau must be positive");
  const int M = spec.n_modalities();
  const int n = static_cast<int>(batch.size());

  LossResult res;
  res.grad.assign(spec.param_count(), 0.0);

  std::vector<EncodeCache> caches(n);
  std::vector<std::vector<Vec>> z(n);
  for (int i = 0; i < n; ++i) {
    z[i] = encode(spec, params, data[batch[i]], &caches[i]);
    res.zero_reps += caches[i].zero_reps;
  }

  // grad w.r.t. each normalized representation
  std::vector<std::vector<Vec>> gz(n, std::vector<Vec>(M, Vec(spec.projection_dim, 0.0)));

  const int n_pairs = M * (M - 1);
  const double w = 1.0 / (static_cast<double>(n) * n_pairs);  // mean over samples and pairs
  Vec scores(n);
  Vec probs(n);
  for (int a = 0; a < M; ++a) {
    for (int b = 0; b < M; ++b) {
      if (a == b) continue;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) scores[j] = dot(z[i][a], z[j][b]) / tau;
        const double mx = *std::max_element(scores.begin(), scores.end());
        double sum = 0.0;
        for (int j = 0; j < n; ++j) sum += std::exp(scores[j] - mx);
        const double lse = mx + std::log(sum);
        res.loss += (lse - scores[i]) * w;
        for (int j = 0; j < n; ++j) {
          probs[j] = std::exp(scores[j] - lse);
          const double coef = (probs[j] - (i == j ? 1.0 : 0.0)) * w / tau;
          axpy(coef, z[j][b], gz[i][a]);
          axpy(coef, z[i][a], gz[j][b]);
        }
      }
    }
  }
  for (int i = 0; i < n; ++i) encode_backward(spec, params, caches[i], gz[i], res.grad);
  return res;
}

LossResult batch_loss(const MultimodalModelSpec& spec, const ParamVector& params,
                      const std::vector<MultimodalSample>& data,
                      std::span<const int> batch, double alignment_tau) {
  if (spec.task == TaskKind::Retrieval) {
    return alignment_loss(spec, params, data, batch, alignment_tau);
  }
  return task_loss(spec, params, data, batch);
}

ParamVector init_model_params(const MultimodalModelSpec& spec, uint64_t seed) {
  spec.validate();
  ParamVector p;
  p.reserve(spec.param_count());
  for (int m = 0; m < spec.n_modalities(); ++m) {
    ParamVector block = init_params(spec.encoders[m], seed_chain(seed, {stream::kInit, static_cast<uint64_t>(m)}));
    p.insert(p.end(), block.begin(), block.end());
  }
  if (spec.head) {
    ParamVector block = init_params(*spec.head, seed_chain(seed, {stream::kInit, 0x4eadULL}));
    p.insert(p.end(), block.begin(), block.end());
  }
  return p;
}

}  // namespace flsim
