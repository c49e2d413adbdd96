#pragma once

#include <cstdint>
#include <functional>

#include "flsim/vec.hpp"

namespace flsim {

// Flat float64 model parameters; the unit of federation and aggregation.
using ParamVector = Vec;

enum class Activation { Relu, Tanh, Identity };

// Fully connected network: layer_sizes = [input, hidden..., output]. The
// activation applies to hidden layers only; the output layer is linear.
// Per-layer parameter layout: weights row-major (fan_out x fan_in), then bias.
struct MLPSpec {
  std::vector<int> layer_sizes;
  Activation activation = Activation::Relu;

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int n_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
  std::size_t param_count() const;
  void validate() const;  // throws std::invalid_argument
};

// Weights ~ uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero.
// Deterministic in (spec, seed).
ParamVector init_params(const MLPSpec& spec, uint64_t seed);

// Stores layer inputs and pre-activations; backward never recomputes the
// forward pass.
struct MLPCache {
  std::vector<Vec> inputs;
  std::vector<Vec> pre_acts;
};

Vec mlp_forward(const MLPSpec& spec, const ParamVector& params,
                std::size_t offset, const Vec& input, MLPCache* cache = nullptr);

inline Vec mlp_forward(const MLPSpec& spec, const ParamVector& params,
                       const Vec& input, MLPCache* cache = nullptr) {
  return mlp_forward(spec, params, 0, input, cache);
}

// Exact reverse-mode gradients. Parameter gradients accumulate into
// grad_params starting at offset; grad_input (optional) receives the
// gradient w.r.t. the forward input.
void mlp_backward(const MLPSpec& spec, const ParamVector& params,
                  std::size_t offset, const MLPCache& cache,
                  const Vec& grad_output, ParamVector& grad_params,
                  Vec* grad_input = nullptr);

inline void mlp_backward(const MLPSpec& spec, const ParamVector& params,
                         const MLPCache& cache, const Vec& grad_output,
                         ParamVector& grad_params, Vec* grad_input = nullptr) {
  mlp_backward(spec, params, 0, cache, grad_output, grad_params, grad_input);
}

// Central differences (f(p + eps e_i) - f(p - eps e_i)) / (2 eps).
ParamVector finite_diff_grad(
    const std::function<double(const ParamVector&)>& loss_fn,
    const ParamVector& params, double eps);

}  // namespace flsim
