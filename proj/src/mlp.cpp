#include "flsim/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "flsim/errors.hpp"
#include "flsim/rng.hpp"

namespace flsim {

namespace {

double activate(Activation a, double z) {
  switch (a) {
    case Activation::Relu:
      return z > 0.0 ? z : 0.0;
    case Activation::Tanh:
      return std::tanh(z);
    case Activation::Identity:
      return z;
  }
  return z;
}

double activate_grad(Activation a, double z) {
  switch (a) {
    case Activation::Relu:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: {
      double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::Identity:
      return 1.0;
  }
  return 1.0;
}

}  // namespace

std::size_t MLPSpec::param_count() const {
  std::size_t n = 0;
  for (int l = 0; l + 1 < static_cast<int>(layer_sizes.size()); ++l) {
    n += (static_cast<std::size_t>(layer_sizes[l]) + 1) * layer_sizes[l + 1];
  }
  return n;
}

void MLPSpec::validate() const {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("MLPSpec needs at least input and output sizes");
  }
  for (int s : layer_sizes) {
    if (s <= 0) throw std::invalid_argument("MLPSpec layer sizes must be positive");
  }
}

ParamVector init_params(const MLPSpec& spec, uint64_t seed) {
  spec.validate();
  ParamVector p(spec.param_count(), 0.0);
  Rng rng(seed);
  std::size_t pos = 0;
  for (int l = 0; l < spec.n_layers(); ++l) {
    const int fan_in = spec.layer_sizes[l];
    const int fan_out = spec.layer_sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int i = 0; i < fan_in * fan_out; ++i) {
      p[pos + i] = rng.uniform(-bound, bound);
    }
    pos += static_cast<std::size_t>(fan_in) * fan_out + fan_out;  // biases stay zero
  }
  return p;
}

Vec mlp_forward(const MLPSpec& spec, const ParamVector& params,
                std::size_t offset, const Vec& input, MLPCache* cache) {
  if (static_cast<int>(input.size()) != spec.input_dim()) {
    throw std::invalid_argument("mlp_forward: input size " +
                                std::to_string(input.size()) + " != spec input " +
                                std::to_string(spec.input_dim()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre_acts.clear();
  }
  Vec x = input;
  std::size_t pos = offset;
  const int n_layers = spec.n_layers();
  for (int l = 0; l < n_layers; ++l) {
    const int fan_in = spec.layer_sizes[l];
    const int fan_out = spec.layer_sizes[l + 1];
    Vec z(fan_out);
    for (int o = 0; o < fan_out; ++o) {
      double s = params[pos + static_cast<std::size_t>(fan_in) * fan_out + o];
      const double* w = &params[pos + static_cast<std::size_t>(o) * fan_in];
      for (int i = 0; i < fan_in; ++i) s += w[i] * x[i];
      z[o] = s;
    }
    if (cache) {
      cache->inputs.push_back(std::move(x));
      cache->pre_acts.push_back(z);
    }
    const bool hidden = (l + 1 < n_layers);
    if (hidden) {
      for (auto& v : z) v = activate(spec.activation, v);
    }
    x = std::move(z);
    pos += (static_cast<std::size_t>(fan_in) + 1) * fan_out;
  }
  return x;
}

void mlp_backward(const MLPSpec& spec, const ParamVector& params,
                  std::size_t offset, const MLPCache& cache,
                  const Vec& grad_output, ParamVector& grad_params,
                  Vec* grad_input) {
  const int n_layers = spec.n_layers();
  if (static_cast<int>(cache.inputs.size()) != n_layers ||
      static_cast<int>(cache.pre_acts.size()) != n_layers) {
    throw std::invalid_argument("mlp_backward: cache does not match spec");
  }
  if (static_cast<int>(grad_output.size()) != spec.output_dim()) {
    throw std::invalid_argument("mlp_backward: grad_output size mismatch");
  }

  // Per-layer parameter offsets.
  std::vector<std::size_t> layer_pos(n_layers);
  std::size_t pos = offset;
  for (int l = 0; l < n_layers; ++l) {
    layer_pos[l] = pos;
    pos += (static_cast<std::size_t>(spec.layer_sizes[l]) + 1) * spec.layer_sizes[l + 1];
  }

  Vec g = grad_output;  // dL/d(activation output of current layer)
  for (int l = n_layers - 1; l >= 0; --l) {
    const int fan_in = spec.layer_sizes[l];
    const int fan_out = spec.layer_sizes[l + 1];
    const Vec& x = cache.inputs[l];
    const Vec& z = cache.pre_acts[l];
    if (static_cast<int>(x.size()) != fan_in || static_cast<int>(z.size()) != fan_out) {
      throw std::invalid_argument("mlp_backward: stale cache");
    }
    Vec dz(fan_out);
    const bool hidden = (l + 1 < n_layers);
    for (int o = 0; o < fan_out; ++o) {
      dz[o] = hidden ? g[o] * activate_grad(spec.activation, z[o]) : g[o];
    }
    const std::size_t lp = layer_pos[l];
    for (int o = 0; o < fan_out; ++o) {
      double* gw = &grad_params[lp + static_cast<std::size_t>(o) * fan_in];
      for (int i = 0; i < fan_in; ++i) gw[i] += dz[o] * x[i];
      grad_params[lp + static_cast<std::size_t>(fan_in) * fan_out + o] += dz[o];
    }
    if (l > 0 || grad_input) {
      Vec gx(fan_in, 0.0);
      for (int o = 0; o < fan_out; ++o) {
        const double* w = &params[lp + static_cast<std::size_t>(o) * fan_in];
        for (int i = 0; i < fan_in; ++i) gx[i] += w[i] * dz[o];
      }
      if (l == 0 && grad_input) {
        *grad_input = std::move(gx);
        return;
      }
      g = std::move(gx);
    }
  }
}

ParamVector finite_diff_grad(
    const std::function<double(const ParamVector&)>& loss_fn,
    const ParamVector& params, double eps) {
  ParamVector grad(params.size());
  ParamVector p = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + eps;
    const double f_plus = loss_fn(p);
    p[i] = orig - eps;
    const double f_minus = loss_fn(p);
    p[i] = orig;
    if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
      throw NumericError("finite_diff_grad: non-finite loss evaluation");
    }
    grad[i] = (f_plus - f_minus) / (2.0 * eps);
  }
  return grad;
}

}  // namespace flsim
