#pragma once

#include "flsim/mlp.hpp"

namespace flsim {

enum class OptimizerKind { Adam, SgdMomentum };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double momentum = 0.9;  // sgd_momentum only
};

struct OptimizerState {
  OptimizerConfig config;
  Vec m;  // first moment (adam) or velocity (sgd_momentum)
  Vec v;  // second moment (adam only)
  long long step = 0;

  static OptimizerState create(const OptimizerConfig& cfg, std::size_t n_params);
};

// Adam with bias correction, or v <- rho v + g; p <- p - lr v.
// Throws NumericError on non-finite gradients.
void optimizer_step(OptimizerState& state, ParamVector& params, const ParamVector& grad);

}  // namespace flsim
