#include "flsim/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include "flsim/errors.hpp"

namespace flsim {

OptimizerState OptimizerState::create(const OptimizerConfig& cfg, std::size_t n_params) {
  OptimizerState s;
  s.config = cfg;
  s.m.assign(n_params, 0.0);
  if (cfg.kind == OptimizerKind::Adam) s.v.assign(n_params, 0.0);
  return s;
}

void optimizer_step(OptimizerState& state, ParamVector& params, const ParamVector& grad) {
  if (params.size() != state.m.size() || grad.size() != params.size()) {
    throw std::invalid_argument("optimizer_step: size mismatch");
  }
  if (!all_finite(grad)) throw NumericError("optimizer_step: non-finite gradient");

  const OptimizerConfig& c = state.config;
  if (c.kind == OptimizerKind::Adam) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * grad[i];
      state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
      const double m_hat = state.m[i] / bc1;
      const double v_hat = state.v[i] / bc2;
      params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  } else {
    state.step += 1;
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i] = c.momentum * state.m[i] + grad[i];
      params[i] -= c.learning_rate * state.m[i];
    }
  }
}

}  // namespace flsim
