#pragma once

#include <cmath>
#include <cstdint>
#include <functional>

#include "backgen/error.hpp"
#include "backgen/model.hpp"

namespace backgen {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;

  friend bool operator==(const AdamWConfig&, const AdamWConfig&) = default;
};

struct OptimizerState {
  AdamWConfig config;
  std::int64_t step = 0;
  ParamSet first_moment;
  ParamSet second_moment;

  bool initialized() const { return !first_moment.tensors.empty(); }

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

inline OptimizerState make_optimizer(const ModelParams& params, AdamWConfig config = {}) {
  OptimizerState state;
  state.config = config;
  state.first_moment = params.weights.zeros_like();
  state.second_moment = params.weights.zeros_like();
  return state;
}

/// One AdamW step with decoupled weight decay:
///   p <- p - lr * wd * p
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// Tensors rejected by `update` are left untouched, moments included.
inline void apply_gradients(ModelParams& params, const ParamSet& grads, double learning_rate, OptimizerState& state,
                            const std::function<bool(int)>& update = {}) {
  if (!all_finite(grads)) throw Error(ErrorKind::NonFiniteGradient, "gradient contains NaN or Inf");
  if (!state.initialized()) state = make_optimizer(params, state.config);
  const AdamWConfig& cfg = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  for (int id = 0; id < static_cast<int>(params.weights.tensors.size()); ++id) {
    if (update && !update(id)) continue;
    std::vector<double>& p = params.weights[id].data;
    const std::vector<double>& g = grads[id].data;
    std::vector<double>& m = state.first_moment[id].data;
    std::vector<double>& v = state.second_moment[id].data;
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      p[k] -= learning_rate * cfg.weight_decay * p[k];
      p[k] -= learning_rate * (m[k] / bias1) / (std::sqrt(v[k] / bias2) + cfg.epsilon);
    }
  }
}

}  // namespace backgen
