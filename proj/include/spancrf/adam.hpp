// Adam with bias correction and per-group learning rates: encoder parameters
// step at base_lr, CRF parameters at base_lr * crf_lr_multiplier. L2
// regularization is added to the gradient of weight matrices only.
#pragma once

#include <cmath>
#include <vector>

#include "spancrf/config.hpp"
#include "spancrf/model.hpp"

namespace spancrf {

struct TrainState {
  Model model;
  std::vector<double> moment1;
  std::vector<double> moment2;
  std::int64_t step = 0;
  Rng shuffle_rng;

  explicit TrainState(Model m) : model(std::move(m)) {
    Eigen::Index total = 0;
    for (const ParamRef& ref : model.param_refs()) total += ref.size;
    moment1.assign(static_cast<std::size_t>(total), 0.0);
    moment2.assign(static_cast<std::size_t>(total), 0.0);
  }
};

inline void adam_step(TrainState& state, Gradients& grads, const TrainConfig& config) {
  const std::vector<ParamRef> params = state.model.param_refs();
  const std::vector<ParamRef> grad_refs = grads.param_refs();
  if (params.size() != grad_refs.size()) {
    throw DataError("gradient structure does not match parameters");
  }

  state.step += 1;
  const double bias1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(state.step));

  std::size_t offset = 0;
  for (std::size_t r = 0; r < params.size(); ++r) {
    const ParamRef& p = params[r];
    const ParamRef& g = grad_refs[r];
    if (p.size != g.size) throw DataError("gradient shape mismatch for " + p.name);
    const double lr = config.base_lr *
                      (p.group == ParamGroup::kCrf ? config.crf_lr_multiplier : 1.0);
    for (Eigen::Index i = 0; i < p.size; ++i) {
      double grad = g.data[i];
      if (!std::isfinite(grad)) {
        throw NumericError("non-finite gradient for parameter " + p.name);
      }
      if (p.decay) grad += config.l2_coeff * p.data[i];
      double& m = state.moment1[offset + static_cast<std::size_t>(i)];
      double& v = state.moment2[offset + static_cast<std::size_t>(i)];
      m = config.adam_beta1 * m + (1.0 - config.adam_beta1) * grad;
      v = config.adam_beta2 * v + (1.0 - config.adam_beta2) * grad * grad;
      const double m_hat = m / bias1;
      const double v_hat = v / bias2;
      p.data[i] -= lr * m_hat / (std::sqrt(v_hat) + config.adam_epsilon);
    }
    offset += static_cast<std::size_t>(p.size);
  }
}

// 0.5 * l2_coeff * sum of squares over decayed parameters; the penalty the
// gradient term corresponds to.
inline double l2_penalty(Model& model, double l2_coeff) {
  double acc = 0.0;
  for (const ParamRef& ref : model.param_refs()) {
    if (!ref.decay) continue;
    for (Eigen::Index i = 0; i < ref.size; ++i) acc += ref.data[i] * ref.data[i];
  }
  return 0.5 * l2_coeff * acc;
}

}  // namespace spancrf
