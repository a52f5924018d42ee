#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fscd/model.hpp"
#include "fscd/tensor.hpp"

namespace fscd {

struct OptimizerConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    // lr = 0 is allowed so training no-ops stay expressible in tests.
    if (lr < 0.0) throw std::invalid_argument("OptimizerConfig.lr must be >= 0");
    if (beta1 < 0.0 || beta1 >= 1.0)
      throw std::invalid_argument("OptimizerConfig.beta1 must lie in [0,1)");
    if (beta2 < 0.0 || beta2 >= 1.0)
      throw std::invalid_argument("OptimizerConfig.beta2 must lie in [0,1)");
    if (epsilon <= 0.0)
      throw std::invalid_argument("OptimizerConfig.epsilon must be > 0");
  }
};

// First/second moment estimates per parameter, in the model's canonical
// parameter order, plus the shared timestep.
template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m, v;
  int64_t t = 0;

  static AdamState zeros_like(const Model<T>& model) {
    AdamState s;
    s.m.reserve(model.params.size());
    s.v.reserve(model.params.size());
    for (const auto& [name, p] : model.params) {
      s.m.emplace_back(p.numel(), T(0));
      s.v.emplace_back(p.numel(), T(0));
    }
    return s;
  }
};

// One bias-corrected update over every model parameter, reading gradients
// from the tensors' grad buffers. The moment arithmetic runs in double even
// when parameters are single precision.
template <typename T>
void adam_step(Model<T>& model, AdamState<T>& state,
               const OptimizerConfig& cfg) {
  cfg.validate();
  if (state.m.size() != model.params.size())
    throw std::invalid_argument("adam_step: state does not match model");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.t));
  for (size_t k = 0; k < model.params.size(); ++k) {
    auto& [name, p] = model.params[k];
    if (!p.requires_grad()) continue;  // frozen parameter: left untouched
    // A parameter can sit outside the recorded graph for a step, e.g. when
    // stochastic depth dropped its residual branch; skip it like optimizers
    // skip absent gradients, leaving its moments to resume on reappearance.
    if (!p.has_grad()) continue;
    auto& pv = p.values();
    const auto& g = p.grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (size_t i = 0; i < pv.size(); ++i) {
      const double gi = double(g[i]);
      const double mi = cfg.beta1 * double(m[i]) + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * double(v[i]) + (1.0 - cfg.beta2) * gi * gi;
      m[i] = T(mi);
      v[i] = T(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      pv[i] = T(double(pv[i]) - cfg.lr * mhat / (std::sqrt(vhat) + cfg.epsilon));
    }
  }
}

}  // namespace fscd
