#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "fscd/errors.hpp"
#include "fscd/ops.hpp"
#include "fscd/tensor.hpp"

namespace fscd {

// Central-difference verification oracle. `f` rebuilds the computation on the
// tape it is given and returns a scalar; it must be deterministic (fix the
// rng stream it uses). Runs in double regardless of the training precision:
// finite-difference noise swamps single-precision tolerances.
//
// Returns max over all elements of all inputs of
//   |analytic - central_difference| / max(|analytic|, |cd|, 1e-8).
inline double grad_check(const std::function<Tensor<double>(Tape<double>&)>& f,
                         const std::vector<Tensor<double>>& inputs,
                         double eps = 1e-5) {
  if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be > 0");

  auto eval = [&]() {
    Tape<double> t;
    t.set_recording(false);
    Tensor<double> loss = f(t);
    if (loss.numel() != 1)
      throw std::invalid_argument("grad_check: f must return a scalar");
    return loss.item();
  };

  const double base = eval();
  if (eval() != base)
    throw std::invalid_argument(
        "grad_check: f is not deterministic under a fixed seed");

  // Analytic gradients.
  std::vector<std::vector<double>> analytic;
  {
    Tape<double> tape;
    for (const auto& in : inputs)
      if (!in.requires_grad())
        throw std::invalid_argument(
            "grad_check: every input must have requires_grad set");
    Tensor<double> loss = f(tape);
    tape.backward(loss);
    for (const auto& in : inputs) {
      if (!in.has_grad())
        throw std::invalid_argument(
            "grad_check: an input did not receive a gradient; is it used by f?");
      analytic.push_back(in.grad());
    }
  }

  double max_rel = 0.0;
  for (size_t k = 0; k < inputs.size(); ++k) {
    auto& vals = const_cast<Tensor<double>&>(inputs[k]).values();
    for (size_t i = 0; i < vals.size(); ++i) {
      const double keep = vals[i];
      vals[i] = keep + eps;
      const double lp = eval();
      vals[i] = keep - eps;
      const double lm = eval();
      vals[i] = keep;
      const double cd = (lp - lm) / (2.0 * eps);
      const double a = analytic[k][i];
      const double rel =
          std::abs(a - cd) / std::max({std::abs(a), std::abs(cd), 1e-8});
      if (rel > max_rel) max_rel = rel;
    }
  }
  return max_rel;
}

}  // namespace fscd
