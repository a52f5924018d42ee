#pragma once

#include <string>
#include <vector>

#include "fscd/model.hpp"

namespace fscd {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0;
  double tolerance = 0;
  bool pass() const { return max_rel_err <= tolerance; }
};

// Sub-1k-parameter configuration used for end-to-end gradient verification.
ModelConfig toy_model_config();

// Central-difference verification at 64-bit: every differentiable op
// (tolerance 1e-4) plus one full toy model in McSample mode (1e-3).
std::vector<GradCheckEntry> run_gradcheck_suite();

}  // namespace fscd
