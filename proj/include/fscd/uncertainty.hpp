#pragma once

#include <cstdint>
#include <vector>

#include "fscd/model.hpp"
#include "fscd/raster.hpp"
#include "fscd/tensor.hpp"

namespace fscd {

struct McConfig {
  int samples = 20;
  uint64_t base_seed = 0;
};

// Per-pixel predictive decomposition, in bits (binary entropy, so every map
// lies in [0,1]): total = H(mean prob), aleatoric = mean of per-sample
// entropies, epistemic = total - aleatoric (mutual information), clamped at 0.
struct UncertaintyMaps {
  int h = 0;
  int w = 0;
  RasterD mean_prob;
  RasterD total;
  RasterD aleatoric;
  RasterD epistemic;
};

// H(p) = -p log2 p - (1-p) log2(1-p), with 0 log2 0 = 0. Rejects p outside
// [0,1].
double binary_entropy(double p);

// T stochastic forward passes in McSample mode; sample i draws from
// RngStream(base_seed, stream_id = i). Results are ordered by i regardless of
// how many workers execute them.
std::vector<RasterF> mc_sample(const Model<float>& model,
                               const Tensor<float>& t1,
                               const Tensor<float>& t2, const McConfig& cfg,
                               int workers = 1);

// Decompose a stack of probability maps. Pixels where every sample agrees
// bitwise get an exact zero epistemic entry.
UncertaintyMaps decompose(const std::vector<RasterF>& samples);

}  // namespace fscd
