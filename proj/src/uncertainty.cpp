#include "fscd/uncertainty.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace fscd {

double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("binary_entropy: p must lie in [0,1], got " +
                                std::to_string(p));
  if (p == 0.0 || p == 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

std::vector<RasterF> mc_sample(const Model<float>& model,
                               const Tensor<float>& t1,
                               const Tensor<float>& t2, const McConfig& cfg,
                               int workers) {
  if (cfg.samples < 1)
    throw std::invalid_argument("mc_sample: samples must be >= 1, got " +
                                std::to_string(cfg.samples));
  const int h = int(t1.dim(2)), w = int(t1.dim(3));
  std::vector<RasterF> maps(size_t(cfg.samples), RasterF(h, w));

  auto run_one = [&](int i) {
    Tape<float> tape;
    tape.set_recording(false);
    Tensor<float> p = forward(tape, model, t1, t2, ForwardMode::McSample,
                              RngStream(cfg.base_seed, uint64_t(i)));
    std::copy(p.values().begin(), p.values().end(), maps[size_t(i)].v.begin());
  };

  workers = std::max(1, workers);
  if (workers == 1) {
    for (int i = 0; i < cfg.samples; ++i) run_one(i);
  } else {
    // The model is read-only here; each worker owns its tape and stream, and
    // outputs land in index order whatever the completion order.
    std::vector<std::thread> pool;
    std::atomic_int next{0};
    for (int t = 0; t < std::min(workers, cfg.samples); ++t)
      pool.emplace_back([&]() {
        for (int i = next.fetch_add(1); i < cfg.samples; i = next.fetch_add(1))
          run_one(i);
      });
    for (auto& t : pool) t.join();
  }
  return maps;
}

UncertaintyMaps decompose(const std::vector<RasterF>& samples) {
  if (samples.empty())
    throw std::invalid_argument("decompose: need at least one sample map");
  const int h = samples[0].h, w = samples[0].w;
  for (const auto& s : samples)
    if (s.h != h || s.w != w)
      throw std::invalid_argument("decompose: sample maps disagree on shape");

  const size_t n = samples[0].size();
  const double inv_t = 1.0 / double(samples.size());
  UncertaintyMaps out;
  out.h = h;
  out.w = w;
  out.mean_prob = RasterD(h, w);
  out.total = RasterD(h, w);
  out.aleatoric = RasterD(h, w);
  out.epistemic = RasterD(h, w);

  for (size_t i = 0; i < n; ++i) {
    const float first = samples[0].v[i];
    bool all_equal = true;
    double sum_p = 0.0, sum_h = 0.0;
    for (const auto& s : samples) {
      const float p = s.v[i];
      all_equal = all_equal && (p == first);
      sum_p += double(p);
      sum_h += binary_entropy(double(p));
    }
    if (all_equal) {
      // Agreement means zero disagreement term, exactly; computing the
      // difference in floating point would leave ulp-sized residue.
      const double hp = binary_entropy(double(first));
      out.mean_prob.v[i] = double(first);
      out.total.v[i] = hp;
      out.aleatoric.v[i] = hp;
      out.epistemic.v[i] = 0.0;
      continue;
    }
    const double mean = sum_p * inv_t;
    const double total = binary_entropy(mean);
    const double aleatoric = sum_h * inv_t;
    out.mean_prob.v[i] = mean;
    out.total.v[i] = total;
    out.aleatoric.v[i] = aleatoric;
    out.epistemic.v[i] = std::max(0.0, total - aleatoric);
  }
  return out;
}

}  // namespace fscd
