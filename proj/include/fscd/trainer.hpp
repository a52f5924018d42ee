#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fscd/data.hpp"
#include "fscd/model.hpp"
#include "fscd/optim.hpp"
#include "fscd/raster.hpp"

namespace fscd {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;
  uint64_t seed = 0;
  bool shuffle = true;
  bool freeze_encoder = false;  // ablation switch; fine-tuning updates all
                                // parameters by default

  void validate() const;

  // CPU-feasible defaults used for acceptance runs.
  static TrainConfig desk() { return TrainConfig{}; }
  // 250 epochs at batch size 64.
  static TrainConfig paper() {
    TrainConfig c;
    c.epochs = 250;
    c.batch_size = 64;
    return c;
  }
};

// One few-shot task: K support pairs to adapt on, query pairs to predict.
struct Episode {
  std::vector<BitemporalSample> support;
  std::vector<BitemporalSample> query;
  int adapt_epochs = 20;
  double adapt_lr = 1e-4;

  void validate() const;  // query non-empty; adapt_epochs, adapt_lr >= 0
};

// NCHW batch tensors from samples. `epoch` selects t1 or t2.
Tensor<float> images_to_tensor(const std::vector<BitemporalSample>& batch,
                               int epoch);
Tensor<float> masks_to_tensor(const std::vector<BitemporalSample>& batch);

// Full-dataset training of a change-detection model: per-epoch seeded
// shuffle, BCE on sigmoid outputs, one Adam step per batch (the incomplete
// final batch is kept). Returns the per-epoch mean loss. Throws NumericError
// on a non-finite loss.
std::vector<double> train(Model<float>& model,
                          const std::vector<BitemporalSample>& dataset,
                          const TrainConfig& tcfg, const OptimizerConfig& ocfg);

struct PretrainResult {
  std::filesystem::path checkpoint;
  std::vector<double> loss_history;
};

// Trains a single-branch segmentation model (encoder + decoder, no fusion)
// on the building corpus and saves its checkpoint. The encoder weights carry
// the "enc." names that transfer into change-detection models.
PretrainResult pretrain(ModelConfig config, const std::vector<SegSample>& corpus,
                        const TrainConfig& tcfg, const OptimizerConfig& ocfg,
                        const std::filesystem::path& checkpoint_path);

struct FinetuneResult {
  Model<float> model;               // adapted clone; the input is not mutated
  std::vector<RasterD> query_probs; // Eval-mode map per query pair, in order
  double support_loss_before = 0;   // Eval-mode mean BCE; 0 when K = 0
  double support_loss_after = 0;
  std::vector<double> loss_history;
};

// Clones the model, adapts all parameters on the support set for
// adapt_epochs at adapt_lr (skipped when K = 0), then predicts every query
// pair in Eval mode.
FinetuneResult finetune_episode(const Model<float>& model, const Episode& ep,
                                const OptimizerConfig& ocfg,
                                uint64_t seed = 0);

// One episode per query sample; each draws `shots` distinct support pairs
// from the pool with a per-episode stream derived from seed.
std::vector<Episode> make_episodes(
    const std::vector<BitemporalSample>& support_pool,
    const std::vector<BitemporalSample>& queries, int shots, int adapt_epochs,
    double adapt_lr, uint64_t seed);

// Eval-mode mean BCE of a change model over a sample set.
double eval_loss(const Model<float>& model,
                 const std::vector<BitemporalSample>& samples);

// Single Eval-mode forward; probability map as a double raster.
RasterD predict_eval(const Model<float>& model, const BitemporalSample& sample);

// "epoch,loss" rows, 9 significant digits, epochs numbered from 1.
void write_loss_csv(const std::vector<double>& history,
                    const std::filesystem::path& path);

}  // namespace fscd
