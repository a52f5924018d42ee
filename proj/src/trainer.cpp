#include "fscd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <stdexcept>

#include "fscd/checkpoint.hpp"
#include "fscd/errors.hpp"
#include "fscd/ops.hpp"

namespace fscd {

namespace {

// Stream labels under the training seed.
constexpr uint64_t kInit = 21;
constexpr uint64_t kShuffle = 22;
constexpr uint64_t kForward = 23;
constexpr uint64_t kEpisodeDraw = 24;

void fisher_yates(std::vector<size_t>& idx, RngStream s) {
  for (size_t j = 0; j + 1 < idx.size(); ++j)
    std::swap(idx[j], idx[j + size_t(s.next_below(uint64_t(idx.size() - j)))]);
}

// Shared epoch/batch loop. batch_loss builds the batch tensors on the tape
// and returns the scalar loss for the given sample indices.
std::vector<double> run_training(
    Model<float>& model, size_t n_samples, const TrainConfig& tcfg,
    const OptimizerConfig& ocfg,
    const std::function<Tensor<float>(Tape<float>&, const std::vector<size_t>&,
                                      RngStream)>& batch_loss) {
  tcfg.validate();
  ocfg.validate();
  if (n_samples == 0) throw std::invalid_argument("train: dataset is empty");

  const bool frozen = tcfg.freeze_encoder;
  if (frozen)
    for (auto& [name, p] : model.params)
      if (name.rfind("enc.", 0) == 0) p.set_requires_grad(false);

  AdamState<float> state = AdamState<float>::zeros_like(model);
  std::vector<double> history;
  history.reserve(size_t(tcfg.epochs));
  std::vector<size_t> order(n_samples);
  std::iota(order.begin(), order.end(), size_t(0));

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    if (tcfg.shuffle)
      fisher_yates(order,
                   RngStream::derive(tcfg.seed, {kShuffle, uint64_t(epoch)}));
    double loss_sum = 0.0;
    uint64_t batch_index = 0;
    for (size_t start = 0; start < n_samples;
         start += size_t(tcfg.batch_size), ++batch_index) {
      const size_t stop = std::min(n_samples, start + size_t(tcfg.batch_size));
      const std::vector<size_t> batch(order.begin() + long(start),
                                      order.begin() + long(stop));
      Tape<float> tape;
      const RngStream fwd = RngStream::derive(
          tcfg.seed, {kForward, uint64_t(epoch), batch_index});
      Tensor<float> loss = batch_loss(tape, batch, fwd);
      const double lv = double(loss.item());
      if (!std::isfinite(lv))
        throw NumericError("non-finite training loss at epoch " +
                           std::to_string(epoch + 1) + ", batch " +
                           std::to_string(batch_index + 1));
      backward(loss, tape);
      adam_step(model, state, ocfg);
      loss_sum += lv * double(stop - start);
    }
    history.push_back(loss_sum / double(n_samples));
  }

  if (frozen)
    for (auto& [name, p] : model.params) p.set_requires_grad(true);
  return history;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
}

void Episode::validate() const {
  if (query.empty()) throw std::invalid_argument("episode query set is empty");
  if (adapt_epochs < 0)
    throw std::invalid_argument("adapt_epochs must be >= 0");
  if (!(adapt_lr >= 0.0)) throw std::invalid_argument("adapt_lr must be >= 0");
}

Tensor<float> images_to_tensor(const std::vector<BitemporalSample>& batch,
                               int epoch) {
  if (batch.empty()) throw std::invalid_argument("images_to_tensor: empty batch");
  const ImageF& first = epoch == 1 ? batch.front().t1 : batch.front().t2;
  const int h = first.h, w = first.w, c = first.c;
  Tensor<float> x =
      Tensor<float>::zeros({int64_t(batch.size()), c, h, w});
  auto& v = x.values();
  size_t pos = 0;
  for (const auto& s : batch) {
    const ImageF& img = epoch == 1 ? s.t1 : s.t2;
    if (img.h != h || img.w != w || img.c != c)
      throw std::invalid_argument("images_to_tensor: sample '" + s.id +
                                  "' has a different shape than the batch");
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) v[pos++] = img.at(i, j, ch);
  }
  return x;
}

Tensor<float> masks_to_tensor(const std::vector<BitemporalSample>& batch) {
  if (batch.empty()) throw std::invalid_argument("masks_to_tensor: empty batch");
  const int h = batch.front().mask.h, w = batch.front().mask.w;
  Tensor<float> t = Tensor<float>::zeros({int64_t(batch.size()), 1, h, w});
  auto& v = t.values();
  size_t pos = 0;
  for (const auto& s : batch) {
    if (s.mask.h != h || s.mask.w != w)
      throw std::invalid_argument("masks_to_tensor: sample '" + s.id +
                                  "' has a different shape than the batch");
    for (const uint8_t m : s.mask.v) v[pos++] = m ? 1.f : 0.f;
  }
  return t;
}

std::vector<double> train(Model<float>& model,
                          const std::vector<BitemporalSample>& dataset,
                          const TrainConfig& tcfg,
                          const OptimizerConfig& ocfg) {
  if (model.config.kind != ModelKind::ChangeDetection)
    throw std::invalid_argument("train: expected a change-detection model");
  return run_training(
      model, dataset.size(), tcfg, ocfg,
      [&](Tape<float>& tape, const std::vector<size_t>& idx, RngStream fwd) {
        std::vector<BitemporalSample> batch;
        batch.reserve(idx.size());
        for (size_t i : idx) batch.push_back(dataset[i]);
        const Tensor<float> x1 = images_to_tensor(batch, 1);
        const Tensor<float> x2 = images_to_tensor(batch, 2);
        const Tensor<float> target = masks_to_tensor(batch);
        const Tensor<float> prob =
            forward(tape, model, x1, x2, ForwardMode::Train, fwd);
        return bce_loss(tape, prob, target);
      });
}

PretrainResult pretrain(ModelConfig config,
                        const std::vector<SegSample>& corpus,
                        const TrainConfig& tcfg, const OptimizerConfig& ocfg,
                        const std::filesystem::path& checkpoint_path) {
  if (corpus.empty())
    throw std::invalid_argument("pretrain: corpus is empty");
  config.kind = ModelKind::Segmentation;
  config.validate();
  Model<float> model =
      build_model<float>(config, RngStream::derive(tcfg.seed, {kInit}));

  // Reuse the bi-temporal batch helpers by viewing each scene as (image,
  // image, mask).
  std::vector<BitemporalSample> view;
  view.reserve(corpus.size());
  for (const auto& s : corpus)
    view.push_back(BitemporalSample{s.id, s.image, s.image, s.mask});

  PretrainResult r;
  r.loss_history = run_training(
      model, corpus.size(), tcfg, ocfg,
      [&](Tape<float>& tape, const std::vector<size_t>& idx, RngStream fwd) {
        std::vector<BitemporalSample> batch;
        batch.reserve(idx.size());
        for (size_t i : idx) batch.push_back(view[i]);
        const Tensor<float> x = images_to_tensor(batch, 1);
        const Tensor<float> target = masks_to_tensor(batch);
        const Tensor<float> prob =
            forward_segmentation(tape, model, x, ForwardMode::Train, fwd);
        return bce_loss(tape, prob, target);
      });
  save_checkpoint(model, checkpoint_path);
  r.checkpoint = checkpoint_path;
  return r;
}

FinetuneResult finetune_episode(const Model<float>& model, const Episode& ep,
                                const OptimizerConfig& ocfg, uint64_t seed) {
  ep.validate();
  FinetuneResult r;
  r.model = model.clone();
  if (!ep.support.empty() && ep.adapt_epochs > 0) {
    r.support_loss_before = eval_loss(r.model, ep.support);
    TrainConfig tc;
    tc.epochs = ep.adapt_epochs;
    tc.batch_size = int(ep.support.size());
    tc.seed = seed;
    OptimizerConfig oc = ocfg;
    oc.lr = ep.adapt_lr;
    r.loss_history = train(r.model, ep.support, tc, oc);
    r.support_loss_after = eval_loss(r.model, ep.support);
  }
  r.query_probs.reserve(ep.query.size());
  for (const auto& q : ep.query) r.query_probs.push_back(predict_eval(r.model, q));
  return r;
}

std::vector<Episode> make_episodes(
    const std::vector<BitemporalSample>& support_pool,
    const std::vector<BitemporalSample>& queries, int shots, int adapt_epochs,
    double adapt_lr, uint64_t seed) {
  if (shots < 0) throw std::invalid_argument("shots must be >= 0");
  if (size_t(shots) > support_pool.size())
    throw std::invalid_argument("shots (" + std::to_string(shots) +
                                ") exceeds support pool size (" +
                                std::to_string(support_pool.size()) + ")");
  std::vector<Episode> episodes;
  episodes.reserve(queries.size());
  for (size_t qi = 0; qi < queries.size(); ++qi) {
    RngStream s = RngStream::derive(seed, {kEpisodeDraw, qi});
    std::vector<size_t> idx(support_pool.size());
    std::iota(idx.begin(), idx.end(), size_t(0));
    for (int j = 0; j < shots; ++j)
      std::swap(idx[size_t(j)],
                idx[size_t(j) + size_t(s.next_below(
                                   uint64_t(idx.size() - size_t(j))))]);
    Episode ep;
    ep.adapt_epochs = adapt_epochs;
    ep.adapt_lr = adapt_lr;
    for (int j = 0; j < shots; ++j) ep.support.push_back(support_pool[idx[size_t(j)]]);
    ep.query.push_back(queries[qi]);
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

double eval_loss(const Model<float>& model,
                 const std::vector<BitemporalSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("eval_loss: empty sample set");
  Tape<float> tape;
  tape.set_recording(false);
  const Tensor<float> x1 = images_to_tensor(samples, 1);
  const Tensor<float> x2 = images_to_tensor(samples, 2);
  const Tensor<float> target = masks_to_tensor(samples);
  const Tensor<float> prob = forward(tape, model, x1, x2, ForwardMode::Eval,
                                     RngStream::derive(0, {0}));
  return double(bce_loss(tape, prob, target).item());
}

RasterD predict_eval(const Model<float>& model,
                     const BitemporalSample& sample) {
  Tape<float> tape;
  tape.set_recording(false);
  const std::vector<BitemporalSample> one{sample};
  const Tensor<float> prob =
      forward(tape, model, images_to_tensor(one, 1), images_to_tensor(one, 2),
              ForwardMode::Eval, RngStream::derive(0, {0}));
  RasterD map(sample.t1.h, sample.t1.w);
  const auto& v = prob.values();
  for (size_t i = 0; i < map.v.size(); ++i) map.v[i] = double(v[i]);
  return map;
}

void write_loss_csv(const std::vector<double>& history,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,loss\n" << std::setprecision(9);
  for (size_t i = 0; i < history.size(); ++i)
    out << (i + 1) << ',' << history[i] << '\n';
}

}  // namespace fscd
