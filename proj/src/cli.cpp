#include "fscd/cli.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "fscd/checkpoint.hpp"
#include "fscd/data.hpp"
#include "fscd/errors.hpp"
#include "fscd/metrics.hpp"
#include "fscd/model.hpp"
#include "fscd/ops.hpp"
#include "fscd/png_io.hpp"
#include "fscd/run_record.hpp"
#include "fscd/trainer.hpp"
#include "fscd/uncertainty.hpp"
#include "fscd/verify.hpp"

namespace fscd::cli {

namespace {

// Stream labels under the CLI seed.
constexpr uint64_t kInit = 31;
constexpr uint64_t kEpisodeSeed = 32;
constexpr uint64_t kMcSeed = 33;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Fusion parse_fusion(const std::string& name) {
  if (name == "early_fusion") return Fusion::EarlyFusion;
  if (name == "siam_concat") return Fusion::SiamConcat;
  if (name == "siam_diff") return Fusion::SiamDiff;
  throw std::invalid_argument(
      "unknown fusion '" + name +
      "' (expected early_fusion, siam_concat, or siam_diff)");
}

// Settings shared by the training-flavored subcommands, with
// flag > preset > built-in default resolution.
struct TrainFlags {
  uint64_t seed = 0;
  std::string preset;
  int epochs = 30;
  int batch = 8;
  int tile = 64;
  double lr = 1e-3;
  double dropout = 0.5;
  double survival = 0.8;
  std::string fusion = "siam_diff";
  int mc_samples = 20;
  int shots = 5;
  int adapt_epochs = 20;
  double adapt_lr = 1e-4;
  int workers = 1;

  CLI::Option* epochs_opt = nullptr;
  CLI::Option* batch_opt = nullptr;
  CLI::Option* tile_opt = nullptr;

  void add_common(CLI::App& sub) {
    sub.add_option("--seed", seed, "base RNG seed");
    sub.add_option("--preset", preset, "desk or paper scale")
        ->check(CLI::IsMember({"desk", "paper"}));
  }
  void add_model(CLI::App& sub) {
    tile_opt = sub.add_option("--tile", tile, "tile size in pixels");
    sub.add_option("--dropout", dropout, "decoder unit-dropout rate");
    sub.add_option("--survival", survival, "residual depth survival prob");
  }
  void add_training(CLI::App& sub) {
    epochs_opt = sub.add_option("--epochs", epochs, "training epochs");
    batch_opt = sub.add_option("--batch", batch, "batch size");
    sub.add_option("--lr", lr, "Adam learning rate");
  }
  void add_workers(CLI::App& sub) {
    sub.add_option("--workers", workers, "worker threads (never affects outputs)")
        ->envname("FSCD_WORKERS");
  }

  // Presets resolve below explicit flags: desk is the built-in default scale,
  // paper restores the 250-epoch / batch-64 / 512-tile recipe.
  void resolve_preset() {
    if (preset != "paper") return;
    if (epochs_opt && !epochs_opt->count()) epochs = 250;
    if (batch_opt && !batch_opt->count()) batch = 64;
    if (tile_opt && !tile_opt->count()) tile = 512;
  }

  ModelConfig model_config() const {
    ModelConfig cfg;
    cfg.tile_size = tile;
    cfg.unit_dropout_rate = dropout;
    cfg.depth_survival_p = survival;
    cfg.fusion = parse_fusion(fusion);
    cfg.validate();
    return cfg;
  }
  TrainConfig train_config() const {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = batch;
    tc.seed = seed;
    return tc;
  }
  OptimizerConfig optim_config() const {
    OptimizerConfig oc;
    oc.lr = lr;
    return oc;
  }
};

std::vector<BitemporalSample> load_split(const DatasetManifest& m, Split s) {
  std::vector<BitemporalSample> out;
  for (const auto& e : m.with_split(s)) out.push_back(load_sample(e, m.base_dir));
  return out;
}

std::vector<BitemporalSample> tile_all(
    const std::vector<BitemporalSample>& samples, int tile_size) {
  std::vector<BitemporalSample> out;
  for (const auto& s : samples) {
    auto tiles = tile(s, tile_size, tile_size);
    out.insert(out.end(), std::make_move_iterator(tiles.begin()),
               std::make_move_iterator(tiles.end()));
  }
  return out;
}

// MC-dropout prediction of one scene: tiled at the model's tile size
// (dimensions must divide exactly), per-tile sampling, stitched back.
UncertaintyMaps predict_scene_mc(const Model<float>& model,
                                 const BitemporalSample& scene, int mc_samples,
                                 uint64_t seed, uint64_t scene_label,
                                 int workers) {
  const int ts = model.config.tile_size;
  if (scene.t1.h % ts != 0 || scene.t1.w % ts != 0)
    throw std::invalid_argument("scene '" + scene.id + "' is " +
                                std::to_string(scene.t1.h) + "x" +
                                std::to_string(scene.t1.w) +
                                ", not divisible by tile size " +
                                std::to_string(ts));
  const auto tiles = tile(scene, ts, ts);
  const int tx = scene.t1.w / ts;
  UncertaintyMaps full;
  full.h = scene.t1.h;
  full.w = scene.t1.w;
  full.mean_prob = RasterD(full.h, full.w);
  full.total = RasterD(full.h, full.w);
  full.aleatoric = RasterD(full.h, full.w);
  full.epistemic = RasterD(full.h, full.w);
  for (size_t idx = 0; idx < tiles.size(); ++idx) {
    const std::vector<BitemporalSample> one{tiles[idx]};
    McConfig mc;
    mc.samples = mc_samples;
    mc.base_seed =
        RngStream::derive(seed, {kMcSeed, scene_label, idx}).next_u64();
    const auto stack = mc_sample(model, images_to_tensor(one, 1),
                                 images_to_tensor(one, 2), mc, workers);
    const UncertaintyMaps u = decompose(stack);
    const int r0 = int(idx) / tx * ts, c0 = int(idx) % tx * ts;
    for (int i = 0; i < ts; ++i)
      for (int j = 0; j < ts; ++j) {
        full.mean_prob.at(r0 + i, c0 + j) = u.mean_prob.at(i, j);
        full.total.at(r0 + i, c0 + j) = u.total.at(i, j);
        full.aleatoric.at(r0 + i, c0 + j) = u.aleatoric.at(i, j);
        full.epistemic.at(r0 + i, c0 + j) = u.epistemic.at(i, j);
      }
  }
  return full;
}

SceneMetrics scene_metrics(const std::string& id, const RasterD& prob,
                           const MaskU8& truth, const RasterD& entropy_map) {
  const ConfusionCounts c = confusion(binarize(prob, 0.5), truth);
  SceneMetrics m;
  m.id = id;
  m.iou = iou(c);
  m.precision = precision(c);
  m.recall = recall(c);
  m.f1 = f1(c);
  m.mean_entropy = mean_entropy(entropy_map);
  return m;
}

RasterD entropy_of(const RasterD& prob) {
  RasterD e(prob.h, prob.w);
  for (size_t i = 0; i < prob.v.size(); ++i) e.v[i] = binary_entropy(prob.v[i]);
  return e;
}

MaskU8 prob_to_levels(const RasterD& prob) {
  MaskU8 p8(prob.h, prob.w);
  for (size_t i = 0; i < prob.v.size(); ++i)
    p8.v[i] = uint8_t(std::lround(255.0 * std::clamp(prob.v[i], 0.0, 1.0)));
  return p8;
}

std::map<std::string, double> aggregate_map(const MetricsReport& rep) {
  return {{"iou", rep.aggregate.iou},
          {"precision", rep.aggregate.precision},
          {"recall", rep.aggregate.recall},
          {"f1", rep.aggregate.f1},
          {"mean_entropy", rep.aggregate.mean_entropy}};
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------
struct SynthOpts {
  std::string out;
  uint64_t seed = 0;
  int workers = 1;  // accepted for pipeline uniformity; synth is sequential
  SynthParams params;
};

void run_synth(const SynthOpts& o) {
  SynthParams p = o.params;
  p.seed = o.seed;
  const DatasetManifest m = synth_dataset(p, o.out);
  RunRecord rec;
  rec.subcommand = "synth";
  rec.seed = o.seed;
  rec.config = {{"out", o.out},
                {"size", std::to_string(p.size)},
                {"buildings-min", std::to_string(p.n_buildings_min)},
                {"buildings-max", std::to_string(p.n_buildings_max)},
                {"change-fraction", fmt_double(p.change_fraction)},
                {"noise-sigma", fmt_double(p.noise_sigma)},
                {"train", std::to_string(p.n_train)},
                {"test", std::to_string(p.n_test)},
                {"pretrain", std::to_string(p.n_pretrain)}};
  rec.artifacts = {"manifest.jsonl"};
  emit_run_record(rec, std::filesystem::path(o.out) / "run_record.json");
  const SplitCounts c = split_report(m);
  std::cout << "wrote " << c.train << " train + " << c.test
            << " test change pairs and " << c.pretrain
            << " pretraining scenes under " << o.out << "\n";
}

void setup_synth(CLI::App& app) {
  auto o = std::make_shared<SynthOpts>();
  CLI::App* sub = app.add_subcommand("synth", "generate a synthetic dataset");
  sub->add_option("--out", o->out, "output directory")->required();
  sub->add_option("--seed", o->seed, "base RNG seed");
  sub->add_option("--size", o->params.size, "scene size in pixels");
  sub->add_option("--buildings-min", o->params.n_buildings_min, "min buildings");
  sub->add_option("--buildings-max", o->params.n_buildings_max, "max buildings");
  sub->add_option("--change-fraction", o->params.change_fraction,
                  "share of buildings changed between epochs");
  sub->add_option("--noise-sigma", o->params.noise_sigma, "pixel noise sigma");
  sub->add_option("--train", o->params.n_train, "train change pairs");
  sub->add_option("--test", o->params.n_test, "test change pairs");
  sub->add_option("--pretrain", o->params.n_pretrain, "pretraining scenes");
  sub->add_option("--workers", o->workers,
                  "worker threads (never affects outputs)")
      ->envname("FSCD_WORKERS");
  sub->callback([o] { run_synth(*o); });
}

// ---------------------------------------------------------------------------
// pretrain
// ---------------------------------------------------------------------------
struct PretrainOpts {
  std::string manifest;
  std::string out;
  TrainFlags f;
};

void run_pretrain(PretrainOpts& o) {
  o.f.resolve_preset();
  const ModelConfig mc = o.f.model_config();  // flag errors before any I/O
  const DatasetManifest m = load_manifest(o.manifest);
  std::vector<SegSample> corpus;
  for (auto& s : tile_all(load_split(m, Split::Pretrain), o.f.tile))
    corpus.push_back(SegSample{s.id, std::move(s.t1), std::move(s.mask)});
  if (corpus.empty())
    throw std::invalid_argument("manifest has no pretrain entries");

  std::filesystem::create_directories(o.out);
  const std::filesystem::path out_dir(o.out);
  const PretrainResult r = pretrain(mc, corpus, o.f.train_config(),
                                    o.f.optim_config(), out_dir / "pretrain.fscd");
  write_loss_csv(r.loss_history, out_dir / "pretrain_loss.csv");

  RunRecord rec;
  rec.subcommand = "pretrain";
  rec.seed = o.f.seed;
  rec.config = {{"manifest", o.manifest},
                {"out", o.out},
                {"epochs", std::to_string(o.f.epochs)},
                {"batch", std::to_string(o.f.batch)},
                {"lr", fmt_double(o.f.lr)},
                {"tile", std::to_string(o.f.tile)},
                {"dropout", fmt_double(o.f.dropout)},
                {"survival", fmt_double(o.f.survival)}};
  rec.losses = r.loss_history;
  rec.metric_aggregates = {{"first_loss", r.loss_history.front()},
                           {"final_loss", r.loss_history.back()}};
  rec.artifacts = {"pretrain.fscd", "pretrain_loss.csv"};
  emit_run_record(rec, out_dir / "run_record.json");
  std::cout << "pretrained on " << corpus.size() << " scenes; loss "
            << r.loss_history.front() << " -> " << r.loss_history.back()
            << "; checkpoint " << r.checkpoint.string() << "\n";
}

void setup_pretrain(CLI::App& app) {
  auto o = std::make_shared<PretrainOpts>();
  CLI::App* sub =
      app.add_subcommand("pretrain", "train the building-segmentation model");
  sub->add_option("--manifest", o->manifest, "dataset manifest")->required();
  sub->add_option("--out", o->out, "output directory")->required();
  o->f.add_common(*sub);
  o->f.add_model(*sub);
  o->f.add_training(*sub);
  o->f.add_workers(*sub);
  sub->callback([o] { run_pretrain(*o); });
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------
struct TrainOpts {
  std::string manifest;
  std::string out;
  std::string init_checkpoint;
  TrainFlags f;
};

void run_train(TrainOpts& o) {
  o.f.resolve_preset();
  const ModelConfig mc = o.f.model_config();  // flag errors before any I/O
  const DatasetManifest m = load_manifest(o.manifest);
  const auto dataset = tile_all(load_split(m, Split::Train), o.f.tile);
  if (dataset.empty())
    throw std::invalid_argument("manifest has no train entries");

  Model<float> model =
      build_model<float>(mc, RngStream::derive(o.f.seed, {kInit}));
  if (!o.init_checkpoint.empty()) {
    const Model<float> src = load_checkpoint(o.init_checkpoint);
    const auto names = transfer_params(src, model);
    std::cout << "transferred " << names.size() << " layers from "
              << o.init_checkpoint << "\n";
  }
  const auto history =
      train(model, dataset, o.f.train_config(), o.f.optim_config());

  std::filesystem::create_directories(o.out);
  const std::filesystem::path out_dir(o.out);
  save_checkpoint(model, out_dir / "model.fscd");
  write_loss_csv(history, out_dir / "train_loss.csv");

  RunRecord rec;
  rec.subcommand = "train";
  rec.seed = o.f.seed;
  rec.config = {{"manifest", o.manifest},
                {"out", o.out},
                {"epochs", std::to_string(o.f.epochs)},
                {"batch", std::to_string(o.f.batch)},
                {"lr", fmt_double(o.f.lr)},
                {"tile", std::to_string(o.f.tile)},
                {"fusion", o.f.fusion},
                {"dropout", fmt_double(o.f.dropout)},
                {"survival", fmt_double(o.f.survival)}};
  if (!o.init_checkpoint.empty()) rec.config["init"] = o.init_checkpoint;
  rec.losses = history;
  rec.metric_aggregates = {{"first_loss", history.front()},
                           {"final_loss", history.back()}};
  rec.artifacts = {"model.fscd", "train_loss.csv"};
  emit_run_record(rec, out_dir / "run_record.json");
  std::cout << "trained on " << dataset.size() << " tiles; loss "
            << history.front() << " -> " << history.back() << "\n";
}

void setup_train(CLI::App& app) {
  auto o = std::make_shared<TrainOpts>();
  CLI::App* sub =
      app.add_subcommand("train", "train a change model on the train split");
  sub->add_option("--manifest", o->manifest, "dataset manifest")->required();
  sub->add_option("--out", o->out, "output directory")->required();
  sub->add_option("--init", o->init_checkpoint,
                  "checkpoint whose matching layers seed the model");
  sub->add_option("--fusion", o->f.fusion,
                  "early_fusion, siam_concat, or siam_diff");
  o->f.add_common(*sub);
  o->f.add_model(*sub);
  o->f.add_training(*sub);
  o->f.add_workers(*sub);
  sub->callback([o] { run_train(*o); });
}

// ---------------------------------------------------------------------------
// finetune
// ---------------------------------------------------------------------------
struct FinetuneOpts {
  std::string manifest;
  std::string out;
  std::string checkpoint;
  int episodes = 0;  // 0 = one per test tile
  TrainFlags f;
};

void run_finetune(FinetuneOpts& o) {
  o.f.resolve_preset();
  const ModelConfig mc = o.f.model_config();  // flag errors before any I/O
  const DatasetManifest m = load_manifest(o.manifest);
  const auto pool = tile_all(load_split(m, Split::Train), o.f.tile);
  auto queries = tile_all(load_split(m, Split::Test), o.f.tile);
  if (queries.empty()) throw std::invalid_argument("manifest has no test entries");
  if (o.episodes > 0 && size_t(o.episodes) < queries.size())
    queries.resize(size_t(o.episodes));

  Model<float> model =
      build_model<float>(mc, RngStream::derive(o.f.seed, {kInit}));
  size_t transferred = 0;
  if (!o.checkpoint.empty()) {
    const Model<float> src = load_checkpoint(o.checkpoint);
    const auto names = transfer_params(src, model);
    transferred = names.size();
    std::cout << "transferred " << transferred << " layers from "
              << o.checkpoint << "\n";
  }

  const auto episodes = make_episodes(pool, queries, o.f.shots,
                                      o.f.adapt_epochs, o.f.adapt_lr, o.f.seed);
  std::filesystem::create_directories(std::filesystem::path(o.out) /
                                      "episodes");
  const std::filesystem::path out_dir(o.out);

  std::vector<SceneMetrics> scenes;
  std::vector<double> mean_losses;
  double before_sum = 0, after_sum = 0;
  for (size_t i = 0; i < episodes.size(); ++i) {
    const uint64_t ep_seed =
        RngStream::derive(o.f.seed, {kEpisodeSeed, i}).next_u64();
    const FinetuneResult r =
        finetune_episode(model, episodes[i], o.f.optim_config(), ep_seed);
    before_sum += r.support_loss_before;
    after_sum += r.support_loss_after;
    if (mean_losses.size() < r.loss_history.size())
      mean_losses.resize(r.loss_history.size(), 0.0);
    for (size_t e = 0; e < r.loss_history.size(); ++e)
      mean_losses[e] += r.loss_history[e] / double(episodes.size());
    for (size_t q = 0; q < episodes[i].query.size(); ++q) {
      const auto& sample = episodes[i].query[q];
      const RasterD& prob = r.query_probs[q];
      scenes.push_back(
          scene_metrics(sample.id, prob, sample.mask, entropy_of(prob)));
      write_png_gray8(out_dir / "episodes" / (sample.id + "_prob.png"),
                      prob_to_levels(prob));
      const MaskU8 pred = binarize(prob, 0.5);
      MaskU8 levels(pred.h, pred.w);
      for (size_t k = 0; k < pred.v.size(); ++k)
        levels.v[k] = pred.v[k] ? 255 : 0;
      write_png_gray8(out_dir / "episodes" / (sample.id + "_change.png"),
                      levels);
    }
  }
  const MetricsReport report = make_report(std::move(scenes));
  write_report_json(report, out_dir / "finetune_report.json");
  write_report_csv(report, out_dir / "finetune_report.csv");

  RunRecord rec;
  rec.subcommand = "finetune";
  rec.seed = o.f.seed;
  rec.config = {{"manifest", o.manifest},
                {"out", o.out},
                {"shots", std::to_string(o.f.shots)},
                {"adapt-epochs", std::to_string(o.f.adapt_epochs)},
                {"adapt-lr", fmt_double(o.f.adapt_lr)},
                {"episodes", std::to_string(o.episodes)},
                {"tile", std::to_string(o.f.tile)},
                {"fusion", o.f.fusion},
                {"dropout", fmt_double(o.f.dropout)},
                {"survival", fmt_double(o.f.survival)}};
  if (!o.checkpoint.empty()) rec.config["checkpoint"] = o.checkpoint;
  rec.losses = mean_losses;
  rec.metric_aggregates = aggregate_map(report);
  rec.metric_aggregates["support_loss_before"] =
      before_sum / double(episodes.size());
  rec.metric_aggregates["support_loss_after"] =
      after_sum / double(episodes.size());
  rec.artifacts = {"finetune_report.json", "finetune_report.csv"};
  emit_run_record(rec, out_dir / "run_record.json");
  std::cout << episodes.size() << " episodes at K=" << o.f.shots
            << "; mean query IoU " << report.aggregate.iou << "\n";
}

void setup_finetune(CLI::App& app) {
  auto o = std::make_shared<FinetuneOpts>();
  CLI::App* sub = app.add_subcommand(
      "finetune", "episodic few-shot adaptation over the test split");
  sub->add_option("--manifest", o->manifest, "dataset manifest")->required();
  sub->add_option("--out", o->out, "output directory")->required();
  sub->add_option("--checkpoint", o->checkpoint,
                  "pretrained checkpoint to transfer from");
  sub->add_option("--episodes", o->episodes,
                  "episode count cap (0 = one per test tile)");
  sub->add_option("--shots", o->f.shots, "support pairs per episode");
  sub->add_option("--adapt-epochs", o->f.adapt_epochs, "adaptation epochs");
  sub->add_option("--adapt-lr", o->f.adapt_lr, "adaptation learning rate");
  sub->add_option("--fusion", o->f.fusion,
                  "early_fusion, siam_concat, or siam_diff");
  o->f.add_common(*sub);
  o->f.add_model(*sub);
  o->f.add_workers(*sub);
  sub->callback([o] { run_finetune(*o); });
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------
struct PredictOpts {
  std::string checkpoint;
  std::string t1;
  std::string t2;
  std::string out;
  int mc_samples = 20;
  uint64_t seed = 0;
  int workers = 1;
};

void run_predict(const PredictOpts& o) {
  const Model<float> model = load_checkpoint(o.checkpoint);
  BitemporalSample pair;
  pair.id = "pair";
  pair.t1 = read_png_rgb8(o.t1);
  pair.t2 = read_png_rgb8(o.t2);
  if (pair.t1.h != pair.t2.h || pair.t1.w != pair.t2.w)
    throw std::invalid_argument("t1 and t2 dimensions differ");
  pair.mask = MaskU8(pair.t1.h, pair.t1.w);
  const UncertaintyMaps u =
      predict_scene_mc(model, pair, o.mc_samples, o.seed, 0, o.workers);
  const MapPaths paths =
      render_maps(u.mean_prob, binarize(u.mean_prob, 0.5), u, o.out);

  RunRecord rec;
  rec.subcommand = "predict";
  rec.seed = o.seed;
  rec.config = {{"checkpoint", o.checkpoint},
                {"t1", o.t1},
                {"t2", o.t2},
                {"out", o.out},
                {"mc-samples", std::to_string(o.mc_samples)}};
  rec.metric_aggregates = {{"mean_total_entropy", mean_entropy(u.total)}};
  for (const auto& p : {paths.change_map, paths.mean_prob, paths.total,
                        paths.aleatoric, paths.epistemic})
    rec.artifacts.push_back(p.filename().string());
  emit_run_record(rec, std::filesystem::path(o.out) / "run_record.json");
  std::cout << "wrote change + uncertainty maps under " << o.out << "\n";
}

void setup_predict(CLI::App& app) {
  auto o = std::make_shared<PredictOpts>();
  CLI::App* sub = app.add_subcommand(
      "predict", "change map + uncertainty maps for one image pair");
  sub->add_option("--checkpoint", o->checkpoint, "change-model checkpoint")
      ->required();
  sub->add_option("--t1", o->t1, "epoch-1 RGB PNG")->required();
  sub->add_option("--t2", o->t2, "epoch-2 RGB PNG")->required();
  sub->add_option("--out", o->out, "output directory")->required();
  sub->add_option("--mc-samples", o->mc_samples, "MC-dropout samples");
  sub->add_option("--seed", o->seed, "base RNG seed");
  sub->add_option("--workers", o->workers,
                  "worker threads (never affects outputs)")
      ->envname("FSCD_WORKERS");
  sub->callback([o] { run_predict(*o); });
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------
struct EvaluateOpts {
  std::string checkpoint;
  std::string manifest;
  std::string out;
  int mc_samples = 20;
  uint64_t seed = 0;
  int workers = 1;
  bool save_maps = true;
};

void run_evaluate(const EvaluateOpts& o) {
  const Model<float> model = load_checkpoint(o.checkpoint);
  const DatasetManifest m = load_manifest(o.manifest);
  const auto entries = m.with_split(Split::Test);
  if (entries.empty()) throw std::invalid_argument("manifest has no test entries");

  const std::filesystem::path out_dir(o.out);
  std::filesystem::create_directories(out_dir);
  std::vector<SceneMetrics> scenes;
  for (size_t i = 0; i < entries.size(); ++i) {
    const BitemporalSample scene = load_sample(entries[i], m.base_dir);
    const UncertaintyMaps u =
        predict_scene_mc(model, scene, o.mc_samples, o.seed, i, o.workers);
    scenes.push_back(scene_metrics(scene.id, u.mean_prob, scene.mask, u.total));
    if (o.save_maps)
      render_maps(u.mean_prob, binarize(u.mean_prob, 0.5), u,
                  out_dir / "maps" / scene.id);
  }
  const MetricsReport report = make_report(std::move(scenes));
  write_report_json(report, out_dir / "metrics.json");
  write_report_csv(report, out_dir / "metrics.csv");

  RunRecord rec;
  rec.subcommand = "evaluate";
  rec.seed = o.seed;
  rec.config = {{"checkpoint", o.checkpoint},
                {"manifest", o.manifest},
                {"out", o.out},
                {"mc-samples", std::to_string(o.mc_samples)},
                {"save-maps", o.save_maps ? "true" : "false"}};
  rec.metric_aggregates = aggregate_map(report);
  rec.artifacts = {"metrics.json", "metrics.csv"};
  emit_run_record(rec, out_dir / "run_record.json");
  std::cout << entries.size() << " scenes; mean IoU " << report.aggregate.iou
            << ", mean entropy " << report.aggregate.mean_entropy << "\n";
}

void setup_evaluate(CLI::App& app) {
  auto o = std::make_shared<EvaluateOpts>();
  CLI::App* sub =
      app.add_subcommand("evaluate", "metrics report over the test split");
  sub->add_option("--checkpoint", o->checkpoint, "change-model checkpoint")
      ->required();
  sub->add_option("--manifest", o->manifest, "dataset manifest")->required();
  sub->add_option("--out", o->out, "output directory")->required();
  sub->add_option("--mc-samples", o->mc_samples, "MC-dropout samples");
  sub->add_option("--seed", o->seed, "base RNG seed");
  sub->add_option("--save-maps", o->save_maps, "write per-scene rasters");
  sub->add_option("--workers", o->workers,
                  "worker threads (never affects outputs)")
      ->envname("FSCD_WORKERS");
  sub->callback([o] { run_evaluate(*o); });
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------
void run_gradcheck() {
  const auto table = run_gradcheck_suite();
  size_t failures = 0;
  std::printf("%-24s %14s %10s  %s\n", "op", "max_rel_err", "tolerance",
              "status");
  for (const auto& e : table) {
    std::printf("%-24s %14.3e %10.0e  %s\n", e.name.c_str(), e.max_rel_err,
                e.tolerance, e.pass() ? "ok" : "FAIL");
    if (!e.pass()) ++failures;
  }
  if (failures > 0)
    throw VerificationError(std::to_string(failures) +
                            " gradient check(s) above tolerance");
}

void setup_gradcheck(CLI::App& app) {
  CLI::App* sub =
      app.add_subcommand("gradcheck", "finite-difference verification suite");
  sub->callback([] { run_gradcheck(); });
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------
struct CompareOpts {
  std::string manifest;
  std::string out;
  TrainFlags f;
};

void run_compare(CompareOpts& o) {
  o.f.resolve_preset();
  const ModelConfig base_cfg = o.f.model_config();  // flag errors before any I/O
  const DatasetManifest m = load_manifest(o.manifest);
  const auto dataset = tile_all(load_split(m, Split::Train), o.f.tile);
  if (dataset.empty())
    throw std::invalid_argument("manifest has no train entries");
  const auto test_entries = m.with_split(Split::Test);
  if (test_entries.empty())
    throw std::invalid_argument("manifest has no test entries");

  std::filesystem::create_directories(o.out);
  const std::filesystem::path out_dir(o.out);
  const Fusion variants[] = {Fusion::EarlyFusion, Fusion::SiamConcat,
                             Fusion::SiamDiff};
  std::vector<VariantResult> results;
  std::map<std::string, double> aggregates;
  for (size_t v = 0; v < 3; ++v) {
    ModelConfig cfg = base_cfg;
    cfg.fusion = variants[v];
    const std::string name = fusion_name(cfg.fusion);
    Model<float> model =
        build_model<float>(cfg, RngStream::derive(o.f.seed, {kInit, v}));
    const auto history =
        train(model, dataset, o.f.train_config(), o.f.optim_config());
    write_loss_csv(history, out_dir / (name + "_loss.csv"));

    VariantResult res;
    res.variant = name;
    res.first_loss = history.front();
    res.final_loss = history.back();
    for (size_t i = 0; i < test_entries.size(); ++i) {
      const BitemporalSample scene = load_sample(test_entries[i], m.base_dir);
      const UncertaintyMaps u = predict_scene_mc(
          model, scene, o.f.mc_samples, o.f.seed, v * 1000 + i, o.f.workers);
      res.scenes.push_back(
          scene_metrics(scene.id, u.mean_prob, scene.mask, u.total));
    }
    aggregates[name + ".first_loss"] = res.first_loss;
    aggregates[name + ".final_loss"] = res.final_loss;
    results.push_back(std::move(res));
  }
  const auto rows = compare_variants(results);
  write_comparison_json(rows, out_dir / "comparison.json");
  write_comparison_csv(rows, out_dir / "comparison.csv");
  for (const auto& r : rows)
    aggregates[r.variant + ".iou"] = r.iou;

  RunRecord rec;
  rec.subcommand = "compare";
  rec.seed = o.f.seed;
  rec.config = {{"manifest", o.manifest},
                {"out", o.out},
                {"epochs", std::to_string(o.f.epochs)},
                {"batch", std::to_string(o.f.batch)},
                {"lr", fmt_double(o.f.lr)},
                {"tile", std::to_string(o.f.tile)},
                {"dropout", fmt_double(o.f.dropout)},
                {"survival", fmt_double(o.f.survival)},
                {"mc-samples", std::to_string(o.f.mc_samples)}};
  rec.metric_aggregates = std::move(aggregates);
  rec.artifacts = {"comparison.json", "comparison.csv"};
  emit_run_record(rec, out_dir / "run_record.json");
  for (const auto& r : rows)
    std::cout << r.variant << ": precision " << r.precision << ", iou "
              << r.iou << ", loss " << r.first_loss << " -> " << r.final_loss
              << "\n";
}

void setup_compare(CLI::App& app) {
  auto o = std::make_shared<CompareOpts>();
  CLI::App* sub = app.add_subcommand(
      "compare", "train and report all three fusion variants");
  sub->add_option("--manifest", o->manifest, "dataset manifest")->required();
  sub->add_option("--out", o->out, "output directory")->required();
  sub->add_option("--mc-samples", o->f.mc_samples, "MC-dropout samples");
  o->f.add_common(*sub);
  o->f.add_model(*sub);
  o->f.add_training(*sub);
  o->f.add_workers(*sub);
  sub->callback([o] { run_compare(*o); });
}

}  // namespace

int run(std::vector<std::string> args) {
  CLI::App app{"few-shot bi-temporal building change detection"};
  app.require_subcommand(1);
  setup_synth(app);
  setup_pretrain(app);
  setup_train(app);
  setup_finetune(app);
  setup_predict(app);
  setup_evaluate(app);
  setup_gradcheck(app);
  setup_compare(app);

  try {
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const VerificationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace fscd::cli
