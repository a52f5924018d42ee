#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fscd/ops.hpp"
#include "fscd/rng.hpp"
#include "fscd/tensor.hpp"

namespace fscd {

// How the two epochs' information is combined, after the rows of the survey
// table this follows: input concatenation (FC-EF), per-level feature
// concatenation (FC-Siam-conc), or per-level absolute feature difference
// (FC-Siam-diff).
enum class Fusion { EarlyFusion, SiamConcat, SiamDiff };

// A change model consumes a bi-temporal pair; a segmentation model is the
// single-branch variant used for building-mask pretraining. The two kinds
// share encoder layer names (so pretrained encoders transfer) but keep
// decoder/head names distinct.
enum class ModelKind { ChangeDetection, Segmentation };

inline const char* fusion_name(Fusion f) {
  switch (f) {
    case Fusion::EarlyFusion: return "early_fusion";
    case Fusion::SiamConcat: return "siam_concat";
    default: return "siam_diff";
  }
}

struct ModelConfig {
  int input_channels = 3;
  std::vector<int> encoder_channels = {16, 32, 64};
  int blocks_per_stage = 2;
  Fusion fusion = Fusion::SiamDiff;
  double unit_dropout_rate = 0.5;
  double depth_survival_p = 0.8;
  int decoder_stages = 3;  // must mirror the encoder depth
  int tile_size = 64;
  ModelKind kind = ModelKind::ChangeDetection;

  bool operator==(const ModelConfig&) const = default;

  int stages() const { return static_cast<int>(encoder_channels.size()); }

  void validate() const {
    if (input_channels < 1)
      throw std::invalid_argument("ModelConfig.input_channels must be >= 1");
    if (encoder_channels.empty())
      throw std::invalid_argument("ModelConfig.encoder_channels must be non-empty");
    for (int c : encoder_channels)
      if (c < 1)
        throw std::invalid_argument(
            "ModelConfig.encoder_channels entries must be positive");
    if (blocks_per_stage < 0)
      throw std::invalid_argument("ModelConfig.blocks_per_stage must be >= 0");
    if (unit_dropout_rate < 0.0 || unit_dropout_rate >= 1.0)
      throw std::invalid_argument(
          "ModelConfig.unit_dropout_rate must lie in [0,1)");
    if (depth_survival_p <= 0.0 || depth_survival_p > 1.0)
      throw std::invalid_argument(
          "ModelConfig.depth_survival_p must lie in (0,1]");
    if (decoder_stages != stages())
      throw std::invalid_argument(
          "ModelConfig.decoder_stages must mirror the encoder (" +
          std::to_string(stages()) + " stages)");
    // Every stage halves the resolution, so the tile must survive `stages`
    // exact halvings for the decoder to rebuild it.
    const int factor = 1 << stages();
    if (tile_size < factor || tile_size % factor != 0)
      throw std::invalid_argument("ModelConfig.tile_size must be divisible by " +
                                  std::to_string(factor));
  }
};

struct LayerSpec {
  std::string name;
  Shape shape;
};

namespace detail {

// Channels entering the first convolution. Early fusion stacks both epochs
// on the input, so its encoder sees twice the channels.
inline int stem_channels(const ModelConfig& cfg) {
  return (cfg.kind == ModelKind::ChangeDetection &&
          cfg.fusion == Fusion::EarlyFusion)
             ? 2 * cfg.input_channels
             : cfg.input_channels;
}

// Width multiplier of the fused skip features the decoder consumes.
inline int fused_width(const ModelConfig& cfg) {
  return (cfg.kind == ModelKind::ChangeDetection &&
          cfg.fusion == Fusion::SiamConcat)
             ? 2
             : 1;
}

struct DecoderStagePlan {
  int stage;  // pyramid level this stage lifts out of
  int in_channels;
  int out_channels;
};

inline std::vector<DecoderStagePlan> decoder_plan(const ModelConfig& cfg) {
  const auto& ch = cfg.encoder_channels;
  const int s = cfg.stages();
  const int mu = fused_width(cfg);
  std::vector<DecoderStagePlan> plan;
  int cur = mu * ch[s - 1];
  for (int k = s - 1; k >= 0; --k) {
    DecoderStagePlan p;
    p.stage = k;
    p.in_channels = cur + (k >= 1 ? mu * ch[k - 1] : 0);
    p.out_channels = ch[k >= 1 ? k - 1 : 0];
    plan.push_back(p);
    cur = p.out_channels;
  }
  return plan;
}

inline const char* task_prefix(const ModelConfig& cfg) {
  return cfg.kind == ModelKind::ChangeDetection ? "cd" : "seg";
}

}  // namespace detail

// The ordered layer-name/shape table. A pure function of the config; it fixes
// checkpoint payload order and defines which names transfer between models.
// Downsampling convs are 4x4 stride 2, everything else 3x3 stride 1 pad 1,
// the head 1x1.
inline std::vector<LayerSpec> canonical_layers(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<LayerSpec> layers;
  auto push = [&](const std::string& name, Shape shape) {
    layers.push_back({name, std::move(shape)});
  };
  int prev = detail::stem_channels(cfg);
  for (int s = 0; s < cfg.stages(); ++s) {
    const int c = cfg.encoder_channels[s];
    const std::string stage = "enc.s" + std::to_string(s);
    push(stage + ".down.w", {c, prev, 4, 4});
    push(stage + ".down.b", {c});
    for (int b = 0; b < cfg.blocks_per_stage; ++b) {
      const std::string blk = stage + ".b" + std::to_string(b);
      push(blk + ".conv1.w", {c, c, 3, 3});
      push(blk + ".conv1.b", {c});
      push(blk + ".conv2.w", {c, c, 3, 3});
      push(blk + ".conv2.b", {c});
    }
    prev = c;
  }
  const std::string task = detail::task_prefix(cfg);
  for (const auto& d : detail::decoder_plan(cfg)) {
    const std::string name = task + ".dec.s" + std::to_string(d.stage);
    push(name + ".conv.w", {d.out_channels, d.in_channels, 3, 3});
    push(name + ".conv.b", {d.out_channels});
  }
  const int c0 = cfg.encoder_channels[0];
  push(task + ".head.conv.w", {1, c0, 1, 1});
  push(task + ".head.conv.b", {1});
  return layers;
}

template <typename T>
struct Model {
  ModelConfig config;
  std::vector<std::pair<std::string, Tensor<T>>> params;  // canonical order

  Tensor<T>& param(const std::string& name) {
    for (auto& [n, t] : params)
      if (n == name) return t;
    throw std::invalid_argument("model: no parameter named '" + name + "'");
  }
  const Tensor<T>& param(const std::string& name) const {
    return const_cast<Model*>(this)->param(name);
  }

  int64_t parameter_count() const {
    int64_t n = 0;
    for (const auto& [name, t] : params) n += t.numel();
    return n;
  }

  Model clone() const {
    Model m;
    m.config = config;
    m.params.reserve(params.size());
    for (const auto& [name, t] : params) m.params.emplace_back(name, t.clone());
    return m;
  }

  void set_requires_grad(bool v) {
    for (auto& [name, t] : params) t.set_requires_grad(v);
  }
};

// He-initialized weights (std = sqrt(2 / fan_in)), zero biases. Each layer
// draws from its own derived stream, so the result is a pure function of
// (config, rng).
template <typename T>
Model<T> build_model(const ModelConfig& cfg, RngStream rng) {
  cfg.validate();
  Model<T> m;
  m.config = cfg;
  const auto layers = canonical_layers(cfg);
  for (size_t i = 0; i < layers.size(); ++i) {
    const auto& spec = layers[i];
    Tensor<T> t = Tensor<T>::zeros(spec.shape, /*requires_grad=*/true);
    if (spec.shape.size() == 4) {
      const double fan_in =
          double(spec.shape[1]) * double(spec.shape[2]) * double(spec.shape[3]);
      const double stddev = std::sqrt(2.0 / fan_in);
      RngStream layer_rng = rng.split(i);
      for (auto& v : t.values()) v = T(stddev * layer_rng.next_normal());
    }
    m.params.emplace_back(spec.name, t);
  }
  return m;
}

template <typename T>
struct ResidualBlockParams {
  Tensor<T> conv1_w, conv1_b, conv2_w, conv2_b;
};

// conv-relu-conv branch with depth dropout. Train: one Bernoulli draw per
// block per forward; the branch is skipped entirely on a drop, so the output
// is bit-identical to x. Eval/McSample: deterministic expectation scaling,
// x + survival_p * branch(x).
template <typename T>
Tensor<T> residual_block(Tape<T>& tape, const Tensor<T>& x,
                         const ResidualBlockParams<T>& p, double survival_p,
                         ForwardMode mode, RngStream& rng) {
  if (survival_p <= 0.0 || survival_p > 1.0)
    throw std::invalid_argument("residual_block: survival_p must lie in (0,1]");
  const int64_t c = x.dim(1);
  if (p.conv1_w.dim(0) != c || p.conv1_w.dim(1) != c || p.conv2_w.dim(0) != c ||
      p.conv2_w.dim(1) != c)
    throw std::invalid_argument(
        "residual_block: block parameters do not match " + std::to_string(c) +
        " channels");
  if (mode == ForwardMode::Train && rng.next_double() >= survival_p)
    return x;
  Tensor<T> h = relu(tape, conv2d(tape, x, p.conv1_w, p.conv1_b, 1, 1));
  Tensor<T> branch = conv2d(tape, h, p.conv2_w, p.conv2_b, 1, 1);
  if (mode == ForwardMode::Train) return add(tape, x, branch);
  return add(tape, x, scale(tape, branch, T(survival_p)));
}

// Combine per-epoch features. Early fusion happens at the input, never here.
template <typename T>
Tensor<T> fuse(Tape<T>& tape, const Tensor<T>& f1, const Tensor<T>& f2,
               Fusion strategy) {
  switch (strategy) {
    case Fusion::SiamConcat: return concat_channels(tape, f1, f2);
    case Fusion::SiamDiff: return sub_abs(tape, f1, f2);
    default:
      throw std::invalid_argument(
          "fuse: early fusion has no feature-level fusion step");
  }
}

namespace detail {

// rng labels for the stochastic sites inside one forward pass. Both siamese
// branches derive the same per-block stream, so a depth decision is one draw
// per block per forward, shared by the tied encoders.
constexpr uint64_t kDepthSite = 1;
constexpr uint64_t kDropoutSite = 2;

template <typename T>
ResidualBlockParams<T> block_params(const Model<T>& m, int stage, int block) {
  const std::string blk =
      "enc.s" + std::to_string(stage) + ".b" + std::to_string(block);
  return {m.param(blk + ".conv1.w"), m.param(blk + ".conv1.b"),
          m.param(blk + ".conv2.w"), m.param(blk + ".conv2.b")};
}

// Run the (shared) encoder over one input, returning the per-stage pyramid.
template <typename T>
std::vector<Tensor<T>> encode(Tape<T>& tape, const Model<T>& m,
                              const Tensor<T>& x, ForwardMode mode,
                              const RngStream& fwd) {
  const auto& cfg = m.config;
  std::vector<Tensor<T>> feats;
  Tensor<T> d = x;
  for (int s = 0; s < cfg.stages(); ++s) {
    const std::string stage = "enc.s" + std::to_string(s);
    d = relu(tape, conv2d(tape, d, m.param(stage + ".down.w"),
                          m.param(stage + ".down.b"), 2, 1));
    for (int b = 0; b < cfg.blocks_per_stage; ++b) {
      RngStream site = fwd.split(kDepthSite)
                           .split(uint64_t(s) * 1000 + uint64_t(b));
      d = residual_block(tape, d, block_params(m, s, b), cfg.depth_survival_p,
                         mode, site);
    }
    feats.push_back(d);
  }
  return feats;
}

// Decoder shared by both model kinds: nearest-2x lifts with skip fusion at
// every pyramid level, unit dropout after each stage, 1x1 head + sigmoid.
template <typename T>
Tensor<T> decode(Tape<T>& tape, const Model<T>& m,
                 const std::vector<Tensor<T>>& skips, ForwardMode mode,
                 const RngStream& fwd) {
  const auto& cfg = m.config;
  const std::string task = task_prefix(cfg);
  Tensor<T> d = skips.back();
  for (const auto& stage : decoder_plan(cfg)) {
    d = upsample_nearest2x(tape, d);
    if (stage.stage >= 1) d = concat_channels(tape, d, skips[stage.stage - 1]);
    const std::string name = task + ".dec.s" + std::to_string(stage.stage);
    d = relu(tape, conv2d(tape, d, m.param(name + ".conv.w"),
                          m.param(name + ".conv.b"), 1, 1));
    RngStream site = fwd.split(kDropoutSite).split(uint64_t(stage.stage));
    d = dropout(tape, d, cfg.unit_dropout_rate, site, mode);
  }
  Tensor<T> logits = conv2d(tape, d, m.param(task + ".head.conv.w"),
                            m.param(task + ".head.conv.b"), 1, 0);
  return sigmoid(tape, logits);
}

template <typename T>
void require_input(const Model<T>& m, const Tensor<T>& x, const char* what) {
  if (x.shape().size() != 4 || x.dim(1) != m.config.input_channels ||
      x.dim(2) != m.config.tile_size || x.dim(3) != m.config.tile_size)
    throw std::invalid_argument(
        std::string(what) + ": expected N x " +
        std::to_string(m.config.input_channels) + " x " +
        std::to_string(m.config.tile_size) + " x " +
        std::to_string(m.config.tile_size) + ", got " + shape_str(x.shape()));
}

}  // namespace detail

// Bi-temporal forward pass: probability map N x 1 x H x W, all values in
// (0,1). Eval mode is a pure function of (model, inputs).
template <typename T>
Tensor<T> forward(Tape<T>& tape, const Model<T>& m, const Tensor<T>& t1,
                  const Tensor<T>& t2, ForwardMode mode, RngStream rng) {
  if (m.config.kind != ModelKind::ChangeDetection)
    throw std::invalid_argument("forward: model is not a change-detection model");
  detail::require_input(m, t1, "forward");
  if (t1.shape() != t2.shape())
    throw std::invalid_argument("forward: t1 shape " + shape_str(t1.shape()) +
                                " does not match t2 shape " +
                                shape_str(t2.shape()));
  std::vector<Tensor<T>> fused;
  if (m.config.fusion == Fusion::EarlyFusion) {
    fused = detail::encode(tape, m, concat_channels(tape, t1, t2), mode, rng);
  } else {
    auto f1 = detail::encode(tape, m, t1, mode, rng);
    auto f2 = detail::encode(tape, m, t2, mode, rng);
    fused.reserve(f1.size());
    for (size_t s = 0; s < f1.size(); ++s)
      fused.push_back(fuse(tape, f1[s], f2[s], m.config.fusion));
  }
  return detail::decode(tape, m, fused, mode, rng);
}

// Single-image building segmentation forward (the pretraining task).
template <typename T>
Tensor<T> forward_segmentation(Tape<T>& tape, const Model<T>& m,
                               const Tensor<T>& image, ForwardMode mode,
                               RngStream rng) {
  if (m.config.kind != ModelKind::Segmentation)
    throw std::invalid_argument(
        "forward_segmentation: model is not a segmentation model");
  detail::require_input(m, image, "forward_segmentation");
  auto feats = detail::encode(tape, m, image, mode, rng);
  return detail::decode(tape, m, feats, mode, rng);
}

// Per-stage encoder features of one input, for tying/perturbation checks and
// transfer diagnostics.
template <typename T>
std::vector<Tensor<T>> encode_features(Tape<T>& tape, const Model<T>& m,
                                       const Tensor<T>& x, ForwardMode mode,
                                       RngStream rng) {
  return detail::encode(tape, m, x, mode, rng);
}

}  // namespace fscd
