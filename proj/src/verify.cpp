#include "fscd/verify.hpp"

#include <cmath>

#include "fscd/gradcheck.hpp"
#include "fscd/ops.hpp"
#include "fscd/rng.hpp"

namespace fscd {

namespace {

constexpr double kOpTol = 1e-4;
constexpr double kModelTol = 1e-3;

Tensor<double> rand_tensor(Shape shape, RngStream& s, double lo, double hi) {
  std::vector<double> v(size_t(shape_numel(shape)));
  for (auto& x : v) x = lo + (hi - lo) * s.next_double();
  return Tensor<double>::from_values(std::move(shape), std::move(v), true);
}

// Values bounded away from zero, for ops with a kink there.
Tensor<double> rand_signed_tensor(Shape shape, RngStream& s) {
  std::vector<double> v(size_t(shape_numel(shape)));
  for (auto& x : v) {
    const double mag = 0.2 + 0.8 * s.next_double();
    x = s.next_double() < 0.5 ? -mag : mag;
  }
  return Tensor<double>::from_values(std::move(shape), std::move(v), true);
}

Tensor<double> rand_binary_tensor(Shape shape, RngStream& s) {
  std::vector<double> v(size_t(shape_numel(shape)));
  for (auto& x : v) x = s.next_double() < 0.5 ? 0.0 : 1.0;
  return Tensor<double>::from_values(std::move(shape), std::move(v), false);
}

}  // namespace

ModelConfig toy_model_config() {
  ModelConfig cfg;
  cfg.encoder_channels = {2, 4};
  cfg.blocks_per_stage = 1;
  cfg.decoder_stages = 2;
  cfg.tile_size = 16;
  cfg.unit_dropout_rate = 0.3;
  cfg.depth_survival_p = 0.8;
  cfg.fusion = Fusion::SiamDiff;
  return cfg;
}

std::vector<GradCheckEntry> run_gradcheck_suite() {
  std::vector<GradCheckEntry> table;
  uint64_t case_id = 0;
  auto check = [&](const std::string& name, double tol,
                   const std::function<Tensor<double>(Tape<double>&)>& f,
                   const std::vector<Tensor<double>>& inputs) {
    table.push_back({name, grad_check(f, inputs), tol});
  };
  auto stream = [&] { return RngStream::derive(0xF5CD, {++case_id}); };

  {
    RngStream s = stream();
    auto x = rand_tensor({2, 2, 5, 5}, s, -1, 1);
    auto w = rand_tensor({3, 2, 3, 3}, s, -1, 1);
    auto b = rand_tensor({3}, s, -1, 1);
    check("conv2d_3x3_s1", kOpTol,
          [=](Tape<double>& t) { return sum(t, conv2d(t, x, w, b, 1, 1)); },
          {x, w, b});
  }
  {
    RngStream s = stream();
    auto x = rand_tensor({1, 2, 6, 6}, s, -1, 1);
    auto w = rand_tensor({3, 2, 4, 4}, s, -1, 1);
    auto b = rand_tensor({3}, s, -1, 1);
    check("conv2d_4x4_s2", kOpTol,
          [=](Tape<double>& t) { return sum(t, conv2d(t, x, w, b, 2, 1)); },
          {x, w, b});
  }
  {
    RngStream s = stream();
    auto x = rand_tensor({1, 3, 4, 4}, s, -1, 1);
    check("upsample_nearest2x", kOpTol,
          [=](Tape<double>& t) { return sum(t, upsample_nearest2x(t, x)); },
          {x});
  }
  {
    RngStream s = stream();
    auto x = rand_signed_tensor({1, 2, 4, 4}, s);
    check("relu", kOpTol,
          [=](Tape<double>& t) { return sum(t, relu(t, x)); }, {x});
  }
  {
    RngStream s = stream();
    auto x = rand_tensor({1, 2, 4, 4}, s, -2, 2);
    check("sigmoid", kOpTol,
          [=](Tape<double>& t) { return sum(t, sigmoid(t, x)); }, {x});
  }
  {
    RngStream s = stream();
    auto a = rand_tensor({1, 2, 4, 4}, s, -1, 1);
    auto b = rand_tensor({1, 2, 4, 4}, s, -1, 1);
    check("add", kOpTol,
          [=](Tape<double>& t) { return sum(t, add(t, a, b)); }, {a, b});
  }
  {
    // Keep |a - b| bounded away from the non-differentiable tie at 0.
    RngStream s = stream();
    auto a = rand_tensor({1, 2, 4, 4}, s, 0, 1);
    std::vector<double> bv = a.values();
    for (auto& v : bv) {
      const double sep = 0.2 + 0.3 * s.next_double();
      v += s.next_double() < 0.5 ? -sep : sep;
    }
    auto b = Tensor<double>::from_values(a.shape(), std::move(bv), true);
    check("sub_abs", kOpTol,
          [=](Tape<double>& t) { return sum(t, sub_abs(t, a, b)); }, {a, b});
  }
  {
    RngStream s = stream();
    auto a = rand_tensor({1, 2, 3, 3}, s, -1, 1);
    auto b = rand_tensor({1, 3, 3, 3}, s, -1, 1);
    check("concat_channels", kOpTol,
          [=](Tape<double>& t) { return sum(t, concat_channels(t, a, b)); },
          {a, b});
  }
  {
    RngStream s = stream();
    auto x = rand_tensor({1, 2, 4, 4}, s, 0.5, 1.5);
    const RngStream mask_stream = stream();
    check("dropout_train", kOpTol,
          [=](Tape<double>& t) {
            RngStream ms = mask_stream;
            return sum(t, dropout(t, x, 0.4, ms, ForwardMode::Train));
          },
          {x});
  }
  {
    RngStream s = stream();
    auto p = rand_tensor({1, 1, 4, 4}, s, 0.05, 0.95);
    auto target = rand_binary_tensor({1, 1, 4, 4}, s);
    check("bce_loss", kOpTol,
          [=](Tape<double>& t) { return bce_loss(t, p, target); }, {p});
  }
  {
    RngStream s = stream();
    auto x = rand_tensor({2, 3}, s, -1, 1);
    check("sum", kOpTol, [=](Tape<double>& t) { return sum(t, x); }, {x});
  }
  {
    RngStream s = stream();
    auto x = rand_tensor({2, 3}, s, -1, 1);
    check("scale", kOpTol,
          [=](Tape<double>& t) { return sum(t, scale(t, x, 1.7)); }, {x});
  }
  {
    RngStream s = stream();
    auto a = rand_tensor({2, 3}, s, -1, 1);
    auto b = rand_tensor({2, 3}, s, -1, 1);
    check("mul", kOpTol,
          [=](Tape<double>& t) { return sum(t, mul(t, a, b)); }, {a, b});
  }
  {
    // Full toy model, McSample mode: stochastic-depth expectation scaling and
    // a live dropout mask both sit on the differentiated path.
    RngStream s = stream();
    const ModelConfig cfg = toy_model_config();
    Model<double> model = build_model<double>(cfg, s.split(1));
    RngStream data = s.split(2);
    // Zero-initialized biases leave ReLU pre-activations exactly on the kink
    // wherever a conv window sees only dead units, and a central difference
    // straddling a kink measures the average of the two slopes rather than
    // the subgradient. Jitter biases off zero to make the point generic.
    for (auto& [name, p] : model.params)
      if (name.ends_with(".b"))
        for (auto& v : p.values()) v = 0.2 * data.next_double() - 0.1;
    auto t1 = rand_tensor({1, 3, cfg.tile_size, cfg.tile_size}, data, 0, 1);
    auto t2 = rand_tensor({1, 3, cfg.tile_size, cfg.tile_size}, data, 0, 1);
    auto target = rand_binary_tensor({1, 1, cfg.tile_size, cfg.tile_size}, data);
    const RngStream fwd = s.split(3);
    std::vector<Tensor<double>> inputs{t1, t2};
    for (auto& [name, p] : model.params) inputs.push_back(p);
    check("toy_model_end_to_end", kModelTol,
          [=](Tape<double>& t) {
            return bce_loss(
                t, forward(t, model, t1, t2, ForwardMode::McSample, fwd),
                target);
          },
          inputs);
  }
  return table;
}

}  // namespace fscd
