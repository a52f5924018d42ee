#include <doctest.h>

#include <cmath>
#include <vector>

#include "fscd/ops.hpp"
#include "fscd/rng.hpp"
#include "fscd/tensor.hpp"

using namespace fscd;

namespace {

Tensor<double> filled(Shape shape, double v, bool rg = true) {
  std::vector<double> data(size_t(shape_numel(shape)), v);
  return Tensor<double>::from_values(std::move(shape), std::move(data), rg);
}

}  // namespace

TEST_CASE("tensor shape bookkeeping and validation") {
  auto t = Tensor<double>::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.dim(0) == 2);
  CHECK(t.dim(1) == 3);
  CHECK_THROWS_AS(Tensor<double>::from_values({2, 3}, {1, 2, 3}),
                  std::invalid_argument);
  CHECK_THROWS_AS(t.item(), std::invalid_argument);
  CHECK(Tensor<double>::scalar(4.5).item() == 4.5);
}

TEST_CASE("copying aliases storage, clone detaches") {
  auto a = Tensor<double>::from_values({3}, {1, 2, 3});
  Tensor<double> alias = a;
  alias.values()[0] = 9;
  CHECK(a.values()[0] == 9);
  Tensor<double> deep = a.clone();
  deep.values()[0] = 5;
  CHECK(a.values()[0] == 9);
}

TEST_CASE("conv2d of all-ones 3x3 against all-ones kernel sums to nine") {
  Tape<double> t;
  auto x = filled({1, 1, 3, 3}, 1.0);
  auto w = filled({1, 1, 3, 3}, 1.0);
  auto b = filled({1}, 0.0);
  auto y = conv2d(t, x, w, b, 1, 0);
  CHECK(y.shape() == Shape{1, 1, 1, 1});
  CHECK(y.item() == doctest::Approx(9.0));
}

TEST_CASE("conv2d with a 1x1 identity kernel reproduces the input") {
  Tape<double> t;
  auto x = Tensor<double>::from_values({1, 1, 2, 2}, {0.3, -1.2, 4.0, 0.0}, true);
  auto w = filled({1, 1, 1, 1}, 1.0);
  auto b = filled({1}, 0.0);
  auto y = conv2d(t, x, w, b, 1, 0);
  CHECK(y.values() == x.values());
}

TEST_CASE("conv2d rejects mismatched shapes and non-exact strides") {
  Tape<double> t;
  auto x = filled({1, 2, 4, 4}, 1.0);
  auto w_bad_cin = filled({1, 3, 3, 3}, 1.0);
  auto b = filled({1}, 0.0);
  CHECK_THROWS_AS(conv2d(t, x, w_bad_cin, b, 1, 1), std::invalid_argument);
  auto w = filled({1, 2, 3, 3}, 1.0);
  // 4 + 0 - 3 = 1 not divisible by stride 2.
  CHECK_THROWS_AS(conv2d(t, x, w, b, 2, 0), std::invalid_argument);
  auto b_bad = filled({2}, 0.0);
  CHECK_THROWS_AS(conv2d(t, x, w, b_bad, 1, 1), std::invalid_argument);
}

TEST_CASE("upsample_nearest2x replicates each pixel into a 2x2 block") {
  Tape<double> t;
  auto one = filled({1, 1, 1, 1}, 5.0);
  auto up1 = upsample_nearest2x(t, one);
  CHECK(up1.shape() == Shape{1, 1, 2, 2});
  CHECK(up1.values() == std::vector<double>{5, 5, 5, 5});

  auto x = Tensor<double>::from_values({1, 1, 2, 2}, {1, 2, 3, 4}, true);
  auto up = upsample_nearest2x(t, x);
  CHECK(up.shape() == Shape{1, 1, 4, 4});
  CHECK(up.values() == std::vector<double>{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4,
                                           3, 3, 4, 4});
}

TEST_CASE("upsample backward sums each 2x2 block: grad of sum is four") {
  Tape<double> t;
  auto x = Tensor<double>::from_values({1, 1, 2, 2}, {1, 2, 3, 4}, true);
  auto loss = sum(t, upsample_nearest2x(t, x));
  t.backward(loss);
  for (double g : x.grad()) CHECK(g == doctest::Approx(4.0));
}

TEST_CASE("elementwise op values") {
  Tape<double> t;
  auto x = Tensor<double>::from_values({4}, {-1.0, 0.0, 0.5, 2.0}, true);
  CHECK(relu(t, x).values() == std::vector<double>{0, 0, 0.5, 2});
  CHECK(sigmoid(t, Tensor<double>::scalar(0.0, true)).item() ==
        doctest::Approx(0.5));
  auto a = Tensor<double>::from_values({2}, {1.0, -2.0}, true);
  auto b = Tensor<double>::from_values({2}, {3.0, 1.5}, true);
  CHECK(add(t, a, b).values() == std::vector<double>{4.0, -0.5});
  CHECK(sub_abs(t, a, b).values() == std::vector<double>{2.0, 3.5});
  CHECK(sub_abs(t, a, a).values() == std::vector<double>{0.0, 0.0});
  CHECK(mul(t, a, b).values() == std::vector<double>{3.0, -3.0});
  CHECK(scale(t, a, -2.0).values() == std::vector<double>{-2.0, 4.0});
  CHECK(sum(t, b).item() == doctest::Approx(4.5));
}

TEST_CASE("sigmoid output is strictly inside (0,1) even for huge logits") {
  Tape<double> t;
  auto x = Tensor<double>::from_values({2}, {-100.0, 100.0}, true);
  auto y = sigmoid(t, x);
  CHECK(y.values()[0] > 0.0);
  CHECK(y.values()[1] < 1.0);
}

TEST_CASE("concat_channels stacks along the channel dimension") {
  Tape<double> t;
  auto a = filled({1, 2, 4, 4}, 1.0);
  auto b = filled({1, 3, 4, 4}, 2.0);
  auto y = concat_channels(t, a, b);
  CHECK(y.shape() == Shape{1, 5, 4, 4});
  CHECK(y.values()[0] == 1.0);
  CHECK(y.values()[2 * 16] == 2.0);
  auto c = filled({1, 2, 3, 3}, 0.0);
  CHECK_THROWS_AS(concat_channels(t, a, c), std::invalid_argument);
}

TEST_CASE("shape mismatches on binary elementwise ops are rejected") {
  Tape<double> t;
  auto a = filled({2, 2}, 1.0);
  auto b = filled({2, 3}, 1.0);
  CHECK_THROWS_AS(add(t, a, b), std::invalid_argument);
  CHECK_THROWS_AS(sub_abs(t, a, b), std::invalid_argument);
  CHECK_THROWS_AS(mul(t, a, b), std::invalid_argument);
}

TEST_CASE("dropout in Eval mode or at rate zero returns the input unchanged") {
  Tape<double> t;
  auto x = Tensor<double>::from_values({8}, {1, 2, 3, 4, 5, 6, 7, 8}, true);
  RngStream s(1, 0);
  CHECK(dropout(t, x, 0.7, s, ForwardMode::Eval).values() == x.values());
  CHECK(dropout(t, x, 0.0, s, ForwardMode::Train).values() == x.values());
  CHECK(dropout(t, x, 0.0, s, ForwardMode::McSample).values() == x.values());
}

TEST_CASE("train-mode dropout at rate 0.5 doubles survivors and zeroes the rest") {
  Tape<double> t;
  std::vector<double> v(256);
  for (size_t i = 0; i < v.size(); ++i) v[i] = double(i + 1);
  const int64_t n = int64_t(v.size());
  auto x = Tensor<double>::from_values({n}, std::move(v), true);
  RngStream s(11, 3);
  auto y = dropout(t, x, 0.5, s, ForwardMode::Train);
  int dropped = 0, kept = 0;
  for (size_t i = 0; i < x.values().size(); ++i) {
    const double in = x.values()[i], out = y.values()[i];
    if (out == 0.0) {
      ++dropped;
    } else {
      CHECK(out == 2.0 * in);  // exact inverted-dropout scaling
      ++kept;
    }
  }
  CHECK(dropped > 0);
  CHECK(kept > 0);
}

TEST_CASE("dropout rejects rates outside [0,1)") {
  Tape<double> t;
  auto x = filled({4}, 1.0);
  RngStream s(0, 0);
  CHECK_THROWS_AS(dropout(t, x, 1.0, s, ForwardMode::Train),
                  std::invalid_argument);
  CHECK_THROWS_AS(dropout(t, x, -0.1, s, ForwardMode::Train),
                  std::invalid_argument);
}

TEST_CASE("dropout preserves the expected value across many draws") {
  Tape<double> t;
  t.set_recording(false);
  const double value = 1.7, rate = 0.3;
  auto x = Tensor<double>::scalar(value, true);
  RngStream s(21, 9);
  const int n = 100000;
  double mean = 0;
  for (int i = 0; i < n; ++i)
    mean += dropout(t, x, rate, s, ForwardMode::Train).item() / n;
  // Output is value/(1-rate) w.p. (1-rate): sd of the mean follows from the
  // Bernoulli variance.
  const double se =
      value * std::sqrt(rate / (1.0 - rate)) / std::sqrt(double(n));
  CHECK(std::abs(mean - value) < 3.0 * se);
}

TEST_CASE("bce_loss matches hand values and clamps saturated probabilities") {
  Tape<double> t;
  auto half = filled({1, 1, 2, 2}, 0.5);
  auto target = Tensor<double>::from_values({1, 1, 2, 2}, {0, 1, 0, 1}, false);
  CHECK(bce_loss(t, half, target).item() == doctest::Approx(std::log(2.0)));
  auto ones = filled({1, 1, 2, 2}, 1.0);
  auto ones_t = filled({1, 1, 2, 2}, 1.0, false);
  CHECK(bce_loss(t, ones, ones_t).item() <= 1e-6);
  auto bad = filled({1, 1, 2, 3}, 0.5, false);
  CHECK_THROWS_AS(bce_loss(t, half, bad), std::invalid_argument);
}

TEST_CASE("backward seeds one and accumulates fan-out additively") {
  Tape<double> t;
  auto x = Tensor<double>::from_values({2, 2}, {1, 2, 3, 4}, true);
  auto loss = sum(t, x);
  t.backward(loss);
  CHECK(x.grad() == std::vector<double>{1, 1, 1, 1});

  Tape<double> t2;
  auto y = Tensor<double>::from_values({3}, {1, 2, 3}, true);
  auto loss2 = sum(t2, add(t2, y, y));
  t2.backward(loss2);
  CHECK(y.grad() == std::vector<double>{2, 2, 2});
}

TEST_CASE("backward rejects a non-scalar or foreign loss") {
  Tape<double> t;
  auto x = filled({2, 2}, 1.0);
  auto y = add(t, x, x);
  CHECK_THROWS_AS(t.backward(y), std::invalid_argument);
  Tape<double> other;
  auto z = sum(other, x);
  CHECK_THROWS_AS(t.backward(z), std::invalid_argument);
}

TEST_CASE("two backward passes over identical tapes agree bitwise") {
  auto run = [] {
    Tape<double> t;
    auto x = Tensor<double>::from_values({4}, {0.1, -0.4, 0.7, 1.3}, true);
    RngStream s(5, 2);
    auto y = dropout(t, relu(t, x), 0.4, s, ForwardMode::Train);
    auto loss = sum(t, mul(t, y, y));
    t.backward(loss);
    return x.grad();
  };
  CHECK(run() == run());
}

TEST_CASE("non-recording tapes skip backward bookkeeping") {
  Tape<double> t;
  t.set_recording(false);
  auto x = filled({2}, 1.0);
  auto y = add(t, x, x);
  CHECK(t.size() == 0);
  CHECK(y.values() == std::vector<double>{2, 2});
}
