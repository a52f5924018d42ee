#include <doctest.h>

#include <vector>

#include "fscd/gradcheck.hpp"
#include "fscd/ops.hpp"
#include "fscd/rng.hpp"
#include "fscd/verify.hpp"

using namespace fscd;

TEST_CASE("quadratic gradients are captured to rounding accuracy") {
  auto x = Tensor<double>::from_values({3}, {1, 2, 3}, true);
  const double err = grad_check(
      [=](Tape<double>& t) { return sum(t, mul(t, x, x)); }, {x});
  CHECK(err <= 1e-6);
  Tape<double> t;
  auto loss = sum(t, mul(t, x, x));
  t.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));
  CHECK(x.grad()[2] == doctest::Approx(6.0));
}

TEST_CASE("sigmoid composition passes the oracle") {
  RngStream s(31, 0);
  std::vector<double> v(16);
  for (auto& x : v) x = 4.0 * s.next_double() - 2.0;
  auto x = Tensor<double>::from_values({1, 1, 4, 4}, std::move(v), true);
  const double err = grad_check(
      [=](Tape<double>& t) { return sum(t, sigmoid(t, relu(t, x))); }, {x});
  CHECK(err <= 1e-4);
}

TEST_CASE("a corrupted backward rule is flagged loudly") {
  auto x = Tensor<double>::from_values({3}, {0.4, 1.1, -0.6}, true);
  // Forward computes 2x elementwise but claims d/dx = 3 in backward.
  auto broken_twice = [](Tape<double>& t, const Tensor<double>& in) {
    std::vector<double> out(in.values().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = 2.0 * in.values()[i];
    auto y = Tensor<double>::from_values(in.shape(), std::move(out),
                                         in.requires_grad());
    t.record({in}, y, [in = in, y]() mutable {
      for (size_t i = 0; i < in.grad().size(); ++i)
        in.grad()[i] += 3.0 * y.grad()[i];
    });
    return y;
  };
  const double err = grad_check(
      [=](Tape<double>& t) { return sum(t, broken_twice(t, x)); }, {x});
  CHECK(err > 1e-2);
}

TEST_CASE("a non-deterministic function is rejected") {
  auto x = Tensor<double>::scalar(1.0, true);
  uint64_t call = 0;
  auto f = [&call, x](Tape<double>& t) {
    RngStream s(99, call++);  // fresh stream every call: not reproducible
    return scale(t, x, 1.0 + s.next_double());
  };
  CHECK_THROWS_AS(grad_check(f, {x}), std::invalid_argument);
}

TEST_CASE("inputs that do not require grad are rejected") {
  auto x = Tensor<double>::scalar(1.0, false);
  CHECK_THROWS_AS(
      grad_check([=](Tape<double>& t) { return scale(t, x, 2.0); }, {x}),
      std::invalid_argument);
}

TEST_CASE("non-positive eps is rejected") {
  auto x = Tensor<double>::scalar(1.0, true);
  CHECK_THROWS_AS(
      grad_check([=](Tape<double>& t) { return scale(t, x, 2.0); }, {x}, 0.0),
      std::invalid_argument);
}

TEST_CASE("verification suite covers every op plus the composed model") {
  const auto table = run_gradcheck_suite();
  REQUIRE(table.size() >= 14);
  bool saw_model = false;
  for (const auto& row : table) {
    INFO(row.name, " err=", row.max_rel_err, " tol=", row.tolerance);
    CHECK(row.pass());
    if (row.name == "toy_model_end_to_end") {
      saw_model = true;
      CHECK(row.tolerance == doctest::Approx(1e-3));
    } else {
      CHECK(row.tolerance == doctest::Approx(1e-4));
    }
  }
  CHECK(saw_model);
}

TEST_CASE("the composed verification model stays under 1k parameters") {
  const auto model = build_model<double>(toy_model_config(), RngStream(0, 0));
  CHECK(model.parameter_count() < 1000);
}
