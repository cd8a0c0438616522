#include <doctest.h>

#include <array>
#include <cmath>
#include <numbers>

#include "gradcheck.hpp"
#include "sre/nd/checkpoint.hpp"
#include "sre/nd/ops.hpp"
#include "sre/nd/optim.hpp"

using namespace sre;
using namespace sre::nd;
using sre::testing::max_gradient_error;
using sre::testing::random_tensor;

TEST_CASE("backward of sum is all ones") {
  Tape tape;
  auto x = tape.parameter(Tensor(Shape{2, 3}, std::vector<double>{1, -2, 3, 4, 5, 6}));
  tape.backward(sum(x));
  for (double g : tape.grad(x).values()) CHECK(g == 1.0);
}

TEST_CASE("backward of mse(x, x) is zero") {
  Tape tape;
  auto x = tape.parameter(Tensor::vector({0.3, -1.2, 7.0}));
  tape.backward(mse(x, x));
  for (double g : tape.grad(x).values()) CHECK(g == 0.0);
}

TEST_CASE("unused leaves receive zero gradients") {
  Tape tape;
  auto x = tape.parameter(Tensor::vector({1.0, 2.0}));
  auto unused = tape.parameter(Tensor::vector({5.0, 6.0, 7.0}));
  tape.backward(sum(square(x)));
  CHECK(tape.grad(unused).size() == 3);
  for (double g : tape.grad(unused).values()) CHECK(g == 0.0);
  CHECK(tape.grad(x)[1] == doctest::Approx(4.0));
}

TEST_CASE("non-scalar loss is rejected") {
  Tape tape;
  auto x = tape.parameter(Tensor::vector({1.0, 2.0}));
  CHECK_THROWS_AS(tape.backward(tanh(x)), std::invalid_argument);
}

TEST_CASE("forward references are rejected") {
  Tape tape;
  auto x = tape.parameter(Tensor::vector({1.0}));
  CHECK_THROWS_AS(tape.record(Tensor::vector({0.0}), {x.id + 5}, nullptr), std::invalid_argument);
  CHECK_THROWS_AS(tape.record(Tensor::vector({0.0}), {x.id + 1}, nullptr), std::invalid_argument);
}

TEST_CASE("two-layer tanh net gradient matches finite differences") {
  Rng rng(11);
  auto build = [](Tape&, const std::vector<Var>& v) {
    auto h = tanh(linear(v[0], v[1], v[2]));
    return sum(square(linear(h, v[3], v[4])));
  };
  std::vector<Tensor> inputs = {random_tensor(rng, {4, 8}), random_tensor(rng, {8, 6}, 0.4),
                                random_tensor(rng, {6}, 0.1), random_tensor(rng, {6, 3}, 0.4),
                                random_tensor(rng, {3}, 0.1)};
  CHECK(max_gradient_error(build, inputs) <= 1e-4);
}

TEST_CASE("every primitive passes the finite-difference check") {
  Rng rng(3);
  for (const auto& c : sre::testing::primitive_cases()) {
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<Tensor> inputs;
      for (const auto& s : c.shapes) inputs.push_back(random_tensor(rng, s, 0.8, c.avoid_zero));
      INFO(c.name << " trial " << trial);
      CHECK(max_gradient_error(c.build, inputs) <= 1e-4);
    }
  }
}

TEST_CASE("replaying a tape gives bit-identical gradients") {
  Rng rng(5);
  const auto x0 = random_tensor(rng, {3, 4});
  const auto w0 = random_tensor(rng, {4, 2});
  auto run = [&] {
    Tape tape;
    auto x = tape.constant(x0);
    auto w = tape.parameter(w0);
    tape.backward(mean(tanh(matmul(x, w))));
    return tape.grad(w);
  };
  CHECK(run() == run());
}

TEST_CASE("conv_transpose2d inverts conv2d geometry") {
  Tape tape;
  auto x = tape.constant(Tensor(Shape{1, 4, 32, 32}));
  auto w = tape.constant(Tensor(Shape{8, 4, 4, 4}));
  auto b = tape.constant(Tensor(Shape{8}));
  auto y = conv2d(x, w, b, 2, 1);
  CHECK(y.shape() == Shape{1, 8, 16, 16});
  auto wt = tape.constant(Tensor(Shape{8, 4, 4, 4}));
  auto bt = tape.constant(Tensor(Shape{4}));
  CHECK(conv_transpose2d(y, wt, bt, 2, 1).shape() == Shape{1, 4, 32, 32});
}

TEST_CASE("softmax closed forms") {
  for (double c : {0.0, 3.5, -200.0, 700.0}) {
    auto p = softmax(std::vector<double>{c, c, c});
    for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  auto p = softmax(std::vector<double>{std::log(1.0), std::log(2.0), std::log(3.0)});
  CHECK(std::abs(p[0] - 1.0 / 6.0) < 1e-12);
  CHECK(std::abs(p[1] - 2.0 / 6.0) < 1e-12);
  CHECK(std::abs(p[2] - 3.0 / 6.0) < 1e-12);
}

TEST_CASE("softmax is a valid distribution and shift invariant") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> logits(1 + rng.below(8));
    for (auto& v : logits) v = 20.0 * rng.normal();
    auto p = softmax(logits);
    double total = 0.0;
    for (double v : p) {
      CHECK(v >= 0.0);
      total += v;
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
    const double shift = 50.0 * rng.normal();
    auto shifted = logits;
    for (auto& v : shifted) v += shift;
    auto q = softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - q[i]) <= 1e-12);
  }
}

TEST_CASE("categorical KL") {
  const std::vector<double> same{0.2, -1.0, 3.0};
  CHECK(categorical_kl(same, same) == doctest::Approx(0.0));
  const std::vector<double> p{std::log(0.5), std::log(0.5)};
  const std::vector<double> q{std::log(0.25), std::log(0.75)};
  const double expected = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
  CHECK(std::abs(categorical_kl(p, q) - expected) < 1e-12);
  CHECK(std::abs(expected - 0.1438) < 1e-4);
  CHECK(std::abs(categorical_kl(p, q) - categorical_kl(q, p)) > 1e-3);
  CHECK_THROWS_AS(categorical_kl(p, same), std::invalid_argument);

  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(4), b(4);
    for (auto& v : a) v = 5.0 * rng.normal();
    for (auto& v : b) v = 5.0 * rng.normal();
    CHECK(categorical_kl(a, b) >= -1e-12);
  }
}

TEST_CASE("gaussian KL to the unit normal") {
  CHECK(gaussian_kl_unit(std::vector<double>{0.0, 0.0}, std::vector<double>{0.0, 0.0}) == 0.0);
  CHECK(gaussian_kl_unit(std::vector<double>{1.0}, std::vector<double>{0.0}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(gaussian_kl_unit(std::vector<double>{1.0}, std::vector<double>{0.0, 1.0}), std::invalid_argument);
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> mu(3), lv(3);
    for (auto& v : mu) v = 2.0 * rng.normal();
    for (auto& v : lv) v = 3.0 * rng.normal();
    CHECK(gaussian_kl_unit(mu, lv) >= -1e-12);
  }
}

TEST_CASE("mse") {
  CHECK(mse(Tensor::vector({1, 2}), Tensor::vector({1, 2})) == 0.0);
  CHECK(mse(Tensor::vector({0, 0}), Tensor::vector({1, 1})) == 1.0);
  CHECK(mse(Tensor::vector({1, 2}), Tensor::vector({3, 2})) == 2.0);
  CHECK_THROWS_AS(mse(Tensor::vector({1, 2}), Tensor::vector({1, 2, 3})), std::invalid_argument);
}

TEST_CASE("adam step") {
  SUBCASE("zero gradients leave parameters and moments unchanged") {
    Tensor p = Tensor::vector({1.0, -2.0});
    AdamState s(p.shape(), {});
    adam_step(p, Tensor(p.shape()), s);
    CHECK(p == Tensor::vector({1.0, -2.0}));
    CHECK(s.first_moment == Tensor(p.shape()));
    CHECK(s.second_moment == Tensor(p.shape()));
    CHECK(s.step_count == 1);
  }
  SUBCASE("first step moves by about the learning rate") {
    for (double g : {3.0, -0.02, 1e3}) {
      Tensor p = Tensor::scalar(0.0);
      AdamConfig cfg;
      cfg.learning_rate = 0.01;
      AdamState s(p.shape(), cfg);
      adam_step(p, Tensor::scalar(g), s);
      const double expected = -cfg.learning_rate * g / (std::abs(g) + cfg.epsilon);
      CHECK(p.item() == doctest::Approx(expected).epsilon(1e-12));
      CHECK(std::abs(p.item()) == doctest::Approx(0.01).epsilon(1e-5));
    }
  }
  SUBCASE("identical inputs evolve identically") {
    Tensor a = Tensor::vector({0.5, 0.1}), b = a;
    AdamState sa(a.shape(), {}), sb(b.shape(), {});
    for (int i = 0; i < 10; ++i) {
      Tensor g = Tensor::vector({std::sin(i), std::cos(i)});
      adam_step(a, g, sa);
      adam_step(b, g, sb);
    }
    CHECK(a == b);
    for (double v : sa.second_moment.values()) CHECK(v >= 0.0);
  }
  SUBCASE("shape mismatch is rejected") {
    Tensor p = Tensor::vector({1.0});
    AdamState s(p.shape(), {});
    CHECK_THROWS_AS(adam_step(p, Tensor::vector({1.0, 2.0}), s), std::invalid_argument);
  }
}

TEST_CASE("checkpoint container layout") {
  std::vector<NamedTensor> tensors = {{"w", Tensor(Shape{2}, std::vector<double>{1.0, -0.5})}};
  const auto bytes = encode_checkpoint(tensors);
  REQUIRE(bytes.size() == 4 + 1 + 8 + 1 + 8 + 8 + 16);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "NDM1");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 1);   // name length, little-endian
  CHECK(bytes[13] == 'w');
  CHECK(bytes[14] == 1);  // rank
  CHECK(bytes[22] == 2);  // extent
  // 1.0 = 0x3FF0000000000000, stored little-endian
  CHECK(bytes[30] == 0x00);
  CHECK(bytes[37] == 0x3F);
  CHECK(bytes[36] == 0xF0);
}

TEST_CASE("checkpoint round trip preserves names, shapes and bits") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<NamedTensor> tensors;
    const auto count = 1 + rng.below(4);
    for (std::uint64_t i = 0; i < count; ++i) {
      Shape shape(rng.below(4));
      for (auto& e : shape) e = 1 + rng.below(4);
      tensors.push_back({"t" + std::to_string(i), random_tensor(rng, shape, 1e3)});
    }
    const auto decoded = decode_checkpoint(encode_checkpoint(tensors));
    REQUIRE(decoded.size() == tensors.size());
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      CHECK(decoded[i].name == tensors[i].name);
      CHECK(decoded[i].tensor == tensors[i].tensor);
    }
  }
  std::vector<std::uint8_t> junk = {'N', 'D', 'M', '2', 1};
  CHECK_THROWS(decode_checkpoint(junk));
}
