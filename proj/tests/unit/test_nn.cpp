#include <doctest.h>

#include <cmath>
#include <vector>

#include "crossview/gradcheck.hpp"
#include "crossview/nn.hpp"
#include "crossview/rng.hpp"
#include "crossview/threadpool.hpp"

using namespace crossview;

namespace {

Tensor<double> random_tensor(const std::vector<int>& shape, Xoshiro256& rng, double scale = 1.0) {
  Tensor<double> t(shape);
  for (std::size_t i = 0; i < t.numel(); ++i) {
    t[i] = (rng.uniform_double() * 2.0 - 1.0) * scale;
  }
  return t;
}

double weighted_sum(const Tensor<double>& y, const Tensor<double>& weights) {
  REQUIRE(y.numel() == weights.numel());
  double s = 0.0;
  for (std::size_t i = 0; i < y.numel(); ++i) s += y[i] * weights[i];
  return s;
}

}  // namespace

TEST_CASE("conv2d geometry: stride-2 halves each side") {
  nn::Conv2d<float> conv("t.conv", 3, 8, 5, 2, 2);
  Xoshiro256 rng(1);
  conv.init(rng, 0.02);
  Tensor<float> x({2, 3, 16, 16});
  const Tensor<float> y = conv.forward(x);
  CHECK(y.shape() == std::vector<int>{2, 8, 8, 8});
}

TEST_CASE("conv_transpose2d geometry: stride-2 doubles each side") {
  nn::ConvTranspose2d<float> deconv("t.deconv", 4, 2, 5, 2, 2, 1);
  Xoshiro256 rng(2);
  deconv.init(rng, 0.02);
  Tensor<float> x({2, 4, 4, 4});
  const Tensor<float> y = deconv.forward(x);
  CHECK(y.shape() == std::vector<int>{2, 2, 8, 8});
}

TEST_CASE("conv2d gradients match finite differences") {
  Xoshiro256 rng(11);
  nn::Conv2d<double> conv("t.conv", 2, 3, 3, 2, 1);
  conv.init(rng, 0.1);
  nn::Param<double> input;
  input.setup("t.input", {2, 2, 8, 8});
  input.value = random_tensor(input.value.shape(), rng);
  const Tensor<double> proj = random_tensor({2, 3, 4, 4}, rng);

  nn::ParamRefs<double> params{&conv.weight, &conv.bias, &input};
  auto loss = [&]() { return weighted_sum(conv.forward(input.value), proj); };
  auto analytic = [&]() {
    nn::zero_grads(params);
    conv.forward(input.value);
    input.grad = conv.backward(proj, /*need_dx=*/true, /*accum_param_grads=*/true);
  };
  const auto report = gradient_check(params, loss, analytic, 1e-5, 1e-6);
  CAPTURE(report.worst_param);
  CHECK(report.pass);
}

TEST_CASE("conv_transpose2d gradients match finite differences") {
  Xoshiro256 rng(12);
  nn::ConvTranspose2d<double> deconv("t.deconv", 3, 2, 3, 2, 1, 1);
  deconv.init(rng, 0.1);
  nn::Param<double> input;
  input.setup("t.input", {2, 3, 4, 4});
  input.value = random_tensor(input.value.shape(), rng);
  const Tensor<double> proj = random_tensor({2, 2, 8, 8}, rng);

  nn::ParamRefs<double> params{&deconv.weight, &deconv.bias, &input};
  auto loss = [&]() { return weighted_sum(deconv.forward(input.value), proj); };
  auto analytic = [&]() {
    nn::zero_grads(params);
    deconv.forward(input.value);
    input.grad = deconv.backward(proj, true, true);
  };
  const auto report = gradient_check(params, loss, analytic, 1e-5, 1e-6);
  CAPTURE(report.worst_param);
  CHECK(report.pass);
}

TEST_CASE("batch norm train-mode gradients match finite differences") {
  Xoshiro256 rng(13);
  nn::BatchNorm2d<double> bn("t.bn", 3);
  bn.init();
  // Nudge gamma/beta off their init so the test is not at a special point.
  for (std::size_t i = 0; i < bn.gamma.value.numel(); ++i) {
    bn.gamma.value[i] = 1.0 + 0.3 * (rng.uniform_double() - 0.5);
    bn.beta.value[i] = 0.2 * (rng.uniform_double() - 0.5);
  }
  nn::Param<double> input;
  input.setup("t.input", {3, 3, 4, 4});
  input.value = random_tensor(input.value.shape(), rng);
  const Tensor<double> proj = random_tensor({3, 3, 4, 4}, rng);

  nn::ParamRefs<double> params{&bn.gamma, &bn.beta, &input};
  auto loss = [&]() { return weighted_sum(bn.forward(input.value, nn::Mode::train), proj); };
  auto analytic = [&]() {
    nn::zero_grads(params);
    bn.forward(input.value, nn::Mode::train);
    input.grad = bn.backward(proj, true);
  };
  const auto report = gradient_check(params, loss, analytic, 1e-5, 1e-5);
  CAPTURE(report.worst_param);
  CAPTURE(report.max_rel_error);
  CHECK(report.pass);
}

TEST_CASE("batch norm eval mode uses running statistics") {
  nn::BatchNorm2d<float> bn("t.bn", 2);
  bn.init();
  bn.running_mean.value[0] = 1.0f;
  bn.running_var.value[0] = 4.0f;
  Tensor<float> x({1, 2, 1, 1});
  x.at(0, 0, 0, 0) = 3.0f;
  x.at(0, 1, 0, 0) = 0.5f;
  const Tensor<float> y = bn.forward(x, nn::Mode::eval);
  // (3 - 1) / sqrt(4 + 1e-5) ~ 1.0
  CHECK(y.at(0, 0, 0, 0) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(y.at(0, 1, 0, 0) == doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("linear gradients match finite differences") {
  Xoshiro256 rng(14);
  nn::Linear<double> lin("t.lin", 6, 4);
  lin.init(rng, 0.3);
  nn::Param<double> input;
  input.setup("t.input", {3, 6});
  input.value = random_tensor(input.value.shape(), rng);
  const Tensor<double> proj = random_tensor({3, 4}, rng);

  nn::ParamRefs<double> params{&lin.weight, &lin.bias, &input};
  auto loss = [&]() { return weighted_sum(lin.forward(input.value), proj); };
  auto analytic = [&]() {
    nn::zero_grads(params);
    lin.forward(input.value);
    input.grad = lin.backward(proj, true, true);
  };
  const auto report = gradient_check(params, loss, analytic, 1e-6, 1e-7);
  CHECK(report.pass);
}

TEST_CASE("activation gradients match finite differences") {
  Xoshiro256 rng(15);
  nn::Param<double> input;
  input.setup("t.input", {2, 2, 3, 3});
  input.value = random_tensor(input.value.shape(), rng, 2.0);
  const Tensor<double> proj = random_tensor(input.value.shape(), rng);
  nn::ParamRefs<double> params{&input};

  SUBCASE("leaky relu") {
    nn::LeakyReLU<double> act(0.2);
    auto loss = [&]() { return weighted_sum(act.forward(input.value), proj); };
    auto analytic = [&]() {
      nn::zero_grads(params);
      act.forward(input.value);
      input.grad = act.backward(proj);
    };
    CHECK(gradient_check(params, loss, analytic, 1e-6, 1e-6).pass);
  }
  SUBCASE("tanh") {
    nn::Tanh<double> act;
    auto loss = [&]() { return weighted_sum(act.forward(input.value), proj); };
    auto analytic = [&]() {
      nn::zero_grads(params);
      act.forward(input.value);
      input.grad = act.backward(proj);
    };
    CHECK(gradient_check(params, loss, analytic, 1e-6, 1e-7).pass);
  }
}

TEST_CASE("global average pool equals the explicit spatial mean") {
  Xoshiro256 rng(16);
  nn::GlobalAvgPool<float> pool;
  Tensor<float> x({2, 5, 4, 4});
  for (std::size_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform_float();
  const Tensor<float> y = pool.forward(x);
  for (int b = 0; b < 2; ++b) {
    for (int c = 0; c < 5; ++c) {
      double s = 0.0;
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) s += x.at(b, c, i, j);
      }
      CHECK(y.at(b, c) == doctest::Approx(s / 16.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("channel concat/split round-trips") {
  Xoshiro256 rng(17);
  Tensor<float> a({2, 3, 4, 4});
  Tensor<float> b({2, 5, 4, 4});
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] = rng.uniform_float();
  for (std::size_t i = 0; i < b.numel(); ++i) b[i] = rng.uniform_float();
  const Tensor<float> cat = nn::channel_concat(a, b);
  CHECK(cat.shape() == std::vector<int>{2, 8, 4, 4});
  Tensor<float> a2, b2;
  nn::channel_split(cat, 3, a2, b2);
  CHECK(a.bit_equal(a2));
  CHECK(b.bit_equal(b2));
}

TEST_CASE("conv results do not depend on the thread count") {
  Xoshiro256 rng(18);
  nn::Conv2d<float> conv("t.conv", 3, 4, 5, 2, 2);
  conv.init(rng, 0.05);
  Tensor<float> x({6, 3, 16, 16});
  for (std::size_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform_float() - 0.5f;

  auto& pool = ThreadPool::instance();
  const int original = pool.num_threads();
  pool.set_num_threads(1);
  const Tensor<float> y1 = conv.forward(x);
  conv.weight.grad.set_zero();
  conv.bias.grad.set_zero();
  Tensor<float> proj(y1.shape());
  for (std::size_t i = 0; i < proj.numel(); ++i) proj[i] = rng.uniform_float() - 0.5f;
  const Tensor<float> dx1 = conv.backward(proj, true, true);
  const Tensor<float> gw1 = conv.weight.grad;

  pool.set_num_threads(3);
  const Tensor<float> y2 = conv.forward(x);
  conv.weight.grad.set_zero();
  conv.bias.grad.set_zero();
  const Tensor<float> dx2 = conv.backward(proj, true, true);
  pool.set_num_threads(original);

  CHECK(y1.bit_equal(y2));
  CHECK(dx1.bit_equal(dx2));
  CHECK(gw1.bit_equal(conv.weight.grad));
}
