#include <doctest.h>

#include <cmath>
#include <vector>

#include "crossview/errors.hpp"
#include "crossview/losses.hpp"
#include "crossview/nn.hpp"

using namespace crossview;

TEST_CASE("disc_loss closed forms") {
  const std::vector<double> half{0.5, 0.5};
  CHECK(disc_loss(half, half) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));

  // Perfect-discriminator limit approaches 0 (clamp keeps it finite).
  const std::vector<double> ones{1.0, 1.0};
  const std::vector<double> zeros{0.0, 0.0};
  const double v = disc_loss(ones, zeros);
  CHECK(v > 0.0);
  CHECK(v < 1e-6);
}

TEST_CASE("disc_loss matches the per-element oracle") {
  const std::vector<double> d_real{0.8, 0.6};
  const std::vector<double> d_fake{0.3, 0.1};
  // Direct evaluation: -1/2 (ln .8 + ln .6) - 1/2 (ln .7 + ln .9)
  double oracle = 0.0;
  for (double p : d_real) oracle -= std::log(p) / 2.0;
  for (double p : d_fake) oracle -= std::log(1.0 - p) / 2.0;
  const double got = disc_loss(d_real, d_fake);
  CHECK(got == doctest::Approx(oracle).epsilon(1e-14));
  CHECK(got == doctest::Approx(0.5980023173383796).epsilon(1e-12));
}

TEST_CASE("gen_loss closed forms and oracle") {
  const std::vector<double> half{0.5, 0.5, 0.5};
  CHECK(gen_loss(half, GenLossForm::non_saturating) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(gen_loss(half, GenLossForm::minimax) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));

  const std::vector<double> d_fake{0.2, 0.9};
  double oracle = 0.0;
  for (double p : d_fake) oracle -= std::log(p) / 2.0;
  CHECK(gen_loss(d_fake, GenLossForm::non_saturating) == doctest::Approx(oracle).epsilon(1e-14));
  CHECK(gen_loss(d_fake, GenLossForm::non_saturating) ==
        doctest::Approx(0.8573992140459634).epsilon(1e-12));

  // Non-saturating loss vanishes as d_fake -> 1.
  const std::vector<double> near_one{1.0 - 1e-7};
  CHECK(gen_loss(near_one, GenLossForm::non_saturating) < 1e-6);
}

TEST_CASE("losses reject empty batches and stay finite under clamping") {
  const std::vector<double> empty;
  const std::vector<double> one{0.5};
  CHECK_THROWS_AS(disc_loss(empty, one), ValidationError);
  CHECK_THROWS_AS(disc_loss(one, empty), ValidationError);
  CHECK_THROWS_AS(gen_loss(empty, GenLossForm::minimax), ValidationError);

  for (double p : {0.0, 1e-30, 0.5, 1.0 - 1e-16, 1.0}) {
    const std::vector<double> batch{p};
    CHECK(std::isfinite(disc_loss(batch, batch)));
    CHECK(std::isfinite(gen_loss(batch, GenLossForm::non_saturating)));
    CHECK(std::isfinite(gen_loss(batch, GenLossForm::minimax)));
  }
}

TEST_CASE("both generator loss forms push d_fake the same way") {
  // Gradients w.r.t. the logit share their sign for any in-band probability.
  Tensor<float> logits({5});
  logits[0] = -3.0f;
  logits[1] = -0.5f;
  logits[2] = 0.0f;
  logits[3] = 0.5f;
  logits[4] = 3.0f;
  const Tensor<float> g_ns = grad_logits_gen(logits, GenLossForm::non_saturating);
  const Tensor<float> g_mm = grad_logits_gen(logits, GenLossForm::minimax);
  for (std::size_t i = 0; i < logits.numel(); ++i) {
    CHECK(g_ns[i] < 0.0f);
    CHECK(g_mm[i] < 0.0f);
  }
}

TEST_CASE("logit gradients match finite differences of the clamped losses") {
  Tensor<double> logits({4});
  logits[0] = -1.7;
  logits[1] = 0.3;
  logits[2] = 2.2;
  logits[3] = -0.1;
  const double h = 1e-6;

  auto fd = [&](auto&& loss_of_logits) {
    Tensor<double> g(logits.shape());
    for (std::size_t i = 0; i < logits.numel(); ++i) {
      const double saved = logits[i];
      logits[i] = saved + h;
      const double plus = loss_of_logits();
      logits[i] = saved - h;
      const double minus = loss_of_logits();
      logits[i] = saved;
      g[i] = (plus - minus) / (2.0 * h);
    }
    return g;
  };

  auto probs = [&]() { return sigmoid_batch(logits); };

  SUBCASE("real term") {
    auto loss = [&]() {
      const auto p = probs();
      return disc_loss(p, std::vector<double>{0.5});  // fake term constant
    };
    const Tensor<double> analytic = grad_logits_real_term(logits);
    const Tensor<double> numeric = fd(loss);
    for (std::size_t i = 0; i < logits.numel(); ++i) {
      CHECK(analytic[i] == doctest::Approx(numeric[i]).epsilon(1e-5));
    }
  }
  SUBCASE("fake term") {
    auto loss = [&]() {
      const auto p = probs();
      return disc_loss(std::vector<double>{0.5}, p);
    };
    const Tensor<double> analytic = grad_logits_fake_term(logits);
    const Tensor<double> numeric = fd(loss);
    for (std::size_t i = 0; i < logits.numel(); ++i) {
      CHECK(analytic[i] == doctest::Approx(numeric[i]).epsilon(1e-5));
    }
  }
  SUBCASE("generator forms") {
    for (GenLossForm form : {GenLossForm::non_saturating, GenLossForm::minimax}) {
      auto loss = [&]() { return gen_loss(probs(), form); };
      const Tensor<double> analytic = grad_logits_gen(logits, form);
      const Tensor<double> numeric = fd(loss);
      for (std::size_t i = 0; i < logits.numel(); ++i) {
        CHECK(analytic[i] == doctest::Approx(numeric[i]).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("adam on the quadratic f(w) = w^2 reaches |w| < 0.01 within 500 steps") {
  // Trajectory oracle in double, beta defaults (0.5, 0.999). The step size is
  // chosen for the unit-scale problem: Adam moves ~lr per step regardless of
  // gradient scale, so covering the distance from w=1 needs lr on the order
  // of 1/steps; the training default 2e-4 could never cross 0.99 in 500.
  const float lr = 0.005f, b1 = 0.5f, b2 = 0.999f, eps = 1e-8f;
  float w = 1.0f, m = 0.0f, v = 0.0f;
  double wd = 1.0, md = 0.0, vd = 0.0;
  bool reached = false;
  for (int t = 1; t <= 500; ++t) {
    const double bc1 = 1.0 - std::pow(static_cast<double>(b1), t);
    const double bc2 = 1.0 - std::pow(static_cast<double>(b2), t);
    const float g = 2.0f * w;
    kernels::adam_step(&w, &g, &m, &v, 1, lr, b1, b2, eps, static_cast<float>(1.0 / bc1),
                       static_cast<float>(1.0 / bc2));
    // Oracle step.
    const double gd = 2.0 * wd;
    md = b1 * md + (1.0 - b1) * gd;
    vd = b2 * vd + (1.0 - b2) * gd * gd;
    wd -= lr * (md / bc1) / (std::sqrt(vd / bc2) + eps);
    CHECK(std::fabs(w - wd) < 1e-4);
    if (std::fabs(w) < 0.01f) reached = true;
  }
  CHECK(reached);
}

TEST_CASE("adam trajectory matches the oracle at the training default step size") {
  const float lr = 2e-4f, b1 = 0.5f, b2 = 0.999f, eps = 1e-8f;
  float w = 1.0f, m = 0.0f, v = 0.0f;
  double wd = 1.0, md = 0.0, vd = 0.0;
  for (int t = 1; t <= 200; ++t) {
    const double bc1 = 1.0 - std::pow(static_cast<double>(b1), t);
    const double bc2 = 1.0 - std::pow(static_cast<double>(b2), t);
    const float g = 2.0f * w;
    kernels::adam_step(&w, &g, &m, &v, 1, lr, b1, b2, eps, static_cast<float>(1.0 / bc1),
                       static_cast<float>(1.0 / bc2));
    const double gd = 2.0 * wd;
    md = b1 * md + (1.0 - b1) * gd;
    vd = b2 * vd + (1.0 - b2) * gd * gd;
    wd -= lr * (md / bc1) / (std::sqrt(vd / bc2) + eps);
    CHECK(std::fabs(w - wd) < 1e-5);
  }
  CHECK(w < 1.0f);  // descending, just slowly
}
