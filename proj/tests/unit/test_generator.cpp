#include <doctest.h>

#include <cmath>
#include <map>

#include "crossview/errors.hpp"
#include "crossview/generator.hpp"
#include "crossview/rng.hpp"
#include "crossview/scene_synth.hpp"

using namespace crossview;

namespace {

Tensor<float> random_overhead_batch(int batch, Xoshiro256& rng) {
  Tensor<float> t({batch, kImageChannels, kOverheadSize, kOverheadSize});
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform_float() * 2.0f - 1.0f;
  return t;
}

GeneratorConfig tiny_config(Variant v) {
  GeneratorConfig cfg;
  cfg.variant = v;
  cfg.width_multiplier = 1;
  return cfg;
}

}  // namespace

TEST_CASE("init is deterministic in (config, seed)") {
  Generator<float> a(GeneratorArch::from_config(tiny_config(Variant::concat)), Seed{5});
  Generator<float> b(GeneratorArch::from_config(tiny_config(Variant::concat)), Seed{5});
  auto pa = a.params();
  auto pb = b.params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    CHECK(pa[i]->value.bit_equal(pb[i]->value));
  }
}

TEST_CASE("weight statistics: near-zero mean, zero batch-norm shifts") {
  Generator<float> gen(GeneratorArch::from_config(tiny_config(Variant::concat)), Seed{17});
  double sum = 0.0;
  std::size_t count = 0;
  for (auto* p : gen.params()) {
    if (p->name.find(".weight") != std::string::npos) {
      for (std::size_t i = 0; i < p->value.numel(); ++i) sum += p->value[i];
      count += p->value.numel();
    }
    if (p->name.find(".bn.beta") != std::string::npos) {
      for (std::size_t i = 0; i < p->value.numel(); ++i) CHECK(p->value[i] == 0.0f);
    }
  }
  REQUIRE(count >= 100000);  // law-of-large-numbers check needs the sample size
  CHECK(std::fabs(sum / static_cast<double>(count)) < 0.001);
}

TEST_CASE("encoder shape ladder halves each side") {
  Xoshiro256 rng(2);
  const Tensor<float> x = random_overhead_batch(2, rng);
  for (Variant v : {Variant::low, Variant::mid, Variant::high, Variant::concat}) {
    Generator<float> gen(GeneratorArch::from_config(tiny_config(v)), Seed{3});
    const auto maps = gen.encode(x, nn::Mode::eval);
    const int depth = GeneratorArch::encoder_depth(v);
    REQUIRE(static_cast<int>(maps.size()) == depth);
    int side = kOverheadSize;
    const int base[4] = {8, 16, 32, 64};
    for (int l = 0; l < depth; ++l) {
      side /= 2;
      CHECK(maps[static_cast<std::size_t>(l)].shape() ==
            std::vector<int>{2, base[l], side, side});
    }
  }
}

TEST_CASE("paper-scale profile shapes match the width schedule") {
  GeneratorConfig cfg;
  cfg.variant = Variant::concat;
  cfg.width_multiplier = 8;
  Generator<float> gen(GeneratorArch::from_config(cfg), Seed{4});
  Xoshiro256 rng(5);
  const Tensor<float> x = random_overhead_batch(1, rng);
  const auto maps = gen.encode(x, nn::Mode::eval);
  CHECK(maps[1].shape() == std::vector<int>{1, 128, 32, 32});
  CHECK(maps[3].shape() == std::vector<int>{1, 512, 8, 8});
  const Tensor<float> block = gen.condition_block(x, nn::Mode::eval);
  CHECK(block.shape() == std::vector<int>{1, 896, 4, 4});  // 128 + 256 + 512
}

TEST_CASE("condition block channels per variant") {
  Xoshiro256 rng(6);
  const Tensor<float> x = random_overhead_batch(1, rng);
  std::map<Variant, int> expect{{Variant::low, 16}, {Variant::mid, 32}, {Variant::high, 64}};
  int sum = 0;
  for (auto [v, channels] : expect) {
    Generator<float> gen(GeneratorArch::from_config(tiny_config(v)), Seed{7});
    const Tensor<float> block = gen.condition_block(x, nn::Mode::eval);
    CHECK(block.shape() == std::vector<int>{1, channels, 4, 4});
    sum += channels;
  }
  Generator<float> gen(GeneratorArch::from_config(tiny_config(Variant::concat)), Seed{7});
  CHECK(gen.condition_block(x, nn::Mode::eval).dim(1) == sum);
}

TEST_CASE("crop_center equals the index-loop oracle on all even sizes 4..64") {
  Xoshiro256 rng(8);
  for (int side = 4; side <= 64; side += 2) {
    Tensor<float> fmap({1, 2, side, side});
    for (std::size_t i = 0; i < fmap.numel(); ++i) fmap[i] = rng.uniform_float();
    const Tensor<float> crop = crop_center(fmap, 4);
    // Oracle: iterate all indices, keep those inside the center window.
    const int y0 = side / 2 - 2;
    for (int c = 0; c < 2; ++c) {
      for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
          const bool inside = y >= y0 && y < y0 + 4 && x >= y0 && x < y0 + 4;
          if (inside) {
            CHECK(crop.at(0, c, y - y0, x - y0) == fmap.at(0, c, y, x));
          }
        }
      }
    }
  }
}

TEST_CASE("crop_center window positions match the center arithmetic") {
  // 8x8 map, crop 4 -> rows/cols 2..5; 32x32 -> 14..17; 4x4 -> identity.
  Tensor<float> m8({1, 1, 8, 8});
  for (std::size_t i = 0; i < m8.numel(); ++i) m8[i] = static_cast<float>(i);
  const Tensor<float> c8 = crop_center(m8, 4);
  CHECK(c8.at(0, 0, 0, 0) == m8.at(0, 0, 2, 2));
  CHECK(c8.at(0, 0, 3, 3) == m8.at(0, 0, 5, 5));

  Tensor<float> m32({1, 1, 32, 32});
  for (std::size_t i = 0; i < m32.numel(); ++i) m32[i] = static_cast<float>(i);
  const Tensor<float> c32 = crop_center(m32, 4);
  CHECK(c32.at(0, 0, 0, 0) == m32.at(0, 0, 14, 14));
  CHECK(c32.at(0, 0, 3, 3) == m32.at(0, 0, 17, 17));

  Tensor<float> m4({1, 1, 4, 4});
  for (std::size_t i = 0; i < m4.numel(); ++i) m4[i] = static_cast<float>(i);
  CHECK(crop_center(m4, 4).bit_equal(m4));

  Tensor<float> m2({1, 1, 2, 2});
  CHECK_THROWS_AS(crop_center(m2, 4), ValidationError);
}

TEST_CASE("variant equivalence: concat's first channels equal the low block") {
  Xoshiro256 rng(9);
  const Tensor<float> x = random_overhead_batch(2, rng);
  Generator<float> concat_gen(GeneratorArch::from_config(tiny_config(Variant::concat)), Seed{10});
  Generator<float> low_gen(GeneratorArch::from_config(tiny_config(Variant::low)), Seed{11});

  // Copy the shared encoder layers (1-2) from the concat model into the low
  // model, running stats included.
  std::map<std::string, nn::Param<float>*> low_params;
  for (auto* p : low_gen.params()) low_params[p->name] = p;
  for (auto* p : concat_gen.params()) {
    auto it = low_params.find(p->name);
    if (it != low_params.end() && (p->name.find("enc1") != std::string::npos ||
                                   p->name.find("enc2") != std::string::npos)) {
      it->second->value = p->value;
    }
  }

  const Tensor<float> concat_block = concat_gen.condition_block(x, nn::Mode::eval);
  const Tensor<float> low_block = low_gen.condition_block(x, nn::Mode::eval);
  REQUIRE(low_block.dim(1) == 16);
  for (int b = 0; b < 2; ++b) {
    for (int c = 0; c < 16; ++c) {
      for (int y = 0; y < 4; ++y) {
        for (int xx = 0; xx < 4; ++xx) {
          CHECK(concat_block.at(b, c, y, xx) == low_block.at(b, c, y, xx));
        }
      }
    }
  }
}

TEST_CASE("zero-weight generator emits an all-zero image") {
  Generator<float> gen(GeneratorArch::from_config(tiny_config(Variant::concat)), Seed{12});
  for (auto* p : gen.params()) {
    if (p->name.find("running_var") != std::string::npos) continue;  // stays 1
    if (p->name.find(".bn.gamma") != std::string::npos) continue;    // scale irrelevant on zeros
    p->value.set_zero();
  }
  Xoshiro256 rng(13);
  const Tensor<float> x = random_overhead_batch(1, rng);
  const Tensor<float> y = gen.forward(x, nn::Mode::eval);
  CHECK(y.shape() == std::vector<int>{1, 3, kGroundSize, kGroundSize});
  for (std::size_t i = 0; i < y.numel(); ++i) CHECK(y[i] == 0.0f);
}

TEST_CASE("generated images stay inside [-1,1] for random models") {
  Xoshiro256 rng(14);
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Generator<float> gen(GeneratorArch::from_config(tiny_config(Variant::concat)), Seed{seed});
    const Tensor<float> y = gen.forward(random_overhead_batch(1, rng), nn::Mode::eval);
    float max_abs = 0.0f;
    for (std::size_t i = 0; i < y.numel(); ++i) max_abs = std::max(max_abs, std::fabs(y[i]));
    CHECK(max_abs <= 1.0f);
  }
}

TEST_CASE("eval-mode generate is pure") {
  Generator<float> gen(GeneratorArch::from_config(tiny_config(Variant::concat)), Seed{15});
  const auto ds = scene::make_dataset(Seed{16}, 2, 0.5);
  const GroundImage a = generate(gen, ds[0].overhead);
  const GroundImage b = generate(gen, ds[0].overhead);
  CHECK(a.bit_equal(b));
}

TEST_CASE("decode maps a conditioning block to a 64x64 image through tanh") {
  Generator<float> gen(GeneratorArch::from_config(tiny_config(Variant::low)), Seed{18});
  Tensor<float> block({2, 16, 4, 4});
  Xoshiro256 rng(19);
  for (std::size_t i = 0; i < block.numel(); ++i) block[i] = rng.uniform_float() - 0.5f;
  const Tensor<float> y = gen.decode(block, nn::Mode::eval);
  CHECK(y.shape() == std::vector<int>{2, 3, 64, 64});
}

TEST_CASE("config validation rejects bad settings") {
  GeneratorConfig cfg = tiny_config(Variant::concat);
  cfg.kernel_size = 4;
  CHECK_THROWS_AS(GeneratorArch::from_config(cfg), ValidationError);
  cfg.kernel_size = 5;
  cfg.crop_size = 9;  // deepest tapped map is 8x8
  CHECK_THROWS_AS(GeneratorArch::from_config(cfg), ValidationError);
  cfg.crop_size = 4;
  cfg.width_multiplier = 0;
  CHECK_THROWS_AS(GeneratorArch::from_config(cfg), ValidationError);
}

TEST_CASE("non-finite activations fault with the layer name") {
  Generator<float> gen(GeneratorArch::from_config(tiny_config(Variant::low)), Seed{20});
  for (auto* p : gen.params()) {
    if (p->name == "gen.enc2.conv.weight") p->value[0] = std::nanf("");
  }
  Xoshiro256 rng(21);
  try {
    gen.forward(random_overhead_batch(1, rng), nn::Mode::eval);
    FAIL("expected a fault");
  } catch (const NonFiniteError& e) {
    CHECK(std::string(e.what()).find("gen.enc2") != std::string::npos);
  }
}
