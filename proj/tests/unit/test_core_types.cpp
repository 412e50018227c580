#include <doctest.h>

#include <cmath>

#include "crossview/errors.hpp"
#include "crossview/image.hpp"

using namespace crossview;

TEST_CASE("normalize hits the range endpoints exactly") {
  CHECK(normalize_value(0) == -1.0f);
  CHECK(normalize_value(255) == 1.0f);
  // 127/127.5 - 1 = -1/255
  CHECK(normalize_value(127) == doctest::Approx(-0.00392156862745098).epsilon(1e-6));
}

TEST_CASE("normalize rejects out-of-range values with the coordinate") {
  std::vector<int> hwc(2 * 2 * 3, 10);
  hwc[(1 * 2 + 0) * 3 + 2] = 256;  // (y=1, x=0, channel=2)
  try {
    normalize_image(hwc, 2, 2);
    FAIL("expected rejection");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("256") != std::string::npos);
    CHECK(msg.find("y=1") != std::string::npos);
    CHECK(msg.find("x=0") != std::string::npos);
    CHECK(msg.find("channel=2") != std::string::npos);
  }
  hwc[(1 * 2 + 0) * 3 + 2] = -1;
  CHECK_THROWS_AS(normalize_image(hwc, 2, 2), ValidationError);
}

TEST_CASE("denormalize clamps and hits the endpoints") {
  CHECK(denormalize_value(-1.0f) == 0);
  CHECK(denormalize_value(1.0f) == 255);
  CHECK(denormalize_value(-1.5f) == 0);
  CHECK(denormalize_value(2.0f) == 255);
  CHECK(denormalize_value(0.0f) == 128);  // round(127.5) away from zero
}

TEST_CASE("normalize/denormalize round-trips every byte value") {
  for (int b = 0; b <= 255; ++b) {
    CHECK(denormalize_value(normalize_value(b)) == static_cast<std::uint8_t>(b));
  }
}

TEST_CASE("normalize is strictly monotonic over bytes") {
  float prev = normalize_value(0);
  for (int b = 1; b <= 255; ++b) {
    const float cur = normalize_value(b);
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("image types validate shape and range") {
  Tensor<float> ok({3, 64, 64});
  CHECK_NOTHROW(GroundImage::from_chw(ok));
  Tensor<float> wrong({3, 63, 64});
  CHECK_THROWS_AS(GroundImage::from_chw(wrong), ValidationError);
  Tensor<float> out_of_range({3, 64, 64});
  out_of_range[5] = 1.5f;
  CHECK_THROWS_AS(GroundImage::from_chw(out_of_range), ValidationError);
  Tensor<float> non_finite({3, 128, 128});
  non_finite[0] = std::nanf("");
  CHECK_THROWS_AS(OverheadImage::from_chw(non_finite), ValidationError);
}

TEST_CASE("byte image round trip through normalize_image/denormalize_image") {
  ByteImage img;
  img.height = 4;
  img.width = 5;
  img.hwc.resize(4 * 5 * 3);
  for (std::size_t i = 0; i < img.hwc.size(); ++i) {
    img.hwc[i] = static_cast<std::uint8_t>((i * 37) % 256);
  }
  const ByteImage back = denormalize_image(normalize_image(img));
  CHECK(back.hwc == img.hwc);
}
