#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oqa/glyphs.hpp"
#include "oqa/image.hpp"

using namespace oqa;

namespace {

// Direct 2-D convolution with the outer-product kernel; the independent
// oracle for the separable implementation.
GrayImage blur_oracle(const GrayImage& img, int k) {
  const std::vector<double> w = gaussian_kernel(k);
  const int r = k / 2;
  GrayImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = std::clamp(x + dx, 0, img.width - 1);
          const int yy = std::clamp(y + dy, 0, img.height - 1);
          acc += w[(size_t)(dx + r)] * w[(size_t)(dy + r)] * img.at(xx, yy);
        }
      }
      out.at(x, y) = (uint8_t)std::clamp<long>(std::lround(acc), 0, 255);
    }
  }
  return out;
}

double pixel_variance(const GrayImage& img) {
  double mean = 0.0;
  for (uint8_t p : img.pixels) mean += p;
  mean /= (double)img.pixels.size();
  double var = 0.0;
  for (uint8_t p : img.pixels) var += (p - mean) * (p - mean);
  return var / (double)img.pixels.size();
}

}  // namespace

TEST_CASE("gaussian kernel is normalized") {
  for (int k = 3; k <= 19; k += 2) {
    const auto w = gaussian_kernel(k);
    CHECK((int)w.size() == k);
    double sum = 0.0;
    for (double v : w) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(gaussian_kernel(4), ParameterError);
  CHECK_THROWS_AS(gaussian_kernel(1), ParameterError);
  CHECK_THROWS_AS(gaussian_kernel(21), ParameterError);
}

TEST_CASE("blur keeps constant images constant") {
  GrayImage img(16, 16);
  std::fill(img.pixels.begin(), img.pixels.end(), 137);
  for (int k = 3; k <= 19; k += 2) {
    const GrayImage out = gaussian_blur(img, k);
    for (uint8_t p : out.pixels) CHECK(p == 137);
  }
}

TEST_CASE("blur of a centered impulse matches the 2-D kernel") {
  GrayImage img(15, 15);
  img.at(7, 7) = 255;
  const GrayImage got = gaussian_blur(img, 3);
  const GrayImage want = blur_oracle(img, 3);
  for (size_t i = 0; i < got.pixels.size(); ++i) CHECK(got.pixels[i] == want.pixels[i]);
  // the center pixel carries the kernel peak
  const auto w = gaussian_kernel(3);
  CHECK(got.at(7, 7) == (uint8_t)std::lround(255.0 * w[1] * w[1]));
}

TEST_CASE("separable blur equals direct 2-D convolution on glyphs") {
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    const GrayImage img = render_glyph((int)(seed % 10), seed);
    for (int k : {3, 7, 19}) {
      const GrayImage got = gaussian_blur(img, k);
      const GrayImage want = blur_oracle(img, k);
      int mismatches = 0;
      for (size_t i = 0; i < got.pixels.size(); ++i)
        if (got.pixels[i] != want.pixels[i]) ++mismatches;
      CHECK(mismatches == 0);
    }
  }
}

TEST_CASE("stronger blur lowers pixel variance") {
  const GrayImage img = render_glyph(8, 42);
  CHECK(pixel_variance(gaussian_blur(img, 19)) < pixel_variance(gaussian_blur(img, 3)));
}

TEST_CASE("illumination map") {
  GrayImage img(4, 4);
  std::fill(img.pixels.begin(), img.pixels.end(), 100);

  // identity settings are outside the validated range; the raw map allows them
  const GrayImage same = illum_affine(img, 1.0, 0.0);
  for (size_t i = 0; i < img.pixels.size(); ++i) CHECK(same.pixels[i] == img.pixels[i]);

  GrayImage mid(2, 2);
  std::fill(mid.pixels.begin(), mid.pixels.end(), 128);
  const GrayImage up = adjust_illumination(mid, 0.9, 250.0);
  for (uint8_t p : up.pixels) CHECK(p == 255);

  const GrayImage down = adjust_illumination(img, 0.4, -160.0);
  for (uint8_t p : down.pixels) CHECK(p == 0);  // clamp(0.4*100 - 160) = 0

  CHECK_THROWS_AS(adjust_illumination(img, 1.0, 0.0), ParameterError);
  CHECK_THROWS_AS(adjust_illumination(img, 0.5, 300.0), ParameterError);
  CHECK_THROWS_AS(adjust_illumination(img, 0.3, 0.0), ParameterError);
}

TEST_CASE("glyph renderer is deterministic and class-distinct") {
  const GrayImage a1 = render_glyph(3, 99);
  const GrayImage a2 = render_glyph(3, 99);
  CHECK(a1.pixels == a2.pixels);

  const GrayImage b = render_glyph(8, 99);
  CHECK(a1.pixels != b.pixels);

  int ink = 0;
  for (uint8_t p : a1.pixels)
    if (p > 0) ++ink;
  CHECK(ink > 20);  // strokes actually drawn

  CHECK_THROWS_AS(render_glyph(10, 1), ParameterError);
  CHECK_THROWS_AS(render_glyph(-1, 1), ParameterError);
}
