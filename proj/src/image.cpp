#include "oqa/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace oqa {

std::vector<double> gaussian_kernel(int k) {
  if (k < 3 || k > 19 || k % 2 == 0)
    throw ParameterError("gaussian kernel size must be odd and in [3,19], got " +
                         std::to_string(k));
  const double sigma = k / 6.0;
  const int r = k / 2;
  std::vector<double> w(static_cast<size_t>(k));
  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    const double d = i - r;
    w[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += w[static_cast<size_t>(i)];
  }
  for (double& x : w) x /= sum;
  return w;
}

GrayImage gaussian_blur(const GrayImage& img, int k) {
  const std::vector<double> w = gaussian_kernel(k);
  const int r = k / 2;
  const int W = img.width;
  const int H = img.height;

  std::vector<double> horiz(static_cast<size_t>(W) * H);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int t = -r; t <= r; ++t) {
        const int xx = std::clamp(x + t, 0, W - 1);
        acc += w[static_cast<size_t>(t + r)] * img.at(xx, y);
      }
      horiz[static_cast<size_t>(y) * W + x] = acc;
    }
  }

  GrayImage out(W, H);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int t = -r; t <= r; ++t) {
        const int yy = std::clamp(y + t, 0, H - 1);
        acc += w[static_cast<size_t>(t + r)] * horiz[static_cast<size_t>(yy) * W + x];
      }
      out.at(x, y) =
          static_cast<uint8_t>(std::clamp<long>(std::lround(acc), 0, 255));
    }
  }
  return out;
}

GrayImage illum_affine(const GrayImage& img, double contrast, double intensity) {
  GrayImage out(img.width, img.height);
  for (size_t i = 0; i < img.pixels.size(); ++i) {
    const double v = contrast * img.pixels[i] + intensity;
    out.pixels[i] = static_cast<uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
  }
  return out;
}

GrayImage adjust_illumination(const GrayImage& img, double contrast,
                              double intensity) {
  if (contrast < 0.4 || contrast > 0.9)
    throw ParameterError("contrast must be in [0.4,0.9], got " +
                         std::to_string(contrast));
  if (intensity < -160.0 || intensity > 250.0)
    throw ParameterError("intensity must be in [-160,250], got " +
                         std::to_string(intensity));
  return illum_affine(img, contrast, intensity);
}

}  // namespace oqa
