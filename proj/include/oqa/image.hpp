#pragma once

#include <cstdint>
#include <vector>

#include "oqa/errors.hpp"

namespace oqa {

// Single-channel image with 8-bit intensities, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h)
      : width(w), height(h), pixels(static_cast<size_t>(w) * static_cast<size_t>(h), 0) {}

  uint8_t at(int x, int y) const {
    return pixels[static_cast<size_t>(y) * width + x];
  }
  uint8_t& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
};

// Normalized 1-D Gaussian window of odd length k with sigma = k/6.
std::vector<double> gaussian_kernel(int k);

// Separable Gaussian blur, sigma = k/6, clamp-to-edge borders. Intermediate
// values stay in double precision; a single round+clamp happens at the end,
// so the result equals direct 2-D convolution with the outer-product kernel.
// k must be odd and in [3, 19].
GrayImage gaussian_blur(const GrayImage& img, int k);

// p' = clamp(round(contrast·p + intensity), 0, 255); no range validation.
GrayImage illum_affine(const GrayImage& img, double contrast, double intensity);

// Range-checked illumination change: contrast in [0.4, 0.9], intensity in
// [-160, 250].
GrayImage adjust_illumination(const GrayImage& img, double contrast,
                              double intensity);

}  // namespace oqa
