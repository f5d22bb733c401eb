#include "oqa/glyphs.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "oqa/rng.hpp"

namespace oqa {

namespace {

struct Point {
  double x, y;
};

// Corner order: 0 top-left, 1 top-right, 2 mid-left, 3 mid-right,
// 4 bottom-left, 5 bottom-right.
constexpr int kSegCorner[7][2] = {
    {0, 1},  // a: top
    {1, 3},  // b: upper right
    {3, 5},  // c: lower right
    {4, 5},  // d: bottom
    {2, 4},  // e: lower left
    {0, 2},  // f: upper left
    {2, 3},  // g: middle
};

// Bit i set = segment i present (a..g = bit 0..6).
constexpr uint8_t kDigitSegs[10] = {
    0b0111111,  // 0
    0b0000110,  // 1
    0b1011011,  // 2
    0b1001111,  // 3
    0b1100110,  // 4
    0b1101101,  // 5
    0b1111101,  // 6
    0b0000111,  // 7
    0b1111111,  // 8
    0b1101111,  // 9
};

double point_segment_dist(const Point& p, const Point& a, const Point& b) {
  const double vx = b.x - a.x;
  const double vy = b.y - a.y;
  const double wx = p.x - a.x;
  const double wy = p.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? (wx * vx + wy * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = p.x - (a.x + t * vx);
  const double dy = p.y - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

GrayImage render_glyph(int digit, uint64_t seed) {
  if (digit < 0 || digit > 9)
    throw ParameterError("render_glyph: digit must be 0-9, got " +
                         std::to_string(digit));
  Rng rng(seed);

  // Base seven-segment corner grid, jittered per sample. Jitter is kept
  // small so class clusters stay dense relative to degradation effects.
  std::array<Point, 6> base = {{{8, 5}, {20, 5}, {8, 14}, {20, 14}, {8, 23}, {20, 23}}};
  const double scale = rng.uniform(0.90, 1.06);
  const double dx = rng.uniform(-1.2, 1.2);
  const double dy = rng.uniform(-0.9, 0.9);
  std::array<Point, 6> corner;
  for (size_t i = 0; i < base.size(); ++i) {
    corner[i].x = 14.0 + scale * (base[i].x - 14.0) + dx + rng.uniform(-0.8, 0.8);
    corner[i].y = 14.0 + scale * (base[i].y - 14.0) + dy + rng.uniform(-0.8, 0.8);
  }
  const double thickness = rng.uniform(1.8, 2.5);

  const uint8_t segs = kDigitSegs[digit];
  GrayImage img(28, 28);
  for (int y = 0; y < 28; ++y) {
    for (int x = 0; x < 28; ++x) {
      const Point p{x + 0.5, y + 0.5};
      double d = 1e9;
      for (int s = 0; s < 7; ++s) {
        if (!(segs & (1u << s))) continue;
        d = std::min(d, point_segment_dist(p, corner[static_cast<size_t>(kSegCorner[s][0])],
                                           corner[static_cast<size_t>(kSegCorner[s][1])]));
      }
      // Full intensity inside the stroke, 1px linear falloff at the edge.
      const double cover = std::clamp(thickness / 2.0 + 0.5 - d, 0.0, 1.0);
      img.at(x, y) = static_cast<uint8_t>(std::lround(255.0 * cover));
    }
  }
  return img;
}

}  // namespace oqa
