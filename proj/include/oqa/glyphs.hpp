#pragma once

#include <cstdint>

#include "oqa/image.hpp"

namespace oqa {

// Procedural 28×28 digit renderer used when no IDX dataset is available.
// Digits are drawn as jittered seven-segment strokes with anti-aliased
// edges; the same (digit, seed) pair always yields the same image.
GrayImage render_glyph(int digit, uint64_t seed);

}  // namespace oqa
