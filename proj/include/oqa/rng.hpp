#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace oqa {

// Seeded generator used for every random decision in the project.
// All draws go through explicit algorithms (splitmix64 core, Box-Muller
// normals, rejection-sampled integers) instead of std::*_distribution,
// so a seed maps to one stream regardless of standard library version.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed), seed_(seed) {}

  uint64_t next_u64();

  // Uniform in [0, 1) with 53 random mantissa bits.
  double uniform();
  double uniform(double lo, double hi);

  // Uniform integer in [lo, hi], both bounds inclusive. Unbiased.
  int uniform_int(int lo, int hi);

  // Standard normal.
  double normal();

  // Independent stream identified by a salt; depends only on the seed,
  // not on how much of this stream has been consumed.
  Rng derive(uint64_t salt) const;

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[static_cast<size_t>(i)],
                v[static_cast<size_t>(uniform_int(0, i))]);
    }
  }

  // k distinct values from {0, ..., n-1}, in draw order.
  std::vector<int> sample_without_replacement(int n, int k);

 private:
  uint64_t state_;
  uint64_t seed_;
};

}  // namespace oqa
