#pragma once

#include <cstdint>
#include <vector>

#include "oqa/mat.hpp"

namespace oqa {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled; applied directly to the parameter
};

// Bias-corrected Adam over a fixed list of parameter matrices.
class AdamState {
 public:
  AdamState(const std::vector<Mat>& params, AdamConfig cfg);

  // One update; grads[i] must have the shape of params[i].
  void step(std::vector<Mat>& params, const std::vector<Mat>& grads);

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  int64_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
};

}  // namespace oqa
