#include "oqa/adam.hpp"

#include <cmath>

namespace oqa {

AdamState::AdamState(const std::vector<Mat>& params, AdamConfig cfg) : cfg_(cfg) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Mat& p : params) {
    m_.emplace_back(p.rows, p.cols);
    v_.emplace_back(p.rows, p.cols);
  }
}

void AdamState::step(std::vector<Mat>& params, const std::vector<Mat>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw DimensionError("adam: parameter list size changed");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    Mat& p = params[i];
    const Mat& g = grads[i];
    if (!p.same_shape(m_[i]) || !g.same_shape(m_[i]))
      throw DimensionError("adam: shape mismatch, param " + shape_str(p) +
                           ", grad " + shape_str(g) + ", state " +
                           shape_str(m_[i]));
    for (size_t k = 0; k < p.data.size(); ++k) {
      const double gk = g.data[k];
      m_[i].data[k] = cfg_.beta1 * m_[i].data[k] + (1.0 - cfg_.beta1) * gk;
      v_[i].data[k] = cfg_.beta2 * v_[i].data[k] + (1.0 - cfg_.beta2) * gk * gk;
      const double mhat = m_[i].data[k] / bc1;
      const double vhat = v_[i].data[k] / bc2;
      double delta = mhat / (std::sqrt(vhat) + cfg_.eps);
      if (cfg_.weight_decay != 0.0) delta += cfg_.weight_decay * p.data[k];
      p.data[k] -= cfg_.lr * delta;
    }
  }
}

}  // namespace oqa
