#pragma once

#include <cstdint>
#include <vector>

#include "oqa/dataset.hpp"
#include "oqa/mat.hpp"

namespace oqa {

// Frozen recognition model: 784 → hidden → C with relu, plus a linear
// classification head C → 10. Penultimate activations are the features
// consumed by the quality modules; the head is reused by the RQA
// recognition loss.
struct ExtractorParams {
  Mat w1, b1;          // hidden×784, hidden×1
  Mat w2, b2;          // C×hidden, C×1
  Mat w_head, b_head;  // 10×C, 10×1

  int feature_dim() const { return w2.rows; }
  int hidden_dim() const { return w1.rows; }

  std::vector<Mat> tensors() const;
  static ExtractorParams from_tensors(const std::vector<Mat>& t);
};

struct PretrainConfig {
  int epochs = 40;
  int batch = 32;
  double lr = 1e-3;
  int hidden = 256;
  int feature_dim = 64;
};

struct PretrainEpoch {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Cross-entropy training with Adam on the clean images named by train_ids.
// Throws ParameterError on an empty training set.
ExtractorParams pretrain(const CleanSet& data, const std::vector<int>& train_ids,
                         const PretrainConfig& cfg, uint64_t seed,
                         std::vector<PretrainEpoch>* history = nullptr);

// Normalized pixel column (784×1 entries in [0,1]) for a batch of images.
Mat images_to_columns(const std::vector<const GrayImage*>& images);

// Penultimate activations, one column per image (C×N). Pure in (params, images).
Mat features(const ExtractorParams& p, const std::vector<const GrayImage*>& images);

// Head logits for a feature matrix (10×N).
Mat head_logits(const ExtractorParams& p, const Mat& feats);

struct Prediction {
  Mat logits;          // 10×1
  int predicted = 0;   // argmax, lowest index wins ties
  double confidence = 0.0;  // max softmax probability
};

Prediction recognize(const ExtractorParams& p, const GrayImage& image);

// -1 when the image is recognized as its label, +1 otherwise.
inline int correctness_indicator(const Prediction& pred, int label) {
  return pred.predicted == label ? -1 : +1;
}

}  // namespace oqa
