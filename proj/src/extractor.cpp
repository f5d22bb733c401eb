#include "oqa/extractor.hpp"

#include <algorithm>
#include <cmath>

#include "oqa/adam.hpp"
#include "oqa/rng.hpp"
#include "oqa/tape.hpp"

namespace oqa {

std::vector<Mat> ExtractorParams::tensors() const {
  return {w1, b1, w2, b2, w_head, b_head};
}

ExtractorParams ExtractorParams::from_tensors(const std::vector<Mat>& t) {
  if (t.size() != 6)
    throw ConsistencyError("extractor checkpoint: expected 6 tensors, got " +
                           std::to_string(t.size()));
  ExtractorParams p;
  p.w1 = t[0];
  p.b1 = t[1];
  p.w2 = t[2];
  p.b2 = t[3];
  p.w_head = t[4];
  p.b_head = t[5];
  return p;
}

Mat images_to_columns(const std::vector<const GrayImage*>& images) {
  if (images.empty()) throw ParameterError("images_to_columns: no images");
  const int dim = images[0]->width * images[0]->height;
  Mat x(dim, static_cast<int>(images.size()));
  for (size_t j = 0; j < images.size(); ++j) {
    const GrayImage& im = *images[j];
    if (im.width * im.height != dim)
      throw ConsistencyError("images_to_columns: mixed image sizes");
    // Per-image standardization: affine illumination changes cancel (up to
    // clamping) and blur turns into a direction change instead of a pure
    // magnitude loss. Constant images map to the zero vector.
    double mean = 0.0;
    for (int i = 0; i < dim; ++i) mean += im.pixels[static_cast<size_t>(i)];
    mean /= 255.0 * dim;
    double var = 0.0;
    for (int i = 0; i < dim; ++i) {
      const double v = im.pixels[static_cast<size_t>(i)] / 255.0 - mean;
      var += v * v;
    }
    const double sd = std::sqrt(var / dim);
    const double inv = sd > 1e-9 ? 1.0 / sd : 0.0;
    for (int i = 0; i < dim; ++i)
      x.at(i, static_cast<int>(j)) =
          inv * (im.pixels[static_cast<size_t>(i)] / 255.0 - mean);
  }
  return x;
}

namespace {

Mat relu_mat(Mat m) {
  for (double& v : m.data) v = v > 0.0 ? v : 0.0;
  return m;
}

Mat add_col_mat(Mat m, const Mat& bias) {
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) m.at(i, j) += bias.at(i, 0);
  return m;
}

Mat features_from_columns(const ExtractorParams& p, const Mat& x) {
  const Mat h1 = relu_mat(add_col_mat(matmul(p.w1, x), p.b1));
  return relu_mat(add_col_mat(matmul(p.w2, h1), p.b2));
}

}  // namespace

Mat features(const ExtractorParams& p, const std::vector<const GrayImage*>& images) {
  // Chunked so huge batches do not hold a full 784×N matrix at once.
  constexpr size_t kChunk = 2048;
  Mat out(p.feature_dim(), static_cast<int>(images.size()));
  for (size_t start = 0; start < images.size(); start += kChunk) {
    const size_t stop = std::min(images.size(), start + kChunk);
    std::vector<const GrayImage*> part(images.begin() + static_cast<long>(start),
                                       images.begin() + static_cast<long>(stop));
    const Mat f = features_from_columns(p, images_to_columns(part));
    for (int i = 0; i < f.rows; ++i)
      for (int j = 0; j < f.cols; ++j)
        out.at(i, static_cast<int>(start) + j) = f.at(i, j);
  }
  return out;
}

Mat head_logits(const ExtractorParams& p, const Mat& feats) {
  return add_col_mat(matmul(p.w_head, feats), p.b_head);
}

Prediction recognize(const ExtractorParams& p, const GrayImage& image) {
  const Mat f = features(p, {&image});
  Prediction pred;
  pred.logits = head_logits(p, f);
  pred.predicted = 0;
  for (int i = 1; i < pred.logits.rows; ++i)
    if (pred.logits.at(i, 0) > pred.logits.at(pred.predicted, 0)) pred.predicted = i;
  const Mat probs = softmax_rows(transpose(pred.logits));
  pred.confidence = probs.at(0, pred.predicted);
  return pred;
}

ExtractorParams pretrain(const CleanSet& data, const std::vector<int>& train_ids,
                         const PretrainConfig& cfg, uint64_t seed,
                         std::vector<PretrainEpoch>* history) {
  if (train_ids.empty()) throw ParameterError("pretrain: empty training set");
  for (int id : train_ids)
    if (id < 0 || static_cast<size_t>(id) >= data.size())
      throw ParameterError("pretrain: train id out of range");

  Rng rng(seed);
  const int in_dim = data.images[0].width * data.images[0].height;
  ExtractorParams p;
  p.w1 = Mat::random_normal(cfg.hidden, in_dim,
                            1.0 / std::sqrt(static_cast<double>(in_dim)), rng);
  p.b1 = Mat(cfg.hidden, 1);
  p.w2 = Mat::random_normal(cfg.feature_dim, cfg.hidden,
                            1.0 / std::sqrt(static_cast<double>(cfg.hidden)), rng);
  p.b2 = Mat(cfg.feature_dim, 1);
  p.w_head = Mat::random_normal(10, cfg.feature_dim,
                                1.0 / std::sqrt(static_cast<double>(cfg.feature_dim)), rng);
  p.b_head = Mat(10, 1);

  std::vector<Mat> params = p.tensors();
  AdamState adam(params, AdamConfig{.lr = cfg.lr});

  std::vector<int> order = train_ids;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    int n_batches = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch)) {
      const size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg.batch));
      std::vector<const GrayImage*> imgs;
      std::vector<int> labels;
      for (size_t i = start; i < stop; ++i) {
        imgs.push_back(&data.images[static_cast<size_t>(order[i])]);
        labels.push_back(data.labels[static_cast<size_t>(order[i])]);
      }
      Tape t;
      const NodeId x = t.constant(images_to_columns(imgs));
      const NodeId w1 = t.param(params[0]);
      const NodeId b1 = t.param(params[1]);
      const NodeId w2 = t.param(params[2]);
      const NodeId b2 = t.param(params[3]);
      const NodeId wh = t.param(params[4]);
      const NodeId bh = t.param(params[5]);
      const NodeId h1 = t.relu(t.add_col(t.matmul(w1, x), b1));
      const NodeId feat = t.relu(t.add_col(t.matmul(w2, h1), b2));
      const NodeId logits = t.add_col(t.matmul(wh, feat), bh);
      const NodeId loss = t.nll_rows(t.log_softmax_rows(t.transp(logits)), labels);
      t.backward(loss);
      std::vector<Mat> grads = {t.grad(w1), t.grad(b1), t.grad(w2),
                                t.grad(b2), t.grad(wh), t.grad(bh)};
      adam.step(params, grads);
      epoch_loss += t.value(loss).at(0, 0);
      ++n_batches;
    }
    if (history) {
      // Accuracy over the training ids with current weights.
      ExtractorParams cur = ExtractorParams::from_tensors(params);
      std::vector<const GrayImage*> imgs;
      for (int id : train_ids) imgs.push_back(&data.images[static_cast<size_t>(id)]);
      const Mat logits = head_logits(cur, features(cur, imgs));
      int hits = 0;
      for (int j = 0; j < logits.cols; ++j) {
        int arg = 0;
        for (int i = 1; i < logits.rows; ++i)
          if (logits.at(i, j) > logits.at(arg, j)) arg = i;
        if (arg == data.labels[static_cast<size_t>(train_ids[static_cast<size_t>(j)])])
          ++hits;
      }
      history->push_back({epoch_loss / std::max(1, n_batches),
                          static_cast<double>(hits) / static_cast<double>(train_ids.size())});
    }
  }
  return ExtractorParams::from_tensors(params);
}

}  // namespace oqa
