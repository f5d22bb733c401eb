#pragma once

#include <cstdint>
#include <vector>

#include "oqa/extractor.hpp"
#include "oqa/mat.hpp"
#include "oqa/tape.hpp"

namespace oqa {

// Attention layout. Standard applies the softmax weights of QᵀK/√d to V;
// AsPrinted scores queries against V instead of K (for comparison runs)
// and leaves the key projection unused.
enum class AttentionMode { Standard, AsPrinted };

AttentionMode attention_mode_from_name(const std::string& s);

// Per-head query/key/value projections. Each head maps a (C/M)-row slice
// of the feature matrix through three biased linear layers of size
// (C/M)×(C/M).
struct RqaParams {
  int heads = 4;
  int dim = 64;  // C; heads must divide dim
  std::vector<Mat> wq, bq, wk, bk, wv, bv;

  int head_dim() const { return dim / heads; }

  static RqaParams init(int feature_dim, int heads, uint64_t seed);
  std::vector<Mat> tensors() const;  // [wq,bq,wk,bk,wv,bv] per head
  static RqaParams from_tensors(const std::vector<Mat>& t);
};

// Per-image templates T (C×N, column i belongs to image i) and the pooled
// class template t_bar (column mean of T).
struct TemplateSet {
  Mat T;
  Mat t_bar;
};

// Multi-head scaled dot-product template synthesis over a feature group
// F (C×N, N ≥ 1). Pure; safe for concurrent use on frozen params.
TemplateSet synthesize_templates(const RqaParams& p, const Mat& F,
                                 AttentionMode mode);

struct RqaLossParts {
  double recog = 0.0;
  double consis = 0.0;
  double lambda_c = 1.0;
  double total = 0.0;
};

// recog: mean cross-entropy of the frozen head on each template column;
// consis: 2/(N(N-1)) · Σ_{i<j} MSE(T_i, T_j). All labels must agree.
RqaLossParts rqa_loss(const TemplateSet& ts, const std::vector<int>& labels,
                      const ExtractorParams& extractor, double lambda_c);

// Cosine of the pooled template and a feature column.
double relative_score(const Mat& t_bar, const Mat& f);

// Affine map of a cosine into (0,1) used wherever scores feed the
// absolute stage.
inline double to_unit_range(double cosine_value) { return (cosine_value + 1.0) / 2.0; }

// to_unit_range(relative_score(...)), falling back to the neutral 0.5 when
// either vector has zero norm (all-relu features can collapse to zero on
// destroyed images).
double unit_relative_score(const Mat& t_bar, const Mat& f);

// --- tape builders used by training and gradient checks ---

struct RqaParamIds {
  std::vector<NodeId> wq, bq, wk, bk, wv, bv;
};

RqaParamIds place_rqa_params(Tape& t, const std::vector<Mat>& tensors, int heads);

NodeId templates_graph(Tape& t, const RqaParamIds& ids, int heads, NodeId F,
                       AttentionMode mode);

// Returns the total loss node; recog/consis output nodes are optional.
NodeId rqa_loss_graph(Tape& t, const RqaParamIds& ids, int heads, NodeId F,
                      const std::vector<int>& labels, NodeId w_head, NodeId b_head,
                      double lambda_c, AttentionMode mode,
                      NodeId* recog_out = nullptr, NodeId* consis_out = nullptr);

// --- training ---

struct RqaTrainConfig {
  int epochs = 400;
  int steps_per_epoch = 8;
  int batch = 32;  // triplets per step
  double lr = 5e-4;
  double lr_decay = 0.94;
  int decay_every = 200;  // epochs
  double lambda_c = 1.0;
  AttentionMode mode = AttentionMode::Standard;
};

struct RqaEpoch {
  double lr = 0.0;
  double total = 0.0;
  double recog = 0.0;
  double consis = 0.0;
};

// Trains the projections on same-class feature triplets drawn from the
// columns of `feats` (C×N with labels per column); the extractor head
// stays frozen.
RqaParams train_rqa(RqaParams params, const Mat& feats, const std::vector<int>& labels,
                    const ExtractorParams& extractor, const RqaTrainConfig& cfg,
                    uint64_t seed, std::vector<RqaEpoch>* history = nullptr);

// Pooled template per class, synthesized from up to `per_class` seeded
// reference columns of that class. Classes are 0..9; throws
// ParameterError when a class has no columns.
std::vector<Mat> build_class_templates(const RqaParams& p, const Mat& feats,
                                       const std::vector<int>& labels, int per_class,
                                       uint64_t seed, AttentionMode mode);

}  // namespace oqa
