#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "oqa/extractor.hpp"
#include "oqa/mat.hpp"
#include "oqa/rqa.hpp"
#include "oqa/tape.hpp"

namespace oqa {

// Absolute scorer: C → 64 relu → 1 sigmoid, plus the quality anchor
// th = sigmoid(theta) learned jointly with the network.
struct AqaParams {
  Mat w1, b1;   // 64×C, 64×1
  Mat w2, b2;   // 1×64, 1×1
  Mat theta;    // 1×1

  int feature_dim() const { return w1.cols; }
  double th() const;

  static AqaParams init(int feature_dim, uint64_t seed);
  std::vector<Mat> tensors() const;  // [w1,b1,w2,b2,theta]
  static AqaParams from_tensors(const std::vector<Mat>& t);
};

struct AqaHyper {
  double eps = 0.02;
  double zeta = 0.01;
  double lambda_intra = 1.0;
  double lambda_a1 = 1.0;
  double lambda_a2 = 1.0;
};

// Score of a single feature column; strictly in (0,1).
double absolute_score(const AqaParams& p, const Mat& feat);

// Batched scores for C×N feature columns, in input order.
std::vector<double> absolute_scores(const AqaParams& p, const Mat& feats);

// One training unit: relative scores q, absolute scores Q, correctness
// indicators delta (all aligned by position), and the class id.
struct ScoreTriplet {
  std::array<double, 3> q{};
  std::array<double, 3> Q{};
  std::array<int, 3> delta{};
  int cls = 0;
};

// (1/M)·Σ relu(delta_i·(Q_i − th − eps)).
double align_loss(const std::vector<double>& Q, const std::vector<int>& delta,
                  double th, double eps);

// (1/3)·Σ_{i<j} relu(Δ(q_i,q_j)·(Q_i − Q_j − eps)); Δ = −1 when q_i > q_j,
// +1 otherwise (ties give +1).
double rank_loss(const std::array<double, 3>& q, const std::array<double, 3>& Q,
                 double eps);

// relu(Δ(d1_q,d2_q)·(d1_Q − d2_Q − eps)) over adjacent score gaps; an exact
// tie of the relative gaps short-circuits to 0.
double drank_loss(const std::array<double, 3>& q, const std::array<double, 3>& Q,
                  double eps);

struct EntropyValue {
  double d1 = 0.0;
  double d2 = 0.0;
  double e = 0.0;
};

// Quality distribution entropy of a score triplet: e = −r·ln(r) with
// r = min(D1,D2)/max(D1,D2); e = 0 when r = 0 or max(D1,D2) = 0.
EntropyValue entropy(const std::array<double, 3>& s);

// relu(Δ(e_rel_a,e_rel_b)·(e_abs_a − e_abs_b − zeta)) on precomputed
// entropies; relative ties short-circuit to 0.
double inter_hinge(double e_rel_a, double e_rel_b, double e_abs_a, double e_abs_b,
                   double zeta);

// inter_hinge over the entropies of two triplets from distinct classes.
double inter_loss(const ScoreTriplet& a, const ScoreTriplet& b, double zeta);

struct AqaLossParts {
  double align = 0.0;
  double rank = 0.0;
  double drank = 0.0;
  double inter = 0.0;
  double intra = 0.0;  // rank + lambda_intra·drank
  double total = 0.0;
};

// Batch means of every component; inter pairs index into `triplets`.
AqaLossParts aqa_total_loss(const std::vector<ScoreTriplet>& triplets,
                            const std::vector<std::pair<int, int>>& inter_pairs,
                            double th, const AqaHyper& hyper);

// Recognition confidence used as a quality score (baseline).
inline double pcw_score(const Prediction& pred) { return pred.confidence; }

// --- tape builder ---

struct AqaTripletInput {
  Mat features;  // C×3, one column per image
  std::array<double, 3> q{};
  std::array<int, 3> delta{};
  int cls = 0;
};

struct AqaParamIds {
  NodeId w1, b1, w2, b2, theta;
};

AqaParamIds place_aqa_params(Tape& t, const std::vector<Mat>& tensors);

struct AqaGraph {
  NodeId total, align, rank, drank, inter;
};

// Builds the full loss graph. When `kink_margins` is given, the absolute
// distance of every non-smooth site (hinge arguments, abs/min/max inputs,
// relu pre-activations, entropy ratio) is appended so callers can keep
// gradient checks away from kinks.
AqaGraph aqa_loss_graph(Tape& t, const AqaParamIds& ids,
                        const std::vector<AqaTripletInput>& triplets,
                        const std::vector<std::pair<int, int>>& inter_pairs,
                        const AqaHyper& hyper, bool use_intra, bool use_inter,
                        std::vector<double>* kink_margins = nullptr);

// --- training ---

struct AqaTrainConfig {
  int epochs = 300;
  int steps_per_epoch = 8;
  int batch = 32;  // triplets per step
  double lr = 1e-3;
  double weight_decay = 5e-4;
  AqaHyper hyper;
  bool use_intra = true;
  bool use_inter = true;
};

struct AqaEpoch {
  double lr = 0.0;
  double total = 0.0;
  double align = 0.0;
  double rank = 0.0;
  double drank = 0.0;
  double inter = 0.0;
  double th = 0.0;
};

// Trains the scorer on same-class triplets from the columns of `feats`.
// Relative scores come from triplet-synthesized RQA templates; delta is
// the per-column correctness indicator. Each batch triplet is paired with
// one uniformly chosen different-class triplet for the inter term.
AqaParams train_aqa(AqaParams params, const Mat& feats, const std::vector<int>& labels,
                    const std::vector<int>& delta, const RqaParams& rqa,
                    AttentionMode mode, const AqaTrainConfig& cfg, uint64_t seed,
                    std::vector<AqaEpoch>* history = nullptr);

}  // namespace oqa
