#include "oqa/aqa.hpp"

#include <algorithm>
#include <cmath>

#include "oqa/adam.hpp"
#include "oqa/rng.hpp"

namespace oqa {

namespace {

double relu_s(double x) { return x > 0.0 ? x : 0.0; }

double sigmoid_s(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// -1 when x > y, +1 otherwise (ties give +1).
double delta_sign(double x, double y) { return x > y ? -1.0 : 1.0; }

}  // namespace

double AqaParams::th() const { return sigmoid_s(theta.at(0, 0)); }

AqaParams AqaParams::init(int feature_dim, uint64_t seed) {
  if (feature_dim < 1) throw ConfigError("aqa: feature dim must be positive");
  Rng rng(seed);
  AqaParams p;
  p.w1 = Mat::random_normal(64, feature_dim,
                            1.0 / std::sqrt(static_cast<double>(feature_dim)), rng);
  p.b1 = Mat(64, 1);
  p.w2 = Mat::random_normal(1, 64, 1.0 / 8.0, rng);
  p.b2 = Mat(1, 1);
  p.theta = Mat(1, 1);  // th starts at 0.5
  return p;
}

std::vector<Mat> AqaParams::tensors() const { return {w1, b1, w2, b2, theta}; }

AqaParams AqaParams::from_tensors(const std::vector<Mat>& t) {
  if (t.size() != 5)
    throw ConsistencyError("aqa checkpoint: expected 5 tensors, got " +
                           std::to_string(t.size()));
  AqaParams p;
  p.w1 = t[0];
  p.b1 = t[1];
  p.w2 = t[2];
  p.b2 = t[3];
  p.theta = t[4];
  return p;
}

std::vector<double> absolute_scores(const AqaParams& p, const Mat& feats) {
  if (feats.rows != p.feature_dim())
    throw DimensionError("absolute_scores: features " + shape_str(feats) +
                         " vs params dim " + std::to_string(p.feature_dim()));
  Mat h = matmul(p.w1, feats);
  for (int i = 0; i < h.rows; ++i)
    for (int j = 0; j < h.cols; ++j) h.at(i, j) = relu_s(h.at(i, j) + p.b1.at(i, 0));
  std::vector<double> out(static_cast<size_t>(feats.cols));
  for (int j = 0; j < feats.cols; ++j) {
    double z = p.b2.at(0, 0);
    for (int i = 0; i < h.rows; ++i) z += p.w2.at(0, i) * h.at(i, j);
    out[static_cast<size_t>(j)] = sigmoid_s(z);
  }
  return out;
}

double absolute_score(const AqaParams& p, const Mat& feat) {
  if (feat.cols != 1)
    throw DimensionError("absolute_score: expected a column vector, got " +
                         shape_str(feat));
  return absolute_scores(p, feat)[0];
}

double align_loss(const std::vector<double>& Q, const std::vector<int>& delta,
                  double th, double eps) {
  if (Q.size() != delta.size())
    throw ContractError("align_loss: " + std::to_string(Q.size()) + " scores vs " +
                        std::to_string(delta.size()) + " indicators");
  if (Q.empty()) throw ContractError("align_loss: empty batch");
  double s = 0.0;
  for (size_t i = 0; i < Q.size(); ++i)
    s += relu_s(static_cast<double>(delta[i]) * (Q[i] - th - eps));
  return s / static_cast<double>(Q.size());
}

double rank_loss(const std::array<double, 3>& q, const std::array<double, 3>& Q,
                 double eps) {
  double s = 0.0;
  for (size_t i = 0; i < 3; ++i)
    for (size_t j = i + 1; j < 3; ++j)
      s += relu_s(delta_sign(q[i], q[j]) * (Q[i] - Q[j] - eps));
  return s / 3.0;
}

double drank_loss(const std::array<double, 3>& q, const std::array<double, 3>& Q,
                  double eps) {
  const double d1q = std::fabs(q[0] - q[1]);
  const double d2q = std::fabs(q[1] - q[2]);
  if (d1q == d2q) return 0.0;
  const double d1 = std::fabs(Q[0] - Q[1]);
  const double d2 = std::fabs(Q[1] - Q[2]);
  return relu_s(delta_sign(d1q, d2q) * (d1 - d2 - eps));
}

EntropyValue entropy(const std::array<double, 3>& s) {
  EntropyValue ev;
  ev.d1 = std::fabs(s[0] - s[1]);
  ev.d2 = std::fabs(s[1] - s[2]);
  const double mx = std::max(ev.d1, ev.d2);
  if (mx == 0.0) return ev;
  const double r = std::min(ev.d1, ev.d2) / mx;
  ev.e = r > 0.0 ? -(r * std::log(r)) : 0.0;
  return ev;
}

double inter_hinge(double e_rel_a, double e_rel_b, double e_abs_a, double e_abs_b,
                   double zeta) {
  if (e_rel_a == e_rel_b) return 0.0;
  return relu_s(delta_sign(e_rel_a, e_rel_b) * (e_abs_a - e_abs_b - zeta));
}

double inter_loss(const ScoreTriplet& a, const ScoreTriplet& b, double zeta) {
  return inter_hinge(entropy(a.q).e, entropy(b.q).e, entropy(a.Q).e, entropy(b.Q).e,
                     zeta);
}

AqaLossParts aqa_total_loss(const std::vector<ScoreTriplet>& triplets,
                            const std::vector<std::pair<int, int>>& inter_pairs,
                            double th, const AqaHyper& hyper) {
  if (triplets.empty()) throw ContractError("aqa_total_loss: empty batch");
  for (const auto& [a, b] : inter_pairs) {
    if (a < 0 || b < 0 || static_cast<size_t>(a) >= triplets.size() ||
        static_cast<size_t>(b) >= triplets.size())
      throw ContractError("aqa_total_loss: inter pair index out of range");
    if (triplets[static_cast<size_t>(a)].cls == triplets[static_cast<size_t>(b)].cls)
      throw ContractError("aqa_total_loss: inter pair from one class");
  }

  AqaLossParts parts;
  std::vector<double> all_scores;
  std::vector<int> all_delta;
  for (const ScoreTriplet& t : triplets)
    for (size_t k = 0; k < 3; ++k) {
      all_scores.push_back(t.Q[k]);
      all_delta.push_back(t.delta[k]);
    }
  parts.align = align_loss(all_scores, all_delta, th, hyper.eps);

  for (const ScoreTriplet& t : triplets) {
    parts.rank += rank_loss(t.q, t.Q, hyper.eps);
    parts.drank += drank_loss(t.q, t.Q, hyper.eps);
  }
  parts.rank /= static_cast<double>(triplets.size());
  parts.drank /= static_cast<double>(triplets.size());

  if (!inter_pairs.empty()) {
    for (const auto& [a, b] : inter_pairs)
      parts.inter += inter_loss(triplets[static_cast<size_t>(a)],
                                triplets[static_cast<size_t>(b)], hyper.zeta);
    parts.inter /= static_cast<double>(inter_pairs.size());
  }

  parts.intra = parts.rank + hyper.lambda_intra * parts.drank;
  parts.total = parts.align + hyper.lambda_a1 * parts.intra +
                hyper.lambda_a2 * parts.inter;
  return parts;
}

AqaParamIds place_aqa_params(Tape& t, const std::vector<Mat>& tensors) {
  if (tensors.size() != 5) throw ContractError("place_aqa_params: expected 5 tensors");
  AqaParamIds ids;
  ids.w1 = t.param(tensors[0]);
  ids.b1 = t.param(tensors[1]);
  ids.w2 = t.param(tensors[2]);
  ids.b2 = t.param(tensors[3]);
  ids.theta = t.param(tensors[4]);
  return ids;
}

namespace {

// Scorer forward pass for one feature column; hidden pre-activations are
// kink sites for gradient checks.
NodeId score_node(Tape& t, const AqaParamIds& ids, NodeId fcol,
                  std::vector<double>* margins) {
  const NodeId pre1 = t.add(t.matmul(ids.w1, fcol), ids.b1);
  if (margins)
    for (double v : t.value(pre1).data) margins->push_back(std::fabs(v));
  const NodeId h = t.relu(pre1);
  const NodeId pre2 = t.add(t.matmul(ids.w2, h), ids.b2);
  return t.sigmoid(pre2);
}

NodeId hinge_node(Tape& t, NodeId raw, double sign, double margin_shift,
                  std::vector<double>* margins) {
  const NodeId arg = t.scale(t.add_scalar(raw, -margin_shift), sign);
  if (margins) margins->push_back(std::fabs(t.value(arg).at(0, 0)));
  return t.relu(arg);
}

// Graph counterpart of entropy(); non-smooth sites recorded via margins.
NodeId entropy_node(Tape& t, NodeId s0, NodeId s1, NodeId s2,
                    std::vector<double>* margins) {
  const NodeId D1 = t.abs(t.sub(s0, s1));
  const NodeId D2 = t.abs(t.sub(s1, s2));
  const double d1 = t.value(D1).at(0, 0);
  const double d2 = t.value(D2).at(0, 0);
  if (margins) {
    margins->push_back(std::fabs(t.value(s0).at(0, 0) - t.value(s1).at(0, 0)));
    margins->push_back(std::fabs(t.value(s1).at(0, 0) - t.value(s2).at(0, 0)));
    margins->push_back(std::fabs(d1 - d2));
  }
  if (std::max(d1, d2) == 0.0) return t.constant(Mat::scalar(0.0));
  const NodeId r = t.div(t.min2(D1, D2), t.max2(D1, D2));
  if (margins) margins->push_back(t.value(r).at(0, 0));
  return t.scale(t.xlogx(r), -1.0);
}

}  // namespace

AqaGraph aqa_loss_graph(Tape& t, const AqaParamIds& ids,
                        const std::vector<AqaTripletInput>& triplets,
                        const std::vector<std::pair<int, int>>& inter_pairs,
                        const AqaHyper& hyper, bool use_intra, bool use_inter,
                        std::vector<double>* kink_margins) {
  if (triplets.empty()) throw ContractError("aqa_loss_graph: empty batch");

  const NodeId th = t.sigmoid(ids.theta);

  std::vector<std::array<NodeId, 3>> scores;
  scores.reserve(triplets.size());
  NodeId align_acc = -1;
  NodeId rank_acc = -1;
  NodeId drank_acc = -1;

  for (const AqaTripletInput& trip : triplets) {
    if (trip.features.cols != 3)
      throw ContractError("aqa_loss_graph: triplet needs 3 feature columns");
    const NodeId F = t.constant(trip.features);
    std::array<NodeId, 3> Q;
    for (int k = 0; k < 3; ++k)
      Q[static_cast<size_t>(k)] = score_node(t, ids, t.col(F, k), kink_margins);
    scores.push_back(Q);

    // Eq. 6 terms, one per image.
    for (size_t k = 0; k < 3; ++k) {
      const NodeId raw = t.add_scalar(t.sub(Q[k], th), -hyper.eps);
      if (kink_margins)
        kink_margins->push_back(std::fabs(t.value(raw).at(0, 0)));
      const NodeId term = t.relu(t.scale(raw, static_cast<double>(trip.delta[k])));
      align_acc = align_acc < 0 ? term : t.add(align_acc, term);
    }

    // Eq. 7: ordered pairs of the triplet.
    NodeId rank_sum = -1;
    for (size_t i = 0; i < 3; ++i)
      for (size_t j = i + 1; j < 3; ++j) {
        const NodeId term = hinge_node(t, t.sub(Q[i], Q[j]),
                                       delta_sign(trip.q[i], trip.q[j]), hyper.eps,
                                       kink_margins);
        rank_sum = rank_sum < 0 ? term : t.add(rank_sum, term);
      }
    const NodeId rank_trip = t.scale(rank_sum, 1.0 / 3.0);
    rank_acc = rank_acc < 0 ? rank_trip : t.add(rank_acc, rank_trip);

    // Eq. 8: relative gap tie short-circuits to zero.
    const double d1q = std::fabs(trip.q[0] - trip.q[1]);
    const double d2q = std::fabs(trip.q[1] - trip.q[2]);
    NodeId drank_trip;
    if (d1q == d2q) {
      drank_trip = t.constant(Mat::scalar(0.0));
    } else {
      const NodeId d1 = t.abs(t.sub(Q[0], Q[1]));
      const NodeId d2 = t.abs(t.sub(Q[1], Q[2]));
      if (kink_margins) {
        kink_margins->push_back(
            std::fabs(t.value(Q[0]).at(0, 0) - t.value(Q[1]).at(0, 0)));
        kink_margins->push_back(
            std::fabs(t.value(Q[1]).at(0, 0) - t.value(Q[2]).at(0, 0)));
      }
      drank_trip = hinge_node(t, t.sub(d1, d2), delta_sign(d1q, d2q), hyper.eps,
                              kink_margins);
    }
    drank_acc = drank_acc < 0 ? drank_trip : t.add(drank_acc, drank_trip);
  }

  const int n_images = static_cast<int>(triplets.size()) * 3;
  const NodeId align = t.scale(align_acc, 1.0 / n_images);
  const NodeId rank = t.scale(rank_acc, 1.0 / static_cast<double>(triplets.size()));
  const NodeId drank = t.scale(drank_acc, 1.0 / static_cast<double>(triplets.size()));

  // Eq. 11 over the sampled different-class pairs.
  NodeId inter_acc = -1;
  for (const auto& [a, b] : inter_pairs) {
    const AqaTripletInput& ta = triplets[static_cast<size_t>(a)];
    const AqaTripletInput& tb = triplets[static_cast<size_t>(b)];
    if (ta.cls == tb.cls)
      throw ContractError("aqa_loss_graph: inter pair from one class");
    const double ear = entropy(ta.q).e;
    const double ebr = entropy(tb.q).e;
    NodeId term;
    if (ear == ebr) {
      term = t.constant(Mat::scalar(0.0));
    } else {
      const auto& Qa = scores[static_cast<size_t>(a)];
      const auto& Qb = scores[static_cast<size_t>(b)];
      const NodeId ea = entropy_node(t, Qa[0], Qa[1], Qa[2], kink_margins);
      const NodeId eb = entropy_node(t, Qb[0], Qb[1], Qb[2], kink_margins);
      term = hinge_node(t, t.sub(ea, eb), delta_sign(ear, ebr), hyper.zeta,
                        kink_margins);
    }
    inter_acc = inter_acc < 0 ? term : t.add(inter_acc, term);
  }
  const NodeId inter =
      inter_acc < 0 ? t.constant(Mat::scalar(0.0))
                    : t.scale(inter_acc, 1.0 / static_cast<double>(inter_pairs.size()));

  NodeId total = align;
  const NodeId intra = t.add(rank, t.scale(drank, hyper.lambda_intra));
  if (use_intra) total = t.add(total, t.scale(intra, hyper.lambda_a1));
  if (use_inter) total = t.add(total, t.scale(inter, hyper.lambda_a2));

  return AqaGraph{total, align, rank, drank, inter};
}

AqaParams train_aqa(AqaParams params, const Mat& feats, const std::vector<int>& labels,
                    const std::vector<int>& delta, const RqaParams& rqa,
                    AttentionMode mode, const AqaTrainConfig& cfg, uint64_t seed,
                    std::vector<AqaEpoch>* history) {
  if (feats.cols != static_cast<int>(labels.size()) ||
      feats.cols != static_cast<int>(delta.size()))
    throw DimensionError("train_aqa: labels/delta do not match feature columns");
  if (feats.rows != params.feature_dim())
    throw DimensionError("train_aqa: feature dim mismatch");

  std::vector<std::vector<int>> by_class(10);
  for (int j = 0; j < feats.cols; ++j)
    by_class[static_cast<size_t>(labels[static_cast<size_t>(j)])].push_back(j);
  std::vector<int> usable;
  for (int c = 0; c < 10; ++c)
    if (by_class[static_cast<size_t>(c)].size() >= 3) usable.push_back(c);
  if (usable.empty()) throw ParameterError("train_aqa: no class has 3 features");

  std::vector<Mat> tensors = params.tensors();
  AdamState adam(tensors, AdamConfig{.lr = cfg.lr, .weight_decay = cfg.weight_decay});
  Rng rng(seed);

  const int C = params.feature_dim();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double ep_total = 0, ep_align = 0, ep_rank = 0, ep_drank = 0, ep_inter = 0;
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      std::vector<AqaTripletInput> trips;
      trips.reserve(static_cast<size_t>(cfg.batch));
      const RqaParams& rp = rqa;
      for (int b = 0; b < cfg.batch; ++b) {
        const int cls = usable[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int>(usable.size()) - 1))];
        const auto& pool = by_class[static_cast<size_t>(cls)];
        const auto pick = rng.sample_without_replacement(static_cast<int>(pool.size()), 3);
        AqaTripletInput trip;
        trip.cls = cls;
        trip.features = Mat(C, 3);
        for (int k = 0; k < 3; ++k) {
          const int col = pool[static_cast<size_t>(pick[static_cast<size_t>(k)])];
          for (int r = 0; r < C; ++r) trip.features.at(r, k) = feats.at(r, col);
          trip.delta[static_cast<size_t>(k)] = delta[static_cast<size_t>(col)];
        }
        const TemplateSet ts = synthesize_templates(rp, trip.features, mode);
        Mat fcol(C, 1);
        for (int k = 0; k < 3; ++k) {
          for (int r = 0; r < C; ++r) fcol.at(r, 0) = trip.features.at(r, k);
          trip.q[static_cast<size_t>(k)] = unit_relative_score(ts.t_bar, fcol);
        }
        trips.push_back(std::move(trip));
      }

      std::vector<std::pair<int, int>> pairs;
      for (int i = 0; i < cfg.batch; ++i) {
        std::vector<int> partners;
        for (int j = 0; j < cfg.batch; ++j)
          if (trips[static_cast<size_t>(j)].cls != trips[static_cast<size_t>(i)].cls)
            partners.push_back(j);
        if (partners.empty()) continue;
        pairs.emplace_back(i, partners[static_cast<size_t>(rng.uniform_int(
                                  0, static_cast<int>(partners.size()) - 1))]);
      }

      Tape t;
      const AqaParamIds ids = place_aqa_params(t, tensors);
      const AqaGraph g = aqa_loss_graph(t, ids, trips, pairs, cfg.hyper,
                                        cfg.use_intra, cfg.use_inter, nullptr);
      t.backward(g.total);
      std::vector<Mat> grads = {t.grad(ids.w1), t.grad(ids.b1), t.grad(ids.w2),
                                t.grad(ids.b2), t.grad(ids.theta)};
      adam.step(tensors, grads);
      ep_total += t.value(g.total).at(0, 0);
      ep_align += t.value(g.align).at(0, 0);
      ep_rank += t.value(g.rank).at(0, 0);
      ep_drank += t.value(g.drank).at(0, 0);
      ep_inter += t.value(g.inter).at(0, 0);
    }
    if (history) {
      const double n = cfg.steps_per_epoch;
      history->push_back({cfg.lr, ep_total / n, ep_align / n, ep_rank / n,
                          ep_drank / n, ep_inter / n,
                          AqaParams::from_tensors(tensors).th()});
    }
  }
  return AqaParams::from_tensors(tensors);
}

}  // namespace oqa
