#include "oqa/rqa.hpp"

#include <algorithm>
#include <cmath>

#include "oqa/adam.hpp"
#include "oqa/rng.hpp"

namespace oqa {

AttentionMode attention_mode_from_name(const std::string& s) {
  if (s == "standard") return AttentionMode::Standard;
  if (s == "as-printed") return AttentionMode::AsPrinted;
  throw ConfigError("attention mode must be 'standard' or 'as-printed', got " + s);
}

RqaParams RqaParams::init(int feature_dim, int heads, uint64_t seed) {
  if (heads < 1 || feature_dim < 1 || feature_dim % heads != 0)
    throw ConfigError("head count " + std::to_string(heads) +
                      " must divide feature dim " + std::to_string(feature_dim));
  RqaParams p;
  p.heads = heads;
  p.dim = feature_dim;
  const int d = p.head_dim();
  Rng rng(seed);
  const double std = 1.0 / std::sqrt(static_cast<double>(d));
  for (int m = 0; m < heads; ++m) {
    p.wq.push_back(Mat::random_normal(d, d, std, rng));
    p.bq.push_back(Mat(d, 1));
    p.wk.push_back(Mat::random_normal(d, d, std, rng));
    p.bk.push_back(Mat(d, 1));
    // Near-identity value maps keep early templates inside the feature
    // cone, where the cosine of Eq-style scoring is informative.
    Mat wv = Mat::random_normal(d, d, 0.05, rng);
    for (int i = 0; i < d; ++i) wv.at(i, i) += 1.0;
    p.wv.push_back(std::move(wv));
    p.bv.push_back(Mat(d, 1));
  }
  return p;
}

std::vector<Mat> RqaParams::tensors() const {
  std::vector<Mat> t;
  t.reserve(static_cast<size_t>(heads) * 6);
  for (int m = 0; m < heads; ++m) {
    t.push_back(wq[static_cast<size_t>(m)]);
    t.push_back(bq[static_cast<size_t>(m)]);
    t.push_back(wk[static_cast<size_t>(m)]);
    t.push_back(bk[static_cast<size_t>(m)]);
    t.push_back(wv[static_cast<size_t>(m)]);
    t.push_back(bv[static_cast<size_t>(m)]);
  }
  return t;
}

RqaParams RqaParams::from_tensors(const std::vector<Mat>& t) {
  if (t.empty() || t.size() % 6 != 0)
    throw ConsistencyError("rqa checkpoint: tensor count must be a multiple of 6");
  RqaParams p;
  p.heads = static_cast<int>(t.size() / 6);
  const int d = t[0].rows;
  p.dim = p.heads * d;
  for (int m = 0; m < p.heads; ++m) {
    const size_t base = static_cast<size_t>(m) * 6;
    p.wq.push_back(t[base + 0]);
    p.bq.push_back(t[base + 1]);
    p.wk.push_back(t[base + 2]);
    p.bk.push_back(t[base + 3]);
    p.wv.push_back(t[base + 4]);
    p.bv.push_back(t[base + 5]);
  }
  return p;
}

namespace {

Mat add_col_plain(Mat m, const Mat& bias) {
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) m.at(i, j) += bias.at(i, 0);
  return m;
}

Mat slice_rows_plain(const Mat& m, int r0, int count) {
  Mat out(count, m.cols);
  for (int i = 0; i < count; ++i)
    for (int j = 0; j < m.cols; ++j) out.at(i, j) = m.at(r0 + i, j);
  return out;
}

}  // namespace

TemplateSet synthesize_templates(const RqaParams& p, const Mat& F,
                                 AttentionMode mode) {
  if (F.rows != p.dim)
    throw DimensionError("synthesize_templates: feature dim " + shape_str(F) +
                         " does not match params dim " + std::to_string(p.dim));
  if (F.cols < 1) throw ParameterError("synthesize_templates: empty group");
  const int d = p.head_dim();
  const int N = F.cols;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(d));

  TemplateSet ts;
  ts.T = Mat(p.dim, N);
  for (int m = 0; m < p.heads; ++m) {
    const size_t mi = static_cast<size_t>(m);
    const Mat Fm = slice_rows_plain(F, m * d, d);
    const Mat Q = add_col_plain(matmul(p.wq[mi], Fm), p.bq[mi]);
    const Mat V = add_col_plain(matmul(p.wv[mi], Fm), p.bv[mi]);
    Mat scores;
    if (mode == AttentionMode::Standard) {
      const Mat K = add_col_plain(matmul(p.wk[mi], Fm), p.bk[mi]);
      scores = matmul(transpose(Q), K);
    } else {
      scores = matmul(transpose(Q), V);
    }
    for (double& v : scores.data) v *= inv_scale;
    const Mat A = softmax_rows(scores);   // row i: weights of image i over the group
    const Mat Tm = matmul(V, transpose(A));
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < N; ++j) ts.T.at(m * d + i, j) = Tm.at(i, j);
  }

  ts.t_bar = Mat(p.dim, 1);
  for (int i = 0; i < p.dim; ++i) {
    double s = 0.0;
    for (int j = 0; j < N; ++j) s += ts.T.at(i, j);
    ts.t_bar.at(i, 0) = s / N;
  }
  return ts;
}

RqaLossParts rqa_loss(const TemplateSet& ts, const std::vector<int>& labels,
                      const ExtractorParams& extractor, double lambda_c) {
  const int N = ts.T.cols;
  if (static_cast<int>(labels.size()) != N)
    throw DimensionError("rqa_loss: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(N) + " templates");
  for (int l : labels)
    if (l != labels[0])
      throw ContractError("rqa_loss: group mixes labels " +
                          std::to_string(labels[0]) + " and " + std::to_string(l));

  RqaLossParts parts;
  parts.lambda_c = lambda_c;

  const Mat lsm = log_softmax_rows(transpose(head_logits(extractor, ts.T)));
  double recog = 0.0;
  for (int i = 0; i < N; ++i) recog -= lsm.at(i, labels[static_cast<size_t>(i)]);
  parts.recog = recog / N;

  if (N >= 2) {
    double consis = 0.0;
    for (int i = 0; i < N; ++i) {
      for (int j = i + 1; j < N; ++j) {
        double mse = 0.0;
        for (int r = 0; r < ts.T.rows; ++r) {
          const double diff = ts.T.at(r, i) - ts.T.at(r, j);
          mse += diff * diff;
        }
        consis += mse / ts.T.rows;
      }
    }
    parts.consis = consis * 2.0 / (static_cast<double>(N) * (N - 1));
  }
  parts.total = parts.recog + lambda_c * parts.consis;
  return parts;
}

double relative_score(const Mat& t_bar, const Mat& f) { return cosine(t_bar, f); }

double unit_relative_score(const Mat& t_bar, const Mat& f) {
  if (norm_flat(t_bar) == 0.0 || norm_flat(f) == 0.0) return 0.5;
  return to_unit_range(cosine(t_bar, f));
}

RqaParamIds place_rqa_params(Tape& t, const std::vector<Mat>& tensors, int heads) {
  if (tensors.size() != static_cast<size_t>(heads) * 6)
    throw ContractError("place_rqa_params: wrong tensor count");
  RqaParamIds ids;
  for (int m = 0; m < heads; ++m) {
    const size_t base = static_cast<size_t>(m) * 6;
    ids.wq.push_back(t.param(tensors[base + 0]));
    ids.bq.push_back(t.param(tensors[base + 1]));
    ids.wk.push_back(t.param(tensors[base + 2]));
    ids.bk.push_back(t.param(tensors[base + 3]));
    ids.wv.push_back(t.param(tensors[base + 4]));
    ids.bv.push_back(t.param(tensors[base + 5]));
  }
  return ids;
}

NodeId templates_graph(Tape& t, const RqaParamIds& ids, int heads, NodeId F,
                       AttentionMode mode) {
  const int C = t.value(F).rows;
  if (C % heads != 0)
    throw ConfigError("templates_graph: heads must divide feature dim");
  const int d = C / heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<NodeId> head_out;
  head_out.reserve(static_cast<size_t>(heads));
  for (int m = 0; m < heads; ++m) {
    const size_t mi = static_cast<size_t>(m);
    const NodeId Fm = t.slice_rows(F, m * d, d);
    const NodeId Q = t.add_col(t.matmul(ids.wq[mi], Fm), ids.bq[mi]);
    const NodeId V = t.add_col(t.matmul(ids.wv[mi], Fm), ids.bv[mi]);
    NodeId attended = V;
    if (mode == AttentionMode::Standard)
      attended = t.add_col(t.matmul(ids.wk[mi], Fm), ids.bk[mi]);
    const NodeId scores = t.scale(t.matmul(t.transp(Q), attended), inv_scale);
    const NodeId A = t.softmax_rows(scores);
    head_out.push_back(t.matmul(V, t.transp(A)));
  }
  return t.concat_rows(head_out);
}

NodeId rqa_loss_graph(Tape& t, const RqaParamIds& ids, int heads, NodeId F,
                      const std::vector<int>& labels, NodeId w_head, NodeId b_head,
                      double lambda_c, AttentionMode mode, NodeId* recog_out,
                      NodeId* consis_out) {
  const int N = t.value(F).cols;
  if (static_cast<int>(labels.size()) != N)
    throw ContractError("rqa_loss_graph: label count mismatch");
  for (int l : labels)
    if (l != labels[0]) throw ContractError("rqa_loss_graph: mixed labels");

  const NodeId T = templates_graph(t, ids, heads, F, mode);
  const NodeId logits = t.add_col(t.matmul(w_head, T), b_head);
  const NodeId recog = t.nll_rows(t.log_softmax_rows(t.transp(logits)), labels);

  NodeId consis;
  if (N >= 2) {
    std::vector<NodeId> cols;
    cols.reserve(static_cast<size_t>(N));
    for (int i = 0; i < N; ++i) cols.push_back(t.col(T, i));
    NodeId acc = -1;
    for (int i = 0; i < N; ++i) {
      for (int j = i + 1; j < N; ++j) {
        const NodeId diff = t.sub(cols[static_cast<size_t>(i)], cols[static_cast<size_t>(j)]);
        const NodeId mse = t.mean(t.mul(diff, diff));
        acc = acc < 0 ? mse : t.add(acc, mse);
      }
    }
    const int n_pairs = N * (N - 1) / 2;
    consis = t.scale(acc, 1.0 / n_pairs);
  } else {
    consis = t.constant(Mat::scalar(0.0));
  }

  if (recog_out) *recog_out = recog;
  if (consis_out) *consis_out = consis;
  return t.add(recog, t.scale(consis, lambda_c));
}

RqaParams train_rqa(RqaParams params, const Mat& feats, const std::vector<int>& labels,
                    const ExtractorParams& extractor, const RqaTrainConfig& cfg,
                    uint64_t seed, std::vector<RqaEpoch>* history) {
  if (feats.cols != static_cast<int>(labels.size()))
    throw DimensionError("train_rqa: label count does not match feature columns");
  if (feats.rows != params.dim)
    throw DimensionError("train_rqa: feature dim mismatch");

  // Same-class column pools.
  std::vector<std::vector<int>> by_class(10);
  for (int j = 0; j < feats.cols; ++j)
    by_class[static_cast<size_t>(labels[static_cast<size_t>(j)])].push_back(j);
  std::vector<int> usable;
  for (int c = 0; c < 10; ++c)
    if (by_class[static_cast<size_t>(c)].size() >= 3) usable.push_back(c);
  if (usable.empty()) throw ParameterError("train_rqa: no class has 3 features");

  std::vector<Mat> tensors = params.tensors();
  AdamState adam(tensors, AdamConfig{.lr = cfg.lr});
  Rng rng(seed);

  Mat group(params.dim, 3);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr * std::pow(cfg.lr_decay, epoch / cfg.decay_every);
    adam.set_lr(lr);
    double ep_total = 0.0, ep_recog = 0.0, ep_consis = 0.0;
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      Tape t;
      const RqaParamIds ids = place_rqa_params(t, tensors, params.heads);
      const NodeId wh = t.constant(extractor.w_head);
      const NodeId bh = t.constant(extractor.b_head);
      NodeId loss_acc = -1;
      NodeId recog_acc = -1;
      NodeId consis_acc = -1;
      for (int b = 0; b < cfg.batch; ++b) {
        const int cls = usable[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int>(usable.size()) - 1))];
        const auto& pool = by_class[static_cast<size_t>(cls)];
        const auto pick = rng.sample_without_replacement(static_cast<int>(pool.size()), 3);
        for (int k = 0; k < 3; ++k)
          for (int r = 0; r < params.dim; ++r)
            group.at(r, k) = feats.at(r, pool[static_cast<size_t>(pick[static_cast<size_t>(k)])]);
        const NodeId F = t.constant(group);
        NodeId recog, consis;
        const NodeId loss =
            rqa_loss_graph(t, ids, params.heads, F, {cls, cls, cls}, wh, bh,
                           cfg.lambda_c, cfg.mode, &recog, &consis);
        loss_acc = loss_acc < 0 ? loss : t.add(loss_acc, loss);
        recog_acc = recog_acc < 0 ? recog : t.add(recog_acc, recog);
        consis_acc = consis_acc < 0 ? consis : t.add(consis_acc, consis);
      }
      const NodeId batch_loss = t.scale(loss_acc, 1.0 / cfg.batch);
      t.backward(batch_loss);
      std::vector<Mat> grads;
      grads.reserve(tensors.size());
      for (int m = 0; m < params.heads; ++m) {
        const size_t mi = static_cast<size_t>(m);
        grads.push_back(t.grad(ids.wq[mi]));
        grads.push_back(t.grad(ids.bq[mi]));
        grads.push_back(t.grad(ids.wk[mi]));
        grads.push_back(t.grad(ids.bk[mi]));
        grads.push_back(t.grad(ids.wv[mi]));
        grads.push_back(t.grad(ids.bv[mi]));
      }
      adam.step(tensors, grads);
      ep_total += t.value(batch_loss).at(0, 0);
      ep_recog += t.value(recog_acc).at(0, 0) / cfg.batch;
      ep_consis += t.value(consis_acc).at(0, 0) / cfg.batch;
    }
    if (history)
      history->push_back({lr, ep_total / cfg.steps_per_epoch,
                          ep_recog / cfg.steps_per_epoch,
                          ep_consis / cfg.steps_per_epoch});
  }
  return RqaParams::from_tensors(tensors);
}

std::vector<Mat> build_class_templates(const RqaParams& p, const Mat& feats,
                                       const std::vector<int>& labels, int per_class,
                                       uint64_t seed, AttentionMode mode) {
  if (per_class < 1) throw ParameterError("build_class_templates: per_class < 1");
  std::vector<std::vector<int>> by_class(10);
  for (int j = 0; j < feats.cols; ++j)
    by_class[static_cast<size_t>(labels[static_cast<size_t>(j)])].push_back(j);

  const Rng base(seed);
  std::vector<Mat> templates;
  templates.reserve(10);
  for (int c = 0; c < 10; ++c) {
    const auto& pool = by_class[static_cast<size_t>(c)];
    if (pool.empty())
      throw ParameterError("build_class_templates: class " + std::to_string(c) +
                           " has no reference features");
    Rng rng = base.derive(static_cast<uint64_t>(c));
    const int take = std::min<int>(per_class, static_cast<int>(pool.size()));
    const auto pick = rng.sample_without_replacement(static_cast<int>(pool.size()), take);
    Mat group(p.dim, take);
    for (int k = 0; k < take; ++k)
      for (int r = 0; r < p.dim; ++r)
        group.at(r, k) = feats.at(r, pool[static_cast<size_t>(pick[static_cast<size_t>(k)])]);
    templates.push_back(synthesize_templates(p, group, mode).t_bar);
  }
  return templates;
}

}  // namespace oqa
