#include "oqa/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "oqa/aqa.hpp"
#include "oqa/checkpoint.hpp"
#include "oqa/dataset.hpp"
#include "oqa/extractor.hpp"
#include "oqa/fsio.hpp"
#include "oqa/glyphs.hpp"
#include "oqa/idx.hpp"
#include "oqa/metrics.hpp"
#include "oqa/rqa.hpp"

namespace oqa {

namespace {

namespace fs = std::filesystem;

// Named sub-streams of the run seed.
enum Salt : uint64_t {
  kCleanSalt = 1,
  kSplitSalt,
  kSynthSaltBase,  // + condition index
  kPretrainSalt,
  kRqaInitSalt,
  kRqaTrainSalt,
  kAqaInitSalt,
  kAqaTrainSalt,
  kGroupSaltBase,  // + 2*condition + (inter ? 1 : 0)
  kTemplateSalt,
  kSequenceSalt,
  kAblationSalt,
};

uint64_t stream_seed(const RunConfig& cfg, uint64_t salt) {
  return Rng(cfg.seed).derive(salt).next_u64();
}

const Degradation kConditions[3] = {Degradation::Blur, Degradation::Illumination,
                                    Degradation::Mixed};

std::string opath(const RunConfig& cfg, const std::string& name) {
  return (fs::path(cfg.out) / name).string();
}

std::string manifest_path(const RunConfig& cfg, Degradation d) {
  return opath(cfg, "manifest_" + degradation_name(d) + ".csv");
}

std::string store_path(const RunConfig& cfg, Degradation d) {
  return opath(cfg, degradation_name(d) + ".oqai");
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

CleanSet make_clean(const RunConfig& cfg) {
  CleanSet clean;
  const fs::path imgs = fs::path(cfg.data_dir) / "train-images-idx3-ubyte";
  const fs::path labs = fs::path(cfg.data_dir) / "train-labels-idx1-ubyte";
  if (!cfg.data_dir.empty() && fs::exists(imgs) && fs::exists(labs)) {
    auto all = load_idx(imgs.string(), labs.string());
    std::vector<std::vector<int>> by_class(10);
    for (size_t i = 0; i < all.size(); ++i) {
      const int l = all[i].second;
      if (l >= 0 && l <= 9) by_class[static_cast<size_t>(l)].push_back(static_cast<int>(i));
    }
    Rng rng(stream_seed(cfg, kCleanSalt));
    const int per_class = cfg.clean_count / 10;
    for (int c = 0; c < 10; ++c) {
      auto& pool = by_class[static_cast<size_t>(c)];
      if (static_cast<int>(pool.size()) < per_class)
        throw ConsistencyError("dataset has fewer than " + std::to_string(per_class) +
                               " images of class " + std::to_string(c));
      for (int k : rng.sample_without_replacement(static_cast<int>(pool.size()), per_class)) {
        clean.images.push_back(all[static_cast<size_t>(pool[static_cast<size_t>(k)])].first);
        clean.labels.push_back(c);
      }
    }
  } else {
    Rng rng(stream_seed(cfg, kCleanSalt));
    for (int i = 0; i < cfg.clean_count; ++i) {
      const int digit = i % 10;
      clean.images.push_back(render_glyph(digit, rng.derive(static_cast<uint64_t>(i)).next_u64()));
      clean.labels.push_back(digit);
    }
  }
  return clean;
}

CleanSet load_clean(const RunConfig& cfg) {
  CleanSet clean;
  clean.images = unpack_images(read_file(opath(cfg, "clean.oqai")));
  std::istringstream in(read_file(opath(cfg, "clean.csv")));
  std::string line;
  if (!std::getline(in, line) || line != "clean_id,label")
    throw FormatError("clean.csv: bad header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const size_t comma = line.find(',');
    clean.labels.push_back(std::stoi(line.substr(comma + 1)));
  }
  if (clean.labels.size() != clean.images.size())
    throw ConsistencyError("clean.csv and clean.oqai disagree on count");
  return clean;
}

std::vector<uint8_t> load_split(const RunConfig& cfg, size_t n_clean) {
  std::istringstream in(read_file(opath(cfg, "split.csv")));
  std::string line;
  if (!std::getline(in, line) || line != "clean_id,is_train")
    throw FormatError("split.csv: bad header");
  std::vector<uint8_t> split(n_clean, 0);
  size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (row >= n_clean) throw ConsistencyError("split.csv has too many rows");
    const size_t comma = line.find(',');
    split[row++] = static_cast<uint8_t>(std::stoi(line.substr(comma + 1)));
  }
  if (row != n_clean) throw ConsistencyError("split.csv has too few rows");
  return split;
}

std::vector<LabeledSample> load_condition(const RunConfig& cfg, Degradation d) {
  std::vector<LabeledSample> samples = manifest_from_csv(read_file(manifest_path(cfg, d)));
  std::vector<GrayImage> images = unpack_images(read_file(store_path(cfg, d)));
  if (images.size() != samples.size())
    throw ConsistencyError(degradation_name(d) + ": manifest and store disagree on count");
  for (size_t i = 0; i < samples.size(); ++i) samples[i].image = std::move(images[i]);
  return samples;
}

ExtractorParams load_extractor(const Checkpoint& cp) {
  return ExtractorParams::from_tensors(cp.require("EXT1"));
}

// Feature columns, labels, correctness indicators and sample gt for a set
// of sample indices.
struct FeaturePool {
  Mat feats;                 // C×N
  std::vector<int> labels;   // per column
  std::vector<int> delta;    // per column
  std::vector<double> conf;  // per column
  std::vector<int> pred;     // per column
};

FeaturePool build_pool(const ExtractorParams& ext,
                       const std::vector<LabeledSample>& samples,
                       const std::vector<int>& idx) {
  FeaturePool pool;
  std::vector<const GrayImage*> imgs;
  imgs.reserve(idx.size());
  for (int i : idx) {
    imgs.push_back(&samples[static_cast<size_t>(i)].image);
    pool.labels.push_back(samples[static_cast<size_t>(i)].label);
  }
  pool.feats = features(ext, imgs);
  const Mat logits = head_logits(ext, pool.feats);
  const Mat probs = softmax_rows(transpose(logits));
  pool.delta.reserve(idx.size());
  for (int j = 0; j < logits.cols; ++j) {
    int arg = 0;
    for (int i = 1; i < logits.rows; ++i)
      if (logits.at(i, j) > logits.at(arg, j)) arg = i;
    pool.pred.push_back(arg);
    pool.conf.push_back(probs.at(j, arg));
    pool.delta.push_back(arg == pool.labels[static_cast<size_t>(j)] ? -1 : +1);
  }
  return pool;
}

std::vector<int> split_indices(const std::vector<LabeledSample>& samples,
                               const std::vector<uint8_t>& split, bool train) {
  std::vector<int> idx;
  for (size_t i = 0; i < samples.size(); ++i) {
    const int cid = samples[i].clean_id;
    if (cid < 0 || static_cast<size_t>(cid) >= split.size())
      throw ConsistencyError("sample references unknown clean id");
    if ((split[static_cast<size_t>(cid)] != 0) == train) idx.push_back(static_cast<int>(i));
  }
  return idx;
}

// Union of the three conditions' training halves, used to train RQA/AQA
// and to build reference class templates.
struct TrainData {
  FeaturePool pool;
};

TrainData build_train_data(const RunConfig& cfg, const ExtractorParams& ext,
                           const std::vector<uint8_t>& split) {
  TrainData td;
  std::vector<Mat> parts;
  for (Degradation d : kConditions) {
    const std::vector<LabeledSample> samples = load_condition(cfg, d);
    const std::vector<int> idx = split_indices(samples, split, true);
    FeaturePool p = build_pool(ext, samples, idx);
    parts.push_back(std::move(p.feats));
    td.pool.labels.insert(td.pool.labels.end(), p.labels.begin(), p.labels.end());
    td.pool.delta.insert(td.pool.delta.end(), p.delta.begin(), p.delta.end());
    td.pool.conf.insert(td.pool.conf.end(), p.conf.begin(), p.conf.end());
    td.pool.pred.insert(td.pool.pred.end(), p.pred.begin(), p.pred.end());
  }
  int total = 0;
  for (const Mat& m : parts) total += m.cols;
  td.pool.feats = Mat(parts[0].rows, total);
  int at = 0;
  for (const Mat& m : parts) {
    for (int i = 0; i < m.rows; ++i)
      for (int j = 0; j < m.cols; ++j) td.pool.feats.at(i, at + j) = m.at(i, j);
    at += m.cols;
  }
  return td;
}

Mat column_of(const Mat& m, int j) {
  Mat c(m.rows, 1);
  for (int i = 0; i < m.rows; ++i) c.at(i, 0) = m.at(i, j);
  return c;
}

std::vector<Degradation> selected_conditions(const RunConfig& cfg) {
  if (cfg.condition == "all")
    return {Degradation::Blur, Degradation::Illumination, Degradation::Mixed};
  return {degradation_from_name(cfg.condition)};
}

}  // namespace

void run_synth(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.clean_count % 10 != 0)
    throw ConfigError("clean_count must be a multiple of 10 for class balance");
  fs::create_directories(cfg.out);

  const CleanSet clean = make_clean(cfg);
  std::vector<const GrayImage*> ptrs;
  for (const GrayImage& im : clean.images) ptrs.push_back(&im);
  atomic_write(opath(cfg, "clean.oqai"), pack_images(ptrs));
  std::string clean_csv = "clean_id,label\n";
  for (size_t i = 0; i < clean.size(); ++i)
    clean_csv += std::to_string(i) + "," + std::to_string(clean.labels[i]) + "\n";
  atomic_write(opath(cfg, "clean.csv"), clean_csv);

  const std::vector<uint8_t> split = train_test_split(clean, stream_seed(cfg, kSplitSalt));
  std::string split_csv = "clean_id,is_train\n";
  for (size_t i = 0; i < split.size(); ++i)
    split_csv += std::to_string(i) + "," + std::to_string(split[i]) + "\n";
  atomic_write(opath(cfg, "split.csv"), split_csv);

  for (int c = 0; c < 3; ++c) {
    const Degradation d = kConditions[c];
    const std::vector<LabeledSample> samples =
        synth_dataset(clean, d, stream_seed(cfg, kSynthSaltBase + static_cast<uint64_t>(c)));
    std::vector<const GrayImage*> sp;
    for (const LabeledSample& s : samples) sp.push_back(&s.image);
    atomic_write(store_path(cfg, d), pack_images(sp));
    atomic_write(manifest_path(cfg, d), manifest_to_csv(samples));
    std::cout << "synth: " << degradation_name(d) << " -> " << samples.size()
              << " samples\n";
  }
  std::cout << "synth: " << clean.size() << " clean images, outputs in " << cfg.out
            << "\n";
}

void run_pretrain(const RunConfig& cfg) {
  cfg.validate();
  const CleanSet clean = load_clean(cfg);
  const std::vector<uint8_t> split = load_split(cfg, clean.size());

  // Train on the clean training half plus a configurable slice of its
  // degraded variants. The recognizer should fail on heavy pollution but
  // survive mild pollution, while the features keep reacting to blur.
  CleanSet train_set;
  std::vector<int> train_ids;
  for (size_t i = 0; i < clean.size(); ++i) {
    if (!split[i]) continue;
    train_set.images.push_back(clean.images[i]);
    train_set.labels.push_back(clean.labels[i]);
  }
  const auto augment_takes = [&cfg](const LabeledSample& s) {
    if (cfg.pre_augment == "none") return false;
    if (cfg.pre_augment == "all") return true;
    if (s.spec.kind == Degradation::Illumination) return true;
    if (cfg.pre_augment == "light") return s.spec.kernel <= 7;
    return false;  // "illumination": skip anything with a blur component
  };
  for (Degradation d : kConditions) {
    const std::vector<LabeledSample> samples = load_condition(cfg, d);
    for (const LabeledSample& s : samples) {
      if (!split[static_cast<size_t>(s.clean_id)]) continue;
      if (!augment_takes(s)) continue;
      train_set.images.push_back(s.image);
      train_set.labels.push_back(s.label);
    }
  }
  for (size_t i = 0; i < train_set.size(); ++i)
    train_ids.push_back(static_cast<int>(i));

  PretrainConfig pc;
  pc.epochs = cfg.pre_epochs;
  pc.batch = cfg.pre_batch;
  pc.lr = cfg.pre_lr;
  pc.hidden = cfg.hidden;
  pc.feature_dim = cfg.feature_dim;
  std::vector<PretrainEpoch> history;
  const ExtractorParams ext =
      pretrain(train_set, train_ids, pc, stream_seed(cfg, kPretrainSalt), &history);

  Checkpoint cp;  // a fresh extractor invalidates any downstream sections
  cp.set_section("EXT1", ext.tensors());
  cp.save(opath(cfg, "model.oqap"));

  std::string hist_csv = "epoch,loss,accuracy\n";
  for (size_t e = 0; e < history.size(); ++e)
    hist_csv += std::to_string(e) + "," + fmt("%.9f", history[e].loss) + "," +
                fmt("%.6f", history[e].accuracy) + "\n";
  atomic_write(opath(cfg, "pretrain_history.csv"), hist_csv);

  const auto feat_fn = [&ext](const std::vector<const GrayImage*>& imgs) {
    return features(ext, imgs);
  };
  for (Degradation d : kConditions) {
    std::vector<LabeledSample> samples = load_condition(cfg, d);
    make_ground_truth(samples, clean, feat_fn);
    atomic_write(manifest_path(cfg, d), manifest_to_csv(samples));
  }

  // Accuracy on the clean training digits themselves.
  std::vector<const GrayImage*> clean_imgs;
  std::vector<int> clean_labels;
  for (size_t i = 0; i < clean.size(); ++i) {
    if (!split[i]) continue;
    clean_imgs.push_back(&clean.images[i]);
    clean_labels.push_back(clean.labels[i]);
  }
  const Mat logits = head_logits(ext, features(ext, clean_imgs));
  int hits = 0;
  for (int j = 0; j < logits.cols; ++j) {
    int arg = 0;
    for (int i = 1; i < logits.rows; ++i)
      if (logits.at(i, j) > logits.at(arg, j)) arg = i;
    if (arg == clean_labels[static_cast<size_t>(j)]) ++hits;
  }
  const double clean_acc = static_cast<double>(hits) / clean_imgs.size();
  std::cout << "pretrain: clean train accuracy " << fmt("%.4f", clean_acc)
            << ", augmented accuracy "
            << fmt("%.4f", history.empty() ? 0.0 : history.back().accuracy)
            << ", ground truth written\n";
}

void run_train_rqa(const RunConfig& cfg) {
  cfg.validate();
  const CleanSet clean = load_clean(cfg);
  const std::vector<uint8_t> split = load_split(cfg, clean.size());
  Checkpoint cp = Checkpoint::load(opath(cfg, "model.oqap"));
  const ExtractorParams ext = load_extractor(cp);
  const TrainData td = build_train_data(cfg, ext, split);

  RqaTrainConfig rc;
  rc.epochs = cfg.rqa_epochs;
  rc.steps_per_epoch = cfg.rqa_steps;
  rc.batch = cfg.rqa_batch;
  rc.lr = cfg.rqa_lr;
  rc.lr_decay = cfg.rqa_decay;
  rc.decay_every = cfg.rqa_decay_every;
  rc.lambda_c = cfg.lambda_c;
  rc.mode = cfg.attention_mode();

  RqaParams init = RqaParams::init(cfg.feature_dim, cfg.heads, stream_seed(cfg, kRqaInitSalt));
  std::vector<RqaEpoch> history;
  const RqaParams trained = train_rqa(init, td.pool.feats, td.pool.labels, ext, rc,
                                      stream_seed(cfg, kRqaTrainSalt), &history);

  cp.set_section("RQA1", trained.tensors());
  cp.save(opath(cfg, "model.oqap"));

  std::string hist_csv = "epoch,lr,total,recog,consis\n";
  for (size_t e = 0; e < history.size(); ++e)
    hist_csv += std::to_string(e) + "," + fmt("%.9f", history[e].lr) + "," +
                fmt("%.9f", history[e].total) + "," + fmt("%.9f", history[e].recog) +
                "," + fmt("%.9f", history[e].consis) + "\n";
  atomic_write(opath(cfg, "rqa_history.csv"), hist_csv);
  std::cout << "train-rqa: final loss "
            << fmt("%.6f", history.empty() ? 0.0 : history.back().total) << " over "
            << history.size() << " epochs\n";
}

void run_train_aqa(const RunConfig& cfg) {
  cfg.validate();
  const CleanSet clean = load_clean(cfg);
  const std::vector<uint8_t> split = load_split(cfg, clean.size());
  Checkpoint cp = Checkpoint::load(opath(cfg, "model.oqap"));
  const ExtractorParams ext = load_extractor(cp);
  const RqaParams rqa = RqaParams::from_tensors(cp.require("RQA1"));
  const TrainData td = build_train_data(cfg, ext, split);

  AqaTrainConfig ac;
  ac.epochs = cfg.aqa_epochs;
  ac.steps_per_epoch = cfg.aqa_steps;
  ac.batch = cfg.aqa_batch;
  ac.lr = cfg.aqa_lr;
  ac.weight_decay = cfg.aqa_wd;
  ac.hyper = AqaHyper{cfg.eps, cfg.zeta, cfg.lambda_intra, cfg.lambda_a1, cfg.lambda_a2};

  AqaParams init = AqaParams::init(cfg.feature_dim, stream_seed(cfg, kAqaInitSalt));
  std::vector<AqaEpoch> history;
  const AqaParams trained =
      train_aqa(init, td.pool.feats, td.pool.labels, td.pool.delta, rqa,
                cfg.attention_mode(), ac, stream_seed(cfg, kAqaTrainSalt), &history);

  cp.set_section("AQA1", trained.tensors());
  cp.save(opath(cfg, "model.oqap"));

  std::string hist_csv = "epoch,lr,total,align,rank,drank,inter,th\n";
  for (size_t e = 0; e < history.size(); ++e) {
    const AqaEpoch& h = history[e];
    hist_csv += std::to_string(e) + "," + fmt("%.9f", h.lr) + "," +
                fmt("%.9f", h.total) + "," + fmt("%.9f", h.align) + "," +
                fmt("%.9f", h.rank) + "," + fmt("%.9f", h.drank) + "," +
                fmt("%.9f", h.inter) + "," + fmt("%.9f", h.th) + "\n";
  }
  atomic_write(opath(cfg, "aqa_history.csv"), hist_csv);
  std::cout << "train-aqa: learned th " << fmt("%.4f", trained.th()) << "\n";
}

void run_score(const RunConfig& cfg) {
  cfg.validate();
  const Degradation d =
      cfg.condition == "all" ? Degradation::Mixed : degradation_from_name(cfg.condition);
  const CleanSet clean = load_clean(cfg);
  const std::vector<uint8_t> split = load_split(cfg, clean.size());
  const Checkpoint cp = Checkpoint::load(opath(cfg, "model.oqap"));
  const ExtractorParams ext = load_extractor(cp);
  const RqaParams rqa = RqaParams::from_tensors(cp.require("RQA1"));
  const AqaParams aqa = AqaParams::from_tensors(cp.require("AQA1"));

  const TrainData td = build_train_data(cfg, ext, split);
  const std::vector<Mat> templates =
      build_class_templates(rqa, td.pool.feats, td.pool.labels, cfg.ref_per_class,
                            stream_seed(cfg, kTemplateSalt), cfg.attention_mode());

  const std::vector<LabeledSample> samples = load_condition(cfg, d);
  const std::vector<int> test_idx = split_indices(samples, split, false);
  const FeaturePool pool = build_pool(ext, samples, test_idx);
  const std::vector<double> Q = absolute_scores(aqa, pool.feats);
  const double th = aqa.th();

  std::string csv = "sample_id,q_rel,Q_abs,delta,th\n";
  for (size_t j = 0; j < test_idx.size(); ++j) {
    const Mat f = column_of(pool.feats, static_cast<int>(j));
    const double q =
        unit_relative_score(templates[static_cast<size_t>(pool.labels[j])], f);
    csv += std::to_string(test_idx[j]) + "," + fmt("%.9f", q) + "," +
           fmt("%.9f", Q[j]) + "," + std::to_string(pool.delta[j]) + "," +
           fmt("%.9f", th) + "\n";
  }
  atomic_write(opath(cfg, "scores.csv"), csv);
  std::cout << "score: wrote " << test_idx.size() << " rows for condition "
            << degradation_name(d) << "\n";
}

namespace {

// Group scorers for one evaluation condition.
struct CondEval {
  std::vector<LabeledSample> samples;
  std::vector<int> test_idx;
  FeaturePool pool;
  std::vector<int> col_of;  // sample id -> feature column (or -1)
};

CondEval prepare_condition(const RunConfig& cfg, const ExtractorParams& ext,
                           const std::vector<uint8_t>& split, Degradation d) {
  CondEval ce;
  ce.samples = load_condition(cfg, d);
  for (const LabeledSample& s : ce.samples)
    if (!s.gt_score)
      throw ConsistencyError(degradation_name(d) +
                             ": ground truth missing; run pretrain first");
  ce.test_idx = split_indices(ce.samples, split, false);
  ce.pool = build_pool(ext, ce.samples, ce.test_idx);
  ce.col_of.assign(ce.samples.size(), -1);
  for (size_t j = 0; j < ce.test_idx.size(); ++j)
    ce.col_of[static_cast<size_t>(ce.test_idx[j])] = static_cast<int>(j);
  return ce;
}

std::vector<ReportRow> evaluate_condition(const RunConfig& cfg, const CondEval& ce,
                                          const RqaParams& rqa, const AqaParams& aqa,
                                          const std::vector<Mat>& templates,
                                          Degradation d, int cond_index) {
  const AttentionMode mode = cfg.attention_mode();
  const std::vector<double> Q = absolute_scores(aqa, ce.pool.feats);

  const auto gt_of = [&ce](int sample_id) {
    return *ce.samples[static_cast<size_t>(sample_id)].gt_score;
  };
  const auto member_col = [&ce](int sample_id) {
    const int c = ce.col_of[static_cast<size_t>(sample_id)];
    if (c < 0) throw ConsistencyError("group references a non-test sample");
    return c;
  };

  const auto rqa_scorer = [&](const GroupSample& g) {
    std::vector<double> out;
    out.reserve(g.members.size());
    if (g.kind == GroupKind::Intra) {
      // Group-synthesized template, as in training.
      Mat F(ce.pool.feats.rows, static_cast<int>(g.members.size()));
      for (size_t k = 0; k < g.members.size(); ++k) {
        const int c = member_col(g.members[k]);
        for (int r = 0; r < F.rows; ++r) F.at(r, static_cast<int>(k)) = ce.pool.feats.at(r, c);
      }
      const TemplateSet ts = synthesize_templates(rqa, F, mode);
      for (size_t k = 0; k < g.members.size(); ++k)
        out.push_back(unit_relative_score(ts.t_bar, column_of(F, static_cast<int>(k))));
    } else {
      // Members come from different classes; score each against its own
      // class template.
      for (int m : g.members) {
        const int c = member_col(m);
        out.push_back(unit_relative_score(
            templates[static_cast<size_t>(ce.pool.labels[static_cast<size_t>(c)])],
            column_of(ce.pool.feats, c)));
      }
    }
    return out;
  };
  const auto aqa_scorer = [&](const GroupSample& g) {
    std::vector<double> out;
    for (int m : g.members) out.push_back(Q[static_cast<size_t>(member_col(m))]);
    return out;
  };
  const auto pcw_scorer = [&](const GroupSample& g) {
    std::vector<double> out;
    for (int m : g.members)
      out.push_back(ce.pool.conf[static_cast<size_t>(member_col(m))]);
    return out;
  };
  const auto gt_scorer = [&](const GroupSample& g) {
    std::vector<double> out;
    for (int m : g.members) out.push_back(gt_of(m));
    return out;
  };

  std::vector<ReportRow> rows;
  for (int set = 0; set < 2; ++set) {
    const GroupKind kind = set == 0 ? GroupKind::Intra : GroupKind::Inter;
    const std::vector<GroupSample> groups = build_groups(
        ce.samples, ce.test_idx, kind, cfg.groups_per_set, cfg.group_min, cfg.group_max,
        stream_seed(cfg, kGroupSaltBase + static_cast<uint64_t>(2 * cond_index + set)));
    const std::string set_name = set == 0 ? "intra" : "inter";
    const std::pair<std::string,
                    std::function<std::vector<double>(const GroupSample&)>>
        scorers[4] = {{"rqa", rqa_scorer},
                      {"aqa", aqa_scorer},
                      {"pcw", pcw_scorer},
                      {"gt", gt_scorer}};
    for (const auto& [name, scorer] : scorers) {
      const GroupMetrics gm = evaluate_groups(groups, scorer, gt_of);
      rows.push_back({degradation_name(d), set_name, name, "srocc", gm.mean_srocc,
                      gm.used, gm.dropped});
      rows.push_back({degradation_name(d), set_name, name, "lcc", gm.mean_lcc, gm.used,
                      gm.dropped});
    }
  }
  return rows;
}

}  // namespace

void run_eval(const RunConfig& cfg) {
  cfg.validate();
  const CleanSet clean = load_clean(cfg);
  const std::vector<uint8_t> split = load_split(cfg, clean.size());
  const Checkpoint cp = Checkpoint::load(opath(cfg, "model.oqap"));
  const ExtractorParams ext = load_extractor(cp);
  const RqaParams rqa = RqaParams::from_tensors(cp.require("RQA1"));
  const AqaParams aqa = AqaParams::from_tensors(cp.require("AQA1"));

  const TrainData td = build_train_data(cfg, ext, split);
  const std::vector<Mat> templates =
      build_class_templates(rqa, td.pool.feats, td.pool.labels, cfg.ref_per_class,
                            stream_seed(cfg, kTemplateSalt), cfg.attention_mode());

  std::vector<ReportRow> rows;
  for (Degradation d : selected_conditions(cfg)) {
    int cond_index = 0;
    for (int c = 0; c < 3; ++c)
      if (kConditions[c] == d) cond_index = c;
    const CondEval ce = prepare_condition(cfg, ext, split, d);
    const auto cond_rows = evaluate_condition(cfg, ce, rqa, aqa, templates, d, cond_index);
    rows.insert(rows.end(), cond_rows.begin(), cond_rows.end());
  }
  atomic_write(opath(cfg, "report.csv"), report_to_csv(rows));
  atomic_write(opath(cfg, "report.txt"), report_to_text(rows));
  std::cout << report_to_text(rows);

  if (cfg.ablation) {
    // Constraint toggles of the absolute stage, trained from one shared
    // initialization and compared on the mixed inter set.
    AqaTrainConfig ac;
    ac.epochs = cfg.aqa_epochs;
    ac.steps_per_epoch = cfg.aqa_steps;
    ac.batch = cfg.aqa_batch;
    ac.lr = cfg.aqa_lr;
    ac.weight_decay = cfg.aqa_wd;
    ac.hyper = AqaHyper{cfg.eps, cfg.zeta, cfg.lambda_intra, cfg.lambda_a1, cfg.lambda_a2};

    const CondEval ce = prepare_condition(cfg, ext, split, Degradation::Mixed);
    const auto gt_of = [&ce](int sample_id) {
      return *ce.samples[static_cast<size_t>(sample_id)].gt_score;
    };

    struct Variant {
      std::string name;
      bool use_intra;
      bool use_inter;
    };
    const Variant variants[3] = {{"align", false, false},
                                 {"align_intra", true, false},
                                 {"align_inter", false, true}};

    std::string csv = "variant,set,metric,value\n";
    std::vector<std::pair<std::string, AqaParams>> models;
    const AqaParams init =
        AqaParams::init(cfg.feature_dim, stream_seed(cfg, kAqaInitSalt));
    for (const Variant& v : variants) {
      AqaTrainConfig vc = ac;
      vc.use_intra = v.use_intra;
      vc.use_inter = v.use_inter;
      models.emplace_back(v.name,
                          train_aqa(init, td.pool.feats, td.pool.labels, td.pool.delta,
                                    rqa, cfg.attention_mode(), vc,
                                    stream_seed(cfg, kAqaTrainSalt), nullptr));
    }
    models.emplace_back("full", aqa);

    for (int set = 0; set < 2; ++set) {
      const GroupKind kind = set == 0 ? GroupKind::Intra : GroupKind::Inter;
      const std::string set_name = set == 0 ? "intra" : "inter";
      const std::vector<GroupSample> groups = build_groups(
          ce.samples, ce.test_idx, kind, cfg.groups_per_set, cfg.group_min,
          cfg.group_max,
          stream_seed(cfg, kGroupSaltBase + static_cast<uint64_t>(2 * 2 + set)));
      for (const auto& [name, model] : models) {
        const std::vector<double> Q = absolute_scores(model, ce.pool.feats);
        const auto scorer = [&](const GroupSample& g) {
          std::vector<double> out;
          for (int m : g.members) {
            const int c = ce.col_of[static_cast<size_t>(m)];
            out.push_back(Q[static_cast<size_t>(c)]);
          }
          return out;
        };
        const GroupMetrics gm = evaluate_groups(groups, scorer, gt_of);
        csv += name + "," + set_name + ",srocc," + fmt("%.6f", gm.mean_srocc) + "\n";
        csv += name + "," + set_name + ",lcc," + fmt("%.6f", gm.mean_lcc) + "\n";
      }
    }
    atomic_write(opath(cfg, "ablation.csv"), csv);
    std::cout << "eval: ablation written to ablation.csv\n";
  }
}

void run_gate(const RunConfig& cfg) {
  cfg.validate();
  const CleanSet clean = load_clean(cfg);
  const std::vector<uint8_t> split = load_split(cfg, clean.size());
  const Checkpoint cp = Checkpoint::load(opath(cfg, "model.oqap"));
  const ExtractorParams ext = load_extractor(cp);
  const AqaParams aqa = AqaParams::from_tensors(cp.require("AQA1"));

  const CondEval ce = prepare_condition(cfg, ext, split, Degradation::Mixed);
  const std::vector<double> Q = absolute_scores(aqa, ce.pool.feats);

  // Sequences: frames of one test clean source under mixed degradations.
  std::map<int, std::vector<int>> frames_by_clean;
  for (int idx : ce.test_idx)
    frames_by_clean[ce.samples[static_cast<size_t>(idx)].clean_id].push_back(idx);
  std::vector<int> clean_ids;
  for (const auto& [cid, frames] : frames_by_clean)
    if (static_cast<int>(frames.size()) >= cfg.seq_min) clean_ids.push_back(cid);
  if (clean_ids.empty()) throw ConsistencyError("gate: no usable test sequences");

  Rng rng(stream_seed(cfg, kSequenceSalt));
  std::vector<SequenceSample> seqs;
  seqs.reserve(static_cast<size_t>(cfg.sequences));
  for (int s = 0; s < cfg.sequences; ++s) {
    const int cid = clean_ids[static_cast<size_t>(
        rng.uniform_int(0, static_cast<int>(clean_ids.size()) - 1))];
    const auto& pool = frames_by_clean[cid];
    const int want = std::min<int>(rng.uniform_int(cfg.seq_min, cfg.seq_max),
                                   static_cast<int>(pool.size()));
    SequenceSample seq;
    seq.clean_id = cid;
    seq.label = clean.labels[static_cast<size_t>(cid)];
    for (int k : rng.sample_without_replacement(static_cast<int>(pool.size()), want))
      seq.frames.push_back(pool[static_cast<size_t>(k)]);
    seqs.push_back(std::move(seq));
  }

  const auto frame_of = [&](int sample_id) {
    const int c = ce.col_of[static_cast<size_t>(sample_id)];
    return FrameInfo{ce.pool.pred[static_cast<size_t>(c)],
                     ce.pool.conf[static_cast<size_t>(c)], Q[static_cast<size_t>(c)]};
  };
  const auto gt_of = [&](int sample_id) {
    return *ce.samples[static_cast<size_t>(sample_id)].gt_score;
  };
  const auto aqa_score = [&](int sample_id) {
    return Q[static_cast<size_t>(ce.col_of[static_cast<size_t>(sample_id)])];
  };
  const auto pcw = [&](int sample_id) {
    return ce.pool.conf[static_cast<size_t>(ce.col_of[static_cast<size_t>(sample_id)])];
  };

  const double th = aqa.th();
  const double sra_ungated = sra(seqs, frame_of, 0.0);
  const double sra_gated = sra(seqs, frame_of, th);
  const double qshr_aqa = qshr(seqs, aqa_score, gt_of);
  const double qshr_pcw = qshr(seqs, pcw, gt_of);

  std::string csv = "metric,scorer,value\n";
  csv += "sra,ungated," + fmt("%.6f", sra_ungated) + "\n";
  csv += "sra,gated," + fmt("%.6f", sra_gated) + "\n";
  csv += "sra_gain,gated," + fmt("%.6f", sra_gated - sra_ungated) + "\n";
  csv += "th,aqa," + fmt("%.6f", th) + "\n";
  csv += "qshr,aqa," + fmt("%.6f", qshr_aqa) + "\n";
  csv += "qshr,pcw," + fmt("%.6f", qshr_pcw) + "\n";
  csv += "sequences,count," + std::to_string(seqs.size()) + "\n";
  atomic_write(opath(cfg, "gate_report.csv"), csv);

  std::ostringstream txt;
  txt << "sequences: " << seqs.size() << "\n"
      << "SRA ungated: " << fmt("%.4f", sra_ungated) << "\n"
      << "SRA gated (th=" << fmt("%.4f", th) << "): " << fmt("%.4f", sra_gated)
      << "  (gain " << fmt("%+.4f", sra_gated - sra_ungated) << ")\n"
      << "QSHR aqa: " << fmt("%.4f", qshr_aqa) << "\n"
      << "QSHR pcw: " << fmt("%.4f", qshr_pcw) << "\n";
  atomic_write(opath(cfg, "gate_report.txt"), txt.str());
  std::cout << txt.str();
}

}  // namespace oqa
