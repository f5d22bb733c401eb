#include "oqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

namespace oqa {

std::vector<double> average_ranks(const std::vector<double>& v) {
  const size_t n = v.size();
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&v](int a, int b) { return v[static_cast<size_t>(a)] < v[static_cast<size_t>(b)]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[static_cast<size_t>(idx[j + 1])] == v[static_cast<size_t>(idx[i])]) ++j;
    // positions i..j share a value; assign the average 1-based rank
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[static_cast<size_t>(idx[k])] = avg;
    i = j + 1;
  }
  return ranks;
}

double lcc(const std::vector<double>& pred, const std::vector<double>& gt) {
  if (pred.size() != gt.size())
    throw DimensionError("lcc: length mismatch " + std::to_string(pred.size()) +
                         " vs " + std::to_string(gt.size()));
  const size_t n = pred.size();
  if (n < 2) throw UndefinedCorrelationError("lcc: need at least 2 points");
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ma += pred[i];
    mb += gt[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double da = pred[i] - ma;
    const double db = gt[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0)
    throw UndefinedCorrelationError("lcc: constant input");
  return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

double srocc(const std::vector<double>& pred, const std::vector<double>& gt) {
  if (pred.size() != gt.size())
    throw DimensionError("srocc: length mismatch " + std::to_string(pred.size()) +
                         " vs " + std::to_string(gt.size()));
  return lcc(average_ranks(pred), average_ranks(gt));
}

GroupMetrics evaluate_groups(
    const std::vector<GroupSample>& groups,
    const std::function<std::vector<double>(const GroupSample&)>& scorer,
    const std::function<double(int)>& gt_of) {
  GroupMetrics gm;
  double sum_s = 0.0, sum_l = 0.0;
  for (const GroupSample& g : groups) {
    const std::vector<double> pred = scorer(g);
    if (pred.size() != g.members.size())
      throw ContractError("evaluate_groups: scorer returned wrong count");
    std::vector<double> gt;
    gt.reserve(g.members.size());
    for (int m : g.members) gt.push_back(gt_of(m));
    try {
      const double s = srocc(pred, gt);
      const double l = lcc(pred, gt);
      sum_s += s;
      sum_l += l;
      ++gm.used;
    } catch (const UndefinedCorrelationError&) {
      ++gm.dropped;
    }
  }
  if (gm.used > 0) {
    gm.mean_srocc = sum_s / gm.used;
    gm.mean_lcc = sum_l / gm.used;
  }
  return gm;
}

double qshr(const std::vector<SequenceSample>& sequences,
            const std::function<double(int)>& score_of,
            const std::function<double(int)>& gt_of) {
  if (sequences.empty()) throw ParameterError("qshr: no sequences");
  int hits = 0;
  for (const SequenceSample& seq : sequences) {
    if (seq.frames.empty()) throw ContractError("qshr: empty sequence");
    int best = seq.frames[0];
    double best_gt = gt_of(seq.frames[0]);
    for (int f : seq.frames) best_gt = std::max(best_gt, gt_of(f));
    double best_score = score_of(seq.frames[0]);
    for (int f : seq.frames) {
      const double s = score_of(f);
      if (s > best_score) {
        best_score = s;
        best = f;
      }
    }
    if (gt_of(best) == best_gt) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(sequences.size());
}

int gated_vote(const std::vector<FrameInfo>& frames, double th) {
  if (frames.empty()) throw ContractError("gated_vote: empty sequence");
  std::vector<const FrameInfo*> kept;
  for (const FrameInfo& f : frames)
    if (f.score >= th) kept.push_back(&f);
  if (kept.empty()) {
    // All discarded: the single highest-scored frame decides.
    size_t best = 0;
    for (size_t i = 1; i < frames.size(); ++i)
      if (frames[i].score > frames[best].score) best = i;
    return frames[best].predicted;
  }
  std::map<int, std::pair<int, double>> votes;  // label -> (count, conf sum)
  for (const FrameInfo* f : kept) {
    auto& v = votes[f->predicted];
    v.first += 1;
    v.second += f->confidence;
  }
  int best_label = -1;
  int best_count = -1;
  double best_mean_conf = -1.0;
  for (const auto& [label, v] : votes) {
    const double mean_conf = v.second / v.first;
    if (v.first > best_count ||
        (v.first == best_count && mean_conf > best_mean_conf)) {
      best_label = label;
      best_count = v.first;
      best_mean_conf = mean_conf;
    }
  }
  return best_label;
}

double sra(const std::vector<SequenceSample>& sequences,
           const std::function<FrameInfo(int)>& frame_of, double th) {
  if (sequences.empty()) throw ParameterError("sra: no sequences");
  int hits = 0;
  for (const SequenceSample& seq : sequences) {
    std::vector<FrameInfo> frames;
    frames.reserve(seq.frames.size());
    for (int f : seq.frames) frames.push_back(frame_of(f));
    if (gated_vote(frames, th) == seq.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(sequences.size());
}

namespace {
std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}
}  // namespace

std::string report_to_csv(const std::vector<ReportRow>& rows) {
  std::string out = "condition,set,scorer,metric,value,groups_used,groups_dropped\n";
  for (const ReportRow& r : rows) {
    out += r.condition + "," + r.set + "," + r.scorer + "," + r.metric + "," +
           fmt6(r.value) + "," + std::to_string(r.groups_used) + "," +
           std::to_string(r.groups_dropped) + "\n";
  }
  return out;
}

std::string report_to_text(const std::vector<ReportRow>& rows) {
  // condition/set/scorer grid with one column per metric.
  std::map<std::string, std::map<std::string, double>> cells;
  std::map<std::string, std::pair<int, int>> counts;
  std::vector<std::string> order;
  for (const ReportRow& r : rows) {
    const std::string key = r.condition + "  " + r.set + "  " + r.scorer;
    if (!cells.count(key)) order.push_back(key);
    cells[key][r.metric] = r.value;
    counts[key] = {r.groups_used, r.groups_dropped};
  }
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-14s %-7s %-7s %10s %10s %8s %8s\n",
                "condition", "set", "scorer", "srocc", "lcc", "used", "dropped");
  out += buf;
  out += std::string(68, '-') + "\n";
  for (const std::string& key : order) {
    std::string cond = key.substr(0, key.find("  "));
    std::string rest = key.substr(key.find("  ") + 2);
    std::string set = rest.substr(0, rest.find("  "));
    std::string scorer = rest.substr(rest.find("  ") + 2);
    const auto& m = cells[key];
    const auto& c = counts[key];
    std::snprintf(buf, sizeof(buf), "%-14s %-7s %-7s %10.4f %10.4f %8d %8d\n",
                  cond.c_str(), set.c_str(), scorer.c_str(),
                  m.count("srocc") ? m.at("srocc") : 0.0,
                  m.count("lcc") ? m.at("lcc") : 0.0, c.first, c.second);
    out += buf;
  }
  return out;
}

}  // namespace oqa
