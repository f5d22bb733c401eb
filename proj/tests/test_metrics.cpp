#include <doctest.h>

#include <cmath>
#include <map>

#include "oqa/metrics.hpp"
#include "oqa/rng.hpp"

using namespace oqa;

namespace {

// Quadratic-time average-rank oracle: rank = 1 + #smaller + #equal-others/2.
std::vector<double> rank_oracle(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    int smaller = 0, equal = 0;
    for (size_t j = 0; j < v.size(); ++j) {
      if (v[j] < v[i]) ++smaller;
      if (j != i && v[j] == v[i]) ++equal;
    }
    out[i] = 1.0 + smaller + equal / 2.0;
  }
  return out;
}

// Single-pass covariance identity, algebraically distinct from the
// implementation's centered two-pass form.
double lcc_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = (double)a.size();
  double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    sab += a[i] * b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
  }
  return (sab - sa * sb / n) /
         std::sqrt((saa - sa * sa / n) * (sbb - sb * sb / n));
}

std::vector<double> random_vec(size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-5.0, 5.0);
  return v;
}

}  // namespace

TEST_CASE("average ranks match the oracle exhaustively (length <= 6 over {0,1,2})") {
  for (size_t n = 1; n <= 6; ++n) {
    size_t total = 1;
    for (size_t i = 0; i < n; ++i) total *= 3;
    for (size_t code = 0; code < total; ++code) {
      std::vector<double> v(n);
      size_t c = code;
      for (size_t i = 0; i < n; ++i) {
        v[i] = (double)(c % 3);
        c /= 3;
      }
      const auto got = average_ranks(v);
      const auto want = rank_oracle(v);
      for (size_t i = 0; i < n; ++i) CHECK(got[i] == want[i]);
    }
  }
}

TEST_CASE("srocc examples") {
  CHECK(srocc({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(srocc({1, 2, 3, 4}, {9, 7, 5, 3}) == doctest::Approx(-1.0).epsilon(1e-12));
  // 1 - 6*sum(d^2)/(n(n^2-1)) with d = (0,1,-1,0): 1 - 12/60
  CHECK(srocc({1, 3, 2, 4}, {1, 2, 3, 4}) == doctest::Approx(0.8).epsilon(1e-12));

  CHECK_THROWS_AS(srocc({1, 1, 1}, {1, 2, 3}), UndefinedCorrelationError);
  CHECK_THROWS_AS(srocc({1, 2}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(srocc({1}, {1}), UndefinedCorrelationError);
}

TEST_CASE("srocc is symmetric and invariant under monotone transforms") {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = random_vec(12, rng);
    const auto b = random_vec(12, rng);
    CHECK(srocc(a, b) == doctest::Approx(srocc(b, a)).epsilon(1e-12));
    std::vector<double> a3(a.size());
    for (size_t i = 0; i < a.size(); ++i) a3[i] = std::exp(a[i]);  // strictly increasing
    CHECK(srocc(a3, b) == doctest::Approx(srocc(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("lcc examples and oracle agreement") {
  const std::vector<double> x = {1, 2, 3, 5, 8};
  std::vector<double> y(x.size());
  for (size_t i = 0; i < x.size(); ++i) y[i] = 2.0 * x[i] + 1.0;
  CHECK(lcc(x, y) == doctest::Approx(1.0).epsilon(1e-12));
  for (size_t i = 0; i < x.size(); ++i) y[i] = -x[i];
  CHECK(lcc(x, y) == doctest::Approx(-1.0).epsilon(1e-12));

  Rng rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_vec(100, rng);
    const auto b = random_vec(100, rng);
    CHECK(std::fabs(lcc(a, b) - lcc_oracle(a, b)) < 1e-9);
    // positive affine transforms leave lcc unchanged
    std::vector<double> a2(a.size());
    for (size_t i = 0; i < a.size(); ++i) a2[i] = 3.5 * a[i] + 0.7;
    CHECK(lcc(a2, b) == doctest::Approx(lcc(a, b)).epsilon(1e-12));
  }

  CHECK_THROWS_AS(lcc({2, 2, 2}, {1, 2, 3}), UndefinedCorrelationError);
}

TEST_CASE("evaluate_groups drops undefined groups and counts them") {
  std::vector<LabeledSample> samples(6);
  for (size_t i = 0; i < samples.size(); ++i) {
    samples[i].label = 0;
    samples[i].gt_score = 0.1 * (double)i;
  }
  std::vector<GroupSample> groups(2);
  groups[0].members = {0, 1, 2};
  groups[1].members = {3, 4, 5};
  const auto gt_of = [&](int i) { return *samples[(size_t)i].gt_score; };
  const auto scorer = [&](const GroupSample& g) {
    // first group follows gt, second group is constant (undefined srocc)
    std::vector<double> out;
    for (int m : g.members) out.push_back(g.members[0] == 0 ? gt_of(m) : 0.5);
    return out;
  };
  const GroupMetrics gm = evaluate_groups(groups, scorer, gt_of);
  CHECK(gm.used == 1);
  CHECK(gm.dropped == 1);
  CHECK(gm.mean_srocc == doctest::Approx(1.0));
  CHECK(gm.mean_lcc == doctest::Approx(1.0));
}

TEST_CASE("qshr examples") {
  std::vector<double> gt = {0.1, 0.9, 0.4, 0.2, 0.8, 0.6};
  std::vector<SequenceSample> seqs(2);
  seqs[0].frames = {0, 1, 2};
  seqs[1].frames = {3, 4, 5};
  const auto gt_of = [&](int i) { return gt[(size_t)i]; };

  CHECK(qshr(seqs, gt_of, gt_of) == 1.0);
  const auto neg = [&](int i) { return -gt[(size_t)i]; };
  CHECK(qshr(seqs, neg, gt_of) == 0.0);

  // random scorer on 3-frame sequences with distinct gt hits 1/3 on average
  Rng rng(5);
  std::vector<SequenceSample> many(3000);
  for (size_t s = 0; s < many.size(); ++s)
    many[s].frames = {(int)(3 * s) % 6, (int)(3 * s + 1) % 6, (int)(3 * s + 2) % 6};
  std::vector<double> random_scores(6);
  double acc = 0.0;
  for (int rep = 0; rep < 40; ++rep) {
    for (double& v : random_scores) v = rng.uniform();
    const auto sc = [&](int i) { return random_scores[(size_t)i]; };
    acc += qshr(many, sc, gt_of);
  }
  CHECK(acc / 40.0 == doctest::Approx(1.0 / 3.0).epsilon(0.15));
}

TEST_CASE("gated_vote") {
  // th = 0 equals plain majority voting
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<FrameInfo> frames((size_t)rng.uniform_int(1, 9));
    for (auto& f : frames) {
      f.predicted = rng.uniform_int(0, 3);
      f.confidence = rng.uniform(0.2, 1.0);
      f.score = rng.uniform(0.0, 1.0);
    }
    // brute majority with the same tie-break
    std::map<int, std::pair<int, double>> votes;
    for (const auto& f : frames) {
      votes[f.predicted].first++;
      votes[f.predicted].second += f.confidence;
    }
    int best = -1;
    std::pair<int, double> best_v = {-1, -1.0};
    for (const auto& [label, v] : votes) {
      const double mc = v.second / v.first;
      if (v.first > best_v.first || (v.first == best_v.first && mc > best_v.second)) {
        best = label;
        best_v = {v.first, mc};
      }
    }
    CHECK(gated_vote(frames, 0.0) == best);
  }

  // gating removes low-scored frames
  std::vector<FrameInfo> frames = {{1, 0.9, 0.1}, {1, 0.8, 0.2}, {2, 0.7, 0.9}};
  CHECK(gated_vote(frames, 0.0) == 1);
  CHECK(gated_vote(frames, 0.5) == 2);

  // all below threshold: single best-scored frame decides
  CHECK(gated_vote(frames, 0.95) == 2);

  // count tie broken by mean confidence
  std::vector<FrameInfo> tied = {{1, 0.9, 1.0}, {2, 0.3, 1.0}, {1, 0.8, 1.0}, {2, 0.2, 1.0}};
  CHECK(gated_vote(tied, 0.0) == 1);

  CHECK_THROWS_AS(gated_vote({}, 0.0), ContractError);
}

TEST_CASE("sra counts correct sequence votes") {
  std::vector<SequenceSample> seqs(2);
  seqs[0].frames = {0, 1};
  seqs[0].label = 3;
  seqs[1].frames = {2};
  seqs[1].label = 4;
  std::vector<FrameInfo> table = {{3, 0.9, 0.9}, {3, 0.8, 0.8}, {7, 0.5, 0.5}};
  const auto frame_of = [&](int i) { return table[(size_t)i]; };
  CHECK(sra(seqs, frame_of, 0.0) == 0.5);
}

TEST_CASE("report formats") {
  std::vector<ReportRow> rows = {
      {"mixed", "intra", "rqa", "srocc", 0.8123456, 1000, 0},
      {"mixed", "intra", "rqa", "lcc", 0.9000001, 1000, 0},
  };
  const std::string csv = report_to_csv(rows);
  CHECK(csv.find("condition,set,scorer,metric,value,groups_used,groups_dropped\n") == 0);
  CHECK(csv.find("mixed,intra,rqa,srocc,0.812346,1000,0\n") != std::string::npos);
  const std::string txt = report_to_text(rows);
  CHECK(txt.find("mixed") != std::string::npos);
  CHECK(txt.find("0.8123") != std::string::npos);
}
