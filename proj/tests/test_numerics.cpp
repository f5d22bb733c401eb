#include <doctest.h>

#include <cmath>

#include "oqa/adam.hpp"
#include "oqa/mat.hpp"
#include "oqa/rng.hpp"
#include "oqa/tape.hpp"

using namespace oqa;

namespace {

Mat random_mat(int r, int c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Mat m(r, c);
  for (double& v : m.data) v = rng.uniform(lo, hi);
  return m;
}

// Entries bounded away from zero, for ops with kinks or poles there.
Mat random_mat_away_from_zero(int r, int c, Rng& rng, double min_abs = 0.2) {
  Mat m(r, c);
  for (double& v : m.data)
    v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(min_abs, min_abs + 1.0);
  return m;
}

}  // namespace

TEST_CASE("matmul examples") {
  Rng rng(7);
  const Mat m = random_mat(3, 3, rng);
  const Mat i3 = Mat::identity(3);
  const Mat left = matmul(i3, m);
  const Mat right = matmul(m, i3);
  for (int k = 0; k < m.size(); ++k) {
    CHECK(left.data[(size_t)k] == m.data[(size_t)k]);
    CHECK(right.data[(size_t)k] == m.data[(size_t)k]);
  }

  const Mat a = Mat::from_rows({{1, 2}, {3, 4}});
  const Mat b = Mat::from_rows({{1}, {1}});
  const Mat ab = matmul(a, b);
  CHECK(ab.rows == 2);
  CHECK(ab.cols == 1);
  CHECK(ab.at(0, 0) == 3.0);
  CHECK(ab.at(1, 0) == 7.0);

  const Mat z = Mat::zeros(2, 3);
  const Mat zm = matmul(z, random_mat(3, 4, rng));
  for (double v : zm.data) CHECK(v == 0.0);

  CHECK_THROWS_AS(matmul(Mat(2, 3), Mat(2, 3)), DimensionError);
  try {
    matmul(Mat(2, 3), Mat(2, 3));
  } catch (const DimensionError& e) {
    // message names both shapes
    CHECK(std::string(e.what()).find("2x3") != std::string::npos);
  }
}

TEST_CASE("softmax_rows examples and properties") {
  const Mat single = softmax_rows(Mat::from_rows({{4.2}}));
  CHECK(single.at(0, 0) == 1.0);

  const Mat sym = softmax_rows(Mat::from_rows({{0, 0}}));
  CHECK(sym.at(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(sym.at(0, 1) == doctest::Approx(0.5).epsilon(1e-15));

  // Direct evaluation oracle for [1,2,3].
  const double e1 = std::exp(1.0), e2 = std::exp(2.0), e3 = std::exp(3.0);
  const double z = e1 + e2 + e3;
  const Mat sm = softmax_rows(Mat::from_rows({{1, 2, 3}}));
  CHECK(sm.at(0, 0) == doctest::Approx(e1 / z).epsilon(1e-12));
  CHECK(sm.at(0, 1) == doctest::Approx(e2 / z).epsilon(1e-12));
  CHECK(sm.at(0, 2) == doctest::Approx(e3 / z).epsilon(1e-12));
  CHECK(sm.at(0, 0) == doctest::Approx(0.09003057317038046).epsilon(1e-12));

  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat x = random_mat(4, 6, rng, -40.0, 40.0);
    const Mat s = softmax_rows(x);
    for (int i = 0; i < s.rows; ++i) {
      double sum = 0.0;
      for (int j = 0; j < s.cols; ++j) sum += s.at(i, j);
      CHECK(std::fabs(sum - 1.0) < 1e-9);
    }
    // shift invariance per row
    Mat shifted = x;
    const double c = rng.uniform(-5.0, 5.0);
    for (double& v : shifted.data) v += c;
    const Mat s2 = softmax_rows(shifted);
    for (int k = 0; k < s.size(); ++k)
      CHECK(std::fabs(s.data[(size_t)k] - s2.data[(size_t)k]) < 1e-12);
  }
}

TEST_CASE("cosine examples") {
  Rng rng(3);
  const Mat v = random_mat(5, 1, rng);
  CHECK(cosine(v, v) == doctest::Approx(1.0).epsilon(1e-12));

  const Mat ex = Mat::from_rows({{1}, {0}});
  const Mat ey = Mat::from_rows({{0}, {1}});
  CHECK(cosine(ex, ey) == 0.0);

  const Mat a = random_mat(8, 1, rng);
  const Mat b = random_mat(8, 1, rng);
  double dot = 0, na = 0, nb = 0;
  for (int i = 0; i < 8; ++i) {
    dot += a.at(i, 0) * b.at(i, 0);
    na += a.at(i, 0) * a.at(i, 0);
    nb += b.at(i, 0) * b.at(i, 0);
  }
  CHECK(cosine(a, b) ==
        doctest::Approx(dot / (std::sqrt(na) * std::sqrt(nb))).epsilon(1e-12));
  CHECK(cosine(a, b) <= 1.0);
  CHECK(cosine(a, b) >= -1.0);

  CHECK_THROWS_AS(cosine(Mat::zeros(5, 1), v), DegenerateVectorError);
  CHECK_THROWS_AS(cosine(Mat(3, 1), Mat(4, 1)), DimensionError);
}

TEST_CASE("backward requires scalar root and accumulates fan-out") {
  Tape t;
  const NodeId x = t.param(Mat::from_rows({{1.5}, {-0.7}}));
  CHECK_THROWS_AS(t.backward(x), ContractError);

  // x feeds two consumers: f = sum(x*x) + 3*sum(x); df/dx = 2x + 3.
  const NodeId f = t.add(t.sum(t.mul(x, x)), t.scale(t.sum(x), 3.0));
  t.backward(f);
  CHECK(t.grad(x).at(0, 0) == doctest::Approx(2 * 1.5 + 3).epsilon(1e-12));
  CHECK(t.grad(x).at(1, 0) == doctest::Approx(2 * -0.7 + 3).epsilon(1e-12));
}

TEST_CASE("grad_check basics") {
  // f(x) = x^2 at x = 3: analytic 6; central differences agree closely.
  const auto square = [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum(t.mul(p[0], p[0]));
  };
  CHECK(grad_check(square, {Mat::scalar(3.0)}, 1e-5) < 1e-8);

  {
    Tape t;
    const NodeId x = t.param(Mat::scalar(3.0));
    const NodeId f = t.sum(t.mul(x, x));
    t.backward(f);
    CHECK(t.grad(x).at(0, 0) == doctest::Approx(6.0).epsilon(1e-14));
  }

  // constant function: both gradients zero
  const auto constant = [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum(t.scale(p[0], 0.0));
  };
  CHECK(grad_check(constant, {Mat::scalar(1.23)}, 1e-5) == 0.0);

  CHECK_THROWS_AS(grad_check(square, {Mat::scalar(1.0)}, 0.0), ParameterError);
}

// Every registered op embedded in a random composition of depth <= 4,
// checked against central differences for 50 seeds.
TEST_CASE("grad_check covers every op") {
  using Builder = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;
  struct OpCase {
    const char* name;
    int n_params;
    std::function<std::vector<Mat>(Rng&)> make_params;
    Builder build;
  };

  const auto plain = [](Rng& rng) {
    std::vector<Mat> p;
    p.push_back(random_mat(3, 4, rng));
    p.push_back(random_mat(3, 4, rng));
    return p;
  };
  // wraps the op output with a smooth function chosen by the input values,
  // then reduces to a scalar
  const auto finish = [](Tape& t, NodeId v, int variant) {
    switch (variant % 3) {
      case 0: return t.mean(t.sigmoid(v));
      case 1: return t.mean(t.scale(v, 1.7));
      default: return t.sum(t.mul(v, v));
    }
  };

  std::vector<OpCase> cases;
  cases.push_back({"matmul", 2,
                   [](Rng& rng) {
                     return std::vector<Mat>{random_mat(3, 4, rng), random_mat(4, 2, rng)};
                   },
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return finish(t, t.matmul(p[0], p[1]), 0);
                   }});
  cases.push_back({"add", 2, plain,
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return finish(t, t.add(p[0], p[1]), 1);
                   }});
  cases.push_back({"sub", 2, plain,
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return finish(t, t.sub(p[0], p[1]), 2);
                   }});
  cases.push_back({"mul", 2, plain,
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return finish(t, t.mul(p[0], p[1]), 0);
                   }});
  cases.push_back({"div", 2,
                   [](Rng& rng) {
                     return std::vector<Mat>{random_mat(3, 4, rng),
                                             random_mat_away_from_zero(3, 4, rng, 0.4)};
                   },
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return finish(t, t.div(p[0], p[1]), 1);
                   }});
  cases.push_back({"add_col", 2,
                   [](Rng& rng) {
                     return std::vector<Mat>{random_mat(3, 4, rng), random_mat(3, 1, rng)};
                   },
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return finish(t, t.add_col(p[0], p[1]), 2);
                   }});
  cases.push_back({"scale", 1,
                   [](Rng& rng) { return std::vector<Mat>{random_mat(3, 4, rng)}; },
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return finish(t, t.scale(p[0], -2.5), 0);
                   }});
  cases.push_back({"add_scalar", 1,
                   [](Rng& rng) { return std::vector<Mat>{random_mat(3, 4, rng)}; },
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return finish(t, t.add_scalar(p[0], 0.75), 1);
                   }});
  cases.push_back({"relu", 1,
                   [](Rng& rng) {
                     return std::vector<Mat>{random_mat_away_from_zero(3, 4, rng)};
                   },
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return finish(t, t.relu(p[0]), 2);
                   }});
  cases.push_back({"sigmoid", 1,
                   [](Rng& rng) { return std::vector<Mat>{random_mat(3, 4, rng)}; },
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return finish(t, t.sigmoid(p[0]), 0);
                   }});
  cases.push_back({"abs", 1,
                   [](Rng& rng) {
                     return std::vector<Mat>{random_mat_away_from_zero(3, 4, rng)};
                   },
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return finish(t, t.abs(p[0]), 1);
                   }});
  cases.push_back({"xlogx", 1,
                   [](Rng& rng) {
                     Mat m(3, 4);
                     for (double& v : m.data) v = rng.uniform(0.1, 1.5);
                     return std::vector<Mat>{m};
                   },
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return finish(t, t.xlogx(p[0]), 2);
                   }});
  const auto separated_pair = [](Rng& rng) {
    // elementwise |a-b| >= 0.1 so min/max selections stay stable under h
    Mat a = random_mat(3, 4, rng);
    Mat b = a;
    for (double& v : b.data)
      v += (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 0.8);
    return std::vector<Mat>{a, b};
  };
  cases.push_back({"min2", 2, separated_pair,
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return finish(t, t.min2(p[0], p[1]), 0);
                   }});
  cases.push_back({"max2", 2, separated_pair,
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return finish(t, t.max2(p[0], p[1]), 1);
                   }});
  cases.push_back({"transpose", 1,
                   [](Rng& rng) { return std::vector<Mat>{random_mat(3, 4, rng)}; },
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return finish(t, t.transp(p[0]), 2);
                   }});
  cases.push_back({"softmax_rows", 1,
                   [](Rng& rng) { return std::vector<Mat>{random_mat(3, 4, rng)}; },
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return finish(t, t.softmax_rows(p[0]), 0);
                   }});
  cases.push_back({"log_softmax_rows", 1,
                   [](Rng& rng) { return std::vector<Mat>{random_mat(3, 4, rng)}; },
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return finish(t, t.log_softmax_rows(p[0]), 1);
                   }});
  cases.push_back({"slice_rows", 1,
                   [](Rng& rng) { return std::vector<Mat>{random_mat(5, 3, rng)}; },
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return finish(t, t.slice_rows(p[0], 1, 3), 2);
                   }});
  cases.push_back({"col", 1,
                   [](Rng& rng) { return std::vector<Mat>{random_mat(4, 3, rng)}; },
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return finish(t, t.col(p[0], 1), 0);
                   }});
  cases.push_back({"concat_rows", 2, plain,
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return finish(t, t.concat_rows({p[0], p[1]}), 1);
                   }});
  cases.push_back({"col_mean", 1,
                   [](Rng& rng) { return std::vector<Mat>{random_mat(4, 5, rng)}; },
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return finish(t, t.col_mean(p[0]), 2);
                   }});
  cases.push_back({"sum", 1,
                   [](Rng& rng) { return std::vector<Mat>{random_mat(3, 4, rng)}; },
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return t.sigmoid(t.sum(p[0]));
                   }});
  cases.push_back({"mean", 1,
                   [](Rng& rng) { return std::vector<Mat>{random_mat(3, 4, rng)}; },
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return t.sigmoid(t.mean(p[0]));
                   }});
  cases.push_back({"nll_rows", 1,
                   [](Rng& rng) { return std::vector<Mat>{random_mat(4, 5, rng)}; },
                   [&](Tape& t, const std::vector<NodeId>& p) {
                     return t.nll_rows(t.log_softmax_rows(p[0]), {0, 3, 2, 4});
                   }});

  for (const OpCase& oc : cases) {
    CAPTURE(oc.name);
    for (uint64_t seed = 0; seed < 50; ++seed) {
      Rng rng(seed * 977 + 13);
      const std::vector<Mat> params = oc.make_params(rng);
      const double err = grad_check(oc.build, params, 1e-5);
      CAPTURE(seed);
      CHECK(err < 1e-4);
    }
  }
}

TEST_CASE("adam single step matches the closed-form update") {
  std::vector<Mat> params = {Mat::scalar(1.0)};
  AdamConfig cfg;
  cfg.lr = 0.1;
  AdamState adam(params, cfg);
  const double g = 0.5;
  adam.step(params, {Mat::scalar(g)});
  // t=1: mhat = g, vhat = g^2 -> delta = lr * g / (|g| + eps)
  const double expected = 1.0 - 0.1 * g / (std::sqrt(g * g) + cfg.eps);
  CHECK(params[0].at(0, 0) == doctest::Approx(expected).epsilon(1e-15));

  // decoupled weight decay adds wd * p to the step direction
  std::vector<Mat> params2 = {Mat::scalar(1.0)};
  AdamConfig cfg2;
  cfg2.lr = 0.1;
  cfg2.weight_decay = 0.01;
  AdamState adam2(params2, cfg2);
  adam2.step(params2, {Mat::scalar(g)});
  const double expected2 =
      1.0 - 0.1 * (g / (std::sqrt(g * g) + cfg2.eps) + 0.01 * 1.0);
  CHECK(params2[0].at(0, 0) == doctest::Approx(expected2).epsilon(1e-15));
}

TEST_CASE("adam minimizes a quadratic and validates shapes") {
  std::vector<Mat> params = {Mat::scalar(-4.0)};
  AdamState adam(params, AdamConfig{.lr = 0.05});
  for (int i = 0; i < 2000; ++i) {
    const double x = params[0].at(0, 0);
    adam.step(params, {Mat::scalar(2.0 * (x - 3.0))});
  }
  CHECK(params[0].at(0, 0) == doctest::Approx(3.0).epsilon(1e-3));

  CHECK_THROWS_AS(adam.step(params, {Mat(2, 2)}), DimensionError);
}

TEST_CASE("tape gradients reach only parameters") {
  Tape t;
  const NodeId c = t.constant(Mat::scalar(2.0));
  const NodeId x = t.param(Mat::scalar(5.0));
  const NodeId f = t.sum(t.mul(c, x));
  t.backward(f);
  CHECK(t.grad(x).at(0, 0) == 2.0);
  CHECK_THROWS_AS(t.grad(c), ContractError);
}
