#include "oqa/mat.hpp"

#include <algorithm>
#include <cmath>

#include "oqa/rng.hpp"

namespace oqa {

Mat Mat::full(int r, int c, double v) {
  Mat m(r, c);
  std::fill(m.data.begin(), m.data.end(), v);
  return m;
}

Mat Mat::identity(int n) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

Mat Mat::scalar(double v) {
  Mat m(1, 1);
  m.data[0] = v;
  return m;
}

Mat Mat::from_rows(std::initializer_list<std::initializer_list<double>> rws) {
  const int r = static_cast<int>(rws.size());
  const int c = r > 0 ? static_cast<int>(rws.begin()->size()) : 0;
  Mat m(r, c);
  int i = 0;
  for (const auto& row : rws) {
    if (static_cast<int>(row.size()) != c)
      throw DimensionError("from_rows: ragged initializer");
    int j = 0;
    for (double v : row) m.at(i, j++) = v;
    ++i;
  }
  return m;
}

Mat Mat::column(const std::vector<double>& v) {
  Mat m(static_cast<int>(v.size()), 1);
  m.data = v;
  return m;
}

Mat Mat::random_normal(int r, int c, double stddev, Rng& rng) {
  Mat m(r, c);
  for (double& x : m.data) x = stddev * rng.normal();
  return m;
}

bool Mat::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string shape_str(const Mat& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows)
    throw DimensionError("matmul: incompatible shapes " + shape_str(a) + " * " +
                         shape_str(b));
  Mat out(a.rows, b.cols);
  matmul_acc(out, a, false, b, false);
  return out;
}

void matmul_acc(Mat& out, const Mat& a, bool ta, const Mat& b, bool tb) {
  const int m = ta ? a.cols : a.rows;
  const int k = ta ? a.rows : a.cols;
  const int kb = tb ? b.cols : b.rows;
  const int n = tb ? b.rows : b.cols;
  if (k != kb || out.rows != m || out.cols != n)
    throw DimensionError("matmul_acc: incompatible shapes " + shape_str(a) +
                         (ta ? "ᵀ" : "") + " * " + shape_str(b) + (tb ? "ᵀ" : "") +
                         " -> " + shape_str(out));
  // i-k-j loop order keeps the inner loop contiguous for row-major data.
  for (int i = 0; i < m; ++i) {
    double* orow = &out.data[static_cast<size_t>(i) * n];
    for (int kk = 0; kk < k; ++kk) {
      const double av = ta ? a.at(kk, i) : a.at(i, kk);
      if (av == 0.0) continue;
      if (!tb) {
        const double* brow = &b.data[static_cast<size_t>(kk) * b.cols];
        for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
      } else {
        for (int j = 0; j < n; ++j) orow[j] += av * b.at(j, kk);
      }
    }
  }
}

Mat transpose(const Mat& a) {
  Mat out(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Mat softmax_rows(const Mat& m) {
  Mat out(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i) {
    double mx = m.at(i, 0);
    for (int j = 1; j < m.cols; ++j) mx = std::max(mx, m.at(i, j));
    double sum = 0.0;
    for (int j = 0; j < m.cols; ++j) {
      const double e = std::exp(m.at(i, j) - mx);
      out.at(i, j) = e;
      sum += e;
    }
    for (int j = 0; j < m.cols; ++j) out.at(i, j) /= sum;
  }
  return out;
}

Mat log_softmax_rows(const Mat& m) {
  Mat out(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i) {
    double mx = m.at(i, 0);
    for (int j = 1; j < m.cols; ++j) mx = std::max(mx, m.at(i, j));
    double sum = 0.0;
    for (int j = 0; j < m.cols; ++j) sum += std::exp(m.at(i, j) - mx);
    const double lse = mx + std::log(sum);
    for (int j = 0; j < m.cols; ++j) out.at(i, j) = m.at(i, j) - lse;
  }
  return out;
}

double dot_flat(const Mat& a, const Mat& b) {
  if (a.size() != b.size())
    throw DimensionError("dot: length mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
  double s = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

double norm_flat(const Mat& a) { return std::sqrt(dot_flat(a, a)); }

double cosine(const Mat& a, const Mat& b) {
  if (a.size() != b.size())
    throw DimensionError("cosine: length mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
  const double na = norm_flat(a);
  const double nb = norm_flat(b);
  if (na == 0.0 || nb == 0.0)
    throw DegenerateVectorError("cosine: zero-norm vector");
  const double c = dot_flat(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace oqa
