#pragma once

#include <initializer_list>
#include <string>
#include <vector>

#include "oqa/errors.hpp"

namespace oqa {

class Rng;

// Dense row-major matrix of doubles. The only tensor type in the project;
// column vectors are n×1 matrices.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c)
      : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), 0.0) {}

  static Mat zeros(int r, int c) { return Mat(r, c); }
  static Mat full(int r, int c, double v);
  static Mat identity(int n);
  static Mat scalar(double v);
  static Mat from_rows(std::initializer_list<std::initializer_list<double>> rws);
  static Mat column(const std::vector<double>& v);
  static Mat random_normal(int r, int c, double stddev, Rng& rng);

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  int size() const { return rows * cols; }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;
};

std::string shape_str(const Mat& m);

// Standard product; throws DimensionError naming both shapes on mismatch.
Mat matmul(const Mat& a, const Mat& b);

// out += (ta ? aᵀ : a) · (tb ? bᵀ : b); shared kernel for forward and backward.
void matmul_acc(Mat& out, const Mat& a, bool ta, const Mat& b, bool tb);

Mat transpose(const Mat& a);

// Row-wise softmax with per-row max subtraction.
Mat softmax_rows(const Mat& m);
Mat log_softmax_rows(const Mat& m);

double dot_flat(const Mat& a, const Mat& b);
double norm_flat(const Mat& a);

// Cosine similarity of two equal-length vectors (any shape, read flat).
// Throws DegenerateVectorError if either norm is zero.
double cosine(const Mat& a, const Mat& b);

}  // namespace oqa
