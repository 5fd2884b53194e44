#pragma once

// Small row-major dense matrices for the network. Every product sums over the
// inner dimension in ascending order, and each output row depends only on the
// matching input row, so results are bit-reproducible and exactly
// row-permutation equivariant.

#include "motorseg/common.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace motorseg::nn {

struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
  std::size_t size() const { return data.size(); }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  bool operator==(const Matrix&) const = default;
};

/// C = A B
Matrix matmul(const Matrix& a, const Matrix& b);
/// C += A^T B
void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& c);
/// C = A B^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);

void add_row_vector(Matrix& m, const Matrix& bias);
/// bias_grad += column sums of g
void column_sum_acc(const Matrix& g, Matrix& bias_grad);

inline constexpr double kLeakySlope = 0.2;
inline double lrelu(double x) { return x > 0.0 ? x : kLeakySlope * x; }
inline double lrelu_grad(double pre) { return pre > 0.0 ? 1.0 : kLeakySlope; }

Matrix lrelu(const Matrix& pre);
/// g := g * lrelu'(pre), elementwise
void lrelu_backward_inplace(Matrix& g, const Matrix& pre);

/// Column-wise max with the first row attaining it.
struct ColumnMax {
  Matrix value;  ///< 1 x cols
  std::vector<std::size_t> argmax;
};
ColumnMax column_max(const Matrix& m);
/// Scatters a 1 x cols gradient back to the argmax rows of an input of `rows` rows.
void column_max_backward(const ColumnMax& cm, const Matrix& grad, Matrix& input_grad);

/// [A | B] side by side.
Matrix hconcat(const Matrix& a, const Matrix& b);

Matrix from_points(std::span<const Vec3> points);
std::vector<Vec3> to_points(const Matrix& m);

}  // namespace motorseg::nn
