#include "motorseg/tensor.hpp"

#include <algorithm>

namespace motorseg::nn {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw SizeError(what);
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols == b.rows, "matmul: inner dimensions differ");
  Matrix c(a.rows, b.cols);
  const std::size_t n = b.cols;
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* ci = c.row(i);
    const double* ai = a.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double s = ai[k];
      const double* bk = b.row(k);
      for (std::size_t j = 0; j < n; ++j) ci[j] += s * bk[j];
    }
  }
  return c;
}

void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  require(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols, "matmul_tn: shapes differ");
  const std::size_t n = b.cols;
  for (std::size_t r = 0; r < a.rows; ++r) {
    const double* ar = a.row(r);
    const double* br = b.row(r);
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double s = ar[i];
      if (s == 0.0) continue;
      double* ci = c.row(i);
      for (std::size_t j = 0; j < n; ++j) ci[j] += s * br[j];
    }
  }
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols == b.cols, "matmul_nt: inner dimensions differ");
  Matrix c(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ai = a.row(i);
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* bj = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += ai[k] * bj[k];
      c(i, j) = s;
    }
  }
  return c;
}

void add_row_vector(Matrix& m, const Matrix& bias) {
  require(bias.rows == 1 && bias.cols == m.cols, "add_row_vector: shape");
  for (std::size_t i = 0; i < m.rows; ++i) {
    double* r = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) r[j] += bias.data[j];
  }
}

void column_sum_acc(const Matrix& g, Matrix& bias_grad) {
  require(bias_grad.rows == 1 && bias_grad.cols == g.cols, "column_sum: shape");
  for (std::size_t i = 0; i < g.rows; ++i) {
    const double* r = g.row(i);
    for (std::size_t j = 0; j < g.cols; ++j) bias_grad.data[j] += r[j];
  }
}

Matrix lrelu(const Matrix& pre) {
  Matrix out = pre;
  for (auto& v : out.data) v = lrelu(v);
  return out;
}

void lrelu_backward_inplace(Matrix& g, const Matrix& pre) {
  require(g.same_shape(pre), "lrelu_backward: shape");
  for (std::size_t i = 0; i < g.size(); ++i) g.data[i] *= lrelu_grad(pre.data[i]);
}

ColumnMax column_max(const Matrix& m) {
  require(m.rows > 0, "column_max: empty matrix");
  ColumnMax cm{Matrix(1, m.cols), std::vector<std::size_t>(m.cols, 0)};
  for (std::size_t j = 0; j < m.cols; ++j) cm.value.data[j] = m(0, j);
  for (std::size_t i = 1; i < m.rows; ++i) {
    const double* r = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j)
      if (r[j] > cm.value.data[j]) {
        cm.value.data[j] = r[j];
        cm.argmax[j] = i;
      }
  }
  return cm;
}

void column_max_backward(const ColumnMax& cm, const Matrix& grad, Matrix& input_grad) {
  require(grad.cols == cm.argmax.size() && input_grad.cols == grad.cols, "column_max_backward: shape");
  for (std::size_t j = 0; j < grad.cols; ++j) input_grad(cm.argmax[j], j) += grad.data[j];
}

Matrix hconcat(const Matrix& a, const Matrix& b) {
  require(a.rows == b.rows, "hconcat: row counts differ");
  Matrix c(a.rows, a.cols + b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    std::copy(a.row(i), a.row(i) + a.cols, c.row(i));
    std::copy(b.row(i), b.row(i) + b.cols, c.row(i) + a.cols);
  }
  return c;
}

Matrix from_points(std::span<const Vec3> points) {
  Matrix m(points.size(), 3);
  for (std::size_t i = 0; i < points.size(); ++i)
    for (int k = 0; k < 3; ++k) m(i, k) = points[i][k];
  return m;
}

std::vector<Vec3> to_points(const Matrix& m) {
  require(m.cols == 3, "to_points: expected 3 columns");
  std::vector<Vec3> out(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) out[i] = Vec3(m(i, 0), m(i, 1), m(i, 2));
  return out;
}

}  // namespace motorseg::nn
