#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "fairgraph/graph.hpp"

namespace fairgraph {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool all_finite() const;
  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Kernels. Each throws ShapeError on incompatible operands and NumericError
// on non-finite input.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_transpose_a(const Matrix& a, const Matrix& b);  // a^T b
Matrix matmul_transpose_b(const Matrix& a, const Matrix& b);  // a b^T
Matrix add(const Matrix& a, const Matrix& b);
Matrix add_row_bias(const Matrix& a, const Matrix& bias);  // bias is 1 x cols
Matrix relu(const Matrix& a);
Matrix sigmoid(const Matrix& a);
Matrix log(const Matrix& a);
/// exp(a - rowmax(a)) per row.
Matrix exp_stable(const Matrix& a);
/// Row v is the mean of the rows of v's neighbors; zero for isolated nodes.
Matrix row_mean_neighbors(const Graph& g, const Matrix& x);
/// Rows scaled to unit L2 norm; zero rows stay zero.
Matrix row_l2_normalize(const Matrix& a);
/// Entry (i, j) is cos(a_i, b_j); zero when either row is zero.
Matrix cosine_matrix(const Matrix& a, const Matrix& b);
Matrix concat_cols(const Matrix& a, const Matrix& b);
Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t count);
Matrix transpose(const Matrix& a);

double sigmoid(double x);
double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);
/// Cosine similarity; 0 when either vector is zero.
double cosine(std::span<const double> a, std::span<const double> b);

void require_finite(const Matrix& a, const char* what);

}  // namespace fairgraph
