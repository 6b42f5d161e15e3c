#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "ddg/errors.hpp"

namespace ddg {

// Dense row-major matrix of 64-bit reals. All numeric state in the project
// lives in these; semantics (features, adjacency, CAS, ...) are assigned by
// the consuming module.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // rows * cols, row-major

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> vals);
  static Matrix identity(int n);

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  int size() const { return rows * cols; }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool is_finite() const;

  bool operator==(const Matrix& o) const {
    return rows == o.rows && cols == o.cols && data == o.data;
  }
};

// Standard product; throws ShapeError if inner dimensions disagree.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

// max_ij |a_ij - b_ij|; throws ShapeError on shape mismatch.
double max_abs_diff(const Matrix& a, const Matrix& b);

std::string shape_str(const Matrix& a);

}  // namespace ddg
