#include "ddg/matrix.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

namespace ddg {

Matrix::Matrix(int r, int c, double fill)
    : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {
  if (r < 0 || c < 0) {
    throw ShapeError("Matrix: negative dimensions " + std::to_string(r) + "x" + std::to_string(c));
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> vals) {
  Matrix m;
  m.rows = static_cast<int>(vals.size());
  m.cols = m.rows > 0 ? static_cast<int>(vals.begin()->size()) : 0;
  m.data.reserve(static_cast<std::size_t>(m.rows) * m.cols);
  for (const auto& row : vals) {
    if (static_cast<int>(row.size()) != m.cols) {
      throw ShapeError("Matrix::from_rows: ragged rows");
    }
    m.data.insert(m.data.end(), row.begin(), row.end());
  }
  return m;
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n, 0.0);
  for (int i = 0; i < n; ++i) {
    m.at(i, i) = 1.0;
  }
  return m;
}

bool Matrix::is_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) {
      return false;
    }
  }
  return true;
}

std::string shape_str(const Matrix& a) {
  return std::to_string(a.rows) + "x" + std::to_string(a.cols);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw ShapeError("matmul: " + shape_str(a) + " by " + shape_str(b));
  }
  Matrix out(a.rows, b.cols, 0.0);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.data.data() + static_cast<std::size_t>(i) * a.cols;
    double* orow = out.data.data() + static_cast<std::size_t>(i) * out.cols;
    for (int k = 0; k < a.cols; ++k) {
      const double av = arow[k];
      if (av == 0.0) {
        continue;
      }
      const double* brow = b.data.data() + static_cast<std::size_t>(k) * b.cols;
      for (int j = 0; j < b.cols; ++j) {
        orow[j] += av * brow[j];
      }
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < a.cols; ++j) {
      out.at(j, i) = a.at(i, j);
    }
  }
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("max_abs_diff: " + shape_str(a) + " vs " + shape_str(b));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  }
  return m;
}

}  // namespace ddg
