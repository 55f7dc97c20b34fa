#ifndef MSX_MATRIX_HPP
#define MSX_MATRIX_HPP

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace msx {

// Dense row-major double matrix. All problem sizes in this toolkit are small
// (channels <= 64), so plain loops are used throughout; no BLAS dependency.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> entries);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  double* row(std::size_t i) { return values_.data() + i * cols_; }
  const double* row(std::size_t i) const { return values_.data() + i * cols_; }

  std::vector<double> column(std::size_t j) const;
  void set_column(std::size_t j, const std::vector<double>& values);
  Matrix columns(std::size_t first, std::size_t count) const;

  Matrix transposed() const;
  bool all_finite() const;
  bool all_nonnegative() const;

  Matrix& operator*=(double scale);
  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double scale);

// b may alias a transposed product; both avoid forming explicit transposes.
Matrix mul_transpose_a(const Matrix& a, const Matrix& b);  // a^T * b
Matrix mul_transpose_b(const Matrix& a, const Matrix& b);  // a * b^T

std::vector<double> row_means(const Matrix& m);
Matrix center_rows(const Matrix& m);

double frobenius_norm(const Matrix& m);
double max_abs(const Matrix& m);
double max_abs_offdiag(const Matrix& m);

double dot(const std::vector<double>& x, const std::vector<double>& y);
double norm2(const std::vector<double>& x);

}  // namespace msx

#endif
