#include "msx/matrix.hpp"

#include <cmath>
#include <cstddef>

#include "msx/errors.hpp"

namespace msx {

Matrix::Matrix(std::size_t rows, std::size_t cols,
               std::initializer_list<double> entries)
    : rows_(rows), cols_(cols), values_(entries) {
  if (values_.size() != rows * cols) {
    fail(ErrorCode::DomainError, "initializer size does not match dimensions");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) fail(ErrorCode::EmptyInput, "no rows");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) fail(ErrorCode::RaggedRows, "row " + std::to_string(i));
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

std::vector<double> Matrix::column(std::size_t j) const {
  std::vector<double> out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
  return out;
}

void Matrix::set_column(std::size_t j, const std::vector<double>& values) {
  for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = values[i];
}

Matrix Matrix::columns(std::size_t first, std::size_t count) const {
  Matrix out(rows_, count);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = (*this)(i, first + j);
  return out;
}

Matrix Matrix::transposed() const {
  Matrix out(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
  return out;
}

bool Matrix::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

bool Matrix::all_nonnegative() const {
  for (double v : values_)
    if (v < 0.0) return false;
  return true;
}

Matrix& Matrix::operator*=(double scale) {
  for (double& v : values_) v *= scale;
  return *this;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_)
    fail(ErrorCode::DomainError, "shape mismatch in +=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_)
    fail(ErrorCode::DomainError, "shape mismatch in -=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) fail(ErrorCode::DomainError, "shape mismatch in *");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double scale) { return a *= scale; }

Matrix mul_transpose_a(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) fail(ErrorCode::DomainError, "shape mismatch in a^T*b");
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* a_row = a.row(k);
    const double* b_row = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a_row[i];
      if (aki == 0.0) continue;
      double* out_row = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
    }
  }
  return out;
}

Matrix mul_transpose_b(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) fail(ErrorCode::DomainError, "shape mismatch in a*b^T");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* a_row = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* b_row = b.row(j);
      double sum = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) sum += a_row[k] * b_row[k];
      out(i, j) = sum;
    }
  }
  return out;
}

std::vector<double> row_means(const Matrix& m) {
  std::vector<double> means(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* row = m.row(i);
    double sum = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) sum += row[j];
    means[i] = sum / static_cast<double>(m.cols());
  }
  return means;
}

Matrix center_rows(const Matrix& m) {
  const std::vector<double> means = row_means(m);
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j) - means[i];
  return out;
}

double frobenius_norm(const Matrix& m) {
  double sum = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* row = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) sum += row[j] * row[j];
  }
  return std::sqrt(sum);
}

double max_abs(const Matrix& m) {
  double best = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      best = std::max(best, std::fabs(m(i, j)));
  return best;
}

double max_abs_offdiag(const Matrix& m) {
  double best = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (i != j) best = std::max(best, std::fabs(m(i, j)));
  return best;
}

double dot(const std::vector<double>& x, const std::vector<double>& y) {
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += x[i] * y[i];
  return sum;
}

double norm2(const std::vector<double>& x) { return std::sqrt(dot(x, x)); }

}  // namespace msx
