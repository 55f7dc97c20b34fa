#include "msx/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "msx/errors.hpp"

namespace msx {

namespace {

constexpr double kSymmetryTol = 1e-10;

void require_symmetric(const Matrix& a, const char* where) {
  if (a.rows() != a.cols()) fail(ErrorCode::NotSymmetric, std::string(where) + ": not square");
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j)
      if (std::fabs(a(i, j) - a(j, i)) > kSymmetryTol)
        fail(ErrorCode::NotSymmetric, std::string(where) + ": asymmetry at (" +
                                          std::to_string(i) + "," + std::to_string(j) + ")");
}

// Apply the Givens similarity transform in the (p, q) plane to A (symmetric)
// and accumulate the rotation into V.
void rotate_pair(Matrix& a, Matrix& v, std::size_t p, std::size_t q, double c,
                 double s) {
  const std::size_t n = a.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const double aip = a(i, p);
    const double aiq = a(i, q);
    a(i, p) = c * aip + s * aiq;
    a(i, q) = -s * aip + c * aiq;
  }
  for (std::size_t j = 0; j < n; ++j) {
    const double apj = a(p, j);
    const double aqj = a(q, j);
    a(p, j) = c * apj + s * aqj;
    a(q, j) = -s * apj + c * aqj;
  }
  for (std::size_t i = 0; i < v.rows(); ++i) {
    const double vip = v(i, p);
    const double viq = v(i, q);
    v(i, p) = c * vip + s * viq;
    v(i, q) = -s * vip + c * viq;
  }
}

}  // namespace

Matrix covariance(const Matrix& m) {
  const std::size_t n = m.cols();
  if (n < 2) fail(ErrorCode::DegenerateInput, "covariance needs >= 2 samples");
  const Matrix centered = center_rows(m);
  Matrix c = mul_transpose_b(centered, centered);
  c *= 1.0 / static_cast<double>(n - 1);
  // exact symmetry despite rounding in the products
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = i + 1; j < c.cols(); ++j) {
      const double v = 0.5 * (c(i, j) + c(j, i));
      c(i, j) = v;
      c(j, i) = v;
    }
  return c;
}

Matrix lagged_covariance(const Matrix& m, std::size_t lag) {
  const std::size_t n = m.cols();
  if (lag + 1 >= n)
    fail(ErrorCode::DegenerateInput, "lag must satisfy tau < n-1");
  const std::vector<double> means = row_means(m);
  const std::size_t span = n - lag;
  Matrix c(m.rows(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* ri = m.row(i);
    for (std::size_t j = 0; j < m.rows(); ++j) {
      const double* rj = m.row(j);
      double sum = 0.0;
      for (std::size_t t = 0; t < span; ++t)
        sum += (ri[t] - means[i]) * (rj[t + lag] - means[j]);
      c(i, j) = sum / static_cast<double>(span);
    }
  }
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = i + 1; j < c.cols(); ++j) {
      const double v = 0.5 * (c(i, j) + c(j, i));
      c(i, j) = v;
      c(j, i) = v;
    }
  return c;
}

SymEig sym_eig(const Matrix& input) {
  require_symmetric(input, "sym_eig");
  const std::size_t n = input.rows();
  Matrix a = input;
  Matrix v = Matrix::identity(n);

  constexpr std::size_t kMaxSweeps = 100;
  for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    double diag_scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) diag_scale += a(i, i) * a(i, i);
    if (off <= 1e-28 * std::max(1e-100, diag_scale)) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double diff = a(q, q) - a(p, p);
        double t;
        if (std::fabs(apq) * 1e15 < std::fabs(diff)) {
          t = apq / diff;
        } else {
          const double theta = diff / (2.0 * apq);
          t = 1.0 / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
          if (theta < 0.0) t = -t;
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = -t * c;  // sign pairs this t with rotate_pair's convention
        rotate_pair(a, v, p, q, c, s);
        // the rotation annihilates this entry exactly in exact arithmetic
        a(p, q) = 0.0;
        a(q, p) = 0.0;
      }
    }
  }

  SymEig result;
  result.eigenvalues.resize(n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> raw(n);
  for (std::size_t i = 0; i < n; ++i) raw[i] = a(i, i);
  std::stable_sort(order.begin(), order.end(),
                   [&raw](std::size_t x, std::size_t y) { return raw[x] > raw[y]; });
  result.eigenvectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    result.eigenvalues[j] = raw[order[j]];
    for (std::size_t i = 0; i < n; ++i)
      result.eigenvectors(i, j) = v(i, order[j]);
  }
  return result;
}

std::size_t covariance_rank(const SymEig& eig, double eigenvalue_floor) {
  std::size_t rank = 0;
  for (double value : eig.eigenvalues)
    if (value > eigenvalue_floor) ++rank;
  return rank;
}

WhitenResult whiten(const Matrix& m, std::size_t r, double eigenvalue_floor) {
  if (r < 1 || r > m.rows())
    fail(ErrorCode::DomainError, "whiten: r must be in [1, channels]");
  const Matrix c = covariance(m);
  const SymEig eig = sym_eig(c);
  for (std::size_t i = 0; i < r; ++i) {
    if (eig.eigenvalues[i] <= eigenvalue_floor)
      fail(ErrorCode::RankDeficient,
           "whiten: eigenvalue " + std::to_string(i) + " below floor");
  }

  WhitenResult out;
  out.whitening.retained_dims = r;
  out.whitening.transform = Matrix(r, m.rows());
  out.whitening.dewhitening = Matrix(m.rows(), r);
  for (std::size_t k = 0; k < r; ++k) {
    const double scale = std::sqrt(eig.eigenvalues[k]);
    for (std::size_t i = 0; i < m.rows(); ++i) {
      out.whitening.transform(k, i) = eig.eigenvectors(i, k) / scale;
      out.whitening.dewhitening(i, k) = eig.eigenvectors(i, k) * scale;
    }
  }
  out.whitened = out.whitening.transform * center_rows(m);
  return out;
}

JointDiagResult joint_diagonalize(const std::vector<Matrix>& mats,
                                  const JointDiagOptions& options) {
  if (mats.empty()) fail(ErrorCode::DomainError, "joint_diagonalize: empty set");
  const std::size_t n = mats.front().rows();
  for (const Matrix& m : mats) {
    require_symmetric(m, "joint_diagonalize");
    if (m.rows() != n) fail(ErrorCode::DomainError, "joint_diagonalize: mixed sizes");
  }

  std::vector<Matrix> work = mats;
  Matrix u = Matrix::identity(n);
  std::size_t rotations = 0;

  for (std::size_t sweep = 0; sweep < options.max_sweeps; ++sweep) {
    double max_angle = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        // Jacobi angle minimising the summed squared off-diagonal energy of
        // the pencil in the (p, q) plane.
        double g11 = 0.0, g12 = 0.0, g22 = 0.0;
        for (const Matrix& a : work) {
          const double d = a(p, p) - a(q, q);
          const double o = a(p, q) + a(q, p);
          g11 += d * d;
          g12 += d * o;
          g22 += o * o;
        }
        const double ton = g11 - g22;
        const double toff = 2.0 * g12;
        const double theta =
            0.5 * std::atan2(toff, ton + std::sqrt(ton * ton + toff * toff));
        if (std::fabs(theta) <= options.tol) continue;
        max_angle = std::max(max_angle, std::fabs(theta));
        ++rotations;
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        Matrix dummy(0, 0);
        for (Matrix& a : work) rotate_pair(a, dummy, p, q, c, s);
        for (std::size_t i = 0; i < n; ++i) {
          const double uip = u(i, p);
          const double uiq = u(i, q);
          u(i, p) = c * uip + s * uiq;
          u(i, q) = -s * uip + c * uiq;
        }
      }
    }
    if (max_angle <= options.tol) return {u, sweep + 1, rotations};
  }
  fail(ErrorCode::NoConvergence, "joint_diagonalize: max sweeps exceeded");
}

Matrix solve_spd(const Matrix& a, const Matrix& b, double rel_floor) {
  const SymEig eig = sym_eig(a);
  const double lambda_max = eig.eigenvalues.empty() ? 0.0 : eig.eigenvalues.front();
  const double floor_value = std::max(lambda_max * rel_floor, 0.0);
  // X = V * clamp(D)^-1 * V^T * B
  const Matrix vt_b = mul_transpose_a(eig.eigenvectors, b);
  Matrix scaled = vt_b;
  for (std::size_t i = 0; i < scaled.rows(); ++i) {
    const double lambda = eig.eigenvalues[i];
    const double inv = lambda > floor_value ? 1.0 / lambda : 0.0;
    for (std::size_t j = 0; j < scaled.cols(); ++j) scaled(i, j) *= inv;
  }
  return eig.eigenvectors * scaled;
}

}  // namespace msx
