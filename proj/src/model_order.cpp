#include "msx/model_order.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "msx/errors.hpp"
#include "msx/numerics.hpp"

namespace msx {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

struct ModelTerms {
  Matrix sigma_inv;  // (Psi + AA^T)^-1, m x m
  double log_det = 0.0;
};

// Woodbury form keeps everything well conditioned even when Psi sits on the
// floor: the inner r x r matrix is I + A^T Psi^-1 A >= I.
ModelTerms invert_model(const Matrix& a, const std::vector<double>& psi) {
  const std::size_t m = a.rows();
  const std::size_t r = a.cols();

  Matrix psi_inv_a(m, r);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < r; ++j) psi_inv_a(i, j) = a(i, j) / psi[i];

  Matrix inner = mul_transpose_a(a, psi_inv_a);
  for (std::size_t j = 0; j < r; ++j) inner(j, j) += 1.0;
  // the division by psi breaks bitwise symmetry; restore it exactly
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = i + 1; j < r; ++j) {
      const double v = 0.5 * (inner(i, j) + inner(j, i));
      inner(i, j) = v;
      inner(j, i) = v;
    }
  const SymEig inner_eig = sym_eig(inner);
  for (double lambda : inner_eig.eigenvalues)
    if (!(lambda > 0.0) || !std::isfinite(lambda))
      fail(ErrorCode::SingularModel, "factor model covariance is singular");

  Matrix scaled = inner_eig.eigenvectors;
  double log_det_inner = 0.0;
  for (std::size_t j = 0; j < r; ++j) {
    log_det_inner += std::log(inner_eig.eigenvalues[j]);
    const double inv = 1.0 / inner_eig.eigenvalues[j];
    for (std::size_t i = 0; i < r; ++i) scaled(i, j) *= inv;
  }
  const Matrix inner_inv = mul_transpose_b(scaled, inner_eig.eigenvectors);

  ModelTerms terms;
  terms.sigma_inv = Matrix(m, m);
  const Matrix correction = psi_inv_a * (inner_inv * psi_inv_a.transposed());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j)
      terms.sigma_inv(i, j) = -correction(i, j);
    terms.sigma_inv(i, i) += 1.0 / psi[i];
  }
  terms.log_det = log_det_inner;
  for (std::size_t i = 0; i < m; ++i) terms.log_det += std::log(psi[i]);
  return terms;
}

double model_loglik(const Matrix& c, const ModelTerms& terms) {
  double trace = 0.0;
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < c.cols(); ++j)
      trace += c(i, j) * terms.sigma_inv(j, i);
  const double m = static_cast<double>(c.rows());
  return -0.5 * (trace + terms.log_det + m * std::log(kTwoPi));
}

}  // namespace

std::size_t r_max_bound(std::size_t channels) {
  if (channels < 2) fail(ErrorCode::DomainError, "r_max_bound needs m >= 2");
  const double m = static_cast<double>(channels);
  const double bound = 0.5 * (2.0 * m + 1.0 - std::sqrt(8.0 * m + 1.0));
  const double floored = std::floor(bound);
  return floored < 1.0 ? 1 : static_cast<std::size_t>(floored);
}

FactorAnalysisFit fa_fit(const Matrix& c, std::size_t r, std::size_t n,
                         const FaConfig& config) {
  if (c.rows() != c.cols()) fail(ErrorCode::DomainError, "covariance not square");
  const std::size_t m = c.rows();
  if (n < 2) fail(ErrorCode::DomainError, "fa_fit needs n >= 2");
  if (r < 1 || r > r_max_bound(m))
    fail(ErrorCode::DomainError,
         "factor count must be in [1, " + std::to_string(r_max_bound(m)) + "]");

  // PCA initialisation: loadings from the top-r scaled eigenvectors, unique
  // variances from half the channel variances.
  const SymEig eig = sym_eig(c);
  Matrix a(m, r);
  for (std::size_t j = 0; j < r; ++j) {
    const double scale = std::sqrt(std::max(eig.eigenvalues[j], config.psi_floor));
    for (std::size_t i = 0; i < m; ++i) a(i, j) = eig.eigenvectors(i, j) * scale;
  }
  std::vector<double> psi(m);
  for (std::size_t i = 0; i < m; ++i)
    psi[i] = std::max(0.5 * c(i, i), config.psi_floor);

  FactorAnalysisFit fit;
  double prev = -std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < config.max_iter; ++it) {
    const ModelTerms terms = invert_model(a, psi);
    const double loglik = model_loglik(c, terms);
    if (!std::isfinite(loglik))
      fail(ErrorCode::SingularModel, "non-finite likelihood in EM");
    fit.loglik_path.push_back(loglik);
    fit.iterations = it + 1;
    if (std::fabs(loglik - prev) < config.tol) {
      fit.converged = true;
      break;
    }
    prev = loglik;

    // EM update
    const Matrix beta = mul_transpose_a(a, terms.sigma_inv);  // r x m
    const Matrix beta_c = beta * c;                           // r x m
    Matrix second = mul_transpose_b(beta_c, beta);            // beta C beta^T
    const Matrix beta_a = beta * a;
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < r; ++j) second(i, j) -= beta_a(i, j);
      second(i, i) += 1.0;
    }
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = i + 1; j < r; ++j) {
        const double v = 0.5 * (second(i, j) + second(j, i));
        second(i, j) = v;
        second(j, i) = v;
      }
    const Matrix a_new_t = solve_spd(second, beta_c);  // r x m
    a = a_new_t.transposed();
    for (std::size_t i = 0; i < m; ++i) {
      double explained = 0.0;
      for (std::size_t j = 0; j < r; ++j) explained += a(i, j) * beta_c(j, i);
      psi[i] = std::max(c(i, i) - explained, config.psi_floor);
    }
  }

  const ModelTerms final_terms = invert_model(a, psi);
  fit.loglik = model_loglik(c, final_terms);
  fit.loadings = std::move(a);
  fit.unique_variances = std::move(psi);
  return fit;
}

double mdl_score(double loglik, std::size_t m, std::size_t r, std::size_t n) {
  if (n < 2) fail(ErrorCode::DomainError, "mdl_score needs n >= 2");
  const double dn = static_cast<double>(n);
  const double dm = static_cast<double>(m);
  const double dr = static_cast<double>(r);
  const double penalty =
      (std::log(dn) / dn) * (dm * (dr + 1.0) - dr * (dr - 1.0) / 2.0);
  return -loglik + penalty;
}

MdlReport select_order(const EmgEpoch& epoch, const FaConfig& config) {
  epoch.validate();
  if (epoch.channels() < 2)
    fail(ErrorCode::DomainError, "order selection needs >= 2 channels");
  const Matrix c = covariance(epoch.data);
  const std::size_t n = epoch.samples();

  MdlReport report;
  report.r_max = r_max_bound(epoch.channels());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 1; r <= report.r_max; ++r) {
    const FactorAnalysisFit fit = fa_fit(c, r, n, config);
    const double score = mdl_score(fit.loglik, epoch.channels(), r, n);
    report.scores[r] = score;
    if (score < best) {
      best = score;
      report.r_star = r;
    }
  }
  return report;
}

}  // namespace msx
