#include "msx/factorize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "msx/errors.hpp"
#include "msx/numerics.hpp"
#include "msx/rng.hpp"

namespace msx {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void require_rank_range(const EmgEpoch& epoch, std::size_t r) {
  epoch.validate();
  if (r < 1 || r > epoch.channels())
    fail(ErrorCode::DomainError, "synergy count must be in [1, channels]");
}

double relative_residual(const Matrix& target, const Matrix& s, const Matrix& w) {
  const Matrix recon = s * w;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < target.rows(); ++i)
    for (std::size_t j = 0; j < target.cols(); ++j) {
      const double d = target(i, j) - recon(i, j);
      num += d * d;
      den += target(i, j) * target(i, j);
    }
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

// Stable order: descending variance of the weighting rows. PCA already
// satisfies it; for the blind methods it fixes the arbitrary component order.
void order_by_weight_variance(Matrix& s, Matrix& w) {
  const std::size_t r = s.cols();
  std::vector<double> var(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = w.row(i);
    double mu = 0.0;
    for (std::size_t t = 0; t < w.cols(); ++t) mu += row[t];
    mu /= static_cast<double>(w.cols());
    double sum = 0.0;
    for (std::size_t t = 0; t < w.cols(); ++t) sum += (row[t] - mu) * (row[t] - mu);
    var[i] = sum;
  }
  std::vector<std::size_t> order(r);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&var](std::size_t a, std::size_t b) { return var[a] > var[b]; });
  Matrix s2(s.rows(), r), w2(r, w.cols());
  for (std::size_t k = 0; k < r; ++k) {
    for (std::size_t i = 0; i < s.rows(); ++i) s2(i, k) = s(i, order[k]);
    for (std::size_t t = 0; t < w.cols(); ++t) w2(k, t) = w(order[k], t);
  }
  s = std::move(s2);
  w = std::move(w2);
}

FactorizationResult finish(const Matrix& raw_s, const Matrix& raw_w,
                           Method method, const Matrix& residual_target,
                           int iterations, bool converged,
                           Clock::time_point start) {
  Matrix s = raw_s;
  Matrix w = raw_w;
  order_by_weight_variance(s, w);
  auto [synergies, weights] = normalize_result(s, w, method);
  FactorizationResult result;
  result.residual = relative_residual(residual_target, synergies.s, weights.w);
  result.synergies = std::move(synergies);
  result.weights = std::move(weights);
  result.iterations = iterations;
  result.converged = converged;
  result.elapsed_seconds = seconds_since(start);
  return result;
}

}  // namespace

const char* method_name(Method method) {
  switch (method) {
    case Method::PCA: return "pca";
    case Method::ICA: return "ica";
    case Method::NMF: return "nmf";
    case Method::SOBI: return "sobi";
  }
  return "unknown";
}

std::optional<Method> method_from_name(const std::string& name) {
  if (name == "pca" || name == "PCA") return Method::PCA;
  if (name == "ica" || name == "ICA") return Method::ICA;
  if (name == "nmf" || name == "NMF") return Method::NMF;
  if (name == "sobi" || name == "SOBI") return Method::SOBI;
  return std::nullopt;
}

void EmgEpoch::validate() const {
  if (data.rows() < 1 || data.cols() < 1)
    fail(ErrorCode::DegenerateInput, "empty epoch");
  if (!data.all_finite()) fail(ErrorCode::DegenerateInput, "non-finite sample");
  if (!data.all_nonnegative()) fail(ErrorCode::NegativeValue, "negative sample");
  if (!(sample_rate > 0.0)) fail(ErrorCode::DomainError, "sample rate must be > 0");
  if (data.cols() < 2 * data.rows())
    fail(ErrorCode::DegenerateInput, "epoch needs samples >= 2 * channels");
}

std::pair<SynergySet, WeightingSet> normalize_result(const Matrix& s,
                                                     const Matrix& w,
                                                     Method method) {
  if (s.cols() != w.rows())
    fail(ErrorCode::DomainError, "synergy count mismatch between S and W");
  SynergySet synergies{s, method};
  WeightingSet weights{w};
  for (std::size_t j = 0; j < s.cols(); ++j) {
    double norm_sq = 0.0;
    double peak = 0.0;
    std::size_t peak_row = 0;
    for (std::size_t i = 0; i < s.rows(); ++i) {
      const double v = s(i, j);
      norm_sq += v * v;
      if (std::fabs(v) > peak) {
        peak = std::fabs(v);
        peak_row = i;
      }
    }
    if (peak == 0.0)
      fail(ErrorCode::ZeroColumn, "synergy column " + std::to_string(j));
    const double norm = std::sqrt(norm_sq);
    const double sign = s(peak_row, j) < 0.0 ? -1.0 : 1.0;
    const double col_scale = sign / norm;
    for (std::size_t i = 0; i < s.rows(); ++i)
      synergies.s(i, j) = s(i, j) * col_scale;
    const double row_scale = sign * norm;
    for (std::size_t t = 0; t < w.cols(); ++t)
      weights.w(j, t) = w(j, t) * row_scale;
  }
  return {std::move(synergies), std::move(weights)};
}

FactorizationResult pca_factorize(const EmgEpoch& epoch, std::size_t r) {
  const auto start = Clock::now();
  require_rank_range(epoch, r);
  const Matrix centered = center_rows(epoch.data);
  const Matrix c = covariance(epoch.data);
  const SymEig eig = sym_eig(c);
  if (covariance_rank(eig) < r)
    fail(ErrorCode::RankDeficient, "covariance rank below requested synergies");
  const Matrix s = eig.eigenvectors.columns(0, r);
  const Matrix w = mul_transpose_a(s, centered);
  return finish(s, w, Method::PCA, centered, 0, true, start);
}

FactorizationResult ica_factorize(const EmgEpoch& epoch, std::size_t r,
                                  const IcaConfig& config) {
  const auto start = Clock::now();
  require_rank_range(epoch, r);
  const Matrix centered = center_rows(epoch.data);

  // Whiten across the full signal rank, then look for r rotation columns in
  // that space; the non-Gaussian directions are not necessarily the leading
  // variance directions.
  const Matrix c = covariance(epoch.data);
  const SymEig eig = sym_eig(c);
  const std::size_t rank = covariance_rank(eig);
  if (rank < r) fail(ErrorCode::RankDeficient, "signal rank below requested synergies");
  const WhitenResult white = whiten(epoch.data, rank);
  const Matrix& z = white.whitened;  // rank x n
  const std::size_t d = rank;
  const std::size_t n = z.cols();

  Rng rng(derive_seed(config.seed, 0xA11CE));
  Matrix b(d, r);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < r; ++j) b(i, j) = rng.gaussian();

  const auto orthonormalize = [](const Matrix& raw) {
    // symmetric decorrelation: B (B^T B)^(-1/2)
    const Matrix gram = mul_transpose_a(raw, raw);
    const SymEig ge = sym_eig(gram);
    Matrix scaled = ge.eigenvectors;
    for (std::size_t j = 0; j < scaled.cols(); ++j) {
      const double lambda = ge.eigenvalues[j];
      if (lambda <= 0.0)
        fail(ErrorCode::SingularModel, "degenerate rotation during ICA");
      const double inv_sqrt = 1.0 / std::sqrt(lambda);
      for (std::size_t i = 0; i < scaled.rows(); ++i) scaled(i, j) *= inv_sqrt;
    }
    return raw * mul_transpose_b(scaled, ge.eigenvectors);
  };

  b = orthonormalize(b);
  bool converged = false;
  int iterations = 0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int it = 0; it < config.max_iter; ++it) {
    ++iterations;
    Matrix y = mul_transpose_a(b, z);  // r x n
    std::vector<double> gprime_mean(r, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
      double* row = y.row(i);
      double acc = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        const double g = std::tanh(row[t]);
        acc += 1.0 - g * g;
        row[t] = g;
      }
      gprime_mean[i] = acc * inv_n;
    }
    Matrix b_plus = mul_transpose_b(z, y);  // d x r
    b_plus *= inv_n;
    for (std::size_t j = 0; j < r; ++j)
      for (std::size_t i = 0; i < d; ++i) b_plus(i, j) -= gprime_mean[j] * b(i, j);
    const Matrix b_new = orthonormalize(b_plus);

    double min_align = 1.0;
    for (std::size_t j = 0; j < r; ++j) {
      double align = 0.0;
      for (std::size_t i = 0; i < d; ++i) align += b_new(i, j) * b(i, j);
      min_align = std::min(min_align, std::fabs(align));
    }
    b = b_new;
    if (1.0 - min_align < config.tol) {
      converged = true;
      break;
    }
  }

  const Matrix s = white.whitening.dewhitening * b;
  const Matrix w = mul_transpose_a(b, z);
  return finish(s, w, Method::ICA, centered, iterations, converged, start);
}

FactorizationResult nmf_factorize(const EmgEpoch& epoch, std::size_t r,
                                  const NmfConfig& config) {
  const auto start = Clock::now();
  require_rank_range(epoch, r);
  const Matrix& m = epoch.data;
  const std::size_t rows = m.rows();
  const std::size_t n = m.cols();

  struct Run {
    Matrix s, w;
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
  };
  std::optional<Run> best;

  for (int restart = 0; restart < std::max(1, config.restarts); ++restart) {
    Rng rng(derive_seed(config.seed, 0x4E4D46, static_cast<std::uint64_t>(restart)));
    Matrix s(rows, r);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < r; ++j) s(i, j) = rng.uniform01();
    Matrix w(r, n);

    const auto revive_dead_columns = [&](Matrix& sm, Matrix& wm) {
      for (std::size_t j = 0; j < r; ++j) {
        double col_peak = 0.0;
        for (std::size_t i = 0; i < rows; ++i)
          col_peak = std::max(col_peak, std::fabs(sm(i, j)));
        if (col_peak == 0.0)
          for (std::size_t i = 0; i < rows; ++i) sm(i, j) = rng.uniform01();
        double row_peak = 0.0;
        for (std::size_t t = 0; t < n; ++t)
          row_peak = std::max(row_peak, std::fabs(wm(j, t)));
        if (row_peak == 0.0 && wm.cols() > 0)
          for (std::size_t t = 0; t < n; ++t) wm(j, t) = rng.uniform01();
      }
    };

    double prev_res = -1.0;
    double res = 0.0;
    int it = 0;
    bool converged = false;
    for (it = 1; it <= config.max_iter; ++it) {
      if (config.update == NmfUpdate::AlternatingLeastSquares) {
        w = solve_spd(mul_transpose_a(s, s), mul_transpose_a(s, m));
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t t = 0; t < n; ++t) w(i, t) = std::max(0.0, w(i, t));
        revive_dead_columns(s, w);
        Matrix st = solve_spd(mul_transpose_b(w, w), w * m.transposed());
        s = st.transposed();
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < r; ++j) s(i, j) = std::max(0.0, s(i, j));
        revive_dead_columns(s, w);
      } else {
        if (it == 1)
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t t = 0; t < n; ++t) w(i, t) = rng.uniform01();
        constexpr double kGuard = 1e-12;
        const Matrix st_m = mul_transpose_a(s, m);
        const Matrix st_s_w = mul_transpose_a(s, s) * w;
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t t = 0; t < n; ++t)
            w(i, t) *= st_m(i, t) / (st_s_w(i, t) + kGuard);
        const Matrix m_wt = mul_transpose_b(m, w);
        const Matrix s_w_wt = s * mul_transpose_b(w, w);
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < r; ++j)
            s(i, j) *= m_wt(i, j) / (s_w_wt(i, j) + kGuard);
        revive_dead_columns(s, w);
      }
      res = relative_residual(m, s, w);
      if (prev_res >= 0.0 &&
          std::fabs(prev_res - res) < config.tol * std::max(prev_res, 1e-12)) {
        converged = true;
        break;
      }
      prev_res = res;
    }
    Run run{std::move(s), std::move(w), res, std::min(it, config.max_iter), converged};
    if (!best || run.residual < best->residual) best = std::move(run);
  }

  return finish(best->s, best->w, Method::NMF, m, best->iterations,
                best->converged, start);
}

FactorizationResult sobi_factorize(const EmgEpoch& epoch, std::size_t r,
                                   std::size_t lags) {
  const auto start = Clock::now();
  require_rank_range(epoch, r);
  if (epoch.samples() <= lags + 1)
    fail(ErrorCode::DegenerateInput, "epoch too short for requested lags");
  const Matrix centered = center_rows(epoch.data);
  const WhitenResult white = whiten(epoch.data, r);

  std::vector<Matrix> lagged;
  lagged.reserve(lags);
  for (std::size_t tau = 1; tau <= lags; ++tau)
    lagged.push_back(lagged_covariance(white.whitened, tau));
  const JointDiagResult jd = joint_diagonalize(lagged);

  const Matrix s = white.whitening.dewhitening * jd.basis;
  const Matrix w = mul_transpose_a(jd.basis, white.whitened);
  return finish(s, w, Method::SOBI, centered, static_cast<int>(jd.sweeps), true,
                start);
}

FactorizationResult factorize(const EmgEpoch& epoch, Method method,
                              std::size_t r, std::uint64_t seed) {
  switch (method) {
    case Method::PCA: return pca_factorize(epoch, r);
    case Method::ICA: {
      IcaConfig config;
      config.seed = seed;
      return ica_factorize(epoch, r, config);
    }
    case Method::NMF: {
      NmfConfig config;
      config.seed = seed;
      return nmf_factorize(epoch, r, config);
    }
    case Method::SOBI: return sobi_factorize(epoch, r);
  }
  fail(ErrorCode::DomainError, "unknown method");
}

}  // namespace msx
