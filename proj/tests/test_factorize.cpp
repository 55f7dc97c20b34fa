#include <doctest.h>

#include <cmath>
#include <vector>

#include "msx/errors.hpp"
#include "msx/factorize.hpp"
#include "msx/numerics.hpp"
#include "msx/rng.hpp"
#include "msx/stats.hpp"
#include "msx/synthgen.hpp"

using namespace msx;

namespace {

EmgEpoch make_epoch(Matrix data, double rate = 100.0) {
  EmgEpoch epoch;
  epoch.data = std::move(data);
  epoch.sample_rate = rate;
  return epoch;
}

// Amari separation index of the gain matrix G = pinv(S_est) * S_true,
// normalised to [0, 1]; 0 means perfect separation up to scale/permutation.
double amari_index(const Matrix& gain) {
  const std::size_t n = gain.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row_sum = 0.0, row_max = 0.0, col_sum = 0.0, col_max = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row_sum += std::fabs(gain(i, j));
      row_max = std::max(row_max, std::fabs(gain(i, j)));
      col_sum += std::fabs(gain(j, i));
      col_max = std::max(col_max, std::fabs(gain(j, i)));
    }
    total += row_sum / row_max - 1.0;
    total += col_sum / col_max - 1.0;
  }
  return total / (2.0 * static_cast<double>(n) * static_cast<double>(n - 1));
}

double column_abs_pearson(const Matrix& a, std::size_t ja, const Matrix& b,
                          std::size_t jb) {
  return std::fabs(pearson(a.column(ja), b.column(jb)));
}

// best |pearson| against any true column, per estimated column
double worst_best_match(const Matrix& est, const Matrix& truth) {
  double worst = 1.0;
  for (std::size_t j = 0; j < est.cols(); ++j) {
    double best = 0.0;
    for (std::size_t i = 0; i < truth.cols(); ++i)
      best = std::max(best, column_abs_pearson(est, j, truth, i));
    worst = std::min(worst, best);
  }
  return worst;
}

double independent_residual(const Matrix& target, const Matrix& s, const Matrix& w) {
  const Matrix recon = s * w;
  return frobenius_norm(target - recon) / frobenius_norm(target);
}

}  // namespace

TEST_CASE("normalize_result canonical form") {
  Rng rng(1);
  Matrix s(4, 2);
  Matrix w(2, 10);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 2; ++j) s(i, j) = rng.uniform(-1.0, 1.0);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t t = 0; t < 10; ++t) w(i, t) = rng.uniform(-1.0, 1.0);

  auto [syn, wgt] = normalize_result(s, w, Method::PCA);

  SUBCASE("unit columns, positive peak, product preserved") {
    const Matrix before = s * w;
    const Matrix after = syn.s * wgt.w;
    CHECK(max_abs(before - after) < 1e-12);
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(norm2(syn.s.column(j)) == doctest::Approx(1.0).epsilon(1e-12));
      double peak = 0.0, signed_peak = 0.0;
      for (std::size_t i = 0; i < 4; ++i)
        if (std::fabs(syn.s(i, j)) > peak) {
          peak = std::fabs(syn.s(i, j));
          signed_peak = syn.s(i, j);
        }
      CHECK(signed_peak > 0.0);
    }
  }

  SUBCASE("idempotent") {
    auto [syn2, wgt2] = normalize_result(syn.s, wgt.w, Method::PCA);
    CHECK(max_abs(syn2.s - syn.s) == 0.0);
    CHECK(max_abs(wgt2.w - wgt.w) == 0.0);
  }

  SUBCASE("scale and sign invariance") {
    Matrix s_scaled = s;
    Matrix w_scaled = w;
    for (std::size_t i = 0; i < 4; ++i) s_scaled(i, 0) *= 7.0;
    for (std::size_t t = 0; t < 10; ++t) w_scaled(0, t) /= 7.0;
    auto [syn3, wgt3] = normalize_result(s_scaled, w_scaled, Method::PCA);
    CHECK(max_abs(syn3.s - syn.s) < 1e-12);
    CHECK(max_abs(wgt3.w - wgt.w) < 1e-12);

    Matrix s_neg = s;
    Matrix w_neg = w;
    for (std::size_t i = 0; i < 4; ++i) s_neg(i, 1) = -s_neg(i, 1);
    for (std::size_t t = 0; t < 10; ++t) w_neg(1, t) = -w_neg(1, t);
    auto [syn4, wgt4] = normalize_result(s_neg, w_neg, Method::PCA);
    CHECK(max_abs(syn4.s - syn.s) < 1e-12);
    CHECK(max_abs(wgt4.w - wgt.w) < 1e-12);
  }
}

TEST_CASE("normalize_result rejects zero columns") {
  Matrix s(3, 1);
  Matrix w(1, 6);
  CHECK_THROWS_AS(normalize_result(s, w, Method::NMF), Error);
}

TEST_CASE("pca: complete basis reconstructs the data") {
  Rng rng(2);
  Matrix data(4, 80);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t t = 0; t < 80; ++t) data(i, t) = rng.uniform01();
  const EmgEpoch epoch = make_epoch(data);
  const FactorizationResult result = pca_factorize(epoch, 4);
  CHECK(result.residual < 1e-8);
  CHECK(result.converged);

  // S * W + row means equals the data
  const std::vector<double> means = row_means(data);
  const Matrix recon = result.synergies.s * result.weights.w;
  double worst = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t t = 0; t < 80; ++t)
      worst = std::max(worst, std::fabs(recon(i, t) + means[i] - data(i, t)));
  CHECK(worst < 1e-8);
}

TEST_CASE("pca: rank-1 dominant direction") {
  Rng rng(3);
  std::vector<double> direction = {0.6, 0.8};
  Matrix data(2, 60);
  for (std::size_t t = 0; t < 60; ++t) {
    const double a = rng.uniform01();
    data(0, t) = direction[0] * a;
    data(1, t) = direction[1] * a;
  }
  const FactorizationResult result = pca_factorize(make_epoch(data), 1);
  const double align = std::fabs(result.synergies.s(0, 0) * direction[0] +
                                 result.synergies.s(1, 0) * direction[1]);
  CHECK(align > 0.999);
}

TEST_CASE("pca: four-synergy subspace contains every true synergy") {
  // noiseless 12-channel mixture of 4 synergies
  Rng rng(4);
  const SynergySet truth = random_synergies(12, 4, false, rng);
  WeightingSet weights = draw_weights(4, 300, EnvelopeSource::Surrogate, {}, rng);
  const Matrix data = truth.s * weights.w;
  const FactorizationResult result = pca_factorize(make_epoch(data), 4);

  // projection residual of each true synergy onto span(S_est); S_est is
  // orthonormal for PCA
  for (std::size_t j = 0; j < 4; ++j) {
    const std::vector<double> target = truth.s.column(j);
    std::vector<double> residual = target;
    for (std::size_t k = 0; k < 4; ++k) {
      const std::vector<double> basis = result.synergies.s.column(k);
      const double coef = dot(target, basis);
      for (std::size_t i = 0; i < 12; ++i) residual[i] -= coef * basis[i];
    }
    CHECK(norm2(residual) < 1e-6);
  }
}

TEST_CASE("pca: explained variance ordering of weight rows") {
  Rng rng(5);
  Matrix data(6, 200);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t t = 0; t < 200; ++t)
      data(i, t) = rng.uniform01() * static_cast<double>(i + 1);
  const FactorizationResult result = pca_factorize(make_epoch(data), 4);
  std::vector<double> variances;
  for (std::size_t i = 0; i < 4; ++i) {
    std::vector<double> row(result.weights.w.row(i),
                            result.weights.w.row(i) + 200);
    variances.push_back(variance(row));
  }
  for (std::size_t i = 0; i + 1 < variances.size(); ++i)
    CHECK(variances[i] >= variances[i + 1] - 1e-12);
}

TEST_CASE("pca: rank-deficient covariance is an error") {
  Matrix data(3, 30);
  Rng rng(6);
  for (std::size_t t = 0; t < 30; ++t) {
    const double v = rng.uniform01();
    data(0, t) = v;
    data(1, t) = 2.0 * v;
    data(2, t) = 3.0 * v;
  }
  CHECK_THROWS_AS(pca_factorize(make_epoch(data), 2), Error);
}

TEST_CASE("ica: two uniform sources, square mixing, small Amari index") {
  Rng rng(7);
  const std::size_t n = 5000;
  Matrix sources(2, n);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t t = 0; t < n; ++t) sources(i, t) = rng.uniform01();
  Matrix mixing(2, 2, {0.9, 0.4, 0.2, 0.8});
  Matrix data = mixing * sources;

  IcaConfig config;
  config.seed = 12;
  const FactorizationResult result = ica_factorize(make_epoch(data), 2, config);
  CHECK(result.converged);

  // gain = pinv(S_est) * S_true via least squares on the 2x2 system
  const Matrix gain =
      solve_spd(mul_transpose_a(result.synergies.s, result.synergies.s),
                mul_transpose_a(result.synergies.s, mixing));
  CHECK(amari_index(gain) < 0.05);
}

TEST_CASE("ica: single envelope structure with r=1") {
  Rng rng(8);
  const std::vector<double> envelope = surrogate_envelope(600, 100.0, rng);
  const std::vector<double> gains = {0.9, 0.35, 0.55, 0.7};
  Matrix data(4, 600);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t t = 0; t < 600; ++t) {
      const double noise = 0.01 * std::fabs(rng.gaussian());
      data(i, t) = gains[i] * envelope[t] + noise;
    }
  IcaConfig config;
  config.seed = 3;
  const FactorizationResult result = ica_factorize(make_epoch(data), 1, config);
  std::vector<double> est = result.synergies.s.column(0);
  CHECK(std::fabs(pearson(est, gains)) > 0.95);
}

TEST_CASE("ica: determinism for fixed seed") {
  Rng rng(9);
  const SynergySet truth = random_synergies(6, 3, false, rng);
  WeightingSet weights = draw_weights(3, 200, EnvelopeSource::Surrogate, {}, rng);
  Matrix clean = truth.s * weights.w;
  const NoisyMixture mixture = apply_noise(clean, 15.0, rng);
  IcaConfig config;
  config.seed = 99;
  const FactorizationResult a = ica_factorize(make_epoch(mixture.noisy), 3, config);
  const FactorizationResult b = ica_factorize(make_epoch(mixture.noisy), 3, config);
  CHECK(max_abs(a.synergies.s - b.synergies.s) == 0.0);
  CHECK(max_abs(a.weights.w - b.weights.w) == 0.0);
  CHECK(a.iterations == b.iterations);
  CHECK(a.residual == b.residual);
}

TEST_CASE("nmf: exact rank-1 nonnegative factorisation") {
  Rng rng(10);
  std::vector<double> s_true(5), w_true(60);
  for (double& v : s_true) v = rng.uniform01();
  for (double& v : w_true) v = rng.uniform01();
  Matrix data(5, 60);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t t = 0; t < 60; ++t) data(i, t) = s_true[i] * w_true[t];

  NmfConfig config;
  config.seed = 5;
  const FactorizationResult result = nmf_factorize(make_epoch(data), 1, config);
  CHECK(result.residual < 1e-6);
  CHECK(std::fabs(pearson(result.synergies.s.column(0), s_true)) > 0.999);
  CHECK(result.synergies.s.all_nonnegative());
  CHECK(result.weights.w.all_nonnegative());
}

TEST_CASE("nmf: overcomplete fit reaches small residual") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    Rng rng(seed);
    Matrix data(4, 40);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t t = 0; t < 40; ++t) data(i, t) = rng.uniform01();
    NmfConfig config;
    config.seed = seed;
    config.tol = 1e-10;
    config.max_iter = 2000;
    const FactorizationResult result = nmf_factorize(make_epoch(data), 4, config);
    CHECK(result.residual < 1e-3);
  }
}

TEST_CASE("nmf: multiplicative updates agree with ALS on easy data") {
  Rng rng(11);
  const SynergySet truth = random_synergies(8, 2, true, rng);
  WeightingSet weights = draw_weights(2, 200, EnvelopeSource::Surrogate, {}, rng);
  Matrix data = truth.s * weights.w;
  NmfConfig als;
  als.seed = 2;
  NmfConfig mu;
  mu.seed = 2;
  mu.update = NmfUpdate::MultiplicativeUpdate;
  mu.max_iter = 2000;
  const FactorizationResult a = nmf_factorize(make_epoch(data), 2, als);
  const FactorizationResult b = nmf_factorize(make_epoch(data), 2, mu);
  CHECK(a.residual < 1e-4);
  CHECK(b.residual < 1e-2);
  CHECK(worst_best_match(a.synergies.s, truth.s) > 0.99);
  CHECK(worst_best_match(b.synergies.s, truth.s) > 0.97);
}

TEST_CASE("nmf beats pca on sparse high-channel trials") {
  // 12-channel sparse trials at 20 dB: NMF's matched correlation exceeds
  // PCA's on the same trial in >= 80% of seeded trials
  const int trials = 100;
  int nmf_wins = 0;
  for (int k = 0; k < trials; ++k) {
    Rng rng(1000 + k);
    const SynergySet truth = random_synergies(12, 4, true, rng);
    WeightingSet weights = draw_weights(4, 300, EnvelopeSource::Surrogate, {}, rng);
    Matrix clean = truth.s * weights.w;
    const NoisyMixture mixture = apply_noise(clean, 20.0, rng);
    const EmgEpoch epoch = make_epoch(mixture.noisy);

    NmfConfig config;
    config.seed = k;
    const FactorizationResult nmf = nmf_factorize(epoch, 4, config);
    const FactorizationResult pca = pca_factorize(epoch, 4);

    const auto mean_match = [&](const Matrix& est) {
      double sum = 0.0;
      for (std::size_t j = 0; j < est.cols(); ++j) {
        double best = 0.0;
        for (std::size_t i = 0; i < 4; ++i)
          best = std::max(best, column_abs_pearson(est, j, truth.s, i));
        sum += best;
      }
      return sum / 4.0;
    };
    if (mean_match(nmf.synergies.s) > mean_match(pca.synergies.s)) ++nmf_wins;
  }
  CHECK(nmf_wins >= 80);
}

TEST_CASE("sobi: distinct temporal signatures, square mixing") {
  const std::size_t n = 2000;
  Matrix sources(3, n);
  for (std::size_t t = 0; t < n; ++t) {
    const double ft = static_cast<double>(t);
    sources(0, t) = 1.0 + std::sin(2.0 * M_PI * 0.013 * ft);
    sources(1, t) = 1.0 + std::sin(2.0 * M_PI * 0.037 * ft + 0.4);
    sources(2, t) = 1.0 + std::sin(2.0 * M_PI * 0.071 * ft + 1.1);
  }
  Rng rng(12);
  Matrix mixing(3, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) mixing(i, j) = rng.uniform01();
  Matrix data = mixing * sources;

  const FactorizationResult result = sobi_factorize(make_epoch(data), 3);
  CHECK(worst_best_match(result.synergies.s, mixing) > 0.99);
}

TEST_CASE("sobi rejects epochs shorter than the lags") {
  Matrix data(2, 5, {1, 2, 1, 2, 1, 2, 1, 2, 1, 2});
  CHECK_THROWS_AS(sobi_factorize(make_epoch(data), 1, 4), Error);
}

TEST_CASE("every method reports a residual that matches recomputation") {
  Rng rng(13);
  const SynergySet truth = random_synergies(8, 4, false, rng);
  WeightingSet weights = draw_weights(4, 240, EnvelopeSource::Surrogate, {}, rng);
  Matrix clean = truth.s * weights.w;
  const NoisyMixture mixture = apply_noise(clean, 15.0, rng);
  const EmgEpoch epoch = make_epoch(mixture.noisy);
  const Matrix centered = center_rows(epoch.data);

  for (Method method : {Method::PCA, Method::ICA, Method::NMF, Method::SOBI}) {
    const FactorizationResult result = factorize(epoch, method, 4, 17);
    const Matrix& target = method == Method::NMF ? epoch.data : centered;
    const double recomputed =
        independent_residual(target, result.synergies.s, result.weights.w);
    CHECK(std::fabs(result.residual - recomputed) < 1e-12);
    CHECK(result.residual >= 0.0);
    // canonical form
    for (std::size_t j = 0; j < result.synergies.synergy_count(); ++j)
      CHECK(norm2(result.synergies.s.column(j)) == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("factorizers react to invalid inputs") {
  Rng rng(14);
  Matrix data(4, 40);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t t = 0; t < 40; ++t) data(i, t) = rng.uniform01();
  const EmgEpoch epoch = make_epoch(data);
  CHECK_THROWS_AS(pca_factorize(epoch, 0), Error);
  CHECK_THROWS_AS(pca_factorize(epoch, 5), Error);

  Matrix negative = data;
  negative(0, 0) = -0.5;
  CHECK_THROWS_AS(nmf_factorize(make_epoch(negative), 2, {}), Error);

  Matrix short_data(4, 6);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t t = 0; t < 6; ++t) short_data(i, t) = rng.uniform01();
  CHECK_THROWS_AS(pca_factorize(make_epoch(short_data), 2), Error);
}
