#include <doctest.h>

#include <cmath>
#include <vector>

#include "msx/errors.hpp"
#include "msx/matrix.hpp"
#include "msx/numerics.hpp"
#include "msx/rng.hpp"

using namespace msx;

namespace {

Matrix random_symmetric(std::size_t n, Rng& rng) {
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double v = rng.uniform(-1.0, 1.0);
      a(i, j) = v;
      a(j, i) = v;
    }
  return a;
}

// Gram-Schmidt on a random Gaussian matrix.
Matrix random_orthogonal(std::size_t n, Rng& rng) {
  Matrix q(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> col(n);
    for (double& v : col) v = rng.gaussian();
    for (std::size_t k = 0; k < j; ++k) {
      double proj = 0.0;
      for (std::size_t i = 0; i < n; ++i) proj += col[i] * q(i, k);
      for (std::size_t i = 0; i < n; ++i) col[i] -= proj * q(i, k);
    }
    const double norm = norm2(col);
    for (std::size_t i = 0; i < n; ++i) q(i, j) = col[i] / norm;
  }
  return q;
}

}  // namespace

TEST_CASE("covariance of hand-computed example") {
  const Matrix m(2, 3, {1, 2, 3, 3, 2, 1});
  const Matrix c = covariance(m);
  CHECK(c(0, 0) == doctest::Approx(1.0));
  CHECK(c(0, 1) == doctest::Approx(-1.0));
  CHECK(c(1, 0) == doctest::Approx(-1.0));
  CHECK(c(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("covariance of duplicated channels is rank one") {
  Rng rng(11);
  Matrix m(2, 40);
  for (std::size_t t = 0; t < 40; ++t) {
    const double v = rng.uniform01();
    m(0, t) = v;
    m(1, t) = v;
  }
  const Matrix c = covariance(m);
  CHECK(c(0, 0) == doctest::Approx(c(1, 1)));
  CHECK(c(0, 1) == doctest::Approx(c(0, 0)));
  const SymEig eig = sym_eig(c);
  CHECK(eig.eigenvalues[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("constant channel gives a zero covariance row") {
  Matrix m(2, 4, {5, 5, 5, 5, 1, 2, 3, 4});
  const Matrix c = covariance(m);
  CHECK(c(0, 0) == 0.0);
  CHECK(c(0, 1) == 0.0);
  CHECK(c(1, 0) == 0.0);
}

TEST_CASE("covariance rejects single-sample input") {
  const Matrix m(2, 1, {1, 2});
  CHECK_THROWS_AS(covariance(m), Error);
}

TEST_CASE("lagged covariance at lag zero matches covariance up to n/(n-1)") {
  Rng rng(5);
  Matrix m(3, 50);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t t = 0; t < 50; ++t) m(i, t) = rng.uniform01();
  const Matrix c0 = lagged_covariance(m, 0);
  const Matrix c = covariance(m);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(c0(i, j) == doctest::Approx(c(i, j) * 49.0 / 50.0));
}

TEST_CASE("lagged covariance of white noise shrinks like 1/sqrt(n)") {
  const std::size_t n = 100000;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    Rng rng(seed);
    Matrix m(2, n);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t t = 0; t < n; ++t) m(i, t) = rng.gaussian();
    for (std::size_t lag : {1, 2}) {
      const Matrix c = lagged_covariance(m, lag);
      CHECK(max_abs(c) < 5.0 / std::sqrt(static_cast<double>(n)));
    }
  }
}

TEST_CASE("sinusoid autocovariance vanishes at quarter period") {
  // analytic oracle: lag-tau autocovariance of sin is 0.5 cos(2 pi f tau)
  const std::size_t period = 40;
  const std::size_t n = period * 500;
  Matrix m(1, n);
  for (std::size_t t = 0; t < n; ++t)
    m(0, t) = std::sin(2.0 * M_PI * static_cast<double>(t) / period);
  const Matrix c = lagged_covariance(m, period / 4);
  CHECK(std::fabs(c(0, 0)) < 1e-3);
  // sanity: at zero lag the analytic value is 0.5
  CHECK(lagged_covariance(m, 0)(0, 0) == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("lagged covariance rejects lag >= n-1") {
  const Matrix m(1, 4, {1, 2, 3, 4});
  CHECK_THROWS_AS(lagged_covariance(m, 3), Error);
}

TEST_CASE("sym_eig identity and diagonal cases") {
  const SymEig id = sym_eig(Matrix::identity(3));
  for (double v : id.eigenvalues) CHECK(v == doctest::Approx(1.0));

  const Matrix d(3, 3, {3, 0, 0, 0, 1, 0, 0, 0, 2});
  const SymEig de = sym_eig(d);
  CHECK(de.eigenvalues[0] == doctest::Approx(3.0));
  CHECK(de.eigenvalues[1] == doctest::Approx(2.0));
  CHECK(de.eigenvalues[2] == doctest::Approx(1.0));
}

TEST_CASE("sym_eig 2x2 hand example") {
  const Matrix a(2, 2, {2, 1, 1, 2});
  const SymEig eig = sym_eig(a);
  CHECK(eig.eigenvalues[0] == doctest::Approx(3.0));
  CHECK(eig.eigenvalues[1] == doctest::Approx(1.0));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(std::fabs(eig.eigenvectors(0, 0)) == doctest::Approx(inv_sqrt2));
  CHECK(std::fabs(eig.eigenvectors(1, 0)) == doctest::Approx(inv_sqrt2));
  CHECK(eig.eigenvectors(0, 0) * eig.eigenvectors(1, 0) > 0.0);
  CHECK(eig.eigenvectors(0, 1) * eig.eigenvectors(1, 1) < 0.0);
}

TEST_CASE("sym_eig rejects asymmetric input") {
  const Matrix a(2, 2, {1, 2, 3, 4});
  CHECK_THROWS_AS(sym_eig(a), Error);
}

TEST_CASE("sym_eig reconstruction and orthogonality up to 64x64") {
  for (std::size_t n : {2, 5, 16, 64}) {
    Rng rng(n);
    const Matrix a = random_symmetric(n, rng);
    const SymEig eig = sym_eig(a);

    Matrix vtv = mul_transpose_a(eig.eigenvectors, eig.eigenvectors);
    for (std::size_t i = 0; i < n; ++i) vtv(i, i) -= 1.0;
    CHECK(max_abs(vtv) < 1e-10);

    Matrix scaled = eig.eigenvectors;
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) scaled(i, j) *= eig.eigenvalues[j];
    const Matrix recon = mul_transpose_b(scaled, eig.eigenvectors);
    CHECK(max_abs(recon - a) < 1e-8 * std::max(1.0, max_abs(a)));

    for (std::size_t i = 0; i + 1 < n; ++i)
      CHECK(eig.eigenvalues[i] >= eig.eigenvalues[i + 1]);

    // A v = lambda v within 1e-8 relative
    const Matrix av = a * eig.eigenvectors;
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i)
        CHECK(av(i, j) == doctest::Approx(eig.eigenvalues[j] *
                                          eig.eigenvectors(i, j))
                              .epsilon(1e-8));
  }
}

TEST_CASE("whiten produces identity covariance") {
  Rng rng(77);
  // 8 channels mixed from 4 sources plus a little noise for full rank
  Matrix sources(4, 400);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t t = 0; t < 400; ++t) sources(i, t) = rng.gaussian();
  Matrix mixing(8, 4);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 4; ++j) mixing(i, j) = rng.uniform(-1.0, 1.0);
  Matrix mixed = mixing * sources;
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t t = 0; t < 400; ++t) mixed(i, t) += 1e-3 * rng.gaussian();

  const WhitenResult white = whiten(mixed, 4);
  Matrix c = covariance(white.whitened);
  for (std::size_t i = 0; i < 4; ++i) c(i, i) -= 1.0;
  CHECK(max_abs(c) < 1e-8);

  // transform * C * transform^T = I on the original covariance as well
  Matrix tct = white.whitening.transform *
               mul_transpose_b(covariance(mixed), white.whitening.transform);
  for (std::size_t i = 0; i < 4; ++i) tct(i, i) -= 1.0;
  CHECK(max_abs(tct) < 1e-8);
}

TEST_CASE("whiten round trip at full rank") {
  Rng rng(78);
  Matrix m(5, 60);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t t = 0; t < 60; ++t) m(i, t) = rng.uniform01();
  const WhitenResult white = whiten(m, 5);
  Matrix prod = white.whitening.dewhitening * white.whitening.transform;
  for (std::size_t i = 0; i < 5; ++i) prod(i, i) -= 1.0;
  CHECK(max_abs(prod) < 1e-8);
}

TEST_CASE("whiten on exactly-white channels is the identity up to sign/permutation") {
  Rng rng(79);
  Matrix raw(3, 200);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t t = 0; t < 200; ++t) raw(i, t) = rng.gaussian();
  // whitening once makes the covariance the identity exactly
  const Matrix white_data = whiten(raw, 3).whitened;
  const WhitenResult again = whiten(white_data, 3);
  for (std::size_t k = 0; k < 3; ++k) {
    double best = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
      best = std::max(best, std::fabs(again.whitening.transform(k, i)));
    double row_norm = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
      row_norm += again.whitening.transform(k, i) * again.whitening.transform(k, i);
    CHECK(best / std::sqrt(row_norm) > 1.0 - 1e-6);
  }
}

TEST_CASE("whiten reports rank deficiency") {
  Matrix m(2, 10);
  for (std::size_t t = 0; t < 10; ++t) {
    m(0, t) = static_cast<double>(t);
    m(1, t) = 2.0 * static_cast<double>(t);  // linearly dependent
  }
  CHECK_THROWS_AS(whiten(m, 2), Error);
  CHECK_NOTHROW(whiten(m, 1));
}

TEST_CASE("joint diagonalization of a single matrix reduces to sym_eig") {
  Rng rng(3);
  const Matrix a = random_symmetric(4, rng);
  const JointDiagResult jd = joint_diagonalize({a});
  const Matrix rotated = mul_transpose_a(jd.basis, a * jd.basis);
  CHECK(max_abs_offdiag(rotated) < 1e-8 * std::max(1.0, max_abs(a)));
}

TEST_CASE("joint diagonalization recovers a planted basis") {
  Rng rng(21);
  const std::size_t n = 5;
  const Matrix u0 = random_orthogonal(n, rng);
  std::vector<Matrix> mats;
  for (int k = 0; k < 2; ++k) {
    Matrix d(n, n);
    for (std::size_t i = 0; i < n; ++i) d(i, i) = rng.uniform(0.5, 3.0) + k;
    Matrix m = u0 * mul_transpose_b(d, u0);
    // symmetrize rounding
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = 0.5 * (m(i, j) + m(j, i));
        m(i, j) = v;
        m(j, i) = v;
      }
    mats.push_back(std::move(m));
  }
  const JointDiagResult jd = joint_diagonalize(mats);
  for (const Matrix& m : mats) {
    const Matrix rotated = mul_transpose_a(jd.basis, m * jd.basis);
    CHECK(max_abs_offdiag(rotated) < 1e-8);
  }
  // recovered columns match planted ones up to sign/permutation
  const Matrix overlap = mul_transpose_a(u0, jd.basis);
  for (std::size_t j = 0; j < n; ++j) {
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) best = std::max(best, std::fabs(overlap(i, j)));
    CHECK(best > 1.0 - 1e-6);
  }
}

TEST_CASE("joint diagonalization of diagonal matrices needs no rotations") {
  Matrix d1(3, 3), d2(3, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    d1(i, i) = static_cast<double>(i + 1);
    d2(i, i) = static_cast<double>(3 - i);
  }
  const JointDiagResult jd = joint_diagonalize({d1, d2});
  CHECK(jd.rotations == 0);
  Matrix diff = jd.basis - Matrix::identity(3);
  CHECK(max_abs(diff) == 0.0);
}

TEST_CASE("joint diagonalization is orthogonal") {
  Rng rng(31);
  std::vector<Matrix> mats;
  for (int k = 0; k < 4; ++k) mats.push_back(random_symmetric(6, rng));
  const JointDiagResult jd = joint_diagonalize(mats);
  Matrix utu = mul_transpose_a(jd.basis, jd.basis);
  for (std::size_t i = 0; i < 6; ++i) utu(i, i) -= 1.0;
  CHECK(max_abs(utu) < 1e-10);
}

TEST_CASE("joint diagonalization permutation equivariance") {
  Rng rng(41);
  const Matrix u0 = random_orthogonal(4, rng);
  std::vector<Matrix> mats;
  for (int k = 0; k < 3; ++k) {
    Matrix d(4, 4);
    for (std::size_t i = 0; i < 4; ++i) d(i, i) = rng.uniform(0.2, 2.0) + 0.7 * k;
    Matrix m = u0 * mul_transpose_b(d, u0);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = i + 1; j < 4; ++j) {
        const double v = 0.5 * (m(i, j) + m(j, i));
        m(i, j) = v;
        m(j, i) = v;
      }
    mats.push_back(std::move(m));
  }
  const JointDiagResult forward = joint_diagonalize(mats);
  std::vector<Matrix> reversed(mats.rbegin(), mats.rend());
  const JointDiagResult backward = joint_diagonalize(reversed);
  // the recovered subspaces match: every backward column aligns with some
  // forward column up to sign
  const Matrix overlap = mul_transpose_a(forward.basis, backward.basis);
  for (std::size_t j = 0; j < 4; ++j) {
    double best = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
      best = std::max(best, std::fabs(overlap(i, j)));
    CHECK(best > 1.0 - 1e-6);
  }
}

TEST_CASE("solve_spd matches direct solution") {
  Rng rng(55);
  Matrix a = random_symmetric(4, rng);
  // make positive definite
  Matrix ata = mul_transpose_a(a, a);
  for (std::size_t i = 0; i < 4; ++i) ata(i, i) += 0.5;
  Matrix x(4, 2);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 2; ++j) x(i, j) = rng.uniform(-1.0, 1.0);
  const Matrix b = ata * x;
  const Matrix solved = solve_spd(ata, b);
  CHECK(max_abs(solved - x) < 1e-9);
}
