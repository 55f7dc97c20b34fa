#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "msx/errors.hpp"
#include "msx/rng.hpp"
#include "msx/stats.hpp"

using namespace msx;

namespace {

// Simpson-rule oracle, independent of the continued-fraction path.
double integrate(const std::function<double(double)>& f, double lo, double hi,
                 std::size_t panels = 4000) {
  double sum = f(lo) + f(hi);
  const double h = (hi - lo) / static_cast<double>(panels);
  for (std::size_t i = 1; i < panels; ++i)
    sum += f(lo + h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

double t_density(double x, double dof) {
  const double c = std::exp(std::lgamma((dof + 1.0) / 2.0) -
                            std::lgamma(dof / 2.0)) /
                   std::sqrt(dof * M_PI);
  return c * std::pow(1.0 + x * x / dof, -(dof + 1.0) / 2.0);
}

}  // namespace

TEST_CASE("pearson identity, negation, and hand-computed example") {
  const std::vector<double> x = {1, 2, 3, 4};
  CHECK(pearson(x, x) == doctest::Approx(1.0));
  std::vector<double> neg = x;
  for (double& v : neg) v = -v;
  CHECK(pearson(x, neg) == doctest::Approx(-1.0));

  // moments by hand: sum dx dy = 11, sum dx^2 = 5, sum dy^2 = 26
  const std::vector<double> y = {2, 4, 5, 9};
  CHECK(pearson(x, y) == doctest::Approx(11.0 / std::sqrt(130.0)).epsilon(1e-12));
  CHECK(pearson(x, y) == doctest::Approx(0.9648).epsilon(1e-3));
}

TEST_CASE("pearson is invariant under positive affine maps") {
  Rng rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x(12), y(12);
    for (double& v : x) v = rng.uniform(-2.0, 2.0);
    for (double& v : y) v = rng.uniform(-2.0, 2.0);
    const double base = pearson(x, y);
    std::vector<double> mapped = x;
    const double a = rng.uniform(0.1, 5.0);
    const double b = rng.uniform(-3.0, 3.0);
    for (double& v : mapped) v = a * v + b;
    CHECK(pearson(mapped, y) == doctest::Approx(base).epsilon(1e-10));
    for (double& v : mapped) v = -v;
    CHECK(std::fabs(pearson(mapped, y)) == doctest::Approx(std::fabs(base)).epsilon(1e-10));
  }
}

TEST_CASE("pearson rejects constant vectors") {
  CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), Error);
  CHECK_THROWS_AS(pearson({1, 2, 3}, {4, 4, 4}), Error);
  CHECK_THROWS_AS(pearson({1, 2}, {1, 2, 3}), Error);
}

TEST_CASE("regularized incomplete beta boundary and special values") {
  CHECK(reg_incomplete_beta(2.5, 1.5, 0.0) == 0.0);
  CHECK(reg_incomplete_beta(2.5, 1.5, 1.0) == 1.0);
  // Beta(1,1) is the uniform CDF
  for (double x : {0.1, 0.25, 0.5, 0.9})
    CHECK(reg_incomplete_beta(1.0, 1.0, x) == doctest::Approx(x).epsilon(1e-12));
  // I_x(2,2) = 3x^2 - 2x^3, symmetric at 1/2
  CHECK(reg_incomplete_beta(2.0, 2.0, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(reg_incomplete_beta(2.0, 2.0, 0.3) ==
        doctest::Approx(3 * 0.09 - 2 * 0.027).epsilon(1e-10));
}

TEST_CASE("regularized incomplete beta symmetry identity") {
  Rng rng(17);
  for (int rep = 0; rep < 50; ++rep) {
    const double a = rng.uniform(0.2, 8.0);
    const double b = rng.uniform(0.2, 8.0);
    const double x = rng.uniform01();
    const double forward = reg_incomplete_beta(a, b, x);
    const double backward = reg_incomplete_beta(b, a, 1.0 - x);
    CHECK(forward + backward == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("regularized incomplete beta matches quadrature oracle") {
  const auto oracle = [](double a, double b, double x) {
    const double ln_b = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    return integrate(
               [&](double t) {
                 if (t <= 0.0 || t >= 1.0) return 0.0;
                 return std::exp((a - 1.0) * std::log(t) +
                                 (b - 1.0) * std::log1p(-t) - ln_b);
               },
               1e-12, x) ;
  };
  for (double x : {0.2, 0.5, 0.8}) {
    CHECK(reg_incomplete_beta(3.0, 2.0, x) == doctest::Approx(oracle(3, 2, x)).epsilon(1e-8));
    CHECK(reg_incomplete_beta(4.5, 1.5, x) == doctest::Approx(oracle(4.5, 1.5, x)).epsilon(1e-8));
  }
}

TEST_CASE("regularized incomplete beta rejects bad domains") {
  CHECK_THROWS_AS(reg_incomplete_beta(0.0, 1.0, 0.5), Error);
  CHECK_THROWS_AS(reg_incomplete_beta(1.0, -1.0, 0.5), Error);
  CHECK_THROWS_AS(reg_incomplete_beta(1.0, 1.0, 1.5), Error);
}

TEST_CASE("t survival: symmetry, table value, quadrature oracle") {
  CHECK(t_sf(0.0, 10.0) == doctest::Approx(1.0));
  // standard two-sided critical value
  CHECK(t_sf(2.086, 20.0) == doctest::Approx(0.05).epsilon(0.04));
  CHECK(std::fabs(t_sf(2.086, 20.0) - 0.05) < 0.002);
  // numeric integration of the density
  for (double t : {0.5, 1.0, 2.5}) {
    const double tail = integrate([&](double x) { return t_density(x, 8.0); },
                                  t, 60.0);
    CHECK(t_sf(t, 8.0) == doctest::Approx(2.0 * tail).epsilon(1e-6));
  }
  CHECK(t_sf(-1.3, 7.0) == doctest::Approx(t_sf(1.3, 7.0)));
}

TEST_CASE("F survival median symmetry and domain") {
  CHECK(f_sf(1.0, 6, 6) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(f_sf(1.0, 11, 11) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(f_sf(0.0, 3, 5) == doctest::Approx(1.0));
  CHECK_THROWS_AS(f_sf(-1.0, 3, 5), Error);
  CHECK_THROWS_AS(f_sf(1.0, 0, 5), Error);
}

TEST_CASE("p-values clamp instead of reaching zero") {
  CHECK(t_sf(1000.0, 30.0) >= kMinPValue);
  CHECK(f_sf(1e9, 4, 400) >= kMinPValue);
}
