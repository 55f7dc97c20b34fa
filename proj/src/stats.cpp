#include "msx/stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "msx/errors.hpp"

namespace msx {

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 400;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  fail(ErrorCode::NoConvergence, "incomplete beta continued fraction");
}

}  // namespace

double mean(const std::vector<double>& values) {
  if (values.empty()) fail(ErrorCode::EmptyInput, "mean of empty vector");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double variance(const std::vector<double>& values) {
  if (values.size() < 2) fail(ErrorCode::DegenerateInput, "variance needs >= 2 values");
  const double mu = mean(values);
  double sum = 0.0;
  for (double v : values) sum += (v - mu) * (v - mu);
  return sum / static_cast<double>(values.size() - 1);
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    fail(ErrorCode::DegenerateInput, "pearson needs equal lengths >= 2");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    fail(ErrorCode::DegenerateInput, "pearson of a constant vector");
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

double reg_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0))
    fail(ErrorCode::DomainError, "reg_incomplete_beta: a, b must be > 0");
  if (!(x >= 0.0 && x <= 1.0))
    fail(ErrorCode::DomainError, "reg_incomplete_beta: x must be in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;

  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double t_sf(double t, double dof) {
  if (!(dof > 0.0)) fail(ErrorCode::DomainError, "t_sf: dof must be > 0");
  if (!std::isfinite(t)) fail(ErrorCode::DomainError, "t_sf: non-finite statistic");
  const double p = reg_incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
  return std::clamp(p, kMinPValue, 1.0);
}

double f_sf(double f, std::size_t d1, std::size_t d2) {
  if (d1 == 0 || d2 == 0) fail(ErrorCode::DomainError, "f_sf: zero dof");
  if (!(f >= 0.0) || !std::isfinite(f))
    fail(ErrorCode::DomainError, "f_sf: statistic must be finite and >= 0");
  const double dd1 = static_cast<double>(d1);
  const double dd2 = static_cast<double>(d2);
  const double p = reg_incomplete_beta(dd2 / 2.0, dd1 / 2.0, dd2 / (dd2 + dd1 * f));
  return std::clamp(p, kMinPValue, 1.0);
}

}  // namespace msx
