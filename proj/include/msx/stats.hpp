#ifndef MSX_STATS_HPP
#define MSX_STATS_HPP

#include <cstddef>
#include <vector>

namespace msx {

// Smallest p-value ever reported; avoids log(0) in downstream scoring.
inline constexpr double kMinPValue = 1e-12;

// Product-moment correlation. Throws DegenerateInput for constant vectors.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation,
// absolute error below 1e-10.
double reg_incomplete_beta(double a, double b, double x);

// Two-sided survival probability P(|T| >= |t|) for Student t with dof degrees
// of freedom.
double t_sf(double t, double dof);

// Upper-tail survival P(F >= f) for the F distribution.
double f_sf(double f, std::size_t d1, std::size_t d2);

double mean(const std::vector<double>& values);
double variance(const std::vector<double>& values);  // 1/(n-1)

}  // namespace msx

#endif
