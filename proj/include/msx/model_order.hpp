#ifndef MSX_MODEL_ORDER_HPP
#define MSX_MODEL_ORDER_HPP

#include <cstddef>
#include <map>
#include <vector>

#include "msx/factorize.hpp"
#include "msx/matrix.hpp"

namespace msx {

// Maximum identifiable factor count for m channels:
// floor((2m + 1 - sqrt(8m + 1)) / 2), at least 1.
std::size_t r_max_bound(std::size_t channels);

struct FaConfig {
  double tol = 1e-8;  // absolute log-likelihood change
  std::size_t max_iter = 500;
  double psi_floor = 1e-10;
};

struct FactorAnalysisFit {
  Matrix loadings;                 // m x r
  std::vector<double> unique_variances;  // diagonal Psi, floored
  double loglik = 0.0;
  std::vector<double> loglik_path;  // per-iteration values, non-decreasing
  std::size_t iterations = 0;
  bool converged = false;
};

// Maximum-likelihood factor analysis C ~ A A^T + diag(Psi) via EM,
// PCA-initialised. loglik is
// -1/2 { tr(C (Psi + AA^T)^-1) + log det(Psi + AA^T) + m log 2pi }.
FactorAnalysisFit fa_fit(const Matrix& c, std::size_t r, std::size_t n,
                         const FaConfig& config = {});

// -loglik + (log n / n) * (m(r+1) - r(r-1)/2)
double mdl_score(double loglik, std::size_t m, std::size_t r, std::size_t n);

struct MdlReport {
  std::map<std::size_t, double> scores;
  std::size_t r_star = 1;
  std::size_t r_max = 1;
};

// Fit every order in [1, r_max_bound(m)] on the epoch covariance and pick
// the MDL minimiser; ties break toward smaller r.
MdlReport select_order(const EmgEpoch& epoch, const FaConfig& config = {});

}  // namespace msx

#endif
