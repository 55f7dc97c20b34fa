#ifndef MSX_FACTORIZE_HPP
#define MSX_FACTORIZE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "msx/matrix.hpp"

namespace msx {

enum class Method { PCA, ICA, NMF, SOBI };

const char* method_name(Method method);
std::optional<Method> method_from_name(const std::string& name);

// Nonnegative multichannel envelope epoch, channels x samples.
struct EmgEpoch {
  Matrix data;
  double sample_rate = 0.0;
  std::optional<std::string> label;
  std::optional<std::string> subject;
  std::optional<int> repetition;

  std::size_t channels() const { return data.rows(); }
  std::size_t samples() const { return data.cols(); }
  double duration_seconds() const {
    return static_cast<double>(samples()) / sample_rate;
  }

  // entries >= 0, finite, sample_rate > 0, samples >= 2 * channels
  void validate() const;
};

// Synergy matrix, one unit-norm column per synergy. For PCA/ICA/SOBI each
// column's max-magnitude entry is nonnegative; for NMF all entries are.
struct SynergySet {
  Matrix s;  // channels x r
  Method method = Method::PCA;

  std::size_t synergy_count() const { return s.cols(); }
};

struct WeightingSet {
  Matrix w;  // r x samples
};

struct FactorizationResult {
  SynergySet synergies;
  WeightingSet weights;
  int iterations = 0;
  bool converged = true;
  double residual = 0.0;  // relative Frobenius reconstruction error
  double elapsed_seconds = 0.0;
};

struct IcaConfig {
  double tol = 1e-6;       // on 1 - min |diag(B_new^T B_old)|
  int max_iter = 1000;
  std::uint64_t seed = 0;  // rotation initialisation
};

enum class NmfUpdate { AlternatingLeastSquares, MultiplicativeUpdate };

struct NmfConfig {
  int restarts = 5;
  int max_iter = 500;
  double tol = 1e-6;  // relative residual change
  std::uint64_t seed = 0;
  NmfUpdate update = NmfUpdate::AlternatingLeastSquares;
};

// Principal components of the channel covariance, ordered by descending
// explained variance; W carries the centered projections.
FactorizationResult pca_factorize(const EmgEpoch& epoch, std::size_t r);

// Symmetric fixed-point iteration with the log-cosh contrast on fully
// whitened data; extracts r rotation columns. Iteration-cap exhaustion is
// reported through converged=false, not an error.
FactorizationResult ica_factorize(const EmgEpoch& epoch, std::size_t r,
                                  const IcaConfig& config = {});

// Alternating nonnegative least squares with clamping (multiplicative
// updates available behind config); multi-restart, lowest residual kept.
FactorizationResult nmf_factorize(const EmgEpoch& epoch, std::size_t r,
                                  const NmfConfig& config = {});

// Whiten to r dims, jointly diagonalize lagged covariances at lags 1..lags.
FactorizationResult sobi_factorize(const EmgEpoch& epoch, std::size_t r,
                                   std::size_t lags = 4);

// Canonical form: unit-norm synergy columns with the reciprocal scale folded
// into W, sign flipped so each column's max-|entry| is positive. S*W is
// unchanged. Throws ZeroColumn for an all-zero synergy column.
std::pair<SynergySet, WeightingSet> normalize_result(const Matrix& s,
                                                     const Matrix& w,
                                                     Method method);

// Dispatch on method with per-method defaults and a shared seed.
FactorizationResult factorize(const EmgEpoch& epoch, Method method,
                              std::size_t r, std::uint64_t seed);

}  // namespace msx

#endif
