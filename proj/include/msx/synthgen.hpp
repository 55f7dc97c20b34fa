#ifndef MSX_SYNTHGEN_HPP
#define MSX_SYNTHGEN_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "msx/factorize.hpp"
#include "msx/matrix.hpp"
#include "msx/rng.hpp"

namespace msx {

enum class EnvelopeSource { Corpus, Surrogate };

struct GenConfig {
  std::size_t channels = 12;
  std::size_t synergies = 4;
  std::size_t samples = 500;
  double sample_rate = 100.0;
  double snr_db = 15.0;
  bool sparse = false;
  std::size_t trials = 1000;
  std::size_t datasets = 10;
  std::uint64_t seed = 0;
  EnvelopeSource envelope_source = EnvelopeSource::Surrogate;
  // When false, a fresh synergy set is drawn per trial; when true, every
  // trial of a dataset shares the dataset's synergy set.
  bool fixed_synergies_per_dataset = false;

  void validate() const;
};

using EnvelopeCorpus = std::vector<EmgEpoch>;

struct SyntheticTrial {
  std::size_t dataset = 0;
  std::size_t trial = 0;
  EmgEpoch epoch;
  SynergySet true_synergies;   // canonical unit-norm columns
  WeightingSet true_weights;
  double noise_power = 0.0;    // realised pre-rectification mean square
};

// Random synergy matrix with unit-norm columns. Sparse mode caps each column
// at ceil(0.4 m) active channels while covering every channel at least once
// across the r columns.
SynergySet random_synergies(std::size_t channels, std::size_t synergies,
                            bool sparse, Rng& rng);

// One surrogate envelope: rectified low-pass-filtered noise plus 1-3 smooth
// activation bumps, nonnegative, peak-normalised to 1.
std::vector<double> surrogate_envelope(std::size_t samples, double sample_rate,
                                       Rng& rng);

// r weighting rows of length n. Corpus mode samples windows from r distinct
// corpus records without replacement; surrogate mode synthesises envelopes.
WeightingSet draw_weights(std::size_t synergies, std::size_t samples,
                          EnvelopeSource source, const EnvelopeCorpus& corpus,
                          Rng& rng);

struct NoisyMixture {
  Matrix noisy;
  double noise_power = 0.0;  // realised mean(E^2) before rectification
};

// Adds rectified Gaussian noise max(E, 0) with per-channel variance
// sigma^2 = P_signal / 10^(snr_db/10), P_signal = mean square of clean.
NoisyMixture apply_noise(const Matrix& clean, double snr_db, Rng& rng);

class TrialGenerator {
 public:
  TrialGenerator(GenConfig config, EnvelopeCorpus corpus = {});

  // Trial (d, t) is a pure function of (config.seed, d, t); no predecessor
  // state is needed.
  SyntheticTrial trial(std::size_t dataset, std::size_t trial_index) const;

  void for_each(const std::function<void(const SyntheticTrial&)>& sink) const;

  const GenConfig& config() const { return config_; }

 private:
  GenConfig config_;
  EnvelopeCorpus corpus_;
};

}  // namespace msx

#endif
