#include "msx/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "msx/errors.hpp"

namespace msx {

void GenConfig::validate() const {
  if (synergies < 1 || synergies > channels)
    fail(ErrorCode::SpecError, "synergies must be in [1, channels]");
  if (samples < 2 * channels)
    fail(ErrorCode::SpecError, "samples must be >= 2 * channels");
  if (!(snr_db > 0.0)) fail(ErrorCode::SpecError, "snr_db must be > 0");
  if (!(sample_rate > 0.0)) fail(ErrorCode::SpecError, "sample_rate must be > 0");
  if (trials < 1 || datasets < 1)
    fail(ErrorCode::SpecError, "trials and datasets must be >= 1");
}

SynergySet random_synergies(std::size_t channels, std::size_t synergies,
                            bool sparse, Rng& rng) {
  if (synergies > channels)
    fail(ErrorCode::DomainError, "more synergies than channels");
  Matrix s(channels, synergies);

  if (!sparse) {
    for (std::size_t i = 0; i < channels; ++i)
      for (std::size_t j = 0; j < synergies; ++j) s(i, j) = rng.uniform01();
  } else {
    const std::size_t cap = static_cast<std::size_t>(
        std::ceil(0.4 * static_cast<double>(channels)));
    if (synergies * cap < channels)
      fail(ErrorCode::InfeasibleSparsity,
           "sparsity cap " + std::to_string(cap) + " cannot cover " +
               std::to_string(channels) + " channels with " +
               std::to_string(synergies) + " synergies");
    // Deal shuffled channels round-robin so every channel is active in at
    // least one synergy and no column exceeds the cap.
    std::vector<std::size_t> order(channels);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<std::vector<bool>> active(synergies,
                                          std::vector<bool>(channels, false));
    std::vector<std::size_t> load(synergies, 0);
    for (std::size_t k = 0; k < channels; ++k) {
      const std::size_t j = k % synergies;
      active[j][order[k]] = true;
      ++load[j];
    }
    // Grow each column to a random size within the cap.
    for (std::size_t j = 0; j < synergies; ++j) {
      const std::size_t target = 1 + rng.below(cap);
      while (load[j] < target) {
        const std::size_t i = rng.below(channels);
        if (!active[j][i]) {
          active[j][i] = true;
          ++load[j];
        }
      }
    }
    for (std::size_t j = 0; j < synergies; ++j)
      for (std::size_t i = 0; i < channels; ++i)
        if (active[j][i]) s(i, j) = rng.uniform01();
  }

  for (std::size_t j = 0; j < synergies; ++j) {
    double norm = 0.0;
    for (std::size_t i = 0; i < channels; ++i) norm += s(i, j) * s(i, j);
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < channels; ++i) s(i, j) /= norm;
  }
  return SynergySet{std::move(s), Method::NMF};
}

std::vector<double> surrogate_envelope(std::size_t samples, double sample_rate,
                                       Rng& rng) {
  std::vector<double> envelope(samples, 0.0);

  // Rectified low-pass noise floor: two smoothing passes over white noise.
  const double cutoff_hz = rng.uniform(1.0, 3.0);
  const double alpha = std::exp(-2.0 * 3.14159265358979323846 * cutoff_hz /
                                sample_rate);
  std::vector<double> noise(samples);
  for (double& v : noise) v = rng.gaussian();
  for (int pass = 0; pass < 2; ++pass) {
    double state = 0.0;
    for (std::size_t t = 0; t < samples; ++t) {
      state = alpha * state + (1.0 - alpha) * noise[t];
      noise[t] = state;
    }
  }
  double noise_peak = 0.0;
  for (double& v : noise) {
    v = std::max(v, 0.0);
    noise_peak = std::max(noise_peak, v);
  }
  const double floor_level = rng.uniform(0.15, 0.4);
  if (noise_peak > 0.0)
    for (std::size_t t = 0; t < samples; ++t)
      envelope[t] = floor_level * noise[t] / noise_peak;

  // 1-3 smooth activation bumps.
  const std::size_t bumps = 1 + rng.below(3);
  const double dn = static_cast<double>(samples);
  for (std::size_t b = 0; b < bumps; ++b) {
    const double center = rng.uniform(0.1, 0.9) * dn;
    const double width = rng.uniform(0.04, 0.12) * dn;
    const double amp = rng.uniform(0.5, 1.0);
    for (std::size_t t = 0; t < samples; ++t) {
      const double z = (static_cast<double>(t) - center) / width;
      envelope[t] += amp * std::exp(-0.5 * z * z);
    }
  }

  double peak = 0.0;
  for (double v : envelope) peak = std::max(peak, v);
  for (double& v : envelope) v /= peak;
  return envelope;
}

WeightingSet draw_weights(std::size_t synergies, std::size_t samples,
                          EnvelopeSource source, const EnvelopeCorpus& corpus,
                          Rng& rng) {
  Matrix w(synergies, samples);
  if (source == EnvelopeSource::Surrogate) {
    for (std::size_t i = 0; i < synergies; ++i) {
      const std::vector<double> envelope = surrogate_envelope(samples, 100.0, rng);
      for (std::size_t t = 0; t < samples; ++t) w(i, t) = envelope[t];
    }
    return WeightingSet{std::move(w)};
  }

  if (corpus.size() < synergies)
    fail(ErrorCode::CorpusTooSmall,
         "need " + std::to_string(synergies) + " records, corpus has " +
             std::to_string(corpus.size()));
  std::vector<std::size_t> records(corpus.size());
  std::iota(records.begin(), records.end(), 0);
  rng.shuffle(records);

  std::size_t filled = 0;
  for (std::size_t idx : records) {
    if (filled == synergies) break;
    const EmgEpoch& record = corpus[idx];
    if (record.samples() < samples) continue;
    const std::size_t channel = rng.below(record.channels());
    const std::size_t offset =
        record.samples() == samples ? 0 : rng.below(record.samples() - samples + 1);
    double peak = 0.0;
    for (std::size_t t = 0; t < samples; ++t)
      peak = std::max(peak, record.data(channel, offset + t));
    if (peak <= 0.0) continue;  // silent segment cannot act as a weighting
    for (std::size_t t = 0; t < samples; ++t)
      w(filled, t) = record.data(channel, offset + t) / peak;
    ++filled;
  }
  if (filled < synergies)
    fail(ErrorCode::CorpusTooSmall, "not enough usable records of the requested length");
  return WeightingSet{std::move(w)};
}

NoisyMixture apply_noise(const Matrix& clean, double snr_db, Rng& rng) {
  if (!(snr_db > 0.0)) fail(ErrorCode::DomainError, "snr_db must be > 0");
  double signal_power = 0.0;
  for (std::size_t i = 0; i < clean.rows(); ++i)
    for (std::size_t j = 0; j < clean.cols(); ++j)
      signal_power += clean(i, j) * clean(i, j);
  const double entries = static_cast<double>(clean.rows() * clean.cols());
  signal_power /= entries;
  const double sigma = std::sqrt(signal_power / std::pow(10.0, snr_db / 10.0));

  NoisyMixture out;
  out.noisy = clean;
  double realised = 0.0;
  for (std::size_t i = 0; i < clean.rows(); ++i)
    for (std::size_t j = 0; j < clean.cols(); ++j) {
      const double e = sigma * rng.gaussian();
      realised += e * e;
      out.noisy(i, j) += std::max(e, 0.0);
    }
  out.noise_power = realised / entries;
  return out;
}

TrialGenerator::TrialGenerator(GenConfig config, EnvelopeCorpus corpus)
    : config_(std::move(config)), corpus_(std::move(corpus)) {
  config_.validate();
  if (config_.envelope_source == EnvelopeSource::Corpus && corpus_.empty())
    fail(ErrorCode::CorpusTooSmall, "corpus mode requires a loaded corpus");
}

SyntheticTrial TrialGenerator::trial(std::size_t dataset,
                                     std::size_t trial_index) const {
  SyntheticTrial out;
  out.dataset = dataset;
  out.trial = trial_index;

  SynergySet synergies = [&] {
    if (config_.fixed_synergies_per_dataset) {
      Rng rng(derive_seed(config_.seed, dataset, config_.trials));
      return random_synergies(config_.channels, config_.synergies,
                              config_.sparse, rng);
    }
    Rng rng(derive_seed(derive_seed(config_.seed, dataset, trial_index), 1));
    return random_synergies(config_.channels, config_.synergies, config_.sparse,
                            rng);
  }();

  Rng rng(derive_seed(derive_seed(config_.seed, dataset, trial_index), 2));
  WeightingSet weights = draw_weights(config_.synergies, config_.samples,
                                      config_.envelope_source, corpus_, rng);
  const Matrix clean = synergies.s * weights.w;

  Rng noise_rng(derive_seed(derive_seed(config_.seed, dataset, trial_index), 3));
  NoisyMixture mixture = apply_noise(clean, config_.snr_db, noise_rng);

  out.epoch.data = std::move(mixture.noisy);
  out.epoch.sample_rate = config_.sample_rate;
  out.true_synergies = std::move(synergies);
  out.true_weights = std::move(weights);
  out.noise_power = mixture.noise_power;
  return out;
}

void TrialGenerator::for_each(
    const std::function<void(const SyntheticTrial&)>& sink) const {
  for (std::size_t d = 0; d < config_.datasets; ++d)
    for (std::size_t t = 0; t < config_.trials; ++t) sink(trial(d, t));
}

}  // namespace msx
