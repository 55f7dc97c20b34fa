#include "msx/msx.h"

#include <cstring>
#include <new>
#include <string>

#include "msx/errors.hpp"
#include "msx/factorize.hpp"
#include "msx/io.hpp"
#include "msx/model_order.hpp"
#include "msx/runner.hpp"
#include "msx/synthgen.hpp"

struct msx_epoch {
  msx::EmgEpoch epoch;
};

struct msx_factorization {
  msx::FactorizationResult result;
};

struct msx_mdl_report {
  msx::MdlReport report;
};

namespace {

thread_local std::string g_last_error;

msx_status status_of(msx::ErrorCode code) {
  using msx::ErrorCode;
  switch (code) {
    case ErrorCode::DegenerateInput: return MSX_ERR_DEGENERATE_INPUT;
    case ErrorCode::NotSymmetric: return MSX_ERR_NOT_SYMMETRIC;
    case ErrorCode::RankDeficient: return MSX_ERR_RANK_DEFICIENT;
    case ErrorCode::NoConvergence: return MSX_ERR_NO_CONVERGENCE;
    case ErrorCode::DomainError: return MSX_ERR_DOMAIN;
    case ErrorCode::ZeroColumn: return MSX_ERR_ZERO_COLUMN;
    case ErrorCode::SingularModel: return MSX_ERR_SINGULAR_MODEL;
    case ErrorCode::InfeasibleSparsity: return MSX_ERR_INFEASIBLE_SPARSITY;
    case ErrorCode::CorpusTooSmall: return MSX_ERR_CORPUS_TOO_SMALL;
    case ErrorCode::UnbalancedDesign: return MSX_ERR_UNBALANCED_DESIGN;
    case ErrorCode::EmptyCell: return MSX_ERR_EMPTY_CELL;
    case ErrorCode::EmptyInput: return MSX_ERR_EMPTY_INPUT;
    case ErrorCode::InsufficientRepetitions: return MSX_ERR_INSUFFICIENT_REPETITIONS;
    case ErrorCode::ParseError: return MSX_ERR_PARSE;
    case ErrorCode::NegativeValue: return MSX_ERR_NEGATIVE_VALUE;
    case ErrorCode::RaggedRows: return MSX_ERR_RAGGED_ROWS;
    case ErrorCode::IoError: return MSX_ERR_IO;
    case ErrorCode::SpecError: return MSX_ERR_SPEC;
  }
  return MSX_ERR_UNKNOWN;
}

template <typename Fn>
msx_status guarded(Fn&& fn) {
  try {
    fn();
    return MSX_OK;
  } catch (const msx::Error& error) {
    g_last_error = error.what();
    return status_of(error.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return MSX_ERR_UNKNOWN;
  } catch (const std::exception& error) {
    g_last_error = error.what();
    return MSX_ERR_UNKNOWN;
  }
}

msx::Method to_method(msx_method method) {
  switch (method) {
    case MSX_METHOD_PCA: return msx::Method::PCA;
    case MSX_METHOD_ICA: return msx::Method::ICA;
    case MSX_METHOD_NMF: return msx::Method::NMF;
    case MSX_METHOD_SOBI: return msx::Method::SOBI;
  }
  msx::fail(msx::ErrorCode::DomainError, "unknown method id");
}

}  // namespace

extern "C" {

const char* msx_version(void) { return "1.0.0"; }

const char* msx_status_name(msx_status status) {
  switch (status) {
    case MSX_OK: return "ok";
    case MSX_ERR_DEGENERATE_INPUT: return "DegenerateInput";
    case MSX_ERR_NOT_SYMMETRIC: return "NotSymmetric";
    case MSX_ERR_RANK_DEFICIENT: return "RankDeficient";
    case MSX_ERR_NO_CONVERGENCE: return "NoConvergence";
    case MSX_ERR_DOMAIN: return "DomainError";
    case MSX_ERR_ZERO_COLUMN: return "ZeroColumn";
    case MSX_ERR_SINGULAR_MODEL: return "SingularModel";
    case MSX_ERR_INFEASIBLE_SPARSITY: return "InfeasibleSparsity";
    case MSX_ERR_CORPUS_TOO_SMALL: return "CorpusTooSmall";
    case MSX_ERR_UNBALANCED_DESIGN: return "UnbalancedDesign";
    case MSX_ERR_EMPTY_CELL: return "EmptyCell";
    case MSX_ERR_EMPTY_INPUT: return "EmptyInput";
    case MSX_ERR_INSUFFICIENT_REPETITIONS: return "InsufficientRepetitions";
    case MSX_ERR_PARSE: return "ParseError";
    case MSX_ERR_NEGATIVE_VALUE: return "NegativeValue";
    case MSX_ERR_RAGGED_ROWS: return "RaggedRows";
    case MSX_ERR_IO: return "IoError";
    case MSX_ERR_SPEC: return "SpecError";
    case MSX_ERR_UNKNOWN: return "UnknownError";
  }
  return "UnknownError";
}

const char* msx_last_error(void) { return g_last_error.c_str(); }

msx_status msx_epoch_create(const double* data, int32_t channels,
                            int64_t samples, double sample_rate,
                            msx_epoch** out) {
  return guarded([&] {
    if (!data || !out || channels < 1 || samples < 1)
      msx::fail(msx::ErrorCode::DomainError, "bad epoch_create arguments");
    msx::EmgEpoch epoch;
    epoch.data = msx::Matrix(static_cast<std::size_t>(channels),
                             static_cast<std::size_t>(samples));
    std::memcpy(epoch.data.data(), data,
                sizeof(double) * static_cast<std::size_t>(channels * samples));
    epoch.sample_rate = sample_rate;
    epoch.validate();
    *out = new msx_epoch{std::move(epoch)};
  });
}

msx_status msx_epoch_read(const char* path, msx_epoch** out) {
  return guarded([&] {
    if (!path || !out) msx::fail(msx::ErrorCode::DomainError, "null argument");
    *out = new msx_epoch{msx::read_epoch(path)};
  });
}

msx_status msx_epoch_write(const msx_epoch* epoch, const char* path) {
  return guarded([&] {
    if (!epoch || !path) msx::fail(msx::ErrorCode::DomainError, "null argument");
    msx::write_epoch(epoch->epoch, path);
  });
}

int32_t msx_epoch_channels(const msx_epoch* epoch) {
  return epoch ? static_cast<int32_t>(epoch->epoch.channels()) : 0;
}

int64_t msx_epoch_samples(const msx_epoch* epoch) {
  return epoch ? static_cast<int64_t>(epoch->epoch.samples()) : 0;
}

double msx_epoch_sample_rate(const msx_epoch* epoch) {
  return epoch ? epoch->epoch.sample_rate : 0.0;
}

msx_status msx_epoch_data(const msx_epoch* epoch, double* out) {
  return guarded([&] {
    if (!epoch || !out) msx::fail(msx::ErrorCode::DomainError, "null argument");
    std::memcpy(out, epoch->epoch.data.data(),
                sizeof(double) * epoch->epoch.channels() * epoch->epoch.samples());
  });
}

void msx_epoch_free(msx_epoch* epoch) { delete epoch; }

msx_status msx_factorize(const msx_epoch* epoch, msx_method method,
                         int32_t synergies, uint64_t seed,
                         msx_factorization** out) {
  return guarded([&] {
    if (!epoch || !out) msx::fail(msx::ErrorCode::DomainError, "null argument");
    if (synergies < 1) msx::fail(msx::ErrorCode::DomainError, "synergies must be >= 1");
    *out = new msx_factorization{
        msx::factorize(epoch->epoch, to_method(method),
                       static_cast<std::size_t>(synergies), seed)};
  });
}

int32_t msx_factorization_synergy_count(const msx_factorization* f) {
  return f ? static_cast<int32_t>(f->result.synergies.synergy_count()) : 0;
}

msx_status msx_factorization_synergies(const msx_factorization* f, double* out) {
  return guarded([&] {
    if (!f || !out) msx::fail(msx::ErrorCode::DomainError, "null argument");
    const msx::Matrix& s = f->result.synergies.s;
    std::memcpy(out, s.data(), sizeof(double) * s.rows() * s.cols());
  });
}

msx_status msx_factorization_weights(const msx_factorization* f, double* out) {
  return guarded([&] {
    if (!f || !out) msx::fail(msx::ErrorCode::DomainError, "null argument");
    const msx::Matrix& w = f->result.weights.w;
    std::memcpy(out, w.data(), sizeof(double) * w.rows() * w.cols());
  });
}

int32_t msx_factorization_iterations(const msx_factorization* f) {
  return f ? f->result.iterations : 0;
}

int32_t msx_factorization_converged(const msx_factorization* f) {
  return f && f->result.converged ? 1 : 0;
}

double msx_factorization_residual(const msx_factorization* f) {
  return f ? f->result.residual : 0.0;
}

void msx_factorization_free(msx_factorization* f) { delete f; }

int32_t msx_r_max_bound(int32_t channels) {
  if (channels < 2) return 0;
  return static_cast<int32_t>(msx::r_max_bound(static_cast<std::size_t>(channels)));
}

msx_status msx_select_order(const msx_epoch* epoch, msx_mdl_report** out) {
  return guarded([&] {
    if (!epoch || !out) msx::fail(msx::ErrorCode::DomainError, "null argument");
    *out = new msx_mdl_report{msx::select_order(epoch->epoch)};
  });
}

int32_t msx_mdl_selected(const msx_mdl_report* report) {
  return report ? static_cast<int32_t>(report->report.r_star) : 0;
}

int32_t msx_mdl_r_max(const msx_mdl_report* report) {
  return report ? static_cast<int32_t>(report->report.r_max) : 0;
}

msx_status msx_mdl_score(const msx_mdl_report* report, int32_t r, double* out) {
  return guarded([&] {
    if (!report || !out) msx::fail(msx::ErrorCode::DomainError, "null argument");
    const auto it = report->report.scores.find(static_cast<std::size_t>(r));
    if (it == report->report.scores.end())
      msx::fail(msx::ErrorCode::DomainError, "order was not fitted");
    *out = it->second;
  });
}

void msx_mdl_report_free(msx_mdl_report* report) { delete report; }

msx_status msx_synth_trial(const msx_gen_config* config, int64_t dataset,
                           int64_t trial, msx_epoch** epoch_out,
                           double* true_synergies, double* noise_power) {
  return guarded([&] {
    if (!config || !epoch_out)
      msx::fail(msx::ErrorCode::DomainError, "null argument");
    msx::GenConfig gen;
    gen.channels = static_cast<std::size_t>(config->channels);
    gen.synergies = static_cast<std::size_t>(config->synergies);
    gen.samples = static_cast<std::size_t>(config->samples);
    gen.sample_rate = config->sample_rate;
    gen.snr_db = config->snr_db;
    gen.sparse = config->sparse != 0;
    gen.seed = config->seed;
    gen.trials = 1;
    gen.datasets = 1;
    const msx::TrialGenerator generator(gen);
    msx::SyntheticTrial result = generator.trial(
        static_cast<std::size_t>(dataset), static_cast<std::size_t>(trial));
    if (true_synergies) {
      const msx::Matrix& s = result.true_synergies.s;
      std::memcpy(true_synergies, s.data(), sizeof(double) * s.rows() * s.cols());
    }
    if (noise_power) *noise_power = result.noise_power;
    *epoch_out = new msx_epoch{std::move(result.epoch)};
  });
}

msx_status msx_run(const char* spec_json) {
  return guarded([&] {
    if (!spec_json) msx::fail(msx::ErrorCode::SpecError, "null spec");
    const msx::ExperimentSpec spec = msx::parse_spec_json(spec_json);
    msx::run_command(spec);
  });
}

}  // extern "C"
