#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "wallinfer/core.hpp"
#include "wallinfer/pipeline.hpp"
#include "wallinfer/preprocess.hpp"

namespace wallinfer::robustness {

struct SubsampleConfig {
  int ell = 5;        // raw samples per block
  int b = 4;          // samples drawn per block without replacement
  int n_repeats = 100;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Block means over `b` of every `ell` consecutive raw samples (the trailing
/// partial block is dropped). The same within-block positions are used for
/// all four series. `picks`, when given, receives the sorted positions drawn
/// for each block.
Campaign subsample_once(const Campaign& raw, const SubsampleConfig& cfg, std::mt19937_64& rng,
                        std::vector<std::vector<int>>* picks = nullptr);

struct StudyConfig {
  /// Smoothing and noise options applied to each subsampled campaign; the
  /// averaging lag is ignored since subsampling already averages.
  preprocess::PreprocessConfig preprocess;
  NoiseModel noise;
  std::size_t decimate = 1;
  pipeline::ModelConfig model;
  pipeline::FitConfig fit;
  double max_failure_fraction = 0.2;
};

struct Quantiles {
  std::string name;
  double min = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  double max = 0.0;

  double iqr() const { return q75 - q25; }
  bool contains(double x) const { return x >= min && x <= max; }
};

struct RepeatResult {
  int repeat = 0;
  bool ok = false;
  ThetaParams theta;
  double log_posterior = 0.0;
  std::string error;
};

struct VariabilitySummary {
  Quantiles r_value;
  Quantiles rho_c;
  std::vector<RepeatResult> repeats;  // every repeat, failed ones included
  int n_failed = 0;
};

/// Type-7 quantiles (linear interpolation between order statistics).
Quantiles summarize(const std::string& name, std::vector<double> values);

/// Repeats subsample, smooth and marginal-likelihood MAP `n_repeats` times
/// with per-repeat random streams derived from `seed`. Throws NumericalError
/// when more than max_failure_fraction of the repeats fail.
VariabilitySummary run_study(const Campaign& raw, const SubsampleConfig& sub, const StudyConfig& cfg);

}  // namespace wallinfer::robustness
