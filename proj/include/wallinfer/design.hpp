#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wallinfer/core.hpp"
#include "wallinfer/inference.hpp"
#include "wallinfer/pipeline.hpp"
#include "wallinfer/preprocess.hpp"

namespace wallinfer::design {

/// Half-open window [start, end) into the averaged campaign.
struct DesignSetup {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string label;

  void validate(std::size_t length) const;
  std::size_t size() const { return end - start; }
};

struct InformationGain {
  double d_kl = 0.0;     // nats
  double gaussian = 0.0; // log V - entropy of the untruncated Gaussian
  double c_trunc = 0.0;  // subtracted from `gaussian`; <= 0
};

/// KL divergence of the Laplace posterior from the uniform prior on `box`.
/// Posterior mass outside the box is handled per coordinate as if the
/// marginals were independent truncated normals. Clamped at zero.
InformationGain information_gain(const inference::GaussianApprox& approx, const PriorBox& box);

struct GainEstimate {
  double d_kl = 0.0;
  double std_error = 0.0;
  double inside_fraction = 0.0;
};

/// Monte-Carlo estimate of the same divergence: draws from the Gaussian,
/// keeps those inside the box and averages the log density ratio of the
/// renormalised truncated Gaussian to the prior.
GainEstimate information_gain_mc(const inference::GaussianApprox& approx, const PriorBox& box,
                                 std::size_t n_draws, std::uint64_t seed);

struct GainResult {
  DesignSetup setup;
  std::optional<InformationGain> gain;
  std::optional<inference::GaussianApprox> laplace;
  std::string error;  // set when the window's inference failed

  bool ok() const { return gain.has_value(); }
  double d_kl() const { return gain ? gain->d_kl : 0.0; }
};

/// MAP + Laplace + information gain on one window of the data. Failures are
/// reported in the result rather than thrown.
GainResult window_gain(const preprocess::PreparedData& data, const DesignSetup& setup,
                       const pipeline::ModelConfig& model, const pipeline::FitConfig& fit);

/// Gain of the nested windows [0, checkpoint) for increasing checkpoints.
/// Each fit also starts from the previous window's MAP.
std::vector<GainResult> gain_vs_duration(const preprocess::PreparedData& data,
                                         const std::vector<std::size_t>& checkpoints,
                                         const pipeline::ModelConfig& model,
                                         const pipeline::FitConfig& fit,
                                         std::size_t min_window = 100);

struct CycleConfig {
  double min_separation_min = 720.0;
  double min_prominence = 1.0;  // C
};

/// Windows between successive qualifying local minima of a smoothed external
/// temperature. Partial windows before the first and after the last minimum
/// are kept and labelled "lead" and "trail"; with no qualifying minimum the
/// whole series is returned as one window.
std::vector<DesignSetup> detect_cycles(const TimeSeries& temp_ext_smoothed, const CycleConfig& cfg);

/// Gains of the given windows, highest first; ties go to the shorter window
/// and failed windows come last.
std::vector<GainResult> rank_cycles(const preprocess::PreparedData& data,
                                    const std::vector<DesignSetup>& cycles,
                                    const pipeline::ModelConfig& model,
                                    const pipeline::FitConfig& fit);

}  // namespace wallinfer::design
