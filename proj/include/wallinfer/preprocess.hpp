#pragma once

#include <span>
#include <string>
#include <vector>

#include "wallinfer/core.hpp"

namespace wallinfer::preprocess {

/// Cubic smoothing spline fit. `lambda_smooth` weights the roughness penalty
/// against the mean squared residual.
struct SmoothingFit {
  double lambda_smooth = 0.0;
  TimeSeries fitted;
  TimeSeries residuals;
  double objective = 0.0;  // (1/N) sum r^2 + lambda * int g''^2
};

struct WhitenessReport {
  std::vector<double> acf;
  double q_statistic = 0.0;
  double p_value = 1.0;
  int lags_tested = 0;
};

struct SmootherConfig {
  std::vector<double> lambda_grid = default_lambda_grid();
  int acf_horizon = 50;

  /// 60 log-spaced values in [1e-10, 1e8] (time measured in minutes).
  static std::vector<double> default_lambda_grid();
};

/// Non-overlapping block means; the trailing partial block is dropped and
/// each output sample is stamped at its block centre.
TimeSeries moving_average(const TimeSeries& s, int lag);
Campaign moving_average(const Campaign& c, int lag);

/// Sample autocorrelation at lags 1..max_lag of the demeaned sequence.
std::vector<double> acf(std::span<const double> x, int max_lag);

/// Sum of squared autocorrelations over lags 1..h; +inf when the sequence is
/// numerically constant (an interpolating fit leaves no noise to assess).
double acf_energy(std::span<const double> x, int h);

/// Natural cubic smoothing spline with a knot at every sample, fitted through
/// the Reinsch banded system (R + N*lambda Q'Q) gamma = Q'y.
SmoothingFit smoothing_spline(const TimeSeries& s, double lambda_smooth);

/// Picks the lambda whose residuals have the smallest acf_energy over lags
/// 1..h. Ties go to the larger lambda.
SmoothingFit select_smoothing(const TimeSeries& s, const std::vector<double>& lambda_grid, int h);

struct LagScore {
  int lag = 0;
  double score = 0.0;
};

/// Lag whose block averages leave the least residual autocorrelation summed
/// over the four series. Ties go to the smaller lag.
int select_lag(const Campaign& raw, const std::vector<int>& candidates, const SmootherConfig& cfg,
               std::vector<LagScore>* scores = nullptr);

WhitenessReport ljung_box(std::span<const double> residuals, int h);
/// Ljung-Box statistic from precomputed autocorrelations of a length-n series.
WhitenessReport ljung_box_from_acf(const std::vector<double>& rho, std::size_t n);

/// Zero-mean noise scale sqrt(mean(r^2)).
double estimate_noise_sd(std::span<const double> residuals);

struct PreprocessConfig {
  /// 0 selects the lag from `lag_candidates`; 1 means the input is already averaged.
  int lag = 0;
  std::vector<int> lag_candidates = {2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  SmootherConfig smoother;
  int ljung_box_lags = 20;
  bool estimate_flux_sigma = false;
};

struct SeriesReport {
  std::string name;
  double lambda_smooth = 0.0;
  double sigma = 0.0;
  WhitenessReport whiteness;
};

struct NoiseReport {
  int lag = 1;
  std::vector<LagScore> lag_scores;
  std::vector<SeriesReport> series;  // temp_int, temp_ext, flux_int, flux_ext
};

/// Averaged campaign together with the smoothed boundary temperatures that
/// centre the boundary priors, and the noise scales used by the likelihoods.
struct PreparedData {
  Campaign averaged;
  TimeSeries mu_int;
  TimeSeries mu_ext;
  NoiseModel noise;
  NoiseReport report;

  PreparedData window(std::size_t begin, std::size_t end) const;
  PreparedData decimate(std::size_t factor) const;
};

/// Averages (selecting the lag when cfg.lag == 0), smooths all four series
/// and characterises the residual noise. `noise` supplies the flux sigmas
/// unless cfg.estimate_flux_sigma is set, and always the boundary prior sigma.
PreparedData prepare(const Campaign& campaign, const PreprocessConfig& cfg, const NoiseModel& noise);

}  // namespace wallinfer::preprocess
