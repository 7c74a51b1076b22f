#pragma once

#include <cstdint>
#include <vector>

#include "wallinfer/core.hpp"
#include "wallinfer/likelihood.hpp"

namespace wallinfer::synthetic {

struct Sinusoid {
  double amplitude = 0.0;   // C
  double period_min = 1440.0;
  double phase = 0.0;       // rad
};

/// One trough-to-trough oscillation a*(1 - cos(2 pi s/length)), s in minutes
/// since the cycle began.
struct Cycle {
  double length_min = 1440.0;
  double amplitude = 0.0;
};

/// mean + drift * t/1440 + sum of a*sin(2 pi t/period + phase), t in minutes,
/// plus `cycles` laid end to end from t = 0 (nothing added after the last).
struct BoundaryProfile {
  double mean = 0.0;
  double drift_per_day = 0.0;
  std::vector<Sinusoid> components;
  std::vector<Cycle> cycles;

  double value(double t_min) const;
};

struct NoiseSpec {
  double temp_sd = 0.1;
  double flux_sd = 0.66;
  /// Lag-one coefficient of AR(1) noise; 0 gives i.i.d. noise. The marginal
  /// sd stays temp_sd / flux_sd either way.
  double ar1 = 0.0;
};

struct ScenarioSpec {
  ThetaParams theta_true{0.31, 3.2e5, 16.0, std::nullopt};
  InitialConditionKind ic = InitialConditionKind::piecewise_linear;
  WallGeometry geometry;
  /// Simulation grid, four times finer than the default inference grid.
  int m_cells = 240;
  double dt = 15.0;  // s
  BoundaryProfile internal{20.0, 0.0, {}, {}};
  BoundaryProfile external{10.0, 0.0, {{10.0, 1440.0, 0.0}}, {}};
  NoiseSpec noise;
  double duration_min = 7200.0;
  double sample_min = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
  /// The default scenario with the given seed.
  static ScenarioSpec standard(std::uint64_t seed);
};

struct Simulation {
  Campaign raw;    // noisy samples
  Campaign truth;  // noise-free samples at the same times
};

/// Runs the forward model at theta_true on the fine grid, samples every
/// sample_min minutes (duration/sample_min + 1 samples starting at t = 0)
/// and adds seeded noise to all four series.
Simulation simulate_campaign(const ScenarioSpec& spec);

/// Log density of (Q_int, Q_ext) under the linear-Gaussian pushforward of
/// the boundary prior, by dense algebra on the joint 2n x 2n covariance.
/// A zero prior sigma is allowed and gives the plug-in likelihood at mu.
double oracle_marginal_gaussian(const ThetaParams& theta, const Campaign& campaign,
                                const likelihood::BoundaryPrior& bprior, const NoiseModel& noise,
                                const WallGeometry& geometry, const Grid& grid,
                                InitialConditionKind ic);

struct MonteCarloEstimate {
  double log_value = 0.0;
  double std_error = 0.0;  // jackknife, of log_value; +inf for one draw
};

/// Log of the average joint likelihood over boundary-prior draws.
MonteCarloEstimate oracle_marginal_mc(const ThetaParams& theta, const Campaign& campaign,
                                      const likelihood::BoundaryPrior& bprior,
                                      const NoiseModel& noise, const WallGeometry& geometry,
                                      const Grid& grid, InitialConditionKind ic,
                                      std::size_t n_draws, std::uint64_t seed);

}  // namespace wallinfer::synthetic
