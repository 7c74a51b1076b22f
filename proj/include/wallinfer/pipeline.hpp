#pragma once

#include <cstdint>
#include <vector>

#include "wallinfer/core.hpp"
#include "wallinfer/inference.hpp"
#include "wallinfer/likelihood.hpp"
#include "wallinfer/preprocess.hpp"

namespace wallinfer::pipeline {

/// Everything that defines the statistical model apart from the data.
struct ModelConfig {
  WallGeometry geometry;
  int m_cells = 60;
  double dt = 60.0;  // s
  InitialConditionKind ic = InitialConditionKind::piecewise_linear;
  PriorBox box;
  likelihood::LikelihoodKind likelihood = likelihood::LikelihoodKind::marginal;
};

struct FitConfig {
  int n_starts = 8;
  std::uint64_t seed = 1;
  /// Tried in addition to the Latin-hypercube starts (e.g. a previous MAP).
  std::vector<Vector> extra_starts;
  inference::OptimizerConfig optimizer;
  double hessian_step = 1e-4;
};

/// Posterior over theta for prepared data. The deterministic likelihood uses
/// the averaged measured temperatures as exact boundaries; the marginal one
/// centres the boundary prior on the smoothed temperatures.
likelihood::Posterior make_posterior(const preprocess::PreparedData& data, const ModelConfig& model);

struct MapResult {
  ThetaParams theta;
  double log_posterior = 0.0;
  double log_likelihood = 0.0;
  inference::MaximizeResult search;
};

std::vector<Vector> starts_for(const PriorBox& box, const FitConfig& fit);

MapResult fit_map(const likelihood::Posterior& posterior, const FitConfig& fit);
inference::GaussianApprox fit_laplace(const likelihood::Posterior& posterior, const FitConfig& fit);

inference::Objective objective(const likelihood::Posterior& posterior);

/// Pointwise flux quantiles over boundary temperatures drawn from the
/// boundary prior N(mu, sigma_temp_prior^2 I), with theta held fixed.
struct PredictionBands {
  double level = 0.95;
  Vector median_int, lower_int, upper_int;
  Vector median_ext, lower_ext, upper_ext;
};

PredictionBands predict_fluxes(const preprocess::PreparedData& data, const ModelConfig& model,
                               const ThetaParams& theta, int n_draws, std::uint64_t seed,
                               double level = 0.95);

}  // namespace wallinfer::pipeline
