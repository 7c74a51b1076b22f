#pragma once

#include <memory>

#include <Eigen/Cholesky>

#include "wallinfer/core.hpp"
#include "wallinfer/forward.hpp"

namespace wallinfer::likelihood {

/// Gaussian prior on the boundary temperatures, centred on the smoothed
/// series with covariance sigma_temp_prior^2 I on each face.
struct BoundaryPrior {
  TimeSeries mu_int;
  TimeSeries mu_ext;
  double sigma_temp_prior = 0.01;

  void validate(std::size_t n_obs) const;
};

/// Solver grid whose observation sub-grid matches the campaign sampling.
/// Throws InvalidInput when the sampling interval is not a whole number of
/// solver steps.
Grid observation_grid(const Campaign& campaign, int m_cells, double dt_seconds);

/// Gaussian flux likelihood with the boundary temperatures taken as exact.
/// The initial profile is anchored at bc_int[0], bc_ext[0].
double log_likelihood_deterministic(const ThetaParams& theta, const Campaign& campaign,
                                    const TimeSeries& bc_int, const TimeSeries& bc_ext,
                                    const NoiseModel& noise, const WallGeometry& geometry,
                                    const Grid& grid, InitialConditionKind ic);

/// Quantities of the two-stage Gaussian integration over the boundary
/// temperatures (interior face first, then exterior).
///
/// Everything is expressed in deviations from the prior means, so the
/// residuals are r = Q - H T0 - H_int mu_int - H_ext mu_ext (and likewise
/// with G) and the prior-mean terms drop out of t_int_2 and t_ext_1. This is
/// the same integral, but the prior precision never multiplies |mu|^2, which
/// would cancel catastrophically for small prior sigmas.
struct MarginalWorkspace {
  Eigen::LLT<Matrix> lambda0_inv;  // factor of Lambda0^{-1}
  Eigen::LLT<Matrix> lambda1_inv;  // factor of Lambda1^{-1}
  Vector t_int_2;
  Vector t_ext_1;
  double u = 0.0;
  double log_det_lambda0 = 0.0;
  double log_det_lambda1 = 0.0;
  double quad_lambda0 = 0.0;  // t_int_2' Lambda0 t_int_2
  double quad_lambda1 = 0.0;  // t_ext_1' Lambda1 t_ext_1
  double log_normalizer = 0.0;

  /// Dense covariances; for checks on small problems.
  Matrix lambda0() const;
  Matrix lambda1() const;
  double log_marginal() const;
};

MarginalWorkspace marginal_workspace(const ThetaParams& theta, const Campaign& campaign,
                                     const BoundaryPrior& bprior, const NoiseModel& noise,
                                     const WallGeometry& geometry, const Grid& grid,
                                     InitialConditionKind ic,
                                     const forward::FluxOperators* ops = nullptr);

double log_marginal_likelihood(const ThetaParams& theta, const Campaign& campaign,
                               const BoundaryPrior& bprior, const NoiseModel& noise,
                               const WallGeometry& geometry, const Grid& grid,
                               InitialConditionKind ic,
                               const forward::FluxOperators* ops = nullptr);

/// Log density of the uniform prior: -log(volume) inside the closed box,
/// -inf outside.
double log_prior(const ThetaParams& theta, const PriorBox& box);

enum class LikelihoodKind { deterministic, marginal };

std::string to_string(LikelihoodKind kind);
LikelihoodKind likelihood_from_string(const std::string& name);

/// A campaign plus every modelling choice, exposed as theta -> log density.
/// Operators are shared through an internal cache, so evaluations that only
/// differ in the initial-profile parameters are cheap. Safe to call from
/// several threads.
class Posterior {
 public:
  struct Setup {
    Campaign data;         // averaged campaign
    BoundaryPrior prior;   // marginal likelihood only
    NoiseModel noise;
    WallGeometry geometry;
    Grid grid;
    InitialConditionKind ic = InitialConditionKind::piecewise_linear;
    PriorBox box;
    LikelihoodKind kind = LikelihoodKind::marginal;
  };

  explicit Posterior(Setup setup);

  double log_likelihood(const ThetaParams& theta) const;
  /// -inf outside the prior box.
  double log_posterior(const ThetaParams& theta) const;
  double log_posterior(const Vector& theta) const;

  const Setup& setup() const { return setup_; }
  int dimension() const { return parameter_dimension(setup_.ic); }

 private:
  Setup setup_;
  std::shared_ptr<forward::OperatorCache> cache_;
};

}  // namespace wallinfer::likelihood
