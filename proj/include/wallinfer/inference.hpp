#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "wallinfer/core.hpp"

namespace wallinfer::inference {

/// Log density (or any objective to maximise) over parameter vectors in
/// natural units. May return -inf; NumericalError thrown by an evaluation is
/// treated as -inf by the optimiser.
using Objective = std::function<double(const Vector&)>;

struct OptimizerConfig {
  int max_iterations = 200;
  double gradient_step = 1e-6;  // central-difference step in unit-box coordinates
  double gradient_tolerance = 1e-6;
  double value_tolerance = 1e-12;  // relative change over one iteration
};

struct StartReport {
  Vector start;
  Vector end;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string message;
};

struct MaximizeResult {
  Vector theta;
  double value = 0.0;
  std::vector<StartReport> starts;
};

/// Quasi-Newton (BFGS) ascent from every start on the unit-box rescaled
/// parameters; the box is a hard constraint. Returns the best local optimum
/// (highest value, then lexicographically smallest theta).
MaximizeResult maximize(const Objective& objective, const PriorBox& box,
                        const std::vector<Vector>& starts, const OptimizerConfig& cfg = {});

/// Latin-hypercube starts with one point per stratum and coordinate, drawn
/// from the interior of each stratum.
std::vector<Vector> latin_hypercube_starts(const PriorBox& box, int count, std::uint64_t seed);

/// Central second differences in unit-box coordinates with step `rel_step`,
/// mapped back to natural units and symmetrised.
Matrix hessian_fd(const Objective& objective, const Vector& theta_hat, const PriorBox& box,
                  double rel_step = 1e-4);

struct GaussianApprox {
  Vector map;
  Matrix covariance;
  double log_posterior_at_map = 0.0;

  ThetaParams map_point() const { return ThetaParams::from_vector(map); }
  Vector sd() const { return covariance.diagonal().cwiseSqrt(); }
};

struct LaplaceConfig {
  OptimizerConfig optimizer;
  double hessian_step = 1e-4;
};

/// Gaussian approximation at an already located maximum.
GaussianApprox laplace_at(const Objective& log_post, const PriorBox& box, const Vector& map,
                          double value, double hessian_step = 1e-4);

/// MAP by maximize(), then covariance = inverse of the negative Hessian.
GaussianApprox laplace(const Objective& log_post, const PriorBox& box,
                       const std::vector<Vector>& starts, const LaplaceConfig& cfg = {});

struct McmcConfig {
  long n_iter = 101000;
  long burn_in = 1000;
  long thin = 20;
  /// Proposal standard deviations per coordinate; empty means 2% of the box widths.
  Vector proposal_sd;
  std::uint64_t seed = 1;
  /// Pilot phase that rescales proposal_sd towards 20-40% acceptance and is
  /// then frozen. Off by default.
  bool adapt = false;
  int adapt_iterations = 500;
};

struct McmcChain {
  std::vector<Vector> samples;       // kept draws after burn-in and thinning
  std::vector<double> log_post;      // log density at each kept draw
  std::vector<long> iteration;       // iteration index of each kept draw
  long proposed = 0;
  long accepted = 0;
  double acceptance_rate = 0.0;
  McmcConfig config;                 // with the proposal scales actually used
};

/// Random-walk Metropolis-Hastings with Gaussian proposals N(theta, diag(sd^2)).
McmcChain rw_metropolis(const Objective& log_post, const PriorBox& box, const Vector& theta0,
                        const McmcConfig& cfg);

double aic(double max_log_lik, int n_params);

struct MarginalSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double p025 = 0.0;
  double p50 = 0.0;
  double p975 = 0.0;
  std::vector<double> bin_edges;
  std::vector<double> density;  // histogram or Gaussian density at bin centres
};

std::vector<std::string> parameter_names(int dimension);

std::vector<MarginalSummary> summarize_marginals(const McmcChain& chain, int bins = 40);
std::vector<MarginalSummary> summarize_marginals(const GaussianApprox& approx, int bins = 40);

/// Columns iter,R,rhoC,tau0[,tau1],log_post.
void write_chain_csv(const std::filesystem::path& path, const McmcChain& chain);
/// {"map": [...], "covariance": [row-major], "log_posterior_at_map": x}
std::string laplace_json(const GaussianApprox& approx);

}  // namespace wallinfer::inference
