#include "wallinfer/likelihood.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace wallinfer::likelihood {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Eigen::Map<const Vector> as_vector(const TimeSeries& s) {
  return Eigen::Map<const Vector>(s.values.data(), static_cast<Eigen::Index>(s.size()));
}

void require_observations(const Campaign& campaign, const Grid& grid) {
  require_valid(campaign);
  if (static_cast<int>(campaign.size()) != grid.n_obs()) {
    throw InvalidInput("campaign has " + std::to_string(campaign.size()) +
                       " samples but the grid observes " + std::to_string(grid.n_obs()));
  }
}

// T1' T2 for lower-triangular n x n matrices whose columns 1..n-1 are
// Toeplitz (T(k+1, i+1) = T(k, i) for i >= 1). Along each diagonal the sums
// differ only by the contribution of the last row, so the product costs O(n^2).
Matrix structured_cross(const Matrix& t1, const Matrix& t2) {
  const Eigen::Index n = t1.rows();
  Matrix p(n, n);
  if (n == 0) return p;
  const Eigen::Index last = n - 1;
  for (Eigen::Index i = 0; i < n; ++i) {
    p(i, last) = t1(last, i) * t2(last, last);
    p(last, i) = t1(last, last) * t2(last, i);
  }
  for (Eigen::Index k = 1; k < last; ++k) {
    const Eigen::Index i = last - k;
    for (Eigen::Index l = 1; l < last; ++l) {
      const Eigen::Index j = last - l;
      p(i, j) = p(i + 1, j + 1) + t1(last, i) * t2(last, j);
    }
  }
  for (Eigen::Index j = 0; j < last; ++j) {
    p(0, j) = t1.col(0).dot(t2.col(j));
    p(j, 0) = t1.col(j).dot(t2.col(0));
  }
  return p;
}

std::string theta_context(const ThetaParams& theta) { return " at " + theta.describe(); }

}  // namespace

void BoundaryPrior::validate(std::size_t n_obs) const {
  if (!(sigma_temp_prior > 0.0) || !std::isfinite(sigma_temp_prior)) {
    throw InvalidInput("sigma_temp_prior must be positive");
  }
  mu_int.validate("mu_int");
  mu_ext.validate("mu_ext");
  if (mu_int.size() != n_obs || mu_ext.size() != n_obs) {
    throw InvalidInput("boundary prior means must have one value per flux observation (" +
                       std::to_string(n_obs) + ")");
  }
}

Grid observation_grid(const Campaign& campaign, int m_cells, double dt_seconds) {
  require_valid(campaign);
  if (!(dt_seconds > 0.0)) throw InvalidInput("solver dt must be positive");
  const double interval = campaign.temp_int.dt_sample * 60.0;
  const double ratio = interval / dt_seconds;
  const double stride = std::round(ratio);
  if (stride < 1.0 || std::abs(ratio - stride) > 1e-9 * ratio) {
    throw InvalidInput("sampling interval of " + std::to_string(interval) +
                       " s is not a whole number of solver steps of " +
                       std::to_string(dt_seconds) + " s");
  }
  Grid grid;
  grid.m_cells = m_cells;
  grid.dt = dt_seconds;
  grid.obs_stride = static_cast<int>(stride);
  grid.n_steps = static_cast<int>(campaign.size() - 1) * grid.obs_stride;
  grid.validate();
  return grid;
}

double log_likelihood_deterministic(const ThetaParams& theta, const Campaign& campaign,
                                    const TimeSeries& bc_int, const TimeSeries& bc_ext,
                                    const NoiseModel& noise, const WallGeometry& geometry,
                                    const Grid& grid, InitialConditionKind ic) {
  noise.validate();
  require_observations(campaign, grid);
  if (bc_int.size() != campaign.size() || bc_ext.size() != campaign.size()) {
    throw InvalidInput("boundary series must match the campaign length");
  }
  forward::FluxSeries flux;
  try {
    flux = forward::solve_forward(theta, geometry, grid, bc_int.values, bc_ext.values, ic);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(e.what()) + theta_context(theta));
  }
  const double n = static_cast<double>(campaign.size());
  const double si = noise.sigma_flux_int;
  const double se = noise.sigma_flux_ext;
  const double misfit_int = (as_vector(campaign.flux_int) - flux.f_int).squaredNorm();
  const double misfit_ext = (as_vector(campaign.flux_ext) - flux.f_ext).squaredNorm();
  const double value = -n * std::log(2.0 * std::numbers::pi * si * se) -
                       misfit_int / (2.0 * si * si) - misfit_ext / (2.0 * se * se);
  if (!std::isfinite(value)) throw NumericalError("non-finite log-likelihood" + theta_context(theta));
  return value;
}

Matrix MarginalWorkspace::lambda0() const {
  return lambda0_inv.solve(Matrix::Identity(lambda0_inv.rows(), lambda0_inv.cols()));
}

Matrix MarginalWorkspace::lambda1() const {
  return lambda1_inv.solve(Matrix::Identity(lambda1_inv.rows(), lambda1_inv.cols()));
}

double MarginalWorkspace::log_marginal() const {
  return 0.5 * log_det_lambda0 + 0.5 * log_det_lambda1 - 0.5 * u + 0.5 * quad_lambda0 +
         0.5 * quad_lambda1 + log_normalizer;
}

MarginalWorkspace marginal_workspace(const ThetaParams& theta, const Campaign& campaign,
                                     const BoundaryPrior& bprior, const NoiseModel& noise,
                                     const WallGeometry& geometry, const Grid& grid,
                                     InitialConditionKind ic,
                                     const forward::FluxOperators* ops) {
  noise.validate();
  require_observations(campaign, grid);
  bprior.validate(campaign.size());
  theta.check_kind(ic);

  forward::FluxOperators built;
  if (ops == nullptr) {
    built = forward::build_flux_operators(theta, geometry, grid);
    ops = &built;
  }
  const Eigen::Index n = static_cast<Eigen::Index>(campaign.size());
  if (ops->h_int.rows() != n) throw InvalidInput("flux operators do not match the campaign");

  const double si = 1.0 / (noise.sigma_flux_int * noise.sigma_flux_int);
  const double se = 1.0 / (noise.sigma_flux_ext * noise.sigma_flux_ext);
  const double cp = 1.0 / (bprior.sigma_temp_prior * bprior.sigma_temp_prior);

  const Vector mu_i = as_vector(bprior.mu_int);
  const Vector mu_e = as_vector(bprior.mu_ext);
  const Vector t0 =
      forward::initial_profile(ic, mu_i(0), mu_e(0), theta, grid);
  const Vector r_i = as_vector(campaign.flux_int) - ops->h * t0 -
                     ops->h_int.triangularView<Eigen::Lower>() * mu_i -
                     ops->h_ext.triangularView<Eigen::Lower>() * mu_e;
  const Vector r_e = as_vector(campaign.flux_ext) - ops->g * t0 -
                     ops->g_int.triangularView<Eigen::Lower>() * mu_i -
                     ops->g_ext.triangularView<Eigen::Lower>() * mu_e;

  MarginalWorkspace ws;
  ws.u = si * r_i.squaredNorm() + se * r_e.squaredNorm();

  Matrix a00 = si * structured_cross(ops->h_int, ops->h_int) +
               se * structured_cross(ops->g_int, ops->g_int);
  a00.diagonal().array() += cp;
  const Matrix a01 = si * structured_cross(ops->h_int, ops->h_ext) +
                     se * structured_cross(ops->g_int, ops->g_ext);
  Matrix a11 = si * structured_cross(ops->h_ext, ops->h_ext) +
               se * structured_cross(ops->g_ext, ops->g_ext);
  a11.diagonal().array() += cp;

  ws.t_int_2 = si * (ops->h_int.transpose() * r_i) + se * (ops->g_int.transpose() * r_e);
  const Vector t_ext = si * (ops->h_ext.transpose() * r_i) + se * (ops->g_ext.transpose() * r_e);

  const auto fail = [&] {
    return NumericalError("marginal covariance not positive definite" + theta_context(theta));
  };
  ws.lambda0_inv.compute(a00);
  if (ws.lambda0_inv.info() != Eigen::Success) throw fail();
  const auto l0 = ws.lambda0_inv.matrixL();

  // X = L0^{-1} A01, so A01' Lambda0 A01 = X'X.
  Matrix x = a01;
  l0.solveInPlace(x);
  Matrix s1 = a11;
  s1.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose(), -1.0);
  s1.triangularView<Eigen::StrictlyUpper>() = s1.transpose();
  ws.lambda1_inv.compute(s1);
  if (ws.lambda1_inv.info() != Eigen::Success) throw fail();

  Vector z0 = ws.t_int_2;
  l0.solveInPlace(z0);  // L0^{-1} t_int_2
  ws.t_ext_1 = t_ext - x.transpose() * z0;
  Vector z1 = ws.t_ext_1;
  ws.lambda1_inv.matrixL().solveInPlace(z1);

  const Matrix& f0 = ws.lambda0_inv.matrixLLT();
  const Matrix& f1 = ws.lambda1_inv.matrixLLT();
  ws.log_det_lambda0 = -2.0 * f0.diagonal().array().log().sum();
  ws.log_det_lambda1 = -2.0 * f1.diagonal().array().log().sum();
  ws.quad_lambda0 = z0.squaredNorm();
  ws.quad_lambda1 = z1.squaredNorm();

  const double nn = static_cast<double>(n);
  ws.log_normalizer = -nn * kLog2Pi - nn * std::log(noise.sigma_flux_int) -
                      nn * std::log(noise.sigma_flux_ext) -
                      2.0 * nn * std::log(bprior.sigma_temp_prior);
  if (!std::isfinite(ws.log_marginal())) {
    throw NumericalError("non-finite marginal likelihood" + theta_context(theta));
  }
  return ws;
}

double log_marginal_likelihood(const ThetaParams& theta, const Campaign& campaign,
                               const BoundaryPrior& bprior, const NoiseModel& noise,
                               const WallGeometry& geometry, const Grid& grid,
                               InitialConditionKind ic, const forward::FluxOperators* ops) {
  return marginal_workspace(theta, campaign, bprior, noise, geometry, grid, ic, ops).log_marginal();
}

double log_prior(const ThetaParams& theta, const PriorBox& box) {
  if (!box.contains(theta)) return -std::numeric_limits<double>::infinity();
  return -std::log(box.volume());
}

std::string to_string(LikelihoodKind kind) {
  return kind == LikelihoodKind::marginal ? "marginal" : "deterministic";
}

LikelihoodKind likelihood_from_string(const std::string& name) {
  if (name == "marginal") return LikelihoodKind::marginal;
  if (name == "deterministic") return LikelihoodKind::deterministic;
  throw InvalidInput("unknown likelihood '" + name + "' (expected marginal or deterministic)");
}

Posterior::Posterior(Setup setup)
    : setup_(std::move(setup)), cache_(std::make_shared<forward::OperatorCache>(16)) {
  setup_.box = setup_.box.for_kind(setup_.ic);
  setup_.box.validate();
  setup_.noise.validate();
  setup_.geometry.validate();
  require_observations(setup_.data, setup_.grid);
  if (setup_.kind == LikelihoodKind::marginal) setup_.prior.validate(setup_.data.size());
}

double Posterior::log_likelihood(const ThetaParams& theta) const {
  theta.validate();
  if (setup_.kind == LikelihoodKind::deterministic) {
    return log_likelihood_deterministic(theta, setup_.data, setup_.data.temp_int,
                                        setup_.data.temp_ext, setup_.noise, setup_.geometry,
                                        setup_.grid, setup_.ic);
  }
  const auto ops = cache_->get(theta, setup_.geometry, setup_.grid);
  return log_marginal_likelihood(theta, setup_.data, setup_.prior, setup_.noise, setup_.geometry,
                                 setup_.grid, setup_.ic, ops.get());
}

double Posterior::log_posterior(const ThetaParams& theta) const {
  const double lp = log_prior(theta, setup_.box);
  if (!std::isfinite(lp)) return lp;
  return lp + log_likelihood(theta);
}

double Posterior::log_posterior(const Vector& theta) const {
  return log_posterior(ThetaParams::from_vector(theta));
}

}  // namespace wallinfer::likelihood
