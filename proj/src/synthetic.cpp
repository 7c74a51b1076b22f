#include "wallinfer/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Cholesky>

#include "wallinfer/forward.hpp"

namespace wallinfer::synthetic {

double BoundaryProfile::value(double t_min) const {
  double v = mean + drift_per_day * t_min / 1440.0;
  for (const auto& c : components) {
    v += c.amplitude * std::sin(2.0 * std::numbers::pi * t_min / c.period_min + c.phase);
  }
  double start = 0.0;
  for (const auto& c : cycles) {
    if (t_min >= start && t_min < start + c.length_min) {
      v += c.amplitude * (1.0 - std::cos(2.0 * std::numbers::pi * (t_min - start) / c.length_min));
      break;
    }
    start += c.length_min;
  }
  return v;
}

void ScenarioSpec::validate() const {
  theta_true.validate();
  theta_true.check_kind(ic);
  geometry.validate();
  if (m_cells < 3) throw InvalidInput("scenario needs at least 3 cells");
  if (!(dt > 0.0)) throw InvalidInput("scenario dt must be positive");
  if (!(noise.temp_sd >= 0.0) || !(noise.flux_sd >= 0.0)) {
    throw InvalidInput("noise sds must be non-negative");
  }
  if (!(std::abs(noise.ar1) < 1.0)) throw InvalidInput("AR(1) coefficient must lie in (-1, 1)");
  if (!(sample_min > 0.0) || !(duration_min >= sample_min)) {
    throw InvalidInput("scenario needs duration >= sample interval > 0");
  }
  const double per_sample = sample_min * 60.0 / dt;
  const double per_duration = duration_min / sample_min;
  if (std::abs(per_sample - std::round(per_sample)) > 1e-9 * per_sample ||
      std::abs(per_duration - std::round(per_duration)) > 1e-9 * per_duration) {
    throw InvalidInput("duration and sample interval must be whole multiples of dt");
  }
  for (const auto* p : {&internal, &external}) {
    for (const auto& c : p->components) {
      if (!(c.period_min > 0.0)) throw InvalidInput("sinusoid periods must be positive");
    }
    for (const auto& c : p->cycles) {
      if (!(c.length_min > 0.0)) throw InvalidInput("cycle lengths must be positive");
    }
  }
}

ScenarioSpec ScenarioSpec::standard(std::uint64_t seed) {
  ScenarioSpec spec;
  spec.seed = seed;
  return spec;
}

namespace {

std::vector<double> noise_path(std::mt19937_64& rng, std::size_t n, double sd, double phi) {
  std::vector<double> out(n, 0.0);
  if (sd == 0.0) return out;
  std::normal_distribution<double> z(0.0, 1.0);
  const double innovation = sd * std::sqrt(1.0 - phi * phi);
  double x = sd * z(rng);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) x = phi * x + innovation * z(rng);
    out[i] = x;
  }
  return out;
}

TimeSeries sampled(const std::vector<double>& v, double dt_min) { return TimeSeries{0.0, dt_min, v}; }

}  // namespace

Simulation simulate_campaign(const ScenarioSpec& spec) {
  spec.validate();
  const int per_sample = static_cast<int>(std::lround(spec.sample_min * 60.0 / spec.dt));
  const auto n_samples = static_cast<std::size_t>(std::lround(spec.duration_min / spec.sample_min)) + 1;

  Grid grid;
  grid.m_cells = spec.m_cells;
  grid.dt = spec.dt;
  grid.n_steps = static_cast<int>(n_samples - 1) * per_sample;
  grid.obs_stride = 1;

  std::vector<double> t_int(static_cast<std::size_t>(grid.n_steps) + 1);
  std::vector<double> t_ext(t_int.size());
  for (std::size_t k = 0; k < t_int.size(); ++k) {
    const double t_min = static_cast<double>(k) * spec.dt / 60.0;
    t_int[k] = spec.internal.value(t_min);
    t_ext[k] = spec.external.value(t_min);
  }
  const auto flux = forward::solve_forward(spec.theta_true, spec.geometry, grid, t_int, t_ext, spec.ic);

  std::vector<double> ti(n_samples), te(n_samples), qi(n_samples), qe(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const auto k = i * static_cast<std::size_t>(per_sample);
    ti[i] = t_int[k];
    te[i] = t_ext[k];
    qi[i] = flux.f_int(static_cast<Eigen::Index>(k));
    qe[i] = flux.f_ext(static_cast<Eigen::Index>(k));
  }

  Simulation sim;
  sim.truth.temp_int = sampled(ti, spec.sample_min);
  sim.truth.temp_ext = sampled(te, spec.sample_min);
  sim.truth.flux_int = sampled(qi, spec.sample_min);
  sim.truth.flux_ext = sampled(qe, spec.sample_min);
  sim.truth.stage = Stage::raw;

  std::mt19937_64 rng(spec.seed);
  sim.raw = sim.truth;
  const double phi = spec.noise.ar1;
  const std::pair<TimeSeries*, double> targets[] = {{&sim.raw.temp_int, spec.noise.temp_sd},
                                                    {&sim.raw.temp_ext, spec.noise.temp_sd},
                                                    {&sim.raw.flux_int, spec.noise.flux_sd},
                                                    {&sim.raw.flux_ext, spec.noise.flux_sd}};
  for (const auto& [series, sd] : targets) {
    const auto e = noise_path(rng, n_samples, sd, phi);
    for (std::size_t i = 0; i < n_samples; ++i) series->values[i] += e[i];
  }
  return sim;
}

namespace {

struct PushForward {
  Vector q;      // stacked observed fluxes
  Vector mean;   // stacked model flux at the prior means
  Matrix k_int;  // [H_int; G_int]
  Matrix k_ext;  // [H_ext; G_ext]
};

PushForward push_forward(const ThetaParams& theta, const Campaign& campaign,
                         const likelihood::BoundaryPrior& bprior, const WallGeometry& geometry,
                         const Grid& grid, InitialConditionKind ic) {
  const auto n = static_cast<Eigen::Index>(campaign.size());
  if (grid.n_obs() != n || bprior.mu_int.size() != campaign.size() ||
      bprior.mu_ext.size() != campaign.size()) {
    throw InvalidInput("oracle inputs have inconsistent lengths");
  }
  const auto ops = forward::build_flux_operators(theta, geometry, grid);
  const Eigen::Map<const Vector> mu_i(bprior.mu_int.values.data(), n);
  const Eigen::Map<const Vector> mu_e(bprior.mu_ext.values.data(), n);
  const Vector t0 = forward::initial_profile(ic, mu_i(0), mu_e(0), theta, grid);

  PushForward pf;
  pf.q.resize(2 * n);
  pf.q << Eigen::Map<const Vector>(campaign.flux_int.values.data(), n),
      Eigen::Map<const Vector>(campaign.flux_ext.values.data(), n);
  pf.mean.resize(2 * n);
  pf.mean << ops.h * t0 + ops.h_int * mu_i + ops.h_ext * mu_e,
      ops.g * t0 + ops.g_int * mu_i + ops.g_ext * mu_e;
  pf.k_int.resize(2 * n, n);
  pf.k_int << ops.h_int, ops.g_int;
  pf.k_ext.resize(2 * n, n);
  pf.k_ext << ops.h_ext, ops.g_ext;
  return pf;
}

}  // namespace

double oracle_marginal_gaussian(const ThetaParams& theta, const Campaign& campaign,
                                const likelihood::BoundaryPrior& bprior, const NoiseModel& noise,
                                const WallGeometry& geometry, const Grid& grid,
                                InitialConditionKind ic) {
  const auto pf = push_forward(theta, campaign, bprior, geometry, grid, ic);
  const Eigen::Index n = pf.k_int.cols();
  const double sp2 = bprior.sigma_temp_prior * bprior.sigma_temp_prior;
  Matrix cov = sp2 * (pf.k_int * pf.k_int.transpose() + pf.k_ext * pf.k_ext.transpose());
  cov.diagonal().head(n).array() += noise.sigma_flux_int * noise.sigma_flux_int;
  cov.diagonal().tail(n).array() += noise.sigma_flux_ext * noise.sigma_flux_ext;
  const Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("oracle covariance is not positive definite");
  const Vector z = llt.matrixL().solve(pf.q - pf.mean);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * static_cast<double>(2 * n) * std::log(2.0 * std::numbers::pi) - 0.5 * log_det -
         0.5 * z.squaredNorm();
}

MonteCarloEstimate oracle_marginal_mc(const ThetaParams& theta, const Campaign& campaign,
                                      const likelihood::BoundaryPrior& bprior,
                                      const NoiseModel& noise, const WallGeometry& geometry,
                                      const Grid& grid, InitialConditionKind ic,
                                      std::size_t n_draws, std::uint64_t seed) {
  if (n_draws == 0) throw InvalidInput("n_draws must be positive");
  const auto pf = push_forward(theta, campaign, bprior, geometry, grid, ic);
  const Eigen::Index n = pf.k_int.cols();
  const double si = noise.sigma_flux_int;
  const double se = noise.sigma_flux_ext;
  const double log_norm = -static_cast<double>(n) * std::log(2.0 * std::numbers::pi * si * se);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, bprior.sigma_temp_prior);
  std::vector<double> log_w(n_draws);
  Vector d_int(n), d_ext(n);
  for (std::size_t k = 0; k < n_draws; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) d_int(i) = z(rng);
    for (Eigen::Index i = 0; i < n; ++i) d_ext(i) = z(rng);
    const Vector resid = pf.q - pf.mean - pf.k_int * d_int - pf.k_ext * d_ext;
    log_w[k] = log_norm - 0.5 * resid.head(n).squaredNorm() / (si * si) -
               0.5 * resid.tail(n).squaredNorm() / (se * se);
  }
  const double shift = *std::max_element(log_w.begin(), log_w.end());
  double total = 0.0;
  for (double& w : log_w) {
    w = std::exp(w - shift);
    total += w;
  }
  MonteCarloEstimate est;
  const double m = static_cast<double>(n_draws);
  est.log_value = shift + std::log(total / m);
  if (n_draws == 1) {
    est.std_error = std::numeric_limits<double>::infinity();
    return est;
  }
  // Jackknife over leave-one-out means.
  double mean_loo = 0.0;
  std::vector<double> loo(n_draws);
  for (std::size_t k = 0; k < n_draws; ++k) {
    loo[k] = std::log((total - log_w[k]) / (m - 1.0));
    mean_loo += loo[k];
  }
  mean_loo /= m;
  double ss = 0.0;
  for (double v : loo) ss += (v - mean_loo) * (v - mean_loo);
  est.std_error = std::sqrt((m - 1.0) / m * ss);
  return est;
}

}  // namespace wallinfer::synthetic
