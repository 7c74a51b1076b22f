#include "wallinfer/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

namespace wallinfer::preprocess {

namespace {

// Cholesky factorisation of a symmetric positive-definite pentadiagonal
// matrix stored by diagonals; solves in place.
class PentadiagonalCholesky {
 public:
  PentadiagonalCholesky(std::vector<double> d0, std::vector<double> d1, std::vector<double> d2)
      : l0_(std::move(d0)), l1_(std::move(d1)), l2_(std::move(d2)) {
    const std::size_t n = l0_.size();
    for (std::size_t i = 0; i < n; ++i) {
      double diag = l0_[i];
      if (i >= 2) {
        l2_[i - 2] /= l0_[i - 2];
        diag -= l2_[i - 2] * l2_[i - 2];
      }
      if (i >= 1) {
        if (i >= 2) l1_[i - 1] -= l2_[i - 2] * l1_[i - 2];
        l1_[i - 1] /= l0_[i - 1];
        diag -= l1_[i - 1] * l1_[i - 1];
      }
      if (!(diag > 0.0)) throw NumericalError("smoothing-spline system is not positive definite");
      l0_[i] = std::sqrt(diag);
    }
  }

  // Here l1_[i] = L(i+1, i), l2_[i] = L(i+2, i), l0_[i] = L(i, i).
  void solve_in_place(std::vector<double>& x) const {
    const std::size_t n = l0_.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (i >= 1) x[i] -= l1_[i - 1] * x[i - 1];
      if (i >= 2) x[i] -= l2_[i - 2] * x[i - 2];
      x[i] /= l0_[i];
    }
    for (std::size_t i = n; i-- > 0;) {
      if (i + 1 < n) x[i] -= l1_[i] * x[i + 1];
      if (i + 2 < n) x[i] -= l2_[i] * x[i + 2];
      x[i] /= l0_[i];
    }
  }

 private:
  std::vector<double> l0_, l1_, l2_;
};

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

}  // namespace

std::vector<double> SmootherConfig::default_lambda_grid() {
  std::vector<double> grid(60);
  const double lo = -10.0;
  const double hi = 8.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid[i] = std::pow(10.0, lo + (hi - lo) * static_cast<double>(i) / (grid.size() - 1));
  }
  return grid;
}

TimeSeries moving_average(const TimeSeries& s, int lag) {
  if (lag < 1) throw InvalidInput("moving-average lag must be >= 1");
  if (static_cast<std::size_t>(lag) > s.size()) {
    throw InvalidInput("moving-average lag " + std::to_string(lag) + " exceeds series length " +
                       std::to_string(s.size()));
  }
  if (lag == 1) return s;
  const std::size_t blocks = s.size() / static_cast<std::size_t>(lag);
  TimeSeries out;
  out.dt_sample = s.dt_sample * lag;
  out.t0 = s.t0 + 0.5 * (lag - 1) * s.dt_sample;
  out.values.resize(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    double sum = 0.0;
    for (int k = 0; k < lag; ++k) sum += s.values[b * static_cast<std::size_t>(lag) + k];
    out.values[b] = sum / lag;
  }
  return out;
}

Campaign moving_average(const Campaign& c, int lag) {
  return Campaign{moving_average(c.temp_int, lag), moving_average(c.temp_ext, lag),
                  moving_average(c.flux_int, lag), moving_average(c.flux_ext, lag),
                  Stage::averaged};
}

std::vector<double> acf(std::span<const double> x, int max_lag) {
  if (max_lag < 1) throw InvalidInput("acf needs max_lag >= 1");
  if (x.size() <= static_cast<std::size_t>(max_lag)) {
    throw InvalidInput("acf needs more samples than lags");
  }
  const double m = mean_of(x);
  double denom = 0.0;
  for (double v : x) denom += (v - m) * (v - m);
  if (!(denom > 0.0)) throw InvalidInput("acf of a zero-variance sequence is undefined");
  std::vector<double> rho(static_cast<std::size_t>(max_lag));
  for (int k = 1; k <= max_lag; ++k) {
    double num = 0.0;
    for (std::size_t t = 0; t + static_cast<std::size_t>(k) < x.size(); ++t) {
      num += (x[t] - m) * (x[t + static_cast<std::size_t>(k)] - m);
    }
    rho[static_cast<std::size_t>(k - 1)] = num / denom;
  }
  return rho;
}

double acf_energy(std::span<const double> x, int h) {
  const double m = mean_of(x);
  double ss = 0.0;
  double scale = 0.0;
  for (double v : x) {
    ss += (v - m) * (v - m);
    scale = std::max(scale, std::abs(v));
  }
  const double rms = std::sqrt(ss / static_cast<double>(x.size()));
  if (rms <= 1e-12 * std::max(1.0, scale) || rms == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  const int lags = std::min<int>(h, static_cast<int>(x.size()) - 1);
  double energy = 0.0;
  for (double r : acf(x, lags)) energy += r * r;
  return energy;
}

SmoothingFit smoothing_spline(const TimeSeries& s, double lambda_smooth) {
  if (!(lambda_smooth >= 0.0) || !std::isfinite(lambda_smooth)) {
    throw InvalidInput("smoothing parameter must be a finite non-negative number");
  }
  const std::size_t n = s.size();
  if (n < 4) throw InvalidInput("smoothing spline needs at least 4 samples");
  const std::vector<double>& y = s.values;
  const double h = s.dt_sample;
  const std::size_t m = n - 2;
  const double alpha = static_cast<double>(n) * lambda_smooth;

  SmoothingFit fit;
  fit.lambda_smooth = lambda_smooth;
  fit.fitted = s;
  fit.residuals = s;
  if (alpha == 0.0) {
    std::fill(fit.residuals.values.begin(), fit.residuals.values.end(), 0.0);
    fit.objective = 0.0;
    return fit;
  }

  // Uniform knots: Q has columns (1/h, -2/h, 1/h); R is tridiagonal (2h/3, h/6).
  const double q0 = 1.0 / h;
  const double q1 = -2.0 / h;
  const double q2 = 1.0 / h;
  std::vector<double> d0(m), d1(m, 0.0), d2(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    d0[j] = 2.0 * h / 3.0 + alpha * (q0 * q0 + q1 * q1 + q2 * q2);
    if (j + 1 < m) d1[j] = h / 6.0 + alpha * (q1 * q0 + q2 * q1);
    if (j + 2 < m) d2[j] = alpha * (q2 * q0);
  }
  std::vector<double> gamma(m);
  for (std::size_t j = 0; j < m; ++j) gamma[j] = q0 * y[j] + q1 * y[j + 1] + q2 * y[j + 2];
  PentadiagonalCholesky(d0, d1, d2).solve_in_place(gamma);

  std::vector<double>& res = fit.residuals.values;
  std::fill(res.begin(), res.end(), 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    res[j] += alpha * q0 * gamma[j];
    res[j + 1] += alpha * q1 * gamma[j];
    res[j + 2] += alpha * q2 * gamma[j];
  }
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    fit.fitted.values[i] = y[i] - res[i];
    sse += res[i] * res[i];
  }
  // int g''^2 = gamma' R gamma
  double rough = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    rough += (2.0 * h / 3.0) * gamma[j] * gamma[j];
    if (j + 1 < m) rough += 2.0 * (h / 6.0) * gamma[j] * gamma[j + 1];
  }
  fit.objective = sse / static_cast<double>(n) + lambda_smooth * rough;
  return fit;
}

SmoothingFit select_smoothing(const TimeSeries& s, const std::vector<double>& lambda_grid, int h) {
  if (lambda_grid.empty()) throw InvalidInput("smoothing grid must not be empty");
  if (h < 1) throw InvalidInput("acf horizon must be >= 1");
  SmoothingFit best;
  double best_score = std::numeric_limits<double>::infinity();
  bool have = false;
  for (double lam : lambda_grid) {
    SmoothingFit fit = smoothing_spline(s, lam);
    const double score = acf_energy(fit.residuals.values, h);
    const bool better = !have || score < best_score ||
                        (score == best_score && lam > best.lambda_smooth);
    if (better) {
      best = std::move(fit);
      best_score = score;
      have = true;
    }
  }
  return best;
}

int select_lag(const Campaign& raw, const std::vector<int>& candidates, const SmootherConfig& cfg,
               std::vector<LagScore>* scores) {
  if (candidates.empty()) throw InvalidInput("lag candidates must not be empty");
  require_valid(raw);
  std::vector<int> sorted = candidates;
  std::sort(sorted.begin(), sorted.end());
  int best_lag = sorted.front();
  double best_score = std::numeric_limits<double>::infinity();
  bool have = false;
  for (int lag : sorted) {
    const Campaign avg = moving_average(raw, lag);
    double score = 0.0;
    for (const TimeSeries* series : {&avg.temp_int, &avg.temp_ext, &avg.flux_int, &avg.flux_ext}) {
      const SmoothingFit fit = select_smoothing(*series, cfg.lambda_grid, cfg.acf_horizon);
      score += acf_energy(fit.residuals.values, cfg.acf_horizon);
    }
    if (scores) scores->push_back({lag, score});
    if (!have || score < best_score) {
      best_lag = lag;
      best_score = score;
      have = true;
    }
  }
  return best_lag;
}

WhitenessReport ljung_box_from_acf(const std::vector<double>& rho, std::size_t n) {
  const int h = static_cast<int>(rho.size());
  if (h <= 0) throw InvalidInput("Ljung-Box test needs h >= 1");
  if (n <= static_cast<std::size_t>(h)) throw InvalidInput("Ljung-Box test needs n > h");
  const double nn = static_cast<double>(n);
  double q = 0.0;
  for (int k = 1; k <= h; ++k) q += rho[static_cast<std::size_t>(k - 1)] * rho[static_cast<std::size_t>(k - 1)] / (nn - k);
  q *= nn * (nn + 2.0);
  WhitenessReport out;
  out.acf = rho;
  out.q_statistic = q;
  out.lags_tested = h;
  out.p_value = q <= 0.0 ? 1.0 : boost::math::gamma_q(0.5 * h, 0.5 * q);
  return out;
}

WhitenessReport ljung_box(std::span<const double> residuals, int h) {
  if (h <= 0) throw InvalidInput("Ljung-Box test needs h >= 1");
  return ljung_box_from_acf(acf(residuals, h), residuals.size());
}

double estimate_noise_sd(std::span<const double> residuals) {
  if (residuals.empty()) throw InvalidInput("noise estimate needs at least one residual");
  double ss = 0.0;
  for (double r : residuals) ss += r * r;
  return std::sqrt(ss / static_cast<double>(residuals.size()));
}

PreparedData PreparedData::window(std::size_t begin, std::size_t end) const {
  PreparedData out = *this;
  out.averaged = averaged.slice(begin, end);
  out.mu_int = mu_int.slice(begin, end);
  out.mu_ext = mu_ext.slice(begin, end);
  return out;
}

PreparedData PreparedData::decimate(std::size_t factor) const {
  PreparedData out = *this;
  out.averaged = averaged.decimate(factor);
  out.mu_int = mu_int.decimate(factor);
  out.mu_ext = mu_ext.decimate(factor);
  return out;
}

PreparedData prepare(const Campaign& campaign, const PreprocessConfig& cfg,
                     const NoiseModel& noise) {
  require_valid(campaign);
  PreparedData out;
  int lag = cfg.lag;
  if (lag == 0) lag = select_lag(campaign, cfg.lag_candidates, cfg.smoother, &out.report.lag_scores);
  out.report.lag = lag;
  out.averaged = moving_average(campaign, lag);
  out.averaged.stage = Stage::averaged;

  const std::pair<const char*, const TimeSeries*> series[] = {
      {"temp_int", &out.averaged.temp_int},
      {"temp_ext", &out.averaged.temp_ext},
      {"flux_int", &out.averaged.flux_int},
      {"flux_ext", &out.averaged.flux_ext}};
  std::vector<SmoothingFit> fits;
  for (const auto& [name, s] : series) {
    fits.push_back(select_smoothing(*s, cfg.smoother.lambda_grid, cfg.smoother.acf_horizon));
    SeriesReport rep;
    rep.name = name;
    rep.lambda_smooth = fits.back().lambda_smooth;
    rep.sigma = estimate_noise_sd(fits.back().residuals.values);
    const int h = std::min<int>(cfg.ljung_box_lags, static_cast<int>(s->size()) - 1);
    if (acf_energy(fits.back().residuals.values, 1) < std::numeric_limits<double>::infinity()) {
      rep.whiteness = ljung_box(fits.back().residuals.values, h);
    }
    out.report.series.push_back(std::move(rep));
  }
  out.mu_int = fits[0].fitted;
  out.mu_ext = fits[1].fitted;
  out.noise = noise;
  if (cfg.estimate_flux_sigma) {
    out.noise.sigma_flux_int = out.report.series[2].sigma;
    out.noise.sigma_flux_ext = out.report.series[3].sigma;
  }
  out.noise.validate();
  return out;
}

}  // namespace wallinfer::preprocess
