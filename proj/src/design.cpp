#include "wallinfer/design.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Cholesky>

namespace wallinfer::design {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

double normal_pdf(double x) {
  if (std::isinf(x)) return 0.0;
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

// P(alpha < Z < beta) for standard normal Z, accurate in either tail.
double normal_mass(double alpha, double beta) {
  if (alpha > 0.0) return 0.5 * (std::erfc(alpha / kSqrt2) - std::erfc(beta / kSqrt2));
  if (beta < 0.0) return 0.5 * (std::erfc(-beta / kSqrt2) - std::erfc(-alpha / kSqrt2));
  return 1.0 - 0.5 * std::erfc(-alpha / kSqrt2) - 0.5 * std::erfc(beta / kSqrt2);
}

Eigen::LLT<Matrix> factor_covariance(const inference::GaussianApprox& approx, const PriorBox& box) {
  const auto d = static_cast<Eigen::Index>(box.dimension());
  if (approx.map.size() != d || approx.covariance.rows() != d || approx.covariance.cols() != d) {
    throw InvalidInput("Laplace approximation does not match the prior box dimension");
  }
  Eigen::LLT<Matrix> llt(approx.covariance);
  if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().array() > 0.0).all()) {
    throw NumericalError("Laplace covariance is not positive definite");
  }
  return llt;
}

}  // namespace

void DesignSetup::validate(std::size_t length) const {
  if (!(start < end) || end > length) {
    throw InvalidInput("window [" + std::to_string(start) + ", " + std::to_string(end) +
                       ") is not inside a series of length " + std::to_string(length));
  }
}

InformationGain information_gain(const inference::GaussianApprox& approx, const PriorBox& box) {
  const auto llt = factor_covariance(approx, box);
  const double d = static_cast<double>(box.dimension());
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  InformationGain out;
  out.gaussian = std::log(box.volume()) -
                 0.5 * (d * std::log(2.0 * std::numbers::pi * std::numbers::e) + log_det);

  const auto intervals = box.intervals();
  for (std::size_t k = 0; k < intervals.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double sd = std::sqrt(approx.covariance(i, i));
    const double alpha = (intervals[k].lower - approx.map(i)) / sd;
    const double beta = (intervals[k].upper - approx.map(i)) / sd;
    const double mass = normal_mass(alpha, beta);
    if (!(mass > 0.0)) throw NumericalError("Laplace posterior has no mass inside the prior box");
    // Entropy of the truncated normal minus that of the full one.
    out.c_trunc += std::log(mass) + (alpha * normal_pdf(alpha) - beta * normal_pdf(beta)) / (2.0 * mass);
  }
  out.d_kl = std::max(0.0, out.gaussian - out.c_trunc);
  return out;
}

GainEstimate information_gain_mc(const inference::GaussianApprox& approx, const PriorBox& box,
                                 std::size_t n_draws, std::uint64_t seed) {
  if (n_draws < 2) throw InvalidInput("Monte-Carlo gain needs at least two draws");
  const auto llt = factor_covariance(approx, box);
  const auto d = static_cast<Eigen::Index>(box.dimension());
  const Matrix l = llt.matrixL();
  const double log_norm = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi) -
                          l.diagonal().array().log().sum();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(d);
  double sum = 0.0, sum_sq = 0.0;
  std::size_t inside = 0;
  for (std::size_t k = 0; k < n_draws; ++k) {
    for (Eigen::Index j = 0; j < d; ++j) z(j) = normal(rng);
    const Vector theta = approx.map + l * z;
    if (!box.contains(ThetaParams::from_vector(theta))) continue;
    const double log_density = log_norm - 0.5 * z.squaredNorm();
    sum += log_density;
    sum_sq += log_density * log_density;
    ++inside;
  }
  if (inside < 2) throw NumericalError("too few Monte-Carlo draws fell inside the prior box");
  const double n_in = static_cast<double>(inside);
  const double p = n_in / static_cast<double>(n_draws);
  const double mean = sum / n_in;
  const double var = std::max(0.0, sum_sq / n_in - mean * mean);

  GainEstimate out;
  out.inside_fraction = p;
  out.d_kl = mean - std::log(p) + std::log(box.volume());
  out.std_error = std::sqrt(var / n_in + (1.0 - p) / (static_cast<double>(n_draws) * p));
  return out;
}

GainResult window_gain(const preprocess::PreparedData& data, const DesignSetup& setup,
                       const pipeline::ModelConfig& model, const pipeline::FitConfig& fit) {
  setup.validate(data.averaged.size());
  GainResult out;
  out.setup = setup;
  try {
    const auto posterior = pipeline::make_posterior(data.window(setup.start, setup.end), model);
    const auto approx = pipeline::fit_laplace(posterior, fit);
    out.gain = information_gain(approx, posterior.setup().box);
    out.laplace = approx;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

std::vector<GainResult> gain_vs_duration(const preprocess::PreparedData& data,
                                         const std::vector<std::size_t>& checkpoints,
                                         const pipeline::ModelConfig& model,
                                         const pipeline::FitConfig& fit, std::size_t min_window) {
  const std::size_t length = data.averaged.size();
  for (std::size_t k = 0; k < checkpoints.size(); ++k) {
    if (checkpoints[k] < min_window || checkpoints[k] > length ||
        (k > 0 && checkpoints[k] <= checkpoints[k - 1])) {
      throw InvalidInput("checkpoints must increase and lie in [" + std::to_string(min_window) +
                         ", " + std::to_string(length) + "]");
    }
  }
  std::vector<GainResult> out;
  pipeline::FitConfig local = fit;
  for (std::size_t cp : checkpoints) {
    auto result = window_gain(data, DesignSetup{0, cp, "first " + std::to_string(cp)}, model, local);
    if (result.laplace) {
      local.extra_starts = fit.extra_starts;
      local.extra_starts.push_back(result.laplace->map);
    }
    out.push_back(std::move(result));
  }
  return out;
}

std::vector<DesignSetup> detect_cycles(const TimeSeries& temp_ext_smoothed, const CycleConfig& cfg) {
  temp_ext_smoothed.validate("temp_ext");
  if (!(cfg.min_separation_min >= 0.0) || !(cfg.min_prominence >= 0.0)) {
    throw InvalidInput("cycle separation and prominence must be non-negative");
  }
  const auto& x = temp_ext_smoothed.values;
  const std::size_t n = x.size();

  // Interior local minima; a flat bottom counts once, at its middle.
  std::vector<std::size_t> minima;
  for (std::size_t i = 1; i + 1 < n;) {
    if (!(x[i] < x[i - 1])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && x[j + 1] == x[i]) ++j;
    if (j + 1 < n && x[j + 1] > x[i]) minima.push_back((i + j) / 2);
    i = j + 1;
  }

  struct Candidate {
    std::size_t index;
    double value;
  };
  std::vector<Candidate> qualified;
  for (std::size_t m : minima) {
    double left = x[m], right = x[m];
    for (std::size_t k = m; k-- > 0 && x[k] >= x[m];) left = std::max(left, x[k]);
    for (std::size_t k = m + 1; k < n && x[k] >= x[m]; ++k) right = std::max(right, x[k]);
    if (std::min(left, right) - x[m] >= cfg.min_prominence) qualified.push_back({m, x[m]});
  }

  // Deepest minima claim their neighbourhood first.
  std::stable_sort(qualified.begin(), qualified.end(),
                   [](const Candidate& a, const Candidate& b) { return a.value < b.value; });
  const double dt = temp_ext_smoothed.dt_sample;
  std::vector<std::size_t> kept;
  for (const auto& c : qualified) {
    const bool clear = std::all_of(kept.begin(), kept.end(), [&](std::size_t k) {
      const double gap = std::abs(static_cast<double>(k) - static_cast<double>(c.index)) * dt;
      return gap >= cfg.min_separation_min;
    });
    if (clear) kept.push_back(c.index);
  }
  std::sort(kept.begin(), kept.end());

  if (kept.empty()) return {DesignSetup{0, n, "whole"}};
  std::vector<DesignSetup> out;
  if (kept.front() > 0) out.push_back({0, kept.front(), "lead"});
  for (std::size_t k = 0; k + 1 < kept.size(); ++k) {
    out.push_back({kept[k], kept[k + 1], "cycle " + std::to_string(k + 1)});
  }
  out.push_back({kept.back(), n, "trail"});
  return out;
}

std::vector<GainResult> rank_cycles(const preprocess::PreparedData& data,
                                    const std::vector<DesignSetup>& cycles,
                                    const pipeline::ModelConfig& model,
                                    const pipeline::FitConfig& fit) {
  std::vector<GainResult> out;
  out.reserve(cycles.size());
  for (const auto& c : cycles) out.push_back(window_gain(data, c, model, fit));
  std::stable_sort(out.begin(), out.end(), [](const GainResult& a, const GainResult& b) {
    if (a.ok() != b.ok()) return a.ok();
    if (a.d_kl() != b.d_kl()) return a.d_kl() > b.d_kl();
    return a.setup.size() < b.setup.size();
  });
  return out;
}

}  // namespace wallinfer::design
