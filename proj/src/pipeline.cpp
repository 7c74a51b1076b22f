#include "wallinfer/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "wallinfer/forward.hpp"

namespace wallinfer::pipeline {

likelihood::Posterior make_posterior(const preprocess::PreparedData& data, const ModelConfig& model) {
  likelihood::Posterior::Setup setup;
  setup.data = data.averaged;
  setup.prior = likelihood::BoundaryPrior{data.mu_int, data.mu_ext, data.noise.sigma_temp_prior};
  setup.noise = data.noise;
  setup.geometry = model.geometry;
  setup.grid = likelihood::observation_grid(data.averaged, model.m_cells, model.dt);
  setup.ic = model.ic;
  setup.box = model.box;
  setup.kind = model.likelihood;
  return likelihood::Posterior(std::move(setup));
}

inference::Objective objective(const likelihood::Posterior& posterior) {
  return [&posterior](const Vector& theta) { return posterior.log_posterior(theta); };
}

std::vector<Vector> starts_for(const PriorBox& box, const FitConfig& fit) {
  std::vector<Vector> starts;
  if (fit.n_starts > 0) starts = inference::latin_hypercube_starts(box, fit.n_starts, fit.seed);
  for (const auto& s : fit.extra_starts) {
    if (s.size() == box.dimension()) starts.push_back(s);
  }
  if (starts.empty()) throw InvalidInput("fit needs at least one start");
  return starts;
}

MapResult fit_map(const likelihood::Posterior& posterior, const FitConfig& fit) {
  const PriorBox& box = posterior.setup().box;
  MapResult out;
  out.search = inference::maximize(objective(posterior), box, starts_for(box, fit), fit.optimizer);
  out.theta = ThetaParams::from_vector(out.search.theta);
  out.log_posterior = out.search.value;
  out.log_likelihood = posterior.log_likelihood(out.theta);
  return out;
}

inference::GaussianApprox fit_laplace(const likelihood::Posterior& posterior, const FitConfig& fit) {
  const auto map = fit_map(posterior, fit);
  return inference::laplace_at(objective(posterior), posterior.setup().box, map.search.theta,
                               map.log_posterior, fit.hessian_step);
}

PredictionBands predict_fluxes(const preprocess::PreparedData& data, const ModelConfig& model,
                               const ThetaParams& theta, int n_draws, std::uint64_t seed,
                               double level) {
  if (n_draws < 2) throw InvalidInput("prediction needs at least two draws");
  if (!(level > 0.0 && level < 1.0)) throw InvalidInput("band level must lie in (0, 1)");
  theta.check_kind(model.ic);
  const Grid grid = likelihood::observation_grid(data.averaged, model.m_cells, model.dt);
  const auto ops = forward::build_flux_operators(theta, model.geometry, grid);
  const auto n = static_cast<Eigen::Index>(data.averaged.size());
  const Eigen::Map<const Vector> mu_i(data.mu_int.values.data(), n);
  const Eigen::Map<const Vector> mu_e(data.mu_ext.values.data(), n);
  const Vector t0 = forward::initial_profile(model.ic, mu_i(0), mu_e(0), theta, grid);
  const double sp = data.noise.sigma_temp_prior;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix draws_int(n, n_draws), draws_ext(n, n_draws);
  Vector ti(n), te(n);
  for (int k = 0; k < n_draws; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) ti(i) = mu_i(i) + sp * normal(rng);
    for (Eigen::Index i = 0; i < n; ++i) te(i) = mu_e(i) + sp * normal(rng);
    const auto flux = forward::apply_operators(ops, t0, ti, te);
    draws_int.col(k) = flux.f_int;
    draws_ext.col(k) = flux.f_ext;
  }

  const double tail = 0.5 * (1.0 - level);
  const auto quantile = [](std::vector<double>& v, double p) {
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  PredictionBands out;
  out.level = level;
  for (auto* v : {&out.median_int, &out.lower_int, &out.upper_int, &out.median_ext, &out.lower_ext,
                  &out.upper_ext}) {
    v->resize(n);
  }
  std::vector<double> row(static_cast<std::size_t>(n_draws));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (const auto& [src, med, lo, hi] :
         {std::tuple{&draws_int, &out.median_int, &out.lower_int, &out.upper_int},
          std::tuple{&draws_ext, &out.median_ext, &out.lower_ext, &out.upper_ext}}) {
      for (int k = 0; k < n_draws; ++k) row[static_cast<std::size_t>(k)] = (*src)(i, k);
      std::sort(row.begin(), row.end());
      (*med)(i) = quantile(row, 0.5);
      (*lo)(i) = quantile(row, tail);
      (*hi)(i) = quantile(row, 1.0 - tail);
    }
  }
  return out;
}

}  // namespace wallinfer::pipeline
