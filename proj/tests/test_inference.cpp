#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "doctest.h"
#include "json.hpp"
#include "wallinfer/inference.hpp"

using namespace wallinfer;
using namespace wallinfer::inference;

namespace {

PriorBox wide_box(double lo, double hi) {
  PriorBox box;
  box.r_interval = {lo, hi};
  box.rho_c_interval = {lo, hi};
  box.tau0_interval = {lo, hi};
  return box;
}

// Log density of N(mean, cov) up to a constant.
Objective gaussian_log_density(const Vector& mean, const Matrix& cov) {
  const Matrix prec = cov.inverse();
  return [=](const Vector& x) { return -0.5 * (x - mean).dot(prec * (x - mean)); };
}

Vector vec3(double a, double b, double c) {
  Vector v(3);
  v << a, b, c;
  return v;
}

}  // namespace

TEST_CASE("maximize recovers the peak of a concave quadratic") {
  const PriorBox box;  // realistic scales: R ~ 0.1, rhoC ~ 1e5
  const Vector peak = vec3(0.29, 3.4e5, 12.0);
  Matrix cov(3, 3);
  cov << 1e-5, -0.5 * std::sqrt(1e-5 * 1e8), 0.0, -0.5 * std::sqrt(1e-5 * 1e8), 1e8, 0.0, 0.0, 0.0,
      0.5;
  const auto f = gaussian_log_density(peak, cov);
  const auto result = maximize(f, box, latin_hypercube_starts(box, 4, 3));
  const Vector u_err = box.to_unit(result.theta) - box.to_unit(peak);
  CHECK(u_err.cwiseAbs().maxCoeff() < 1e-6);
  CHECK(result.value == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(result.starts.size() == 4);
}

TEST_CASE("maximize reports failing starts") {
  const PriorBox box;
  const Objective nowhere = [](const Vector&) { return -std::numeric_limits<double>::infinity(); };
  CHECK_THROWS_AS(maximize(nowhere, box, latin_hypercube_starts(box, 2, 1)), NumericalError);
  CHECK_THROWS_AS(maximize(nowhere, box, {}), InvalidInput);
}

TEST_CASE("equivalent starts give the same answer in any order") {
  const PriorBox box = wide_box(0.5, 10.0);
  // Two equal peaks: ties resolve to the lexicographically smaller point.
  const Objective twin = [](const Vector& x) {
    const double a = -(x - vec3(3, 5, 5)).squaredNorm();
    const double b = -(x - vec3(7, 5, 5)).squaredNorm();
    return std::max(a, b);
  };
  const std::vector<Vector> starts{vec3(2, 4, 4), vec3(8, 6, 6)};
  const std::vector<Vector> reversed{starts[1], starts[0]};
  const auto r1 = maximize(twin, box, starts);
  const auto r2 = maximize(twin, box, reversed);
  CHECK(r1.theta(0) == doctest::Approx(3.0).epsilon(1e-6));
  CHECK((r1.theta - r2.theta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Latin hypercube starts") {
  const PriorBox box;
  const auto starts = latin_hypercube_starts(box, 8, 42);
  REQUIRE(starts.size() == 8);
  for (int i = 0; i < 3; ++i) {
    std::vector<int> strata(8, 0);
    for (const auto& s : starts) {
      const double u = box.to_unit(s)(i);
      CHECK(u > 0.0);
      CHECK(u < 1.0);
      ++strata[static_cast<std::size_t>(u * 8)];
    }
    for (int c : strata) CHECK(c == 1);
  }
  CHECK(latin_hypercube_starts(box, 8, 42)[3] == starts[3]);
}

TEST_CASE("finite-difference Hessian") {
  const PriorBox box;
  const Vector centre = vec3(0.3, 3e5, 15.0);
  Matrix a(3, 3);
  a << 2e4, 1.0, 3.0, 1.0, 1e-9, 1e-5, 3.0, 1e-5, 0.7;
  const Objective quad = [&](const Vector& x) {
    const Vector d = x - centre;
    return -0.5 * d.dot(a * d) + 4.0 * d(0);
  };
  const Matrix h = hessian_fd(quad, centre, box);
  CHECK(((h + a).array().abs() / a.array().abs()).maxCoeff() < 1e-6);
  CHECK((h - h.transpose()).cwiseAbs().maxCoeff() == 0.0);

  Matrix cov(3, 3);
  cov << 4e-5, -0.3, 1e-3, -0.3, 4e8, 5.0, 1e-3, 5.0, 0.4;
  const Matrix hg = hessian_fd(gaussian_log_density(centre, cov), centre, box);
  const Matrix prec = cov.inverse();
  CHECK(((-hg - prec).norm() / prec.norm()) < 1e-4);

  CHECK_THROWS_AS(hessian_fd(quad, vec3(0.17, 3e5, 15.0), box), InvalidInput);
}

TEST_CASE("Laplace approximation is exact on a Gaussian") {
  const PriorBox box;
  const Vector mean = vec3(0.31, 3.2e5, 16.0);
  Matrix cov(3, 3);
  cov << 1e-5, -0.02, 0.0, -0.02, 6e7, 100.0, 0.0, 100.0, 0.25;
  const auto approx = laplace(gaussian_log_density(mean, cov), box, latin_hypercube_starts(box, 3, 9));
  CHECK((box.to_unit(approx.map) - box.to_unit(mean)).cwiseAbs().maxCoeff() < 1e-6);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double scale = std::sqrt(cov(i, i) * cov(j, j));
      CHECK(std::abs(approx.covariance(i, j) - cov(i, j)) < 1e-6 * scale);
    }
  }
  CHECK(approx.map_point().r_value == doctest::Approx(0.31));

  const nlohmann::json j = nlohmann::json::parse(laplace_json(approx));
  CHECK(j["map"].size() == 3);
  CHECK(j["covariance"].size() == 9);
  CHECK(j["covariance"][1].get<double>() == doctest::Approx(approx.covariance(0, 1)));
}

TEST_CASE("Laplace rejects a saddle") {
  const PriorBox box = wide_box(0.5, 10.0);
  const Objective saddle = [](const Vector& x) {
    return -(x(0) - 5) * (x(0) - 5) + (x(1) - 5) * (x(1) - 5) - (x(2) - 5) * (x(2) - 5);
  };
  CHECK_THROWS_WITH_AS(laplace_at(saddle, box, vec3(5, 5, 5), 0.0),
                       doctest::Contains("not a proper interior maximum"), NumericalError);
}

TEST_CASE("random-walk Metropolis on a Gaussian target") {
  const PriorBox box = wide_box(1e-3, 60.0);
  const Vector centre = vec3(30, 30, 30);
  const auto target = gaussian_log_density(centre, Matrix::Identity(3, 3));
  McmcConfig cfg;
  cfg.proposal_sd = Vector::Constant(3, 1.4);
  cfg.seed = 5;
  const auto chain = rw_metropolis(target, box, centre, cfg);
  REQUIRE(chain.samples.size() == 5000);
  Vector mean = Vector::Zero(3);
  for (const auto& s : chain.samples) mean += s;
  mean /= 5000.0;
  Matrix cov = Matrix::Zero(3, 3);
  for (const auto& s : chain.samples) cov += (s - mean) * (s - mean).transpose();
  cov /= 4999.0;
  CHECK((mean - centre).cwiseAbs().maxCoeff() < 0.05);
  CHECK((cov - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 0.1);
  CHECK(chain.acceptance_rate == doctest::Approx(static_cast<double>(chain.accepted) / chain.proposed));
  CHECK(chain.iteration.front() == 1020);

  const auto again = rw_metropolis(target, box, centre, cfg);
  CHECK(again.samples == chain.samples);
}

TEST_CASE("tiny proposals are almost always accepted") {
  const PriorBox box = wide_box(1e-3, 60.0);
  const auto target = gaussian_log_density(vec3(30, 30, 30), Matrix::Identity(3, 3));
  McmcConfig cfg;
  cfg.n_iter = 5000;
  cfg.burn_in = 0;
  cfg.thin = 1;
  cfg.proposal_sd = 1e-12 * box.width();
  const auto chain = rw_metropolis(target, box, vec3(29, 31, 30), cfg);
  CHECK(chain.acceptance_rate > 0.99);
}

TEST_CASE("proposals that always leave the box stop the sampler") {
  const PriorBox box;
  const auto target = gaussian_log_density(vec3(0.3, 3e5, 15), Matrix::Identity(3, 3));
  McmcConfig cfg;
  cfg.n_iter = 5000;
  cfg.proposal_sd = 1e3 * box.width();
  CHECK_THROWS_WITH_AS(rw_metropolis(target, box, box.from_unit(Vector::Constant(3, 0.5)), cfg),
                       doctest::Contains("reduce the proposal scales"), NumericalError);
  cfg.proposal_sd = Vector();
  CHECK_THROWS_AS(rw_metropolis(target, box, vec3(1.0, 3e5, 15), cfg), InvalidInput);
}

TEST_CASE("pilot adaptation moves acceptance into range") {
  const PriorBox box = wide_box(1e-3, 60.0);
  const auto target = gaussian_log_density(vec3(30, 30, 30), Matrix::Identity(3, 3));
  McmcConfig cfg;
  cfg.n_iter = 20000;
  cfg.proposal_sd = Vector::Constant(3, 0.05);
  cfg.adapt = true;
  cfg.adapt_iterations = 2000;
  const auto chain = rw_metropolis(target, box, vec3(30, 30, 30), cfg);
  CHECK(chain.acceptance_rate > 0.15);
  CHECK(chain.acceptance_rate < 0.5);
  CHECK(chain.config.proposal_sd(0) > 0.05);
}

TEST_CASE("Metropolis chain has the right stationary distribution") {
  // One free coordinate; the other two are pinned by a very narrow target.
  const PriorBox box = wide_box(1.0, 9.0);
  const Objective target = [](const Vector& x) {
    return -0.5 * (x(0) - 5.0) * (x(0) - 5.0) - 1e6 * ((x(1) - 5) * (x(1) - 5) + (x(2) - 5) * (x(2) - 5));
  };
  McmcConfig cfg;
  cfg.n_iter = 201000;
  cfg.thin = 40;
  cfg.proposal_sd = vec3(2.4, 1e-9, 1e-9);
  cfg.seed = 21;
  const auto chain = rw_metropolis(target, box, vec3(5, 5, 5), cfg);
  // Bins on the standard normal truncated to [1, 9] (i.e. +-4 sd).
  const boost::math::normal_distribution<double> n01;
  const double z = boost::math::cdf(n01, 4.0) - boost::math::cdf(n01, -4.0);
  const std::vector<double> edges{1, 3, 3.8, 4.4, 5.0, 5.6, 6.2, 7, 9};
  std::vector<double> counts(edges.size() - 1, 0.0);
  for (const auto& s : chain.samples) {
    for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
      if (s(0) >= edges[b] && s(0) < edges[b + 1]) counts[b] += 1.0;
    }
  }
  double chi2 = 0.0;
  const double n = static_cast<double>(chain.samples.size());
  for (std::size_t b = 0; b < counts.size(); ++b) {
    const double p = (boost::math::cdf(n01, edges[b + 1] - 5) - boost::math::cdf(n01, edges[b] - 5)) / z;
    chi2 += (counts[b] - n * p) * (counts[b] - n * p) / (n * p);
  }
  const boost::math::chi_squared_distribution<double> dist(static_cast<double>(counts.size() - 1));
  CHECK(boost::math::cdf(boost::math::complement(dist, chi2)) > 0.01);
}

TEST_CASE("AIC") {
  CHECK(aic(0.0, 3) == 6.0);
  CHECK(aic(-100.0, 3) < aic(-100.0, 4));
}

TEST_CASE("marginal summaries") {
  GaussianApprox g;
  g.map = vec3(0.0, 1.0, 2.0);
  g.covariance = Matrix::Identity(3, 3);
  const auto s = summarize_marginals(g);
  REQUIRE(s.size() == 3);
  CHECK(s[0].name == "R");
  CHECK(s[0].p50 == 0.0);
  CHECK(s[0].p975 == doctest::Approx(1.959964).epsilon(1e-6));
  CHECK(s[2].p025 == doctest::Approx(2.0 - 1.959964).epsilon(1e-6));

  McmcChain chain;
  chain.samples.assign(10, vec3(1.0, 2.0, 3.0));
  chain.log_post.assign(10, -1.0);
  for (long i = 0; i < 10; ++i) chain.iteration.push_back(i + 1);
  const auto c = summarize_marginals(chain);
  CHECK(c[1].sd == 0.0);
  CHECK(c[1].p50 == 2.0);

  CHECK_THROWS_AS(summarize_marginals(McmcChain{}), InvalidInput);

  const auto path = std::filesystem::temp_directory_path() / "wallinfer_chain_test.csv";
  write_chain_csv(path, chain);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "iter,R,rhoC,tau0,log_post");
  std::filesystem::remove(path);
}
