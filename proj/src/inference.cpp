#include "wallinfer/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Cholesky>
#include <boost/math/distributions/normal.hpp>
#include "json.hpp"

#include "wallinfer/io.hpp"

namespace wallinfer::inference {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_eval(const Objective& f, const Vector& theta) {
  try {
    const double v = f(theta);
    return std::isnan(v) ? -kInf : v;
  } catch (const NumericalError&) {
    return -kInf;
  }
}

bool inside_unit(const Vector& u) { return (u.array() >= 0.0).all() && (u.array() <= 1.0).all(); }

bool lexicographically_less(const Vector& a, const Vector& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

// Minimisation of -objective over the unit box from a single start.
class UnitProblem {
 public:
  UnitProblem(const Objective& f, const PriorBox& box) : f_(f), box_(box) {}

  double value(const Vector& u) const {
    if (!inside_unit(u)) return kInf;
    return -safe_eval(f_, box_.from_unit(u));
  }

  Vector gradient(const Vector& u, double fu, double h) const {
    Vector g(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      Vector up = u;
      Vector dn = u;
      if (u(i) + h > 1.0) {
        dn(i) -= h;
        g(i) = (fu - value(dn)) / h;
      } else if (u(i) - h < 0.0) {
        up(i) += h;
        g(i) = (value(up) - fu) / h;
      } else {
        up(i) += h;
        dn(i) -= h;
        g(i) = (value(up) - value(dn)) / (2.0 * h);
      }
    }
    return g;
  }

 private:
  const Objective& f_;
  const PriorBox& box_;
};

StartReport run_bfgs(const UnitProblem& problem, const PriorBox& box, const Vector& start,
                     const OptimizerConfig& cfg) {
  StartReport rep;
  rep.start = start;
  rep.end = start;
  const Eigen::Index d = start.size();
  Vector u = box.to_unit(start);
  double fu = problem.value(u);
  if (!std::isfinite(fu)) {
    rep.value = -kInf;
    rep.message = "objective is not finite at the start";
    return rep;
  }
  Vector g = problem.gradient(u, fu, cfg.gradient_step);
  Matrix hinv = Matrix::Identity(d, d);
  bool scaled = false;

  for (rep.iterations = 0; rep.iterations < cfg.max_iterations; ++rep.iterations) {
    if (!g.allFinite()) {
      rep.message = "non-finite gradient";
      break;
    }
    if (g.cwiseAbs().maxCoeff() < cfg.gradient_tolerance) {
      rep.converged = true;
      rep.message = "gradient tolerance reached";
      break;
    }
    Vector p = -hinv * g;
    if (p.dot(g) >= 0.0) {
      hinv.setIdentity();
      p = -g;
    }
    double alpha = std::min(1.0, 0.25 / p.cwiseAbs().maxCoeff());
    const double slope = p.dot(g);
    Vector trial;
    double f_trial = kInf;
    bool found = false;
    for (int k = 0; k < 60; ++k) {
      trial = u + alpha * p;
      f_trial = problem.value(trial);
      if (f_trial <= fu + 1e-4 * alpha * slope) {
        found = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!found) {
      if (!hinv.isIdentity()) {
        hinv.setIdentity();
        continue;
      }
      rep.message = "line search made no progress";
      rep.converged = g.cwiseAbs().maxCoeff() < 1e3 * cfg.gradient_tolerance;
      break;
    }
    const Vector s = trial - u;
    const Vector g_new = problem.gradient(trial, f_trial, cfg.gradient_step);
    const Vector y = g_new - g;
    const double sy = s.dot(y);
    const double change = fu - f_trial;
    u = trial;
    g = g_new;
    const double f_old = fu;
    fu = f_trial;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        hinv = Matrix::Identity(d, d) * (sy / y.squaredNorm());
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Matrix v = Matrix::Identity(d, d) - rho * y * s.transpose();
      hinv = v.transpose() * hinv * v + rho * s * s.transpose();
    }
    if (change <= cfg.value_tolerance * (1.0 + std::abs(f_old)) &&
        s.cwiseAbs().maxCoeff() < 1e-9) {
      rep.converged = true;
      rep.message = "no further progress";
      ++rep.iterations;
      break;
    }
  }
  if (rep.message.empty()) rep.message = "iteration limit reached";
  rep.end = box.from_unit(u);
  rep.value = -fu;
  return rep;
}

Matrix unit_hessian(const Objective& objective, const Vector& theta_hat, const PriorBox& box,
                    double h) {
  const Vector u = box.to_unit(theta_hat);
  const Eigen::Index d = u.size();
  for (Eigen::Index i = 0; i < d; ++i) {
    if (u(i) - 2.0 * h < 0.0 || u(i) + 2.0 * h > 1.0) {
      throw InvalidInput("point " + ThetaParams::from_vector(theta_hat).describe() +
                         " is too close to the prior box boundary for a finite-difference "
                         "Hessian; widen the box or check that the MAP is interior");
    }
  }
  const auto f = [&](const Vector& v) {
    const double r = safe_eval(objective, box.from_unit(v));
    if (!std::isfinite(r)) {
      throw NumericalError("objective is not finite next to " +
                           ThetaParams::from_vector(theta_hat).describe());
    }
    return r;
  };
  const double f0 = f(u);
  Matrix hess(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    Vector up = u, dn = u;
    up(i) += h;
    dn(i) -= h;
    hess(i, i) = (f(up) - 2.0 * f0 + f(dn)) / (h * h);
    for (Eigen::Index j = 0; j < i; ++j) {
      Vector pp = u, pm = u, mp = u, mm = u;
      pp(i) += h; pp(j) += h;
      pm(i) += h; pm(j) -= h;
      mp(i) -= h; mp(j) += h;
      mm(i) -= h; mm(j) -= h;
      hess(i, j) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
      hess(j, i) = hess(i, j);
    }
  }
  return hess;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

MaximizeResult maximize(const Objective& objective, const PriorBox& box,
                        const std::vector<Vector>& starts, const OptimizerConfig& cfg) {
  if (starts.empty()) throw InvalidInput("maximize needs at least one start");
  box.validate();
  const UnitProblem problem(objective, box);
  MaximizeResult result;
  result.value = -kInf;
  for (const Vector& start : starts) {
    if (start.size() != box.dimension()) {
      throw InvalidInput("start dimension does not match the prior box");
    }
    StartReport rep;
    if (!box.contains(ThetaParams::from_vector(start))) {
      rep.start = start;
      rep.end = start;
      rep.value = -kInf;
      rep.message = "start lies outside the prior box";
    } else {
      rep = run_bfgs(problem, box, start, cfg);
    }
    if (std::isfinite(rep.value) &&
        (rep.value > result.value ||
         (rep.value == result.value && lexicographically_less(rep.end, result.theta)))) {
      result.value = rep.value;
      result.theta = rep.end;
    }
    result.starts.push_back(std::move(rep));
  }
  if (!std::isfinite(result.value)) {
    std::ostringstream msg;
    msg << "all " << starts.size() << " optimisation starts failed:";
    for (const auto& rep : result.starts) {
      msg << "\n  from " << ThetaParams::from_vector(rep.start).describe() << ": " << rep.message;
    }
    throw NumericalError(msg.str());
  }
  return result;
}

std::vector<Vector> latin_hypercube_starts(const PriorBox& box, int count, std::uint64_t seed) {
  if (count < 1) throw InvalidInput("need at least one start");
  box.validate();
  const int d = box.dimension();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(0.1, 0.9);
  std::vector<std::vector<int>> strata(static_cast<std::size_t>(d));
  for (auto& perm : strata) {
    perm.resize(static_cast<std::size_t>(count));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
  }
  std::vector<Vector> starts;
  for (int k = 0; k < count; ++k) {
    Vector u(d);
    for (int i = 0; i < d; ++i) {
      u(i) = (strata[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] + jitter(rng)) / count;
    }
    starts.push_back(box.from_unit(u));
  }
  return starts;
}

Matrix hessian_fd(const Objective& objective, const Vector& theta_hat, const PriorBox& box,
                  double rel_step) {
  const Matrix hu = unit_hessian(objective, theta_hat, box, rel_step);
  const Vector inv_w = box.width().cwiseInverse();
  return inv_w.asDiagonal() * hu * inv_w.asDiagonal();
}

GaussianApprox laplace_at(const Objective& log_post, const PriorBox& box, const Vector& map,
                          double value, double hessian_step) {
  const Matrix hu = unit_hessian(log_post, map, box, hessian_step);
  const Eigen::LLT<Matrix> llt(-hu);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("MAP is not a proper interior maximum at " +
                         ThetaParams::from_vector(map).describe());
  }
  const Vector w = box.width();
  const Matrix cov_u = llt.solve(Matrix::Identity(hu.rows(), hu.cols()));
  GaussianApprox approx;
  approx.map = map;
  approx.covariance = w.asDiagonal() * cov_u * w.asDiagonal();
  approx.covariance = 0.5 * (approx.covariance + approx.covariance.transpose()).eval();
  approx.log_posterior_at_map = value;
  return approx;
}

GaussianApprox laplace(const Objective& log_post, const PriorBox& box,
                       const std::vector<Vector>& starts, const LaplaceConfig& cfg) {
  const auto best = maximize(log_post, box, starts, cfg.optimizer);
  return laplace_at(log_post, box, best.theta, best.value, cfg.hessian_step);
}

McmcChain rw_metropolis(const Objective& log_post, const PriorBox& box, const Vector& theta0,
                        const McmcConfig& cfg) {
  box.validate();
  if (cfg.n_iter < 1 || cfg.burn_in < 0 || cfg.thin < 1) {
    throw InvalidInput("MCMC needs n_iter >= 1, burn_in >= 0 and thin >= 1");
  }
  if (theta0.size() != box.dimension()) throw InvalidInput("theta0 dimension does not match the box");
  if (!box.contains(ThetaParams::from_vector(theta0))) {
    throw InvalidInput("MCMC start lies outside the prior box");
  }
  Vector sd = cfg.proposal_sd.size() == 0 ? Vector(0.02 * box.width()) : cfg.proposal_sd;
  if (sd.size() != theta0.size() || !(sd.array() > 0.0).all()) {
    throw InvalidInput("proposal scales must be positive, one per parameter");
  }
  double current_lp = safe_eval(log_post, theta0);
  if (!std::isfinite(current_lp)) throw InvalidInput("log posterior is not finite at the MCMC start");

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector current = theta0;

  const auto propose_and_accept = [&]() {
    Vector proposal = current;
    for (Eigen::Index i = 0; i < proposal.size(); ++i) proposal(i) += sd(i) * z(rng);
    const double b = box.contains(ThetaParams::from_vector(proposal)) ? safe_eval(log_post, proposal)
                                                                      : -kInf;
    const double u = unif(rng);
    if (std::isfinite(b) && std::log(u) < b - current_lp) {
      current = proposal;
      current_lp = b;
      return true;
    }
    return false;
  };

  if (cfg.adapt) {
    constexpr int batch = 50;
    for (int done = 0; done < cfg.adapt_iterations; done += batch) {
      int acc = 0;
      for (int k = 0; k < batch; ++k) acc += propose_and_accept() ? 1 : 0;
      const double rate = static_cast<double>(acc) / batch;
      if (rate < 0.2) sd *= 0.7;
      else if (rate > 0.4) sd *= 1.3;
    }
  }

  McmcChain chain;
  chain.config = cfg;
  chain.config.proposal_sd = sd;
  const long check_at = std::min<long>(1000, cfg.n_iter);
  for (long it = 1; it <= cfg.n_iter; ++it) {
    ++chain.proposed;
    if (propose_and_accept()) ++chain.accepted;
    if (it == check_at && chain.accepted == 0) {
      throw NumericalError("no proposal accepted in the first " + std::to_string(check_at) +
                           " iterations; reduce the proposal scales");
    }
    if (it > cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) {
      chain.samples.push_back(current);
      chain.log_post.push_back(current_lp);
      chain.iteration.push_back(it);
    }
  }
  chain.acceptance_rate = static_cast<double>(chain.accepted) / static_cast<double>(chain.proposed);
  return chain;
}

double aic(double max_log_lik, int n_params) { return 2.0 * n_params - 2.0 * max_log_lik; }

std::vector<std::string> parameter_names(int dimension) {
  std::vector<std::string> names{"R", "rhoC", "tau0", "tau1"};
  if (dimension < 1 || dimension > 4) throw InvalidInput("parameter dimension must be 1..4");
  names.resize(static_cast<std::size_t>(dimension));
  return names;
}

std::vector<MarginalSummary> summarize_marginals(const McmcChain& chain, int bins) {
  if (chain.samples.empty()) throw InvalidInput("cannot summarise an empty chain");
  if (bins < 1) throw InvalidInput("need at least one histogram bin");
  const auto d = static_cast<int>(chain.samples.front().size());
  const auto names = parameter_names(d);
  std::vector<MarginalSummary> out;
  for (int i = 0; i < d; ++i) {
    std::vector<double> v;
    v.reserve(chain.samples.size());
    for (const auto& s : chain.samples) v.push_back(s(i));
    MarginalSummary m;
    m.name = names[static_cast<std::size_t>(i)];
    const double n = static_cast<double>(v.size());
    m.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    std::sort(v.begin(), v.end());
    m.p025 = quantile_sorted(v, 0.025);
    m.p50 = quantile_sorted(v, 0.5);
    m.p975 = quantile_sorted(v, 0.975);
    double lo = v.front();
    double hi = v.back();
    if (hi == lo) {
      const double pad = 0.5 * std::max(std::abs(lo) * 1e-6, 1e-12);
      lo -= pad;
      hi += pad;
    }
    const double width = (hi - lo) / bins;
    m.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int b = 0; b <= bins; ++b) m.bin_edges[static_cast<std::size_t>(b)] = lo + b * width;
    m.density.assign(static_cast<std::size_t>(bins), 0.0);
    for (double x : v) {
      const int b = std::min(bins - 1, static_cast<int>((x - lo) / width));
      m.density[static_cast<std::size_t>(b)] += 1.0 / (n * width);
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<MarginalSummary> summarize_marginals(const GaussianApprox& approx, int bins) {
  if (bins < 1) throw InvalidInput("need at least one histogram bin");
  const auto d = static_cast<int>(approx.map.size());
  const auto names = parameter_names(d);
  const Vector sd = approx.sd();
  std::vector<MarginalSummary> out;
  for (int i = 0; i < d; ++i) {
    MarginalSummary m;
    m.name = names[static_cast<std::size_t>(i)];
    m.mean = approx.map(i);
    m.sd = sd(i);
    const boost::math::normal_distribution<double> dist(m.mean, m.sd);
    m.p025 = boost::math::quantile(dist, 0.025);
    m.p50 = m.mean;
    m.p975 = boost::math::quantile(dist, 0.975);
    const double lo = m.mean - 4.0 * m.sd;
    const double width = 8.0 * m.sd / bins;
    for (int b = 0; b <= bins; ++b) m.bin_edges.push_back(lo + b * width);
    for (int b = 0; b < bins; ++b) m.density.push_back(boost::math::pdf(dist, lo + (b + 0.5) * width));
    out.push_back(std::move(m));
  }
  return out;
}

void write_chain_csv(const std::filesystem::path& path, const McmcChain& chain) {
  std::vector<std::string> header{"iter"};
  const int d = chain.samples.empty() ? 3 : static_cast<int>(chain.samples.front().size());
  for (const auto& name : parameter_names(d)) header.push_back(name);
  header.push_back("log_post");
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < chain.samples.size(); ++k) {
    std::vector<double> row{static_cast<double>(chain.iteration[k])};
    for (Eigen::Index i = 0; i < chain.samples[k].size(); ++i) row.push_back(chain.samples[k](i));
    row.push_back(chain.log_post[k]);
    rows.push_back(std::move(row));
  }
  io::write_table_csv(path, header, rows);
}

std::string laplace_json(const GaussianApprox& approx) {
  nlohmann::json j;
  j["map"] = std::vector<double>(approx.map.data(), approx.map.data() + approx.map.size());
  std::vector<double> cov;
  for (Eigen::Index r = 0; r < approx.covariance.rows(); ++r) {
    for (Eigen::Index c = 0; c < approx.covariance.cols(); ++c) cov.push_back(approx.covariance(r, c));
  }
  j["covariance"] = cov;
  j["log_posterior_at_map"] = approx.log_posterior_at_map;
  return j.dump(2);
}

}  // namespace wallinfer::inference
