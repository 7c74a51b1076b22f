#include "wallinfer/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wallinfer::robustness {

void SubsampleConfig::validate() const {
  if (ell < 1) throw InvalidInput("subsample block length must be >= 1");
  if (b < 1 || b > ell) throw InvalidInput("draws per block must lie in [1, ell]");
  if (n_repeats < 1) throw InvalidInput("robustness study needs at least one repeat");
}

Campaign subsample_once(const Campaign& raw, const SubsampleConfig& cfg, std::mt19937_64& rng,
                        std::vector<std::vector<int>>* picks) {
  cfg.validate();
  require_valid(raw);
  const auto ell = static_cast<std::size_t>(cfg.ell);
  if (raw.size() < ell) throw InvalidInput("series shorter than one subsample block");
  const std::size_t blocks = raw.size() / ell;

  std::vector<int> positions(ell);
  std::iota(positions.begin(), positions.end(), 0);
  std::vector<int> drawn(static_cast<std::size_t>(cfg.b));
  if (picks) picks->assign(blocks, {});

  Campaign out = raw;
  out.stage = Stage::averaged;
  TimeSeries* target[] = {&out.temp_int, &out.temp_ext, &out.flux_int, &out.flux_ext};
  const TimeSeries* source[] = {&raw.temp_int, &raw.temp_ext, &raw.flux_int, &raw.flux_ext};
  for (std::size_t s = 0; s < 4; ++s) {
    target[s]->dt_sample = source[s]->dt_sample * cfg.ell;
    target[s]->t0 = source[s]->t0 + 0.5 * (cfg.ell - 1) * source[s]->dt_sample;
    target[s]->values.assign(blocks, 0.0);
  }
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    std::sample(positions.begin(), positions.end(), drawn.begin(), drawn.size(), rng);
    if (picks) (*picks)[blk] = drawn;
    for (std::size_t s = 0; s < 4; ++s) {
      double sum = 0.0;
      for (int p : drawn) sum += source[s]->values[blk * ell + static_cast<std::size_t>(p)];
      target[s]->values[blk] = sum / cfg.b;
    }
  }
  return out;
}

Quantiles summarize(const std::string& name, std::vector<double> values) {
  if (values.empty()) throw InvalidInput("cannot summarise an empty sample");
  std::sort(values.begin(), values.end());
  const auto q = [&](double p) {
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  return Quantiles{name, values.front(), q(0.25), q(0.5), q(0.75), values.back()};
}

VariabilitySummary run_study(const Campaign& raw, const SubsampleConfig& sub, const StudyConfig& cfg) {
  sub.validate();
  require_valid(raw);
  if (cfg.decimate < 1) throw InvalidInput("decimation factor must be >= 1");
  preprocess::PreprocessConfig prep_cfg = cfg.preprocess;
  prep_cfg.lag = 1;

  VariabilitySummary out;
  std::vector<double> r_values, rho_values;
  for (int k = 0; k < sub.n_repeats; ++k) {
    std::seed_seq seq{sub.seed, static_cast<std::uint64_t>(k)};
    std::mt19937_64 rng(seq);
    RepeatResult rep;
    rep.repeat = k;
    try {
      const Campaign averaged = subsample_once(raw, sub, rng);
      const auto prepared = preprocess::prepare(averaged, prep_cfg, cfg.noise).decimate(cfg.decimate);
      const auto posterior = pipeline::make_posterior(prepared, cfg.model);
      const auto map = pipeline::fit_map(posterior, cfg.fit);
      rep.ok = true;
      rep.theta = map.theta;
      rep.log_posterior = map.log_posterior;
      r_values.push_back(map.theta.r_value);
      rho_values.push_back(map.theta.rho_c);
    } catch (const InvalidInput&) {
      throw;
    } catch (const std::exception& e) {
      rep.error = e.what();
      ++out.n_failed;
    }
    out.repeats.push_back(std::move(rep));
  }

  if (out.n_failed > cfg.max_failure_fraction * sub.n_repeats || r_values.empty()) {
    std::string msg = std::to_string(out.n_failed) + " of " + std::to_string(sub.n_repeats) +
                      " subsample repeats failed";
    for (const auto& rep : out.repeats) {
      if (!rep.ok) {
        msg += "; first failure (repeat " + std::to_string(rep.repeat) + "): " + rep.error;
        break;
      }
    }
    throw NumericalError(msg);
  }
  out.r_value = summarize("R", r_values);
  out.rho_c = summarize("rhoC", rho_values);
  return out;
}

}  // namespace wallinfer::robustness
