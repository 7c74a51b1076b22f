#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "config.hpp"
#include "wallinfer/io.hpp"

namespace wallinfer::app {

namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string config_path;
  std::string input;
  std::string output_dir;
  std::string likelihood;
  std::string ic;
  std::vector<double> theta;
};

void write_json(const fs::path& path, const Json& doc) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f << doc.dump(2) << '\n';
}

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json matrix_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(vector_json(m.row(i).transpose()));
  return out;
}

Json noise_json(const NoiseModel& n) {
  return {{"sigma_flux_int", n.sigma_flux_int},
          {"sigma_flux_ext", n.sigma_flux_ext},
          {"sigma_temp_prior", n.sigma_temp_prior}};
}

Json report_json(const preprocess::NoiseReport& r) {
  Json scores = Json::array();
  for (const auto& s : r.lag_scores) scores.push_back({{"lag", s.lag}, {"score", s.score}});
  Json series = Json::array();
  for (const auto& s : r.series) {
    series.push_back({{"name", s.name},
                      {"lambda", s.lambda_smooth},
                      {"sigma", s.sigma},
                      {"ljung_box_q", s.whiteness.q_statistic},
                      {"ljung_box_p", s.whiteness.p_value},
                      {"ljung_box_lags", s.whiteness.lags_tested}});
  }
  return {{"lag", r.lag}, {"lag_scores", scores}, {"series", series}};
}

Json starts_json(const inference::MaximizeResult& search) {
  Json out = Json::array();
  for (const auto& s : search.starts) {
    out.push_back({{"start", vector_json(s.start)},
                   {"end", vector_json(s.end)},
                   {"value", s.value},
                   {"iterations", s.iterations},
                   {"converged", s.converged},
                   {"message", s.message}});
  }
  return out;
}

Json marginals_json(const std::vector<inference::MarginalSummary>& ms) {
  Json out = Json::array();
  for (const auto& m : ms) {
    out.push_back({{"name", m.name},
                   {"mean", m.mean},
                   {"sd", m.sd},
                   {"p025", m.p025},
                   {"p50", m.p50},
                   {"p975", m.p975}});
  }
  return out;
}

void write_marginals(const fs::path& dir, const std::vector<inference::MarginalSummary>& ms) {
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < ms.size(); ++k) {
    const auto& m = ms[k];
    for (std::size_t b = 0; b < m.density.size(); ++b) {
      rows.push_back({static_cast<double>(k), m.bin_edges[b], m.bin_edges[b + 1], m.density[b]});
    }
  }
  io::write_table_csv(dir / "marginal_densities.csv", {"parameter", "bin_lo", "bin_hi", "density"}, rows);
}

class Context {
 public:
  Context(RunConfig cfg, std::ostream& log) : cfg_(std::move(cfg)), log_(log) {}

  const RunConfig& cfg() const { return cfg_; }
  fs::path dir() const { return cfg_.output_dir; }
  std::ostream& log() { return log_; }

  Campaign raw() {
    if (cfg_.input.empty()) throw InvalidInput("no input CSV given (paths.input or --input)");
    if (!fs::exists(cfg_.input)) throw DataError("input file '" + cfg_.input + "' does not exist");
    return io::read_campaign_csv(fs::path(cfg_.input));
  }

  const preprocess::PreparedData& prepared() {
    if (!prepared_) {
      prepared_ = preprocess::prepare(raw(), cfg_.preprocess, cfg_.noise).decimate(cfg_.decimate);
      log_ << "prepared " << prepared_->averaged.size() << " observations (lag "
           << prepared_->report.lag << ", decimation " << cfg_.decimate << ")\n";
      if (prepared_->averaged.size() > 600) {
        log_ << "warning: likelihood cost grows with the cube of the series length; consider "
                "preprocessing.decimate\n";
      }
    }
    return *prepared_;
  }

  pipeline::MapResult fit(const pipeline::ModelConfig& model) {
    const auto posterior = pipeline::make_posterior(prepared(), model);
    return pipeline::fit_map(posterior, cfg_.fit);
  }

  Json data_json() {
    const auto& p = prepared();
    return {{"n_obs", p.averaged.size()},
            {"dt_sample_min", p.averaged.temp_int.dt_sample},
            {"lag", p.report.lag},
            {"noise", noise_json(p.noise)}};
  }

 private:
  RunConfig cfg_;
  std::ostream& log_;
  std::optional<preprocess::PreparedData> prepared_;
};

Json cmd_preprocess(Context& ctx) {
  const auto& p = ctx.prepared();
  io::write_campaign_csv(ctx.dir() / "averaged.csv", p.averaged);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < p.averaged.size(); ++i) {
    rows.push_back({p.averaged.temp_int.time(i), p.mu_int.values[i], p.mu_ext.values[i]});
  }
  io::write_table_csv(ctx.dir() / "smoothed.csv", {"t_min", "mu_int_C", "mu_ext_C"}, rows);
  Json report = report_json(p.report);
  write_json(ctx.dir() / "noise_report.json", report);
  return {{"data", ctx.data_json()}, {"noise_report", report}};
}

Json cmd_fit(Context& ctx) {
  const auto model = ctx.cfg().model();
  const auto map = ctx.fit(model);
  return {{"likelihood", likelihood::to_string(model.likelihood)},
          {"ic", to_string(model.ic)},
          {"theta", theta_json(map.theta)},
          {"log_posterior", map.log_posterior},
          {"log_likelihood", map.log_likelihood},
          {"data", ctx.data_json()},
          {"starts", starts_json(map.search)}};
}

Json laplace_summary(const inference::GaussianApprox& approx, const PriorBox& box) {
  const Vector sd = approx.sd();
  const Matrix corr = sd.cwiseInverse().asDiagonal() * approx.covariance * sd.cwiseInverse().asDiagonal();
  const auto gain = design::information_gain(approx, box);
  return {{"map", theta_json(approx.map_point())},
          {"sd", vector_json(sd)},
          {"correlation", matrix_json(corr)},
          {"log_posterior_at_map", approx.log_posterior_at_map},
          {"information_gain_nats", gain.d_kl},
          {"truncation_correction", gain.c_trunc}};
}

Json cmd_laplace(Context& ctx) {
  const auto model = ctx.cfg().model();
  const auto posterior = pipeline::make_posterior(ctx.prepared(), model);
  const auto approx = pipeline::fit_laplace(posterior, ctx.cfg().fit);
  {
    std::ofstream f(ctx.dir() / "laplace.json");
    f << inference::laplace_json(approx) << '\n';
  }
  const auto marginals = inference::summarize_marginals(approx);
  write_marginals(ctx.dir(), marginals);
  Json out = laplace_summary(approx, posterior.setup().box);
  out["marginals"] = marginals_json(marginals);
  out["data"] = ctx.data_json();
  return out;
}

Json cmd_mcmc(Context& ctx) {
  const auto model = ctx.cfg().model();
  const auto posterior = pipeline::make_posterior(ctx.prepared(), model);
  const auto objective = pipeline::objective(posterior);
  const PriorBox& box = posterior.setup().box;
  inference::McmcConfig mc = ctx.cfg().mcmc;
  Vector theta0;
  Json laplace;
  if (ctx.cfg().proposal_laplace_scale) {
    const auto approx = pipeline::fit_laplace(posterior, ctx.cfg().fit);
    theta0 = approx.map;
    if (mc.proposal_sd.size() == 0) mc.proposal_sd = *ctx.cfg().proposal_laplace_scale * approx.sd();
    laplace = laplace_summary(approx, box);
  } else {
    theta0 = pipeline::fit_map(posterior, ctx.cfg().fit).search.theta;
  }
  ctx.log() << "sampling " << mc.n_iter << " iterations from the MAP\n";
  const auto chain = inference::rw_metropolis(objective, box, theta0, mc);
  inference::write_chain_csv(ctx.dir() / "chain.csv", chain);
  const auto marginals = inference::summarize_marginals(chain);
  write_marginals(ctx.dir(), marginals);
  return {{"start", vector_json(theta0)},
          {"proposal_sd", vector_json(chain.config.proposal_sd)},
          {"acceptance_rate", chain.acceptance_rate},
          {"proposed", chain.proposed},
          {"accepted", chain.accepted},
          {"kept", chain.samples.size()},
          {"marginals", marginals_json(marginals)},
          {"laplace", laplace},
          {"data", ctx.data_json()}};
}

Json cmd_aic(Context& ctx) {
  Json table = Json::array();
  std::ofstream csv(ctx.dir() / "aic.csv");
  if (!csv) throw DataError("cannot write aic.csv");
  csv << "ic,n_params,max_log_likelihood,aic,R,rhoC,tau0\n";
  std::string best;
  double best_aic = std::numeric_limits<double>::infinity();
  const InitialConditionKind kinds[] = {InitialConditionKind::linear, InitialConditionKind::piecewise_linear,
                                        InitialConditionKind::quadratic, InitialConditionKind::cubic};
  for (auto kind : kinds) {
    auto model = ctx.cfg().model();
    model.ic = kind;
    pipeline::FitConfig fit = ctx.cfg().fit;
    fit.extra_starts.clear();
    const auto posterior = pipeline::make_posterior(ctx.prepared(), model);
    const auto map = pipeline::fit_map(posterior, fit);
    const int k = effective_parameter_count(kind);
    const double value = inference::aic(map.log_likelihood, k);
    table.push_back({{"ic", to_string(kind)},
                     {"n_params", k},
                     {"max_log_likelihood", map.log_likelihood},
                     {"aic", value},
                     {"theta", theta_json(map.theta)}});
    csv << to_string(kind) << ',' << k << ',' << io::format_double(map.log_likelihood) << ','
        << io::format_double(value) << ',' << io::format_double(map.theta.r_value) << ','
        << io::format_double(map.theta.rho_c) << ',' << io::format_double(map.theta.tau0) << '\n';
    if (value < best_aic) {
      best_aic = value;
      best = to_string(kind);
    }
  }
  return {{"models", table}, {"preferred", best}, {"data", ctx.data_json()}};
}

Json gains_json(const std::vector<design::GainResult>& results, const TimeSeries& axis,
                const fs::path& csv) {
  Json out = Json::array();
  std::ofstream f(csv);
  if (!f) throw DataError("cannot write '" + csv.string() + "'");
  f << "window_start_min,window_end_min,label,d_kl_nats,map_R,map_rhoC\n";
  for (const auto& r : results) {
    const double t_start = axis.time(r.setup.start);
    const double t_end = axis.time(r.setup.end - 1);
    Json row = {{"window_start_min", t_start},
                {"window_end_min", t_end},
                {"label", r.setup.label},
                {"ok", r.ok()}};
    f << io::format_double(t_start) << ',' << io::format_double(t_end) << ',' << r.setup.label << ',';
    if (r.ok()) {
      const auto theta = r.laplace->map_point();
      row["d_kl_nats"] = r.gain->d_kl;
      row["truncation_correction"] = r.gain->c_trunc;
      row["map"] = theta_json(theta);
      f << io::format_double(r.gain->d_kl) << ',' << io::format_double(theta.r_value) << ','
        << io::format_double(theta.rho_c) << '\n';
    } else {
      row["error"] = r.error;
      f << "nan,nan,nan\n";
    }
    out.push_back(row);
  }
  return out;
}

Json cmd_infogain(Context& ctx) {
  const auto& data = ctx.prepared();
  std::vector<std::size_t> checkpoints = ctx.cfg().checkpoints;
  const std::size_t n = data.averaged.size();
  if (checkpoints.empty()) {
    const std::size_t lo = std::min(ctx.cfg().min_window, n);
    for (int k = 1; k <= 10; ++k) {
      const std::size_t cp = lo + (n - lo) * static_cast<std::size_t>(k) / 10;
      if (checkpoints.empty() || cp > checkpoints.back()) checkpoints.push_back(cp);
    }
  }
  const auto results = design::gain_vs_duration(data, checkpoints, ctx.cfg().model(), ctx.cfg().fit,
                                                ctx.cfg().min_window);
  return {{"windows", gains_json(results, data.averaged.temp_int, ctx.dir() / "infogain.csv")},
          {"data", ctx.data_json()}};
}

Json cmd_cycles(Context& ctx) {
  const auto& data = ctx.prepared();
  const auto windows = design::detect_cycles(data.mu_ext, ctx.cfg().cycles);
  ctx.log() << "detected " << windows.size() << " windows\n";
  const auto ranked = design::rank_cycles(data, windows, ctx.cfg().model(), ctx.cfg().fit);
  return {{"ranked", gains_json(ranked, data.averaged.temp_int, ctx.dir() / "cycles.csv")},
          {"data", ctx.data_json()}};
}

Json quantiles_json(const robustness::Quantiles& q) {
  return {{"min", q.min}, {"q25", q.q25}, {"median", q.median}, {"q75", q.q75}, {"max", q.max}};
}

Json cmd_robustness(Context& ctx) {
  const Campaign raw = ctx.raw();
  const auto& cfg = ctx.cfg();
  robustness::StudyConfig study;
  study.preprocess = cfg.preprocess;
  study.noise = cfg.noise;
  study.decimate = cfg.decimate;
  study.model = cfg.model();
  study.fit = cfg.fit;
  study.max_failure_fraction = cfg.max_failure_fraction;

  // Reference MAP from the plain block averages of the same length.
  preprocess::PreprocessConfig full_cfg = cfg.preprocess;
  full_cfg.lag = cfg.subsample.ell;
  const auto full = preprocess::prepare(raw, full_cfg, cfg.noise).decimate(cfg.decimate);
  const auto full_map = pipeline::fit_map(pipeline::make_posterior(full, study.model), cfg.fit);
  study.fit.extra_starts.push_back(full_map.search.theta);

  const auto summary = robustness::run_study(raw, cfg.subsample, study);
  std::vector<std::vector<double>> rows;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : summary.repeats) {
    rows.push_back({static_cast<double>(r.repeat), r.ok ? 1.0 : 0.0, r.ok ? r.theta.r_value : nan,
                    r.ok ? r.theta.rho_c : nan, r.ok ? r.theta.tau0 : nan, r.ok ? r.log_posterior : nan});
  }
  io::write_table_csv(ctx.dir() / "robustness.csv", {"repeat", "ok", "R", "rhoC", "tau0", "log_post"}, rows);
  Json summary_json = {{"R", quantiles_json(summary.r_value)},
                       {"rhoC", quantiles_json(summary.rho_c)},
                       {"n_repeats", summary.repeats.size()},
                       {"n_failed", summary.n_failed},
                       {"full_data_map", theta_json(full_map.theta)},
                       {"full_map_inside",
                        summary.r_value.contains(full_map.theta.r_value) &&
                            summary.rho_c.contains(full_map.theta.rho_c)}};
  write_json(ctx.dir() / "variability.json", summary_json);
  return summary_json;
}

Json cmd_simulate(Context& ctx) {
  const auto& spec = ctx.cfg().simulation;
  const auto sim = synthetic::simulate_campaign(spec);
  io::write_campaign_csv(ctx.dir() / "raw.csv", sim.raw);
  io::write_campaign_csv(ctx.dir() / "truth.csv", sim.truth);
  const Json spec_json = to_json(ctx.cfg())["simulation"];
  write_json(ctx.dir() / "spec.json", spec_json);
  return {{"samples", sim.raw.size()},
          {"raw", (ctx.dir() / "raw.csv").string()},
          {"truth", (ctx.dir() / "truth.csv").string()},
          {"theta_true", theta_json(spec.theta_true)}};
}

Json cmd_predict(Context& ctx, const std::vector<double>& theta_arg) {
  const auto model = ctx.cfg().model();
  ThetaParams theta;
  if (!theta_arg.empty()) {
    theta = ThetaParams::from_vector(Eigen::Map<const Vector>(theta_arg.data(), static_cast<Eigen::Index>(theta_arg.size())));
  } else {
    theta = ctx.fit(model).theta;
  }
  const auto& p = ctx.prepared();
  const auto& pc = ctx.cfg().predict;
  const auto bands = pipeline::predict_fluxes(p, model, theta, pc.draws, pc.seed, pc.level);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < p.averaged.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    rows.push_back({p.averaged.temp_int.time(i), p.averaged.flux_int.values[i], bands.median_int(k),
                    bands.lower_int(k), bands.upper_int(k), p.averaged.flux_ext.values[i],
                    bands.median_ext(k), bands.lower_ext(k), bands.upper_ext(k)});
  }
  io::write_table_csv(ctx.dir() / "prediction.csv",
                      {"t_min", "flux_int_obs", "flux_int_median", "flux_int_lo", "flux_int_hi",
                       "flux_ext_obs", "flux_ext_median", "flux_ext_lo", "flux_ext_hi"},
                      rows);
  const double rms_int = (bands.median_int - Eigen::Map<const Vector>(p.averaged.flux_int.values.data(), bands.median_int.size())).norm() /
                         std::sqrt(static_cast<double>(p.averaged.size()));
  const double rms_ext = (bands.median_ext - Eigen::Map<const Vector>(p.averaged.flux_ext.values.data(), bands.median_ext.size())).norm() /
                         std::sqrt(static_cast<double>(p.averaged.size()));
  return {{"theta", theta_json(theta)},
          {"level", bands.level},
          {"rms_residual_int", rms_int},
          {"rms_residual_ext", rms_ext},
          {"data", ctx.data_json()}};
}

struct ErrorInfo {
  int code;
  std::string type;
};

ErrorInfo classify(const std::exception_ptr& ptr) {
  try {
    std::rethrow_exception(ptr);
  } catch (const InvalidInput&) {
    return {kConfigError, "config"};
  } catch (const DataError&) {
    return {kDataError, "data"};
  } catch (const NumericalError&) {
    return {kNumericalError, "numerical"};
  } catch (const CLI::ParseError&) {
    return {kConfigError, "usage"};
  } catch (...) {
    return {kInternal, "internal"};
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian estimation of wall thermal properties from heat-flux campaigns", "wallinfer"};
  app.require_subcommand(1);
  Overrides ov;

  using Handler = std::function<Json(Context&)>;
  std::map<std::string, Handler> handlers = {
      {"preprocess", cmd_preprocess},
      {"fit", cmd_fit},
      {"laplace", cmd_laplace},
      {"mcmc", cmd_mcmc},
      {"aic-compare", cmd_aic},
      {"infogain", cmd_infogain},
      {"cycles", cmd_cycles},
      {"robustness", cmd_robustness},
      {"simulate", cmd_simulate},
      {"predict", [&ov](Context& ctx) { return cmd_predict(ctx, ov.theta); }},
  };
  const std::map<std::string, std::string> help = {
      {"preprocess", "average, smooth and characterise the noise of a raw campaign"},
      {"fit", "maximum a posteriori estimate of the wall parameters"},
      {"laplace", "Gaussian approximation of the posterior at the MAP"},
      {"mcmc", "random-walk Metropolis sampling of the posterior"},
      {"aic-compare", "compare initial-condition models by AIC"},
      {"infogain", "information gain over growing campaign durations"},
      {"cycles", "detect external temperature cycles and rank them by information gain"},
      {"robustness", "subsampling study of the MAP variability"},
      {"simulate", "generate a synthetic campaign"},
      {"predict", "flux predictions with bands from the boundary prior"},
  };
  for (const auto& [name, text] : help) {
    auto* sub = app.add_subcommand(name, text);
    sub->add_option("-c,--config", ov.config_path, "JSON run configuration");
    sub->add_option("-o,--output-dir", ov.output_dir, "directory for results");
    if (name != "simulate") sub->add_option("-i,--input", ov.input, "campaign CSV");
    if (name == "fit" || name == "laplace" || name == "mcmc" || name == "predict" || name == "infogain" ||
        name == "cycles") {
      sub->add_option("--likelihood", ov.likelihood, "marginal or deterministic");
    }
    if (name != "simulate" && name != "aic-compare") {
      sub->add_option("--ic", ov.ic, "linear, piecewise_linear, quadratic or cubic");
    }
    if (name == "predict") sub->add_option("--theta", ov.theta, "R rhoC tau0 [tau1]; default: fit the MAP")->expected(3, 4);
  }

  std::string command = "wallinfer";
  fs::path out_dir;
  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return kOk;
    }
    command = app.get_subcommands().front()->get_name();

    RunConfig cfg = ov.config_path.empty() ? parse_config(Json::object()) : load_config(ov.config_path);
    if (!ov.input.empty()) cfg.input = ov.input;
    if (!ov.output_dir.empty()) cfg.output_dir = ov.output_dir;
    if (!ov.likelihood.empty()) cfg.likelihood = likelihood::likelihood_from_string(ov.likelihood);
    if (!ov.ic.empty()) cfg.ic = initial_condition_from_string(ov.ic);
    if (!ov.theta.empty() && static_cast<int>(ov.theta.size()) != parameter_dimension(cfg.ic)) {
      throw InvalidInput("--theta needs " + std::to_string(parameter_dimension(cfg.ic)) + " values for ic " +
                         to_string(cfg.ic));
    }
    out_dir = cfg.output_dir;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw DataError("cannot create output directory '" + out_dir.string() + "': " + ec.message());
    write_json(out_dir / "resolved_config.json", to_json(cfg));

    Context ctx(std::move(cfg), err);
    Json result = {{"status", "ok"}, {"command", command}};
    result["result"] = handlers.at(command)(ctx);
    write_json(out_dir / "result.json", result);
    out << result.dump(2) << '\n';
    return kOk;
  } catch (...) {
    const auto info = classify(std::current_exception());
    std::string message;
    try {
      throw;
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
      message = "unknown error";
    }
    const Json doc = {{"status", "error"},
                      {"command", command},
                      {"error", {{"type", info.type}, {"message", message}}},
                      {"exit_code", info.code}};
    err << doc.dump(2) << '\n';
    if (!out_dir.empty()) {
      std::error_code ec;
      if (fs::is_directory(out_dir, ec)) {
        std::ofstream f(out_dir / "error.json");
        if (f) f << doc.dump(2) << '\n';
      }
    }
    return info.code;
  }
}

}  // namespace wallinfer::app
