#include "config.hpp"

#include <fstream>
#include <set>

namespace wallinfer::app {

namespace {

class Section {
 public:
  Section(const Json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw InvalidInput("config '" + path_ + "' must be an object");
  }
  Section(const Section&) = delete;

  /// Rejects keys that no read() asked for.
  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!used_.count(key)) throw InvalidInput("unknown config key '" + where(key) + "'");
    }
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return node_.contains(key) && !node_.at(key).is_null();
  }

  const Json& at(const std::string& key) {
    used_.insert(key);
    return node_.at(key);
  }

  std::string where(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void read(const std::string& key, double& out) {
    if (!has(key)) return;
    const Json& v = at(key);
    if (!v.is_number()) throw type_error(key, "a number");
    out = v.get<double>();
  }

  void read(const std::string& key, int& out) {
    if (!has(key)) return;
    const Json& v = at(key);
    if (!v.is_number_integer()) throw type_error(key, "an integer");
    out = v.get<int>();
  }

  void read(const std::string& key, long& out) {
    if (!has(key)) return;
    const Json& v = at(key);
    if (!v.is_number_integer()) throw type_error(key, "an integer");
    out = v.get<long>();
  }

  template <typename T>
    requires std::is_unsigned_v<T> && (!std::is_same_v<T, bool>)
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    const Json& v = at(key);
    if (!v.is_number_unsigned()) throw type_error(key, "a non-negative integer");
    out = v.get<T>();
  }

  void read(const std::string& key, bool& out) {
    if (!has(key)) return;
    const Json& v = at(key);
    if (!v.is_boolean()) throw type_error(key, "true or false");
    out = v.get<bool>();
  }

  void read(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const Json& v = at(key);
    if (!v.is_string()) throw type_error(key, "a string");
    out = v.get<std::string>();
  }

  template <typename T>
  void read(const std::string& key, std::vector<T>& out) {
    if (!has(key)) return;
    const Json& v = at(key);
    if (!v.is_array()) throw type_error(key, "an array");
    std::vector<T> values;
    for (const auto& item : v) {
      if constexpr (std::is_floating_point_v<T>) {
        if (!item.is_number()) throw type_error(key, "an array of numbers");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!item.is_number_unsigned()) throw type_error(key, "an array of non-negative integers");
      } else {
        if (!item.is_number_integer()) throw type_error(key, "an array of integers");
      }
      values.push_back(item.get<T>());
    }
    out = std::move(values);
  }

  void read(const std::string& key, std::optional<double>& out) {
    used_.insert(key);
    if (!node_.contains(key)) return;
    if (node_.at(key).is_null()) {
      out.reset();
      return;
    }
    double v = 0.0;
    read(key, v);
    out = v;
  }

  void read(const std::string& key, Interval& out) {
    if (!has(key)) return;
    std::vector<double> v;
    read(key, v);
    if (v.size() != 2) throw type_error(key, "a [lower, upper] pair");
    out = Interval{v[0], v[1]};
  }

  void read(const std::string& key, Vector& out) {
    used_.insert(key);
    if (!node_.contains(key)) return;
    if (node_.at(key).is_null()) {
      out = Vector();
      return;
    }
    std::vector<double> v;
    read(key, v);
    out = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  /// Sub-object, or an empty one when absent.
  const Json& object(const std::string& key) {
    static const Json empty = Json::object();
    if (!has(key)) return empty;
    return at(key);
  }

 private:
  InvalidInput type_error(const std::string& key, const std::string& expected) const {
    return InvalidInput("config '" + where(key) + "' must be " + expected);
  }

  const Json& node_;
  std::string path_;
  std::set<std::string> used_;
};

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json interval_json(const Interval& i) { return Json::array({i.lower, i.upper}); }

void parse_profile(const Json& node, const std::string& path, synthetic::BoundaryProfile& p) {
  Section s(node, path);
  s.read("mean", p.mean);
  s.read("drift_per_day", p.drift_per_day);
  if (s.has("sinusoids")) {
    const Json& arr = s.at("sinusoids");
    if (!arr.is_array()) throw InvalidInput("config '" + path + ".sinusoids' must be an array");
    p.components.clear();
    for (std::size_t k = 0; k < arr.size(); ++k) {
      Section c(arr[k], path + ".sinusoids[" + std::to_string(k) + "]");
      synthetic::Sinusoid sin;
      c.read("amplitude", sin.amplitude);
      c.read("period_min", sin.period_min);
      c.read("phase", sin.phase);
      c.finish();
      p.components.push_back(sin);
    }
  }
  if (s.has("cycles")) {
    const Json& arr = s.at("cycles");
    if (!arr.is_array()) throw InvalidInput("config '" + path + ".cycles' must be an array");
    p.cycles.clear();
    for (std::size_t k = 0; k < arr.size(); ++k) {
      Section c(arr[k], path + ".cycles[" + std::to_string(k) + "]");
      synthetic::Cycle cyc;
      c.read("length_min", cyc.length_min);
      c.read("amplitude", cyc.amplitude);
      c.finish();
      p.cycles.push_back(cyc);
    }
  }
  s.finish();
}

Json profile_json(const synthetic::BoundaryProfile& p) {
  Json sins = Json::array();
  for (const auto& c : p.components) {
    sins.push_back({{"amplitude", c.amplitude}, {"period_min", c.period_min}, {"phase", c.phase}});
  }
  Json cycles = Json::array();
  for (const auto& c : p.cycles) cycles.push_back({{"length_min", c.length_min}, {"amplitude", c.amplitude}});
  return {{"mean", p.mean}, {"drift_per_day", p.drift_per_day}, {"sinusoids", sins}, {"cycles", cycles}};
}

ThetaParams parse_theta(const Json& node, const std::string& path, ThetaParams theta) {
  Section s(node, path);
  s.read("R", theta.r_value);
  s.read("rhoC", theta.rho_c);
  s.read("tau0", theta.tau0);
  s.read("tau1", theta.tau1);
  s.finish();
  return theta;
}

}  // namespace

pipeline::ModelConfig RunConfig::model() const {
  pipeline::ModelConfig m;
  m.geometry = geometry;
  m.m_cells = m_cells;
  m.dt = dt;
  m.ic = ic;
  m.box = box;
  m.likelihood = likelihood;
  return m;
}

Json theta_json(const ThetaParams& theta) {
  Json out = {{"R", theta.r_value}, {"rhoC", theta.rho_c}, {"tau0", theta.tau0}};
  out["tau1"] = theta.tau1 ? Json(*theta.tau1) : Json(nullptr);
  return out;
}

RunConfig parse_config(const Json& doc) {
  RunConfig cfg;
  Section root(doc, "");
  {
    Section s(root.object("paths"), "paths");
    s.read("input", cfg.input);
    s.read("output_dir", cfg.output_dir);
    s.finish();
  }
  {
    Section s(root.object("geometry"), "geometry");
    s.read("thickness_m", cfg.geometry.thickness);
    s.finish();
  }
  {
    Section s(root.object("grid"), "grid");
    s.read("m_cells", cfg.m_cells);
    s.read("dt_s", cfg.dt);
    s.finish();
  }
  {
    Section s(root.object("priors"), "priors");
    s.read("R", cfg.box.r_interval);
    s.read("rhoC", cfg.box.rho_c_interval);
    s.read("tau0", cfg.box.tau0_interval);
    if (s.has("tau1")) {
      Interval i;
      s.read("tau1", i);
      cfg.box.tau1_interval = i;
    }
    s.finish();
  }
  {
    Section s(root.object("noise"), "noise");
    s.read("sigma_flux_int", cfg.noise.sigma_flux_int);
    s.read("sigma_flux_ext", cfg.noise.sigma_flux_ext);
    s.read("sigma_temp_prior", cfg.noise.sigma_temp_prior);
    s.read("estimate_flux_sigma", cfg.preprocess.estimate_flux_sigma);
    s.finish();
  }
  {
    Section s(root.object("preprocessing"), "preprocessing");
    s.read("lag", cfg.preprocess.lag);
    s.read("lag_candidates", cfg.preprocess.lag_candidates);
    s.read("lambda_grid", cfg.preprocess.smoother.lambda_grid);
    s.read("acf_horizon", cfg.preprocess.smoother.acf_horizon);
    s.read("ljung_box_lags", cfg.preprocess.ljung_box_lags);
    s.read("decimate", cfg.decimate);
    s.finish();
  }
  {
    Section s(root.object("inference"), "inference");
    std::string name = likelihood::to_string(cfg.likelihood);
    s.read("likelihood", name);
    cfg.likelihood = likelihood::likelihood_from_string(name);
    name = to_string(cfg.ic);
    s.read("ic", name);
    cfg.ic = initial_condition_from_string(name);
    s.read("starts", cfg.fit.n_starts);
    s.read("seed", cfg.fit.seed);
    s.read("hessian_step", cfg.fit.hessian_step);
    if (s.has("extra_starts")) {
      const Json& arr = s.at("extra_starts");
      if (!arr.is_array()) throw InvalidInput("config 'inference.extra_starts' must be an array");
      cfg.fit.extra_starts.clear();
      for (const auto& item : arr) {
        if (!item.is_array()) throw InvalidInput("config 'inference.extra_starts' entries must be arrays");
        Vector v(static_cast<Eigen::Index>(item.size()));
        for (std::size_t k = 0; k < item.size(); ++k) {
          if (!item[k].is_number()) throw InvalidInput("config 'inference.extra_starts' entries must be numbers");
          v(static_cast<Eigen::Index>(k)) = item[k].get<double>();
        }
        cfg.fit.extra_starts.push_back(v);
      }
    }
    {
      Section o(s.object("optimizer"), "inference.optimizer");
      o.read("max_iterations", cfg.fit.optimizer.max_iterations);
      o.read("gradient_step", cfg.fit.optimizer.gradient_step);
      o.read("gradient_tolerance", cfg.fit.optimizer.gradient_tolerance);
      o.read("value_tolerance", cfg.fit.optimizer.value_tolerance);
      o.finish();
    }
    {
      Section m(s.object("mcmc"), "inference.mcmc");
      m.read("n_iter", cfg.mcmc.n_iter);
      m.read("burn_in", cfg.mcmc.burn_in);
      m.read("thin", cfg.mcmc.thin);
      m.read("proposal_sd", cfg.mcmc.proposal_sd);
      m.read("proposal_laplace_scale", cfg.proposal_laplace_scale);
      m.read("seed", cfg.mcmc.seed);
      m.read("adapt", cfg.mcmc.adapt);
      m.read("adapt_iterations", cfg.mcmc.adapt_iterations);
      m.finish();
    }
    s.finish();
  }
  {
    Section s(root.object("design"), "design");
    s.read("checkpoints", cfg.checkpoints);
    s.read("min_window", cfg.min_window);
    Section c(s.object("cycles"), "design.cycles");
    c.read("min_separation_min", cfg.cycles.min_separation_min);
    c.read("min_prominence", cfg.cycles.min_prominence);
    c.finish();
    s.finish();
  }
  {
    Section s(root.object("robustness"), "robustness");
    s.read("ell", cfg.subsample.ell);
    s.read("b", cfg.subsample.b);
    s.read("repeats", cfg.subsample.n_repeats);
    s.read("seed", cfg.subsample.seed);
    s.read("max_failure_fraction", cfg.max_failure_fraction);
    s.finish();
  }
  {
    Section s(root.object("predict"), "predict");
    s.read("draws", cfg.predict.draws);
    s.read("seed", cfg.predict.seed);
    s.read("level", cfg.predict.level);
    s.finish();
  }
  {
    Section s(root.object("simulation"), "simulation");
    auto& sim = cfg.simulation;
    if (s.has("theta")) sim.theta_true = parse_theta(s.at("theta"), "simulation.theta", sim.theta_true);
    std::string name = to_string(sim.ic);
    s.read("ic", name);
    sim.ic = initial_condition_from_string(name);
    s.read("m_cells", sim.m_cells);
    s.read("dt_s", sim.dt);
    if (s.has("internal")) parse_profile(s.at("internal"), "simulation.internal", sim.internal);
    if (s.has("external")) parse_profile(s.at("external"), "simulation.external", sim.external);
    {
      Section n(s.object("noise"), "simulation.noise");
      n.read("temp_sd", sim.noise.temp_sd);
      n.read("flux_sd", sim.noise.flux_sd);
      n.read("ar1", sim.noise.ar1);
      n.finish();
    }
    s.read("duration_min", sim.duration_min);
    s.read("sample_min", sim.sample_min);
    s.read("seed", sim.seed);
    s.finish();
  }
  root.finish();
  cfg.simulation.geometry = cfg.geometry;

  // Checks that do not need data.
  cfg.geometry.validate();
  cfg.box.for_kind(cfg.ic).validate();
  cfg.noise.validate();
  if (cfg.m_cells < 3) throw InvalidInput("config 'grid.m_cells' must be at least 3");
  if (!(cfg.dt > 0.0)) throw InvalidInput("config 'grid.dt_s' must be positive");
  if (cfg.decimate < 1) throw InvalidInput("config 'preprocessing.decimate' must be at least 1");
  if (cfg.preprocess.lag < 0) throw InvalidInput("config 'preprocessing.lag' must be >= 0");
  if (cfg.preprocess.smoother.lambda_grid.empty()) {
    throw InvalidInput("config 'preprocessing.lambda_grid' must not be empty");
  }
  if (cfg.fit.n_starts < 0) throw InvalidInput("config 'inference.starts' must be >= 0");
  if (cfg.proposal_laplace_scale && !(*cfg.proposal_laplace_scale > 0.0)) {
    throw InvalidInput("config 'inference.mcmc.proposal_laplace_scale' must be positive");
  }
  cfg.subsample.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config file '" + path.string() + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

Json to_json(const RunConfig& cfg) {
  Json out;
  out["paths"] = {{"input", cfg.input}, {"output_dir", cfg.output_dir}};
  out["geometry"] = {{"thickness_m", cfg.geometry.thickness}};
  out["grid"] = {{"m_cells", cfg.m_cells}, {"dt_s", cfg.dt}};
  out["priors"] = {{"R", interval_json(cfg.box.r_interval)},
                   {"rhoC", interval_json(cfg.box.rho_c_interval)},
                   {"tau0", interval_json(cfg.box.tau0_interval)}};
  out["priors"]["tau1"] = cfg.box.tau1_interval ? interval_json(*cfg.box.tau1_interval) : Json(nullptr);
  out["noise"] = {{"sigma_flux_int", cfg.noise.sigma_flux_int},
                  {"sigma_flux_ext", cfg.noise.sigma_flux_ext},
                  {"sigma_temp_prior", cfg.noise.sigma_temp_prior},
                  {"estimate_flux_sigma", cfg.preprocess.estimate_flux_sigma}};
  out["preprocessing"] = {{"lag", cfg.preprocess.lag},
                          {"lag_candidates", cfg.preprocess.lag_candidates},
                          {"lambda_grid", cfg.preprocess.smoother.lambda_grid},
                          {"acf_horizon", cfg.preprocess.smoother.acf_horizon},
                          {"ljung_box_lags", cfg.preprocess.ljung_box_lags},
                          {"decimate", cfg.decimate}};
  Json starts = Json::array();
  for (const auto& s : cfg.fit.extra_starts) starts.push_back(vector_json(s));
  Json mcmc = {{"n_iter", cfg.mcmc.n_iter},
               {"burn_in", cfg.mcmc.burn_in},
               {"thin", cfg.mcmc.thin},
               {"proposal_sd", cfg.mcmc.proposal_sd.size() ? vector_json(cfg.mcmc.proposal_sd) : Json(nullptr)},
               {"proposal_laplace_scale",
                cfg.proposal_laplace_scale ? Json(*cfg.proposal_laplace_scale) : Json(nullptr)},
               {"seed", cfg.mcmc.seed},
               {"adapt", cfg.mcmc.adapt},
               {"adapt_iterations", cfg.mcmc.adapt_iterations}};
  out["inference"] = {{"likelihood", likelihood::to_string(cfg.likelihood)},
                      {"ic", to_string(cfg.ic)},
                      {"starts", cfg.fit.n_starts},
                      {"seed", cfg.fit.seed},
                      {"hessian_step", cfg.fit.hessian_step},
                      {"extra_starts", starts},
                      {"optimizer",
                       {{"max_iterations", cfg.fit.optimizer.max_iterations},
                        {"gradient_step", cfg.fit.optimizer.gradient_step},
                        {"gradient_tolerance", cfg.fit.optimizer.gradient_tolerance},
                        {"value_tolerance", cfg.fit.optimizer.value_tolerance}}},
                      {"mcmc", mcmc}};
  out["design"] = {{"checkpoints", cfg.checkpoints},
                   {"min_window", cfg.min_window},
                   {"cycles",
                    {{"min_separation_min", cfg.cycles.min_separation_min},
                     {"min_prominence", cfg.cycles.min_prominence}}}};
  out["robustness"] = {{"ell", cfg.subsample.ell},
                       {"b", cfg.subsample.b},
                       {"repeats", cfg.subsample.n_repeats},
                       {"seed", cfg.subsample.seed},
                       {"max_failure_fraction", cfg.max_failure_fraction}};
  out["predict"] = {{"draws", cfg.predict.draws}, {"seed", cfg.predict.seed}, {"level", cfg.predict.level}};
  const auto& sim = cfg.simulation;
  out["simulation"] = {{"theta", theta_json(sim.theta_true)},
                       {"ic", to_string(sim.ic)},
                       {"m_cells", sim.m_cells},
                       {"dt_s", sim.dt},
                       {"internal", profile_json(sim.internal)},
                       {"external", profile_json(sim.external)},
                       {"noise",
                        {{"temp_sd", sim.noise.temp_sd},
                         {"flux_sd", sim.noise.flux_sd},
                         {"ar1", sim.noise.ar1}}},
                       {"duration_min", sim.duration_min},
                       {"sample_min", sim.sample_min},
                       {"seed", sim.seed}};
  return out;
}

}  // namespace wallinfer::app
