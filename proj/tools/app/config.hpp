#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wallinfer/design.hpp"
#include "wallinfer/inference.hpp"
#include "wallinfer/pipeline.hpp"
#include "wallinfer/preprocess.hpp"
#include "wallinfer/robustness.hpp"
#include "wallinfer/synthetic.hpp"

namespace wallinfer::app {

using Json = nlohmann::ordered_json;

struct PredictConfig {
  int draws = 1000;
  std::uint64_t seed = 1;
  double level = 0.95;
};

struct RunConfig {
  std::string input;
  std::string output_dir = "wallinfer_out";

  WallGeometry geometry;
  int m_cells = 60;
  double dt = 60.0;
  PriorBox box;
  NoiseModel noise;

  preprocess::PreprocessConfig preprocess;
  std::size_t decimate = 1;

  likelihood::LikelihoodKind likelihood = likelihood::LikelihoodKind::marginal;
  InitialConditionKind ic = InitialConditionKind::piecewise_linear;
  pipeline::FitConfig fit;
  inference::McmcConfig mcmc;
  /// When set, MCMC proposal sds are this multiple of the Laplace sds.
  std::optional<double> proposal_laplace_scale;

  std::vector<std::size_t> checkpoints;
  std::size_t min_window = 100;
  design::CycleConfig cycles;

  robustness::SubsampleConfig subsample;
  double max_failure_fraction = 0.2;

  PredictConfig predict;
  synthetic::ScenarioSpec simulation;

  pipeline::ModelConfig model() const;
};

/// Strict reader: unknown keys and wrong types raise InvalidInput naming the
/// offending path. Missing keys keep their defaults.
RunConfig parse_config(const Json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// Every setting, defaults included.
Json to_json(const RunConfig& cfg);

Json theta_json(const ThetaParams& theta);

}  // namespace wallinfer::app
