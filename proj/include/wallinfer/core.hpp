#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace wallinfer {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Input did not satisfy a documented precondition (bad config, shapes, ranges).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A measurement file or series could not be used.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure failed (indefinite matrix, no convergence, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class InitialConditionKind { linear, piecewise_linear, quadratic, cubic };

std::string to_string(InitialConditionKind kind);
InitialConditionKind initial_condition_from_string(const std::string& name);

/// Number of inferred parameters that actually enter the model for `kind`.
/// The linear profile ignores tau0; the cubic profile adds tau1.
int effective_parameter_count(InitialConditionKind kind);

/// Parameter dimension carried by the optimizer/sampler (3, or 4 for cubic).
int parameter_dimension(InitialConditionKind kind);

/// Inferred wall parameters: thermal resistance [m^2 K/W], areal heat
/// capacity [J/(m^2 K)], mid-wall initial temperature [C] and, for the cubic
/// initial profile only, the quarter-wall initial temperature [C].
struct ThetaParams {
  double r_value = 0.0;
  double rho_c = 0.0;
  double tau0 = 0.0;
  std::optional<double> tau1;

  Vector to_vector() const;
  static ThetaParams from_vector(const Vector& v);

  /// Throws InvalidInput unless r_value > 0 and rho_c > 0.
  void validate() const;
  /// Throws InvalidInput when tau1 presence does not match `kind`.
  void check_kind(InitialConditionKind kind) const;

  std::string describe() const;
};

struct WallGeometry {
  double thickness = 0.215;  // m

  void validate() const;
  double conductivity(const ThetaParams& theta) const { return thickness / theta.r_value; }
  double volumetric_capacity(const ThetaParams& theta) const { return theta.rho_c / thickness; }
  /// eta = k / (rho c_p) = L^2 / (R rhoC), m^2/s.
  double diffusivity(const ThetaParams& theta) const {
    return thickness * thickness / (theta.r_value * theta.rho_c);
  }
};

/// Uniform space-time grid of the forward solver.
///
/// Boundary temperatures and fluxes live on the observation sub-grid: every
/// `obs_stride`-th time level. With obs_stride == 1 every time level is an
/// observation. Between observations the boundary temperatures are linearly
/// interpolated.
struct Grid {
  int m_cells = 60;
  double dt = 60.0;  // s
  int n_steps = 0;
  int obs_stride = 1;

  void validate() const;
  int n_obs() const { return n_steps / obs_stride + 1; }
  double dx(const WallGeometry& geom) const { return geom.thickness / m_cells; }
  /// Grid ratio dt/dx^2, s/m^2.
  double lambda(const WallGeometry& geom) const {
    const double h = dx(geom);
    return dt / (h * h);
  }
  bool operator==(const Grid&) const = default;
};

/// Uniformly sampled series; times are implicit, t_i = t0 + i*dt_sample (minutes).
struct TimeSeries {
  double t0 = 0.0;
  double dt_sample = 1.0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double time(std::size_t i) const { return t0 + static_cast<double>(i) * dt_sample; }
  void validate(const std::string& name) const;
  TimeSeries slice(std::size_t begin, std::size_t end) const;
  /// Every `factor`-th sample starting at index 0.
  TimeSeries decimate(std::size_t factor) const;
};

enum class Stage { raw, averaged };

struct Campaign {
  TimeSeries temp_int;
  TimeSeries temp_ext;
  TimeSeries flux_int;
  TimeSeries flux_ext;
  Stage stage = Stage::raw;

  std::size_t size() const { return temp_int.size(); }
  Campaign slice(std::size_t begin, std::size_t end) const;
  Campaign decimate(std::size_t factor) const;
};

struct Violation {
  std::string series;
  std::ptrdiff_t index = -1;  // -1 when the violation concerns the whole series
  std::string message;
};

/// Lists every broken Campaign invariant; empty when the campaign is well formed.
std::vector<Violation> validate_campaign(const Campaign& c);

/// Throws DataError carrying the first few violations, if any.
void require_valid(const Campaign& c);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  double width() const { return upper - lower; }
  bool contains(double x) const { return x >= lower && x <= upper; }
  double midpoint() const { return 0.5 * (lower + upper); }
};

/// Independent uniform priors. The box is closed.
struct PriorBox {
  Interval r_interval{0.17, 0.36};
  Interval rho_c_interval{234000.0, 431000.0};
  Interval tau0_interval{5.0, 25.0};
  std::optional<Interval> tau1_interval;

  void validate() const;
  int dimension() const { return tau1_interval ? 4 : 3; }
  /// Intervals in parameter-vector order.
  std::vector<Interval> intervals() const;
  double volume() const;
  bool contains(const ThetaParams& theta) const;
  /// Box suited to `kind`; for cubic a tau1 interval equal to tau0's is added
  /// when none was configured.
  PriorBox for_kind(InitialConditionKind kind) const;

  Vector lower() const;
  Vector width() const;
  /// Maps a parameter vector to unit-box coordinates and back.
  Vector to_unit(const Vector& theta) const;
  Vector from_unit(const Vector& u) const;
};

/// Scalar-diagonal noise and boundary-prior covariances.
struct NoiseModel {
  double sigma_flux_int = 0.66;   // W/m^2
  double sigma_flux_ext = 0.66;   // W/m^2
  double sigma_temp_prior = 0.01; // C

  void validate() const;
};

}  // namespace wallinfer
