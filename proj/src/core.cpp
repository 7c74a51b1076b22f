#include "wallinfer/core.hpp"

#include <cmath>
#include <sstream>

namespace wallinfer {

std::string to_string(InitialConditionKind kind) {
  switch (kind) {
    case InitialConditionKind::linear: return "linear";
    case InitialConditionKind::piecewise_linear: return "piecewise_linear";
    case InitialConditionKind::quadratic: return "quadratic";
    case InitialConditionKind::cubic: return "cubic";
  }
  return "unknown";
}

InitialConditionKind initial_condition_from_string(const std::string& name) {
  if (name == "linear") return InitialConditionKind::linear;
  if (name == "piecewise_linear" || name == "piecewise") return InitialConditionKind::piecewise_linear;
  if (name == "quadratic") return InitialConditionKind::quadratic;
  if (name == "cubic") return InitialConditionKind::cubic;
  throw InvalidInput("unknown initial condition kind '" + name + "'");
}

int effective_parameter_count(InitialConditionKind kind) {
  switch (kind) {
    case InitialConditionKind::linear: return 2;
    case InitialConditionKind::cubic: return 4;
    default: return 3;
  }
}

int parameter_dimension(InitialConditionKind kind) {
  return kind == InitialConditionKind::cubic ? 4 : 3;
}

Vector ThetaParams::to_vector() const {
  Vector v(tau1 ? 4 : 3);
  v(0) = r_value;
  v(1) = rho_c;
  v(2) = tau0;
  if (tau1) v(3) = *tau1;
  return v;
}

ThetaParams ThetaParams::from_vector(const Vector& v) {
  if (v.size() != 3 && v.size() != 4) {
    throw InvalidInput("parameter vector must have 3 or 4 entries");
  }
  ThetaParams t;
  t.r_value = v(0);
  t.rho_c = v(1);
  t.tau0 = v(2);
  if (v.size() == 4) t.tau1 = v(3);
  return t;
}

void ThetaParams::validate() const {
  if (!(r_value > 0.0) || !(rho_c > 0.0) || !std::isfinite(r_value) || !std::isfinite(rho_c)) {
    throw InvalidInput("theta must have R > 0 and rhoC > 0, got " + describe());
  }
  if (!std::isfinite(tau0) || (tau1 && !std::isfinite(*tau1))) {
    throw InvalidInput("theta temperatures must be finite, got " + describe());
  }
}

void ThetaParams::check_kind(InitialConditionKind kind) const {
  if (kind == InitialConditionKind::cubic && !tau1) {
    throw InvalidInput("cubic initial condition requires tau1");
  }
  if (kind != InitialConditionKind::cubic && tau1) {
    throw InvalidInput("tau1 is only meaningful for the cubic initial condition");
  }
}

std::string ThetaParams::describe() const {
  std::ostringstream os;
  os.precision(10);
  os << "(R=" << r_value << ", rhoC=" << rho_c << ", tau0=" << tau0;
  if (tau1) os << ", tau1=" << *tau1;
  os << ")";
  return os.str();
}

void WallGeometry::validate() const {
  if (!(thickness > 0.0) || !std::isfinite(thickness)) {
    throw InvalidInput("wall thickness must be positive");
  }
}

void Grid::validate() const {
  if (m_cells < 2) throw InvalidInput("grid needs at least 2 spatial cells");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInput("grid dt must be positive");
  if (n_steps < 0) throw InvalidInput("grid n_steps must be non-negative");
  if (obs_stride < 1) throw InvalidInput("grid obs_stride must be >= 1");
  if (n_steps % obs_stride != 0) {
    throw InvalidInput("grid n_steps must be a multiple of obs_stride");
  }
}

void TimeSeries::validate(const std::string& name) const {
  if (values.empty()) throw DataError(name + ": series is empty");
  if (!(dt_sample > 0.0)) throw DataError(name + ": sampling interval must be positive");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw DataError(name + ": non-finite value at index " + std::to_string(i));
    }
  }
}

TimeSeries TimeSeries::slice(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > values.size()) {
    throw InvalidInput("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                       ") out of range for length " + std::to_string(values.size()));
  }
  TimeSeries out;
  out.t0 = time(begin);
  out.dt_sample = dt_sample;
  out.values.assign(values.begin() + static_cast<std::ptrdiff_t>(begin),
                    values.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

TimeSeries TimeSeries::decimate(std::size_t factor) const {
  if (factor == 0) throw InvalidInput("decimation factor must be >= 1");
  TimeSeries out;
  out.t0 = t0;
  out.dt_sample = dt_sample * static_cast<double>(factor);
  for (std::size_t i = 0; i < values.size(); i += factor) out.values.push_back(values[i]);
  return out;
}

Campaign Campaign::slice(std::size_t begin, std::size_t end) const {
  return Campaign{temp_int.slice(begin, end), temp_ext.slice(begin, end),
                  flux_int.slice(begin, end), flux_ext.slice(begin, end), stage};
}

Campaign Campaign::decimate(std::size_t factor) const {
  return Campaign{temp_int.decimate(factor), temp_ext.decimate(factor),
                  flux_int.decimate(factor), flux_ext.decimate(factor), stage};
}

std::vector<Violation> validate_campaign(const Campaign& c) {
  std::vector<Violation> out;
  const std::pair<const char*, const TimeSeries*> series[] = {
      {"temp_int", &c.temp_int}, {"temp_ext", &c.temp_ext},
      {"flux_int", &c.flux_int}, {"flux_ext", &c.flux_ext}};
  const TimeSeries& ref = c.temp_int;
  for (const auto& [name, s] : series) {
    if (s->values.empty()) out.push_back({name, -1, "empty series"});
    if (!(s->dt_sample > 0.0)) out.push_back({name, -1, "non-positive sampling interval"});
    if (s != &ref) {
      if (s->size() != ref.size()) out.push_back({name, -1, "length mismatch"});
      if (s->t0 != ref.t0) out.push_back({name, -1, "start time mismatch"});
      if (s->dt_sample != ref.dt_sample) out.push_back({name, -1, "sampling interval mismatch"});
    }
    for (std::size_t i = 0; i < s->size(); ++i) {
      if (!std::isfinite(s->values[i])) {
        out.push_back({name, static_cast<std::ptrdiff_t>(i), "non-finite value"});
      }
    }
  }
  return out;
}

void require_valid(const Campaign& c) {
  const auto v = validate_campaign(c);
  if (v.empty()) return;
  std::ostringstream os;
  os << "invalid campaign:";
  for (std::size_t i = 0; i < v.size() && i < 5; ++i) {
    os << " [" << v[i].series;
    if (v[i].index >= 0) os << "@" << v[i].index;
    os << ": " << v[i].message << "]";
  }
  if (v.size() > 5) os << " (+" << v.size() - 5 << " more)";
  throw DataError(os.str());
}

void PriorBox::validate() const {
  for (const auto& iv : intervals()) {
    if (!(iv.lower < iv.upper) || !std::isfinite(iv.lower) || !std::isfinite(iv.upper)) {
      throw InvalidInput("prior interval must satisfy lower < upper");
    }
  }
  if (!(r_interval.lower > 0.0) || !(rho_c_interval.lower > 0.0)) {
    throw InvalidInput("prior intervals for R and rhoC must be positive");
  }
}

std::vector<Interval> PriorBox::intervals() const {
  std::vector<Interval> out{r_interval, rho_c_interval, tau0_interval};
  if (tau1_interval) out.push_back(*tau1_interval);
  return out;
}

double PriorBox::volume() const {
  double v = 1.0;
  for (const auto& iv : intervals()) v *= iv.width();
  return v;
}

bool PriorBox::contains(const ThetaParams& theta) const {
  if (!r_interval.contains(theta.r_value) || !rho_c_interval.contains(theta.rho_c) ||
      !tau0_interval.contains(theta.tau0)) {
    return false;
  }
  if (tau1_interval) return theta.tau1 && tau1_interval->contains(*theta.tau1);
  return true;
}

PriorBox PriorBox::for_kind(InitialConditionKind kind) const {
  PriorBox out = *this;
  if (kind == InitialConditionKind::cubic) {
    if (!out.tau1_interval) out.tau1_interval = tau0_interval;
  } else {
    out.tau1_interval.reset();
  }
  return out;
}

Vector PriorBox::lower() const {
  const auto iv = intervals();
  Vector v(static_cast<Eigen::Index>(iv.size()));
  for (std::size_t i = 0; i < iv.size(); ++i) v(static_cast<Eigen::Index>(i)) = iv[i].lower;
  return v;
}

Vector PriorBox::width() const {
  const auto iv = intervals();
  Vector v(static_cast<Eigen::Index>(iv.size()));
  for (std::size_t i = 0; i < iv.size(); ++i) v(static_cast<Eigen::Index>(i)) = iv[i].width();
  return v;
}

Vector PriorBox::to_unit(const Vector& theta) const {
  return (theta - lower()).cwiseQuotient(width());
}

Vector PriorBox::from_unit(const Vector& u) const {
  return lower() + u.cwiseProduct(width());
}

void NoiseModel::validate() const {
  if (!(sigma_flux_int > 0.0) || !(sigma_flux_ext > 0.0) || !(sigma_temp_prior > 0.0)) {
    throw InvalidInput("noise standard deviations must be positive");
  }
}

}  // namespace wallinfer
