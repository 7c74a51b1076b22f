#include "wallinfer/forward.hpp"

#include <cmath>
#include <string>

namespace wallinfer::forward {

namespace {

void require_stencil_grid(const Grid& grid) {
  grid.validate();
  if (grid.m_cells < 3) {
    throw InvalidInput("flux stencils need at least 3 spatial cells, got " +
                       std::to_string(grid.m_cells));
  }
}

double eta_lambda(const ThetaParams& theta, const WallGeometry& geometry, const Grid& grid) {
  theta.validate();
  geometry.validate();
  const double r = geometry.diffusivity(theta) * grid.lambda(geometry);
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw InvalidInput("eta*lambda must be positive and finite for " + theta.describe());
  }
  return r;
}

// Boundary value at fine time level `f` from observation-grid samples.
double interpolate_boundary(std::span<const double> obs, int f, int stride) {
  const int j = f / stride;
  const int rem = f % stride;
  if (rem == 0) return obs[static_cast<std::size_t>(j)];
  const double w = static_cast<double>(rem) / stride;
  return (1.0 - w) * obs[static_cast<std::size_t>(j)] + w * obs[static_cast<std::size_t>(j) + 1];
}

// Interpolation-weighted kernel for boundary sample j >= 1 observed q = i - j
// observation intervals later (Toeplitz part of H_int, H_ext, G_int, G_ext).
double toeplitz_kernel(const Vector& seq, int q, int stride) {
  double sum = 0.0;
  const int r_hi = q == 0 ? 0 : stride - 1;
  for (int r = -(stride - 1); r <= r_hi; ++r) {
    const double w = 1.0 - std::abs(r) / static_cast<double>(stride);
    sum += w * seq(q * stride - r + 1);
  }
  return sum;
}

// Contribution of boundary sample 0 to the flux at observation i >= 1 through
// the interpolated fine levels 1..stride-1 (zero when stride == 1).
double first_column_kernel(const Vector& seq, int i, int stride) {
  double sum = 0.0;
  for (int k = 1; k <= stride - 1; ++k) {
    const double w = 1.0 - static_cast<double>(k) / stride;
    sum += w * seq(i * stride - k + 1);
  }
  return sum;
}

Matrix lower_toeplitz_operator(const Vector& seq, int n_obs, int stride) {
  Matrix out = Matrix::Zero(n_obs, n_obs);
  Vector kernel(n_obs);
  for (int q = 0; q < n_obs - 1; ++q) kernel(q) = toeplitz_kernel(seq, q, stride);
  for (int i = 1; i < n_obs; ++i) {
    out(i, 0) = first_column_kernel(seq, i, stride);
    for (int j = 1; j <= i; ++j) out(i, j) = kernel(i - j);
  }
  return out;
}

}  // namespace

SpatialOperator SpatialOperator::build(int m_cells) {
  if (m_cells < 3) throw InvalidInput("spatial operator needs at least 3 cells");
  const int n = m_cells - 1;
  SpatialOperator op;
  op.m_cells = m_cells;
  op.a = Vector::Zero(n);
  op.b = Vector::Zero(n);
  op.c = Vector::Zero(n);
  op.d = Vector::Zero(n);
  op.a(0) = 1.0;
  op.b(n - 1) = 1.0;
  op.c(0) = -4.0;
  op.c(1) = 1.0;
  op.d(n - 1) = -4.0;
  op.d(n - 2) = 1.0;
  return op;
}

Matrix SpatialOperator::dense_a() const {
  const int n = m_cells - 1;
  Matrix a_mat = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    a_mat(i, i) = -2.0;
    if (i + 1 < n) {
      a_mat(i, i + 1) = 1.0;
      a_mat(i + 1, i) = 1.0;
    }
  }
  return a_mat;
}

ImplicitStepper::ImplicitStepper(int interior_size, double r) : r_(r) {
  if (interior_size < 1) throw InvalidInput("implicit system needs at least one unknown");
  if (!(r > 0.0)) throw InvalidInput("eta*lambda must be positive");
  pivot_.resize(static_cast<std::size_t>(interior_size));
  multiplier_.assign(static_cast<std::size_t>(interior_size), 0.0);
  const double diag = 1.0 + 2.0 * r;
  pivot_[0] = diag;
  for (std::size_t i = 1; i < pivot_.size(); ++i) {
    multiplier_[i] = -r / pivot_[i - 1];
    pivot_[i] = diag + multiplier_[i] * r;
  }
}

void ImplicitStepper::solve_in_place(std::span<double> x) const {
  const std::size_t n = pivot_.size();
  for (std::size_t i = 1; i < n; ++i) x[i] -= multiplier_[i] * x[i - 1];
  for (std::size_t i = 0; i < n; ++i) x[i] /= pivot_[i];
  for (std::size_t i = n - 1; i-- > 0;) x[i] -= multiplier_[i + 1] * x[i + 1];
}

Vector initial_profile(InitialConditionKind kind, double t_int0, double t_ext0,
                       const ThetaParams& theta, const Grid& grid) {
  grid.validate();
  theta.check_kind(kind);
  const int n = grid.m_cells - 1;
  Vector out(n);
  const double a = t_int0;
  const double b = t_ext0;
  const double c = theta.tau0;
  for (int m = 1; m <= n; ++m) {
    const double s = static_cast<double>(m) / grid.m_cells;  // x / L
    double v = 0.0;
    switch (kind) {
      case InitialConditionKind::linear:
        v = a + (b - a) * s;
        break;
      case InitialConditionKind::piecewise_linear:
        v = s <= 0.5 ? a + 2.0 * (c - a) * s : c + 2.0 * (b - c) * (s - 0.5);
        break;
      case InitialConditionKind::quadratic:
        // Lagrange basis on nodes 0, 1/2, 1.
        v = a * 2.0 * (s - 0.5) * (s - 1.0) + c * (-4.0) * s * (s - 1.0) +
            b * 2.0 * s * (s - 0.5);
        break;
      case InitialConditionKind::cubic: {
        // Lagrange basis on nodes 0, 1/4, 1/2, 1.
        const double d = *theta.tau1;
        const double l0 = (s - 0.25) * (s - 0.5) * (s - 1.0) / ((-0.25) * (-0.5) * (-1.0));
        const double l1 = s * (s - 0.5) * (s - 1.0) / (0.25 * (-0.25) * (-0.75));
        const double l2 = s * (s - 0.25) * (s - 1.0) / (0.5 * 0.25 * (-0.5));
        const double l3 = s * (s - 0.25) * (s - 0.5) / (1.0 * 0.75 * 0.5);
        v = a * l0 + d * l1 + c * l2 + b * l3;
        break;
      }
    }
    out(m - 1) = v;
  }
  return out;
}

Vector step(const Vector& state, double t_int_next, double t_ext_next, const ThetaParams& theta,
            const WallGeometry& geometry, const Grid& grid) {
  grid.validate();
  if (state.size() != grid.m_cells - 1) throw InvalidInput("state length must be M-1");
  const double r = eta_lambda(theta, geometry, grid);
  ImplicitStepper stepper(grid.m_cells - 1, r);
  Vector next = state;
  next(0) += r * t_int_next;
  next(next.size() - 1) += r * t_ext_next;
  stepper.solve_in_place(std::span<double>(next.data(), static_cast<std::size_t>(next.size())));
  return next;
}

FluxSeries solve_forward(const ThetaParams& theta, const WallGeometry& geometry, const Grid& grid,
                         std::span<const double> t_int, std::span<const double> t_ext,
                         InitialConditionKind ic) {
  require_stencil_grid(grid);
  if (t_int.empty() || t_ext.empty()) throw InvalidInput("boundary series must not be empty");
  const Vector t0 = initial_profile(ic, t_int.front(), t_ext.front(), theta, grid);
  return solve_forward(theta, geometry, grid, t_int, t_ext, t0);
}

FluxSeries solve_forward(const ThetaParams& theta, const WallGeometry& geometry, const Grid& grid,
                         std::span<const double> t_int, std::span<const double> t_ext,
                         const Vector& initial_interior) {
  require_stencil_grid(grid);
  const auto n_obs = static_cast<std::size_t>(grid.n_obs());
  if (t_int.size() != n_obs || t_ext.size() != n_obs) {
    throw InvalidInput("boundary series length must equal grid.n_obs() = " +
                       std::to_string(n_obs));
  }
  const int n_int = grid.m_cells - 1;
  if (initial_interior.size() != n_int) throw InvalidInput("initial state length must be M-1");

  const double r = eta_lambda(theta, geometry, grid);
  const double kappa = geometry.conductivity(theta) / (2.0 * grid.dx(geometry));
  ImplicitStepper stepper(n_int, r);

  FluxSeries out{Vector(static_cast<Eigen::Index>(n_obs)),
                 Vector(static_cast<Eigen::Index>(n_obs))};
  std::vector<double> state(initial_interior.data(), initial_interior.data() + n_int);
  const auto record = [&](std::size_t i) {
    out.f_int(static_cast<Eigen::Index>(i)) =
        kappa * (3.0 * t_int[i] - 4.0 * state[0] + state[1]);
    out.f_ext(static_cast<Eigen::Index>(i)) =
        kappa * (3.0 * t_ext[i] - 4.0 * state[static_cast<std::size_t>(n_int - 1)] +
                 state[static_cast<std::size_t>(n_int - 2)]);
  };
  record(0);
  for (int f = 1; f <= grid.n_steps; ++f) {
    state.front() += r * interpolate_boundary(t_int, f, grid.obs_stride);
    state.back() += r * interpolate_boundary(t_ext, f, grid.obs_stride);
    stepper.solve_in_place(state);
    if (f % grid.obs_stride == 0) record(static_cast<std::size_t>(f / grid.obs_stride));
  }
  for (Eigen::Index i = 0; i < out.f_int.size(); ++i) {
    if (!std::isfinite(out.f_int(i)) || !std::isfinite(out.f_ext(i))) {
      throw NumericalError("non-finite flux for " + theta.describe());
    }
  }
  return out;
}

PropagatorSequences propagator_sequences(const ThetaParams& theta, const WallGeometry& geometry,
                                         const Grid& grid) {
  require_stencil_grid(grid);
  const double r = eta_lambda(theta, geometry, grid);
  const int n_int = grid.m_cells - 1;
  const int n = grid.n_steps;
  const SpatialOperator op = SpatialOperator::build(grid.m_cells);
  ImplicitStepper stepper(n_int, r);

  PropagatorSequences seq;
  seq.eta_lambda = r;
  seq.rows_c.resize(grid.n_obs(), n_int);
  seq.rows_d.resize(grid.n_obs(), n_int);
  seq.alpha.resize(n + 1);
  seq.beta.resize(n + 1);
  seq.gamma.resize(n + 1);
  seq.delta.resize(n + 1);

  Vector wc = op.c;
  Vector wd = op.d;
  for (int k = 0; k <= n; ++k) {
    if (k > 0) {
      // B is symmetric, so c'B^{k} = (B c'B^{k-1}')'.
      stepper.solve_in_place(std::span<double>(wc.data(), static_cast<std::size_t>(n_int)));
      stepper.solve_in_place(std::span<double>(wd.data(), static_cast<std::size_t>(n_int)));
    }
    if (k % grid.obs_stride == 0) {
      seq.rows_c.row(k / grid.obs_stride) = wc.transpose();
      seq.rows_d.row(k / grid.obs_stride) = wd.transpose();
    }
    seq.alpha(k) = wc(0);
    seq.beta(k) = wc(n_int - 1);
    seq.gamma(k) = wd(0);
    seq.delta(k) = wd(n_int - 1);
  }
  return seq;
}

FluxOperators assemble_flux_operators(const PropagatorSequences& seq, const ThetaParams& theta,
                                      const WallGeometry& geometry, const Grid& grid) {
  require_stencil_grid(grid);
  if (seq.alpha.size() != grid.n_steps + 1 || seq.rows_c.rows() != grid.n_obs() ||
      seq.rows_c.cols() != grid.m_cells - 1) {
    throw InvalidInput("propagator sequences do not match the grid");
  }
  const int n_obs = grid.n_obs();
  const int s = grid.obs_stride;
  const double kappa = geometry.conductivity(theta) / (2.0 * grid.dx(geometry));
  const double r = seq.eta_lambda;

  FluxOperators ops;
  ops.h.resize(n_obs, grid.m_cells - 1);
  ops.g.resize(n_obs, grid.m_cells - 1);
  for (int i = 0; i < n_obs; ++i) {
    ops.h.row(i) = kappa * seq.rows_c.row(i);
    ops.g.row(i) = kappa * seq.rows_d.row(i);
  }
  const Matrix identity = Matrix::Identity(n_obs, n_obs);
  ops.h_int = kappa * (3.0 * identity + r * lower_toeplitz_operator(seq.alpha, n_obs, s));
  ops.h_ext = (kappa * r) * lower_toeplitz_operator(seq.beta, n_obs, s);
  ops.g_int = (kappa * r) * lower_toeplitz_operator(seq.gamma, n_obs, s);
  ops.g_ext = kappa * (3.0 * identity + r * lower_toeplitz_operator(seq.delta, n_obs, s));
  return ops;
}

FluxOperators spectral_flux_operators(const ThetaParams& theta, const WallGeometry& geometry,
                                      const Grid& grid) {
  require_stencil_grid(grid);
  const double r = eta_lambda(theta, geometry, grid);
  const int m = grid.m_cells;
  const int n_int = m - 1;
  const int n_obs = grid.n_obs();
  const int s = grid.obs_stride;
  const double kappa = geometry.conductivity(theta) / (2.0 * grid.dx(geometry));

  // A = V diag(lambda) V' with V(i,j) = sqrt(2/M) sin((i+1)(j+1) pi / M), so
  // B^k = V diag(mu^k) V' with mu_j = 1 / (1 + 4 r sin^2((j+1) pi / 2M)).
  const double pi = std::acos(-1.0);
  const double norm = std::sqrt(2.0 / m);
  Matrix v(n_int, n_int);
  for (int i = 0; i < n_int; ++i) {
    for (int j = 0; j < n_int; ++j) {
      v(i, j) = norm * std::sin(static_cast<double>((i + 1) * (j + 1) % (2 * m)) * pi / m);
    }
  }
  Vector mu(n_int);
  for (int j = 0; j < n_int; ++j) {
    const double half = std::sin((j + 1) * pi / (2.0 * m));
    mu(j) = 1.0 / (1.0 + 4.0 * r * half * half);
  }
  const SpatialOperator op = SpatialOperator::build(m);
  const Vector cv = v.transpose() * op.c;
  const Vector dv = v.transpose() * op.d;
  const Vector av = v.row(0).transpose();
  const Vector bv = v.row(n_int - 1).transpose();

  // Per-mode weights of the interpolated kernels (see toeplitz_kernel and
  // first_column_kernel) with the common power mu^((q-1)s+2) factored out.
  Vector w_diag = Vector::Zero(n_int);   // q == 0
  Vector w_toe = Vector::Zero(n_int);    // q >= 1
  Vector w_first = Vector::Zero(n_int);  // column 0, i >= 1
  Vector mu_s(n_int);
  for (int j = 0; j < n_int; ++j) {
    double p = 1.0;
    for (int e = 0; e <= 2 * s - 2; ++e) {
      const int rr = s - 1 - e;
      w_toe(j) += (1.0 - std::abs(rr) / static_cast<double>(s)) * p;
      if (rr >= 1) w_first(j) += (1.0 - static_cast<double>(rr) / s) * p;
      p *= mu(j);
      if (e < s) w_diag(j) += (1.0 - static_cast<double>(e) / s) * p;
      if (e == s - 1) mu_s(j) = p;
    }
  }

  // Mode powers at observation steps: pw(i, j) = mu_j^(i s).
  Matrix pw(n_obs, n_int);
  pw.row(0).setOnes();
  for (int i = 1; i < n_obs; ++i) pw.row(i) = pw.row(i - 1).cwiseProduct(mu_s.transpose());

  const Vector coef_a = cv.cwiseProduct(av);
  const Vector coef_b = cv.cwiseProduct(bv);
  const Vector coef_g = dv.cwiseProduct(av);
  const Vector coef_d = dv.cwiseProduct(bv);
  // kernel(q) for q >= 1 is sum_j coef_j w_toe_j mu_j^((q-1)s+2).
  const Vector mu2 = mu.cwiseProduct(mu);
  const auto series = [&](const Vector& coef, const Vector& w) {
    Vector out = Vector::Zero(n_obs);
    if (n_obs > 1) out.tail(n_obs - 1) = pw.topRows(n_obs - 1) * coef.cwiseProduct(w).cwiseProduct(mu2);
    return out;
  };

  FluxOperators ops;
  ops.h = kappa * (pw * cv.asDiagonal()) * v.transpose();
  ops.g = kappa * (pw * dv.asDiagonal()) * v.transpose();
  const auto fill = [&](const Vector& coef, double diag_extra) {
    const Vector toe = series(coef, w_toe);
    const Vector first = series(coef, w_first);
    const double diag = coef.dot(w_diag);
    Matrix out = Matrix::Zero(n_obs, n_obs);
    out(0, 0) = diag_extra;
    for (int j = 1; j < n_obs; ++j) {
      out(j, j) = diag_extra + kappa * r * diag;
      for (int i = j + 1; i < n_obs; ++i) out(i, j) = kappa * r * toe(i - j);
    }
    for (int i = 1; i < n_obs; ++i) out(i, 0) = kappa * r * first(i);
    return out;
  };
  ops.h_int = fill(coef_a, 3.0 * kappa);
  ops.h_ext = fill(coef_b, 0.0);
  ops.g_int = fill(coef_g, 0.0);
  ops.g_ext = fill(coef_d, 3.0 * kappa);
  return ops;
}

FluxOperators build_flux_operators(const ThetaParams& theta, const WallGeometry& geometry,
                                   const Grid& grid) {
  return spectral_flux_operators(theta, geometry, grid);
}

FluxSeries apply_operators(const FluxOperators& ops, const Vector& t0, const Vector& t_int,
                           const Vector& t_ext) {
  return FluxSeries{ops.h * t0 + ops.h_int * t_int + ops.h_ext * t_ext,
                    ops.g * t0 + ops.g_int * t_int + ops.g_ext * t_ext};
}

std::shared_ptr<const FluxOperators> OperatorCache::get(const ThetaParams& theta,
                                                        const WallGeometry& geometry,
                                                        const Grid& grid) {
  const Key key{theta.r_value, theta.rho_c, geometry.thickness, grid};
  {
    std::lock_guard lock(mutex_);
    for (auto it = entries_.begin(); it != entries_.end(); ++it) {
      if (it->first == key) {
        entries_.splice(entries_.begin(), entries_, it);
        ++hits_;
        return entries_.front().second;
      }
    }
    ++misses_;
  }
  auto built = std::make_shared<const FluxOperators>(build_flux_operators(theta, geometry, grid));
  std::lock_guard lock(mutex_);
  entries_.emplace_front(key, built);
  while (entries_.size() > capacity_) entries_.pop_back();
  return built;
}

std::size_t OperatorCache::hits() const {
  std::lock_guard lock(mutex_);
  return hits_;
}

std::size_t OperatorCache::misses() const {
  std::lock_guard lock(mutex_);
  return misses_;
}

}  // namespace wallinfer::forward
