#pragma once

#include <cstddef>
#include <list>
#include <memory>
#include <mutex>
#include <span>

#include "wallinfer/core.hpp"

namespace wallinfer::forward {

/// Second-difference matrix A (size (M-1)x(M-1), -2 diagonal, 1 off-diagonal),
/// boundary selectors a = e_1, b = e_{M-1}, and one-sided flux stencils
/// c = (-4, 1, 0, ...)', d = (..., 0, 1, -4)'.
struct SpatialOperator {
  int m_cells = 0;
  Vector a, b, c, d;

  static SpatialOperator build(int m_cells);
  /// Dense A; only meant for small grids and checks.
  Matrix dense_a() const;
};

/// Symmetric tridiagonal system (I - r A) x = y, factored once (LDL') and
/// reused for every time step and propagator row.
class ImplicitStepper {
 public:
  ImplicitStepper(int interior_size, double r);

  void solve_in_place(std::span<double> x) const;
  int size() const { return static_cast<int>(pivot_.size()); }
  double ratio() const { return r_; }

 private:
  double r_;
  std::vector<double> pivot_;      // D of LDL'
  std::vector<double> multiplier_; // sub-diagonal of L
};

/// Interior initial temperatures T0(x_m), m = 1..M-1.
/// linear: straight line between the endpoints (tau0 unused);
/// piecewise_linear: two segments meeting at (L/2, tau0);
/// quadratic: parabola through (0, t_int0), (L/2, tau0), (L, t_ext0);
/// cubic: cubic through those three points and (L/4, tau1).
Vector initial_profile(InitialConditionKind kind, double t_int0, double t_ext0,
                       const ThetaParams& theta, const Grid& grid);

/// One backward-Euler step: solves (I - eta*lambda*A) T_{n+1} = T_n + eta*lambda (t_int a + t_ext b).
Vector step(const Vector& state, double t_int_next, double t_ext_next, const ThetaParams& theta,
            const WallGeometry& geometry, const Grid& grid);

struct FluxSeries {
  Vector f_int;  // W/m^2, one entry per observation time
  Vector f_ext;
};

/// Time-stepping evaluation of the boundary fluxes.
///
/// Boundary series are given on the observation sub-grid (length grid.n_obs())
/// and linearly interpolated in between. Fluxes use the second-order one-sided
/// stencils F_int = k/(2dx) (3 T_int - 4 T_1 + T_2) and
/// F_ext = k/(2dx) (3 T_ext - 4 T_{M-1} + T_{M-2}), i.e. both are heat flux
/// entering the wall through that face.
FluxSeries solve_forward(const ThetaParams& theta, const WallGeometry& geometry, const Grid& grid,
                         std::span<const double> t_int, std::span<const double> t_ext,
                         InitialConditionKind ic);

/// Same as above with an explicit interior initial state.
FluxSeries solve_forward(const ThetaParams& theta, const WallGeometry& geometry, const Grid& grid,
                         std::span<const double> t_int, std::span<const double> t_ext,
                         const Vector& initial_interior);

/// Scalar kernels of B^n = (I - eta*lambda*A)^{-n} seen through the stencils,
/// n = 0..n_steps: alpha = c'B^n a, beta = c'B^n b, gamma = d'B^n a,
/// delta = d'B^n b; rows_c / rows_d hold c'B^n and d'B^n as matrix rows at
/// the observation steps n = i * obs_stride.
struct PropagatorSequences {
  Vector alpha, beta, gamma, delta;
  Matrix rows_c, rows_d;
  double eta_lambda = 0.0;
};

PropagatorSequences propagator_sequences(const ThetaParams& theta, const WallGeometry& geometry,
                                         const Grid& grid);

/// Dense linear flux operators on the observation sub-grid:
/// F_int = H T0 + H_int T_int + H_ext T_ext, F_ext = G T0 + G_int T_int + G_ext T_ext.
struct FluxOperators {
  Matrix h, h_int, h_ext;
  Matrix g, g_int, g_ext;
};

FluxOperators assemble_flux_operators(const PropagatorSequences& seq, const ThetaParams& theta,
                                      const WallGeometry& geometry, const Grid& grid);

/// Same operators from the sine eigenbasis of the interior Laplacian; cost is
/// O(n_obs^2 + n_obs M^2) instead of O(n_steps M).
FluxOperators spectral_flux_operators(const ThetaParams& theta, const WallGeometry& geometry,
                                      const Grid& grid);

/// Uses the spectral construction.
FluxOperators build_flux_operators(const ThetaParams& theta, const WallGeometry& geometry,
                                   const Grid& grid);

FluxSeries apply_operators(const FluxOperators& ops, const Vector& t0, const Vector& t_int,
                           const Vector& t_ext);

/// Small thread-safe LRU of assembled operators. Operators depend on
/// (R, rhoC, geometry, grid) only, so evaluations that differ in tau0 or tau1
/// share an entry.
class OperatorCache {
 public:
  explicit OperatorCache(std::size_t capacity = 8) : capacity_(capacity) {}

  std::shared_ptr<const FluxOperators> get(const ThetaParams& theta, const WallGeometry& geometry,
                                           const Grid& grid);
  std::size_t hits() const;
  std::size_t misses() const;

 private:
  struct Key {
    double r, rho_c, thickness;
    Grid grid;
    bool operator==(const Key&) const = default;
  };
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::list<std::pair<Key, std::shared_ptr<const FluxOperators>>> entries_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

}  // namespace wallinfer::forward
