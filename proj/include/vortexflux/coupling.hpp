// SPDX-License-Identifier: Apache-2.0
//
// The regularized problem: per-step fixed-point coupling of the field solve
// (source [w]_R) and the transport step, time marching, the search for the
// cut-off inactivity level R*, and epsilon families.
#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vortexflux/elliptic.hpp"
#include "vortexflux/extension.hpp"
#include "vortexflux/grid.hpp"
#include "vortexflux/transport.hpp"

namespace vflux {

/// Problem data kept in grid-independent form so that refined runs can resample it.
struct ModelData {
  BoundaryTable a;  ///< normal velocity v.n on the boundary
  BoundaryTable b;  ///< inflow density (used on the inflow part)
  Grid omega0_grid = Grid::build(1, {1.0}, {3});
  Field omega0;     ///< nodal values on omega0_grid

  BoundarySeries a_on(const Grid& grid) const { return BoundarySeries::from_table(grid, a); }
  BoundarySeries b_on(const Grid& grid) const { return BoundarySeries::from_table(grid, b); }
  /// Bilinear resampling unless the grids coincide.
  Field omega0_on(const Grid& grid) const;
  /// Constant initial density on the given grid.
  void set_omega0(const Grid& grid, Field values);
};

struct CheckOptions {
  std::size_t psi_count = 3;
  std::vector<double> sigmas;  ///< boundary-layer widths; empty selects min_extent * {1/16, 1/32, 1/64}
  double collar_fraction = 0.125;
};

struct SweepOptions {
  std::vector<double> eps_list;  ///< strictly decreasing
  bool refine = false;           ///< also run the first epsilon on the 2n-1 grid
  bool r_star = true;
  double r_cap_factor = 1024.0;
  int bisection_steps = 6;
};

struct SimConfig {
  Grid grid = Grid::build(1, {1.0}, {11});
  double T = 1.0;
  double epsilon = 1e-3;
  double R = 1.0;
  double aleph = 0.0;
  bool aleph_defaulted = false;

  double picard_tol = 1e-10;
  int picard_max_iters = 50;
  double relaxation = 1.0;
  bool lagged = false;  ///< single sweep per step instead of the converged loop

  double cfl = 0.4;
  double dt_max = 0.05;
  bool implicit_diffusion = false;
  double output_dt = 0.0;  ///< snapshot cadence; 0 stores every step

  EllipticOptions elliptic;
  ExtensionOptions extension;
  ModelData data;
  CheckOptions checks;
  SweepOptions sweep;
  std::uint64_t seed = 0;

  /// Throws ConfigError on the first violated invariant.
  void validate() const;
  /// Sets aleph to max(omega0, b) when it is not given.
  void default_aleph();
};

struct Snapshot {
  double t = 0.0;
  Field omega;
  Field h;
};

struct StepStats {
  double t = 0.0;   ///< time at the end of the step
  double dt = 0.0;
  int iterations = 0;
  double contraction = 0.0;  ///< last ratio of successive increments (0 when one sweep sufficed)
  double l1 = 0.0;
  double min_omega = 0.0;
  double max_omega = 0.0;
  double max_h = 0.0;
  double max_grad_h = 0.0;
  double grad_sq = 0.0;      ///< sum over cells of |grad w|^2 * cell volume at the end of the step
  double mass_defect = 0.0;
  int retries = 0;
};

struct Trajectory {
  Grid grid = Grid::build(1, {1.0}, {3});
  double epsilon = 0.0;
  double R = 0.0;
  double aleph = 0.0;
  std::vector<Snapshot> snapshots;
  std::vector<StepStats> steps;

  /// sqrt(eps) * (sum_steps dt * grad_sq)^(1/2).
  double gradient_energy() const;
  double max_omega() const;
  double min_omega() const;
  double max_h() const;
  double max_l1() const;
  double max_grad_h() const;
};

/// |grad w|^2 integrated with one gradient per cell.
double cell_gradient_energy(const Grid& grid, std::span<const double> omega);
/// Discrete L1 norm with trapezoid node weights.
double l1_norm(const Grid& grid, std::span<const double> omega);

struct PicardResult {
  Field omega;
  Field h;
  FaceVelocity v;  ///< velocity used by the final transport sweep
  int iterations = 0;
  std::vector<double> increments;
  std::vector<double> contraction;
};

struct StepContext {
  const Grid& grid;
  const EllipticSolver& solver;
  TransportParams transport;
  double picard_tol = 1e-10;
  int picard_max_iters = 50;
  double relaxation = 1.0;
  bool lagged = false;
};

/// One time step [t, t + dt] from omega_n: w_{k+1} = T2[T1[w_k]] until the
/// relative l2 increment drops below picard_tol. Throws PicardError or StepRefused.
PicardResult picard_solve_step(const StepContext& ctx, std::span<const double> omega_n, double t,
                               std::span<const double> a_next, std::span<const double> dirichlet_next);

/// Marches from t = 0 to T using the supplied extension data.
Trajectory run(const SimConfig& config, const ExtensionResult& extension);
/// Builds the extension for config.epsilon and runs.
Trajectory run(const SimConfig& config);

ExtensionResult make_extension(const SimConfig& config);

/// Sup-norm difference of omega and h over all snapshots and of the per-step
/// statistics; infinity when the time grids differ.
double trajectory_difference(const Trajectory& a, const Trajectory& b);

struct RProbe {
  double R = 0.0;
  double max_omega = 0.0;
  double difference = 0.0;  ///< against the run at 2R
  bool passed = false;
};

struct RStarResult {
  bool found = false;
  double R = 0.0;  ///< smallest certified level
  std::vector<RProbe> probes;
  std::shared_ptr<const Trajectory> at_R;
  std::shared_ptr<const Trajectory> at_2R;
};

/// Doubling from aleph followed by bisection. A level passes when max w stays
/// below 0.99 R and the run at 2R agrees to 1e-10 in sup norm.
RStarResult estimate_R_star(const SimConfig& config, const ExtensionResult& extension, std::size_t workers = 1);
RStarResult estimate_R_star(const SimConfig& config);

struct FamilyMember {
  double epsilon = 0.0;
  std::shared_ptr<const Trajectory> trajectory;
  std::shared_ptr<const ExtensionResult> extension;
  std::string error;  ///< non-empty when the run failed
  double max_l1 = 0.0;
  double max_omega = 0.0;
  double max_grad_h = 0.0;
  double gradient_energy = 0.0;
};

struct CauchyEntry {
  double eps_coarse = 0.0;
  double eps_fine = 0.0;
  double distance = std::numeric_limits<double>::quiet_NaN();  ///< L2(0,T; H^-1)
};

struct RefinementEntry {
  double epsilon = 0.0;
  double sup_difference = 0.0;
  double l2_difference = 0.0;  ///< L2(0,T; H^-1) on the coarse nodes
};

struct FamilyResult {
  std::vector<FamilyMember> members;
  std::vector<CauchyEntry> cauchy;
  std::optional<RefinementEntry> refinement;
};

/// L2(0,T; H^-1) distance of two trajectories on the same grid and snapshot times.
double hminus1_distance(const Trajectory& a, const Trajectory& b);

/// Runs the family in parallel (bounded worker count); failures are recorded per member.
FamilyResult eps_continuation(const SimConfig& config, const std::vector<double>& eps_list, std::size_t workers = 1);

/// Grid with 2n-1 nodes per axis on the same domain.
Grid refined_grid(const Grid& grid);

}  // namespace vflux
