// SPDX-License-Identifier: Apache-2.0
//
// Field equation -Lap h + h = source with flux data -grad h . n = a, the
// velocity v = -grad h, dense discrete Green operators, and the discrete
// H^{-1} norm used by the vanishing-viscosity study.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <iosfwd>
#include <memory>
#include <span>

#include "vortexflux/grid.hpp"

namespace vflux {

enum class BoundaryMode { Neumann, Robin, Dirichlet };

const char* to_string(BoundaryMode mode) noexcept;
BoundaryMode parse_boundary_mode(const std::string& text);

struct EllipticOptions {
  BoundaryMode mode = BoundaryMode::Neumann;
  /// Robin coefficient: -grad h . n = a + kappa h.
  double robin_kappa = 0.0;
  /// Absolute bound on the max-norm of the discrete residual.
  double solver_tol = 1e-10;
  /// Largest node count accepted for dense Green operator assembly.
  std::size_t dense_cap = 4096;
};

/// Second-order 3/5-point operator with ghost-node flux closure. The matrix is
/// factorized once at construction; solve() is const and may be called from
/// several threads.
class EllipticSolver {
 public:
  explicit EllipticSolver(const Grid& grid, EllipticOptions options = {});
  ~EllipticSolver();
  EllipticSolver(EllipticSolver&&) noexcept;
  EllipticSolver& operator=(EllipticSolver&&) noexcept;

  /// Solves for h given a nodal source and boundary samples (boundary() order).
  /// In Dirichlet mode the samples are boundary values of h instead of fluxes.
  Field solve(std::span<const double> source, std::span<const double> a) const;

  /// Max-norm of A h - rhs over all nodes.
  double residual(std::span<const double> h, std::span<const double> source,
                  std::span<const double> a) const;
  /// Max-norm of the residual restricted to interior nodes.
  double interior_residual(std::span<const double> h, std::span<const double> source,
                           std::span<const double> a) const;

  /// Right-hand side assembled from source and boundary data.
  Field rhs(std::span<const double> source, std::span<const double> a) const;

  const Grid& grid() const noexcept;
  const EllipticOptions& options() const noexcept;

  /// Writes the assembled operator as "row col value" lines.
  void dump_coo(std::ostream& os) const;
  std::size_t nonzeros() const noexcept;

  /// Dense copy of the assembled operator.
  Eigen::MatrixXd dense_matrix() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// One-shot convenience wrapper around EllipticSolver.
Field solve_h(const Grid& grid, std::span<const double> omega, std::span<const double> a,
              const EllipticOptions& options = {});

struct NodalVector {
  Field x;
  Field y;  ///< empty in 1-D

  double max_abs() const noexcept;
};

/// v = -grad h: centred differences inside, second-order one-sided on the boundary.
NodalVector velocity(const Grid& grid, std::span<const double> h);

/// Dense discrete Green operators: h = K1 * source + K2 * a.
struct GreenOperators {
  Eigen::MatrixXd K1;  ///< nodes x nodes
  Eigen::MatrixXd K2;  ///< nodes x boundary nodes

  Field apply(std::span<const double> source, std::span<const double> a) const;
};

GreenOperators build_green_operators(const Grid& grid, const EllipticOptions& options = {});

struct KernelBoundReport {
  double envelope_constant = 0.0;   ///< smallest C with |K| <= C (1 + |ln r|) off the diagonal
  double violation_fraction = 0.0;  ///< fraction of off-diagonal entries above the envelope
  double near_radius = 0.0;         ///< quarter of the smallest extent
  double near_constant = 0.0;       ///< the same fit restricted to r <= near_radius
  std::size_t entries = 0;
  double min_kernel = 0.0;
};

/// Kernel estimate K(x, y) = K1(x, y) / node_weight(y) compared against the
/// logarithmic envelope. Diagonal entries are excluded. 2-D grids only.
KernelBoundReport kernel_bound_check(const GreenOperators& green, const Grid& grid);

/// Kernel estimate between two nodes (K1 entry divided by the source node weight).
double discrete_kernel(const GreenOperators& green, const Grid& grid, std::size_t x, std::size_t y);

/// mass * u - stiffness * Lap u = rhs on interior nodes with prescribed boundary values.
class DirichletProblem {
 public:
  DirichletProblem(const Grid& grid, double mass, double stiffness);
  ~DirichletProblem();
  DirichletProblem(DirichletProblem&&) noexcept;
  DirichletProblem& operator=(DirichletProblem&&) noexcept;

  /// rhs is a full nodal field (boundary entries ignored); result carries
  /// the boundary values on boundary nodes.
  Field solve(std::span<const double> rhs, std::span<const double> boundary_values) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// ||u||^2 = cell_volume * u^T (-Lap_h + I)^{-1} u on interior nodes (homogeneous
/// Dirichlet closure, the dual of H^1_0).
class HMinusOneNorm {
 public:
  explicit HMinusOneNorm(const Grid& grid);
  double squared(std::span<const double> u) const;
  double norm(std::span<const double> u) const;

 private:
  Grid grid_;
  DirichletProblem problem_;
};

}  // namespace vflux
