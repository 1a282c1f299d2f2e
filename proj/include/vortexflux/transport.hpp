// SPDX-License-Identifier: Apache-2.0
//
// Conservative upwind finite-volume step for w_t + div(w v) = eps Lap w with
// Dirichlet data on the whole boundary, and the cut-off [phi]_R.
#pragma once

#include <array>
#include <span>

#include "vortexflux/elliptic.hpp"
#include "vortexflux/grid.hpp"

namespace vflux {

/// [phi]_R = max(0, min(R, phi)).
constexpr double cutoff(double phi, double R) noexcept { return phi < 0.0 ? 0.0 : (phi > R ? R : phi); }
Field cutoff(std::span<const double> phi, double R);

/// Normal velocities on the faces of the dual control volumes. x-face (i,j)
/// joins nodes (i,j)-(i+1,j); y-face (i,j) joins (i,j)-(i,j+1).
struct FaceVelocity {
  Field x;
  Field y;

  double max_abs(int axis) const noexcept;
};

std::size_t x_face(const Grid& g, std::size_t i, std::size_t j) noexcept;
std::size_t y_face(const Grid& g, std::size_t i, std::size_t j) noexcept;

/// v = -grad h evaluated by differences across each face.
FaceVelocity face_velocity(const Grid& grid, std::span<const double> h);
FaceVelocity uniform_face_velocity(const Grid& grid, std::array<double, 2> v);
/// Face values as averages of nodal components.
FaceVelocity face_velocity(const Grid& grid, const NodalVector& v);

struct TransportParams {
  double epsilon = 0.0;     ///< viscosity
  double R = 1.0;           ///< cut-off level of the elliptic source
  double dt = 0.0;
  double cfl_target = 0.4;  ///< fraction of the stability bound used by cfl_dt
  double dt_max = 0.1;
  bool implicit_diffusion = false;
};

/// dt = cfl / (sum_axes max|v|/dx + 2 eps sum_axes dx^-2), dt_max when unconstrained.
double cfl_dt(const Grid& grid, const FaceVelocity& v, double epsilon, double cfl_target, double dt_max);

/// Largest dt keeping every interior update a nonnegative combination.
double admissible_dt(const Grid& grid, const FaceVelocity& v, double epsilon, bool implicit_diffusion);

/// One explicit conservative step; boundary nodes receive `dirichlet`
/// (Grid::boundary() order). Throws StepRefused above admissible_dt.
Field advect_diffuse_step(const Grid& grid, std::span<const double> omega, const FaceVelocity& v,
                          const TransportParams& params, std::span<const double> dirichlet);

/// Sum over interior cells of (w' - w) vol + dt * (net flux through the faces
/// bordering boundary nodes). Zero up to rounding for explicit steps.
double mass_balance_defect(const Grid& grid, std::span<const double> before, std::span<const double> after,
                           const FaceVelocity& v, const TransportParams& params);

/// Net outward flux through the faces that separate interior and boundary nodes.
double boundary_flux(const Grid& grid, std::span<const double> omega, const FaceVelocity& v, double epsilon);

/// Conservative upwind divergence of w v at interior nodes (zero elsewhere).
Field conservative_divergence(const Grid& grid, std::span<const double> omega, const FaceVelocity& v);

/// Cross-check form v . grad w + w ([w]_R - h) at interior nodes, using
/// div v = [w]_R - h from the field equation.
Field nonconservative_divergence(const Grid& grid, std::span<const double> omega, std::span<const double> h,
                                 double R);

/// Mass: sum of w times the interior control volume over interior nodes.
double interior_mass(const Grid& grid, std::span<const double> omega);

}  // namespace vflux
