// SPDX-License-Identifier: Apache-2.0
#include "vortexflux/transport.hpp"

#include <algorithm>
#include <cmath>

#include "vortexflux/error.hpp"

namespace vflux {

Field cutoff(std::span<const double> phi, double R) {
  Field out(phi.size());
  std::transform(phi.begin(), phi.end(), out.begin(), [R](double p) { return cutoff(p, R); });
  return out;
}

double FaceVelocity::max_abs(int axis) const noexcept {
  const Field& f = axis == 0 ? x : y;
  double m = 0.0;
  for (double v : f) m = std::max(m, std::abs(v));
  return m;
}

std::size_t x_face(const Grid& g, std::size_t i, std::size_t j) noexcept { return j * (g.count(0) - 1) + i; }
std::size_t y_face(const Grid& g, std::size_t i, std::size_t j) noexcept { return j * g.count(0) + i; }

namespace {

// Visits the faces of the control volume around node k: (face velocity, +1 for
// the high side / -1 for the low side, neighbour node, axis).
template <class F>
void for_each_face(const Grid& g, const FaceVelocity& v, std::size_t k, F&& f) {
  const auto [i, j] = g.ij(k);
  f(v.x[x_face(g, i, j)], 1, g.index(i + 1, j), 0);
  f(v.x[x_face(g, i - 1, j)], -1, g.index(i - 1, j), 0);
  if (g.dimension() == 2) {
    f(v.y[y_face(g, i, j)], 1, g.index(i, j + 1), 1);
    f(v.y[y_face(g, i, j - 1)], -1, g.index(i, j - 1), 1);
  }
}

// Outward flux (advective upwind + diffusive) through one face of node k's volume.
double face_flux(const Grid& g, std::span<const double> w, std::size_t k, double vface, int side,
                 std::size_t nb, int axis, double eps) {
  const double vout = side * vface;  // velocity along the outward direction
  const double upwind = vout > 0.0 ? w[k] : w[nb];
  return vout * upwind - eps * (w[nb] - w[k]) / g.spacing(axis);
}

double face_area(const Grid& g, int axis) {
  if (g.dimension() == 1) return 1.0;
  return g.spacing(1 - axis);
}

void check_sizes(const Grid& g, std::span<const double> w, const FaceVelocity& v) {
  if (w.size() != g.size()) throw DataError("field size does not match the grid");
  if (v.x.size() != (g.count(0) - 1) * g.count(1)) throw DataError("x-face velocity size does not match the grid");
  if (g.dimension() == 2 && v.y.size() != g.count(0) * (g.count(1) - 1))
    throw DataError("y-face velocity size does not match the grid");
}

}  // namespace

FaceVelocity face_velocity(const Grid& g, std::span<const double> h) {
  if (h.size() != g.size()) throw DataError("h size does not match the grid");
  FaceVelocity v;
  const std::size_t nx = g.count(0);
  const std::size_t ny = g.count(1);
  v.x.resize((nx - 1) * ny);
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i + 1 < nx; ++i)
      v.x[x_face(g, i, j)] = -(h[g.index(i + 1, j)] - h[g.index(i, j)]) / g.spacing(0);
  if (g.dimension() == 2) {
    v.y.resize(nx * (ny - 1));
    for (std::size_t j = 0; j + 1 < ny; ++j)
      for (std::size_t i = 0; i < nx; ++i)
        v.y[y_face(g, i, j)] = -(h[g.index(i, j + 1)] - h[g.index(i, j)]) / g.spacing(1);
  }
  return v;
}

FaceVelocity uniform_face_velocity(const Grid& g, std::array<double, 2> u) {
  FaceVelocity v;
  v.x.assign((g.count(0) - 1) * g.count(1), u[0]);
  if (g.dimension() == 2) v.y.assign(g.count(0) * (g.count(1) - 1), u[1]);
  return v;
}

FaceVelocity face_velocity(const Grid& g, const NodalVector& nv) {
  FaceVelocity v;
  const std::size_t nx = g.count(0);
  const std::size_t ny = g.count(1);
  v.x.resize((nx - 1) * ny);
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i + 1 < nx; ++i)
      v.x[x_face(g, i, j)] = 0.5 * (nv.x[g.index(i, j)] + nv.x[g.index(i + 1, j)]);
  if (g.dimension() == 2) {
    v.y.resize(nx * (ny - 1));
    for (std::size_t j = 0; j + 1 < ny; ++j)
      for (std::size_t i = 0; i < nx; ++i)
        v.y[y_face(g, i, j)] = 0.5 * (nv.y[g.index(i, j)] + nv.y[g.index(i, j + 1)]);
  }
  return v;
}

double cfl_dt(const Grid& g, const FaceVelocity& v, double epsilon, double cfl_target, double dt_max) {
  double rate = 0.0;
  for (int ax = 0; ax < g.dimension(); ++ax) {
    const double dx = g.spacing(ax);
    const double vmax = v.max_abs(ax);
    if (!std::isfinite(vmax)) throw DataError("non-finite velocity");
    rate += vmax / dx + 2.0 * epsilon / (dx * dx);
  }
  if (rate <= 0.0) return dt_max;
  return std::min(dt_max, cfl_target / rate);
}

double admissible_dt(const Grid& g, const FaceVelocity& v, double epsilon, bool implicit_diffusion) {
  double worst = 0.0;
  for (std::size_t k : g.interior()) {
    double rate = 0.0;
    for_each_face(g, v, k, [&](double vf, int side, std::size_t, int axis) {
      rate += std::max(side * vf, 0.0) / g.spacing(axis);
      if (!implicit_diffusion) rate += epsilon / (g.spacing(axis) * g.spacing(axis));
    });
    worst = std::max(worst, rate);
  }
  return worst > 0.0 ? 1.0 / worst : std::numeric_limits<double>::infinity();
}

Field advect_diffuse_step(const Grid& g, std::span<const double> omega, const FaceVelocity& v,
                          const TransportParams& p, std::span<const double> dirichlet) {
  check_sizes(g, omega, v);
  if (dirichlet.size() != g.boundary().size()) throw DataError("Dirichlet data count does not match the grid");
  if (!(p.dt > 0.0)) throw ConfigError("time step must be positive", "dt");
  const double limit = admissible_dt(g, v, p.epsilon, p.implicit_diffusion);
  if (p.dt > limit * (1.0 + 1e-12)) throw StepRefused(p.dt, limit);

  const double explicit_eps = p.implicit_diffusion ? 0.0 : p.epsilon;
  Field next(omega.begin(), omega.end());
  for (std::size_t k : g.interior()) {
    double div = 0.0;
    for_each_face(g, v, k, [&](double vf, int side, std::size_t nb, int axis) {
      div += face_flux(g, omega, k, vf, side, nb, axis, explicit_eps) / g.spacing(axis);
    });
    next[k] = omega[k] - p.dt * div;
  }
  for (std::size_t b = 0; b < g.boundary().size(); ++b) next[g.boundary()[b].node] = dirichlet[b];

  if (p.implicit_diffusion && p.epsilon > 0.0) next = DirichletProblem(g, 1.0, p.dt * p.epsilon).solve(next, dirichlet);
  return next;
}

double boundary_flux(const Grid& g, std::span<const double> omega, const FaceVelocity& v, double epsilon) {
  check_sizes(g, omega, v);
  double flux = 0.0;
  for (std::size_t k : g.interior())
    for_each_face(g, v, k, [&](double vf, int side, std::size_t nb, int axis) {
      if (g.is_boundary(nb)) flux += face_flux(g, omega, k, vf, side, nb, axis, epsilon) * face_area(g, axis);
    });
  return flux;
}

double interior_mass(const Grid& g, std::span<const double> omega) {
  double m = 0.0;
  for (std::size_t k : g.interior()) m += omega[k];
  return m * g.cell_volume();
}

double mass_balance_defect(const Grid& g, std::span<const double> before, std::span<const double> after,
                           const FaceVelocity& v, const TransportParams& p) {
  return interior_mass(g, after) - interior_mass(g, before) + p.dt * boundary_flux(g, before, v, p.epsilon);
}

Field conservative_divergence(const Grid& g, std::span<const double> omega, const FaceVelocity& v) {
  check_sizes(g, omega, v);
  Field div(g.size(), 0.0);
  for (std::size_t k : g.interior())
    for_each_face(g, v, k, [&](double vf, int side, std::size_t nb, int axis) {
      div[k] += face_flux(g, omega, k, vf, side, nb, axis, 0.0) / g.spacing(axis);
    });
  return div;
}

Field nonconservative_divergence(const Grid& g, std::span<const double> omega, std::span<const double> h, double R) {
  const NodalVector v = velocity(g, h);
  Field out(g.size(), 0.0);
  for (std::size_t k : g.interior()) {
    const auto [i, j] = g.ij(k);
    double adv = v.x[k] * (omega[g.index(i + 1, j)] - omega[g.index(i - 1, j)]) / (2.0 * g.spacing(0));
    if (g.dimension() == 2)
      adv += v.y[k] * (omega[g.index(i, j + 1)] - omega[g.index(i, j - 1)]) / (2.0 * g.spacing(1));
    out[k] = adv + omega[k] * (cutoff(omega[k], R) - h[k]);
  }
  return out;
}

}  // namespace vflux
