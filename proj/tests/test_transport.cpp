// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "vortexflux/error.hpp"
#include "vortexflux/transport.hpp"

using namespace vflux;
using std::numbers::pi;

namespace {

Field random_field(std::size_t n, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Field f(n);
  for (double& v : f) v = u(rng);
  return f;
}

}  // namespace

TEST_CASE("cutoff: clamps and identity") {
  CHECK(cutoff(5.0, 3.0) == 3.0);
  CHECK(cutoff(-1.0, 3.0) == 0.0);
  CHECK(cutoff(2.0, 3.0) == 2.0);
  const Field f = cutoff(Field{-2.0, 0.5, 7.0}, 1.0);
  CHECK(f == Field{0.0, 0.5, 1.0});
}

TEST_CASE("cutoff: monotone, 1-Lipschitz, idempotent") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), b = u(rng), R = 0.1 + std::abs(u(rng));
    if (a <= b) CHECK(cutoff(a, R) <= cutoff(b, R));
    CHECK(std::abs(cutoff(a, R) - cutoff(b, R)) <= std::abs(a - b));
    CHECK(cutoff(cutoff(a, R), R) == cutoff(a, R));
    CHECK(cutoff(a, R) >= 0.0);
    CHECK(cutoff(a, R) <= R);
  }
}

TEST_CASE("cfl_dt: formula values") {
  const Grid g = Grid::build(1, {1.0}, {11});
  CHECK(cfl_dt(g, uniform_face_velocity(g, {0.0, 0.0}), 0.0, 0.5, 0.3) == 0.3);
  CHECK(cfl_dt(g, uniform_face_velocity(g, {1.0, 0.0}), 0.0, 0.5, 1.0) == doctest::Approx(0.05).epsilon(1e-14));
  CHECK(cfl_dt(g, uniform_face_velocity(g, {0.0, 0.0}), 0.01, 0.5, 1.0) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("no flux and no diffusion leaves the interior unchanged") {
  const Grid g = Grid::build(2, {1.0, 1.0}, {9, 9});
  const Field w = random_field(g.size(), 1, 0.0, 1.0);
  TransportParams p;
  p.dt = 0.1;
  const Field next = advect_diffuse_step(g, w, uniform_face_velocity(g, {0.0, 0.0}), p, Field(g.boundary().size(), 0.0));
  for (std::size_t k : g.interior()) CHECK(next[k] == w[k]);
  for (const BoundaryNode& b : g.boundary()) CHECK(next[b.node] == 0.0);
}

TEST_CASE("unit Courant number shifts a pulse by one cell exactly") {
  const Grid g = Grid::build(1, {1.0}, {21});
  Field w(g.size(), 0.0);
  for (std::size_t k = 5; k <= 8; ++k) w[k] = 1.0;
  w[9] = 0.4;
  TransportParams p;
  p.dt = g.spacing(0);
  const FaceVelocity v = uniform_face_velocity(g, {1.0, 0.0});
  Field cur = w;
  for (int step = 1; step <= 5; ++step) {
    cur = advect_diffuse_step(g, cur, v, p, Field{0.0, cur.back()});
    for (std::size_t k = 1; k + 1 < g.size(); ++k) {
      const double expect = k >= static_cast<std::size_t>(step) ? w[k - step] : 0.0;
      CHECK(std::abs(cur[k] - expect) <= 1e-14);
    }
  }
}

TEST_CASE("unit Courant shift in 2-D along y") {
  const Grid g = Grid::build(2, {1.0, 1.0}, {11, 11});
  Field w(g.size(), 0.0);
  for (std::size_t i = 3; i <= 6; ++i) w[g.index(i, 3)] = 1.0 + 0.1 * static_cast<double>(i);
  TransportParams p;
  p.dt = g.spacing(1);
  const Field next = advect_diffuse_step(g, w, uniform_face_velocity(g, {0.0, 1.0}), p, Field(g.boundary().size(), 0.0));
  for (std::size_t k : g.interior()) {
    const auto [i, j] = g.ij(k);
    CHECK(std::abs(next[k] - w[g.index(i, j - 1)]) <= 1e-14);
  }
}

TEST_CASE("diffusion of a spike matches the explicit heat stencil") {
  const Grid g = Grid::build(2, {1.0, 1.0}, {11, 11});
  Field w(g.size(), 0.0);
  const std::size_t c = g.index(5, 5);
  w[c] = 1.0;
  TransportParams p;
  p.epsilon = 0.01;
  const FaceVelocity v0 = uniform_face_velocity(g, {0.0, 0.0});
  p.dt = 0.9 * admissible_dt(g, v0, p.epsilon, false);
  const double r = p.epsilon * p.dt / (g.spacing(0) * g.spacing(0));
  const Field next = advect_diffuse_step(g, w, v0, p, Field(g.boundary().size(), 0.0));
  CHECK(next[c] == doctest::Approx(1.0 - 4.0 * r).epsilon(1e-14));
  for (std::size_t nb : {g.index(4, 5), g.index(6, 5), g.index(5, 4), g.index(5, 6)})
    CHECK(next[nb] == doctest::Approx(r).epsilon(1e-14));
  CHECK(interior_mass(g, next) == doctest::Approx(interior_mass(g, w)).epsilon(1e-14));

  // Many steps: symmetry under the square's reflections, mass lost only through the boundary.
  Field cur = w;
  for (int s = 0; s < 60; ++s) {
    const Field nxt = advect_diffuse_step(g, cur, v0, p, Field(g.boundary().size(), 0.0));
    CHECK(std::abs(mass_balance_defect(g, cur, nxt, v0, p)) <= 1e-15);
    CHECK(interior_mass(g, nxt) <= interior_mass(g, cur) + 1e-16);
    cur = nxt;
  }
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto [i, j] = g.ij(k);
    CHECK(cur[k] == doctest::Approx(cur[g.index(10 - i, j)]).epsilon(1e-13));
    CHECK(cur[k] == doctest::Approx(cur[g.index(j, i)]).epsilon(1e-13));
  }
}

TEST_CASE("positivity under the admissible step for random data") {
  const Grid g = Grid::build(2, {1.0, 1.0}, {17, 17});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Field w = random_field(g.size(), seed, 0.0, 2.0);
    const Field h = random_field(g.size(), 1000 + seed, -1.0, 1.0);
    const FaceVelocity v = face_velocity(g, h);
    TransportParams p;
    p.epsilon = 1e-3 * static_cast<double>(seed % 4);
    p.dt = admissible_dt(g, v, p.epsilon, false);
    const Field next = advect_diffuse_step(g, w, v, p, random_field(g.boundary().size(), seed + 7, 0.0, 1.0));
    for (double x : next) CHECK(x >= -1e-12);
    CHECK(std::abs(mass_balance_defect(g, w, next, v, p)) <= 1e-10 * interior_mass(g, w));
  }
}

TEST_CASE("step above the admissible bound is refused with the bound") {
  const Grid g = Grid::build(1, {1.0}, {11});
  const FaceVelocity v = uniform_face_velocity(g, {2.0, 0.0});
  TransportParams p;
  p.epsilon = 0.01;
  const double lim = admissible_dt(g, v, p.epsilon, false);
  p.dt = 1.01 * lim;
  try {
    advect_diffuse_step(g, Field(g.size(), 1.0), v, p, Field{1.0, 1.0});
    FAIL("step was accepted");
  } catch (const StepRefused& e) {
    CHECK(e.admissible() == lim);
    CHECK(e.requested() == p.dt);
  }
  p.dt = lim;
  CHECK_NOTHROW(advect_diffuse_step(g, Field(g.size(), 1.0), v, p, Field{1.0, 1.0}));
}

TEST_CASE("implicit diffusion: large steps stay positive and agree with small explicit steps") {
  const Grid g = Grid::build(1, {1.0}, {41});
  Field w(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) w[k] = std::sin(pi * g.coords(k)[0]);
  const FaceVelocity v = uniform_face_velocity(g, {0.0, 0.0});
  TransportParams imp;
  imp.epsilon = 0.05;
  imp.implicit_diffusion = true;
  imp.dt = 50.0 * admissible_dt(g, v, imp.epsilon, false);
  CHECK(std::isinf(admissible_dt(g, v, imp.epsilon, true)));
  const Field big = advect_diffuse_step(g, w, v, imp, Field{0.0, 0.0});
  for (double x : big) CHECK(x >= 0.0);

  // Both schemes approach exp(-eps pi^2 t) sin(pi x) for a short final time.
  const double T = 0.2;
  auto march = [&](bool implicit, int steps) {
    TransportParams p;
    p.epsilon = 0.05;
    p.implicit_diffusion = implicit;
    p.dt = T / steps;
    Field cur = w;
    for (int s = 0; s < steps; ++s) cur = advect_diffuse_step(g, cur, v, p, Field{0.0, 0.0});
    return cur;
  };
  const Field e = march(false, 400), i = march(true, 400);
  const double mid = std::exp(-0.05 * pi * pi * T);
  CHECK(e[20] == doctest::Approx(mid).epsilon(2e-3));
  CHECK(i[20] == doctest::Approx(mid).epsilon(2e-3));
}

TEST_CASE("boundary flux: outflow positive, inflow negative") {
  const Grid g = Grid::build(1, {1.0}, {11});
  const Field w(g.size(), 2.0);
  CHECK(boundary_flux(g, w, uniform_face_velocity(g, {1.0, 0.0}), 0.0) == doctest::Approx(0.0).epsilon(1e-15));
  Field left = w;
  left[0] = 0.0;
  // Uniform v = 1: density 2 leaves at x = 1, nothing enters from the empty left end.
  CHECK(boundary_flux(g, left, uniform_face_velocity(g, {1.0, 0.0}), 0.0) == doctest::Approx(2.0));
  // Upwinding takes the outflow value from the interior side, so the empty right end changes nothing.
  Field right = w;
  right.back() = 0.0;
  CHECK(boundary_flux(g, right, uniform_face_velocity(g, {1.0, 0.0}), 0.0) == doctest::Approx(0.0).epsilon(1e-15));
  // Density 2 entering at x = 0 into an empty interior.
  Field inflow(g.size(), 0.0);
  inflow[0] = 2.0;
  CHECK(boundary_flux(g, inflow, uniform_face_velocity(g, {1.0, 0.0}), 0.0) == doctest::Approx(-2.0));
}

TEST_CASE("conservative and nonconservative divergence agree to first order") {
  // h solves the field equation so div_h v = [w]_R - h holds at interior nodes.
  auto gap = [](std::size_t n) {
    const Grid g = Grid::build(1, {1.0}, {n});
    Field w(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) w[k] = 1.0 + 0.5 * std::cos(pi * g.coords(k)[0]);
    const Field h = solve_h(g, cutoff(w, 10.0), Field{0.1, -0.2});
    const Field c = conservative_divergence(g, w, face_velocity(g, h));
    const Field nc = nonconservative_divergence(g, w, h, 10.0);
    double e = 0.0;
    for (std::size_t k = 2; k + 2 < g.size(); ++k) e = std::max(e, std::abs(c[k] - nc[k]));
    return e;
  };
  const double e2 = gap(81), e3 = gap(161), e4 = gap(321);
  CHECK(e2 / e3 >= 1.8);
  CHECK(e3 / e4 >= 1.8);
}
