// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "vortexflux/error.hpp"
#include "vortexflux/extension.hpp"

using namespace vflux;

namespace {

// a = +1 on the right edge, -1 on the left edge, 0 elsewhere.
Field edge_signs(const Grid& g) {
  Field a;
  for (const BoundaryNode& b : g.boundary()) {
    const auto x = g.coords(b.node);
    a.push_back(x[0] == 0.0 ? -1.0 : (x[0] == g.extent(0) ? 1.0 : 0.0));
  }
  return a;
}

double sup(const Field& f) { return *std::max_element(f.begin(), f.end()); }
double inf(const Field& f) { return *std::min_element(f.begin(), f.end()); }

}  // namespace

TEST_CASE("extend_gamma: b = 0 stays 0") {
  const Grid g = Grid::build(2, {1.0, 1.0}, {9, 9});
  const auto cls = classify_boundary(g, edge_signs(g));
  const BoundarySeries e = extend_gamma(g, BoundarySeries::constant(g, 0.0), cls);
  for (const Field& f : e.values())
    for (double v : f) CHECK(v == 0.0);
}

TEST_CASE("extend_gamma: inflow on the left edge keeps b there and tapers to zero") {
  const Grid g = Grid::build(2, {1.0, 1.0}, {17, 17});
  const auto cls = classify_boundary(g, edge_signs(g));
  const BoundarySeries e = extend_gamma(g, BoundarySeries::constant(g, 1.0), cls);
  const Field f = e.at(0.0);
  CHECK(sup(f) == 1.0);
  CHECK(inf(f) >= 0.0);
  const double L = 0.25;
  for (std::size_t s = 0; s < g.boundary().size(); ++s) {
    const auto x = g.coords(g.boundary()[s].node);
    if (cls.labels[s] == BoundaryLabel::Minus) CHECK(f[s] == 1.0);
    // Beyond the taper length from the left edge the extension vanishes.
    if (x[0] > L + 1e-12) CHECK(f[s] == 0.0);
  }
  // Decay along the bottom edge is monotone away from the inflow edge.
  double prev = 2.0;
  for (std::size_t i = 0; i < 17; ++i) {
    const std::size_t node = g.index(i, 0);
    for (std::size_t s = 0; s < g.boundary().size(); ++s)
      if (g.boundary()[s].node == node) {
        CHECK(f[s] <= prev);
        prev = f[s];
      }
  }
}

TEST_CASE("extend_gamma: 1-D two-point boundary") {
  const Grid g = Grid::build(1, {1.0}, {11});
  const auto cls = classify_boundary(g, Field{-1.0, 1.0});
  const BoundarySeries b({0.0, 1.0}, {Field{1.0, 7.0}, Field{2.0, 7.0}});
  const BoundarySeries e = extend_gamma(g, b, cls);
  CHECK(e.at(0.0)[0] == 1.0);
  CHECK(e.at(1.0)[0] == 2.0);
  CHECK(e.at(0.5)[0] == doctest::Approx(1.5));
  CHECK(e.at(0.0)[1] == 0.0);
  CHECK(e.max() <= b.max());
}

TEST_CASE("extend_gamma: sup preserved and identity on the inflow part for random data") {
  const Grid g = Grid::build(2, {2.0, 1.0}, {17, 9});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    Field a(g.boundary().size()), b(g.boundary().size());
    for (double& v : a) v = u(rng);
    for (double& v : b) v = pos(rng);
    const auto cls = classify_boundary(g, a);
    const Field e = extend_gamma(g, BoundarySeries({0.0}, {b}), cls).at(0.0);
    CHECK(sup(e) <= sup(b));
    CHECK(inf(e) >= 0.0);
    for (std::size_t s = 0; s < b.size(); ++s)
      if (cls.labels[s] == BoundaryLabel::Minus) CHECK(e[s] == b[s]);
  }
}

TEST_CASE("extend_gamma: negative b is a data error, data mode passes b through") {
  const Grid g = Grid::build(1, {1.0}, {5});
  const auto cls = classify_boundary(g, Field{-1.0, 1.0});
  CHECK_THROWS_AS(extend_gamma(g, BoundarySeries({0.0}, {Field{-0.1, 0.0}}), cls), DataError);
  ExtensionOptions opt;
  opt.gamma = GammaExtension::Data;
  const BoundarySeries b({0.0}, {Field{0.3, 0.6}});
  CHECK(extend_gamma(g, b, cls, opt).at(0.0) == Field{0.3, 0.6});
}

TEST_CASE("heat_extend: constant data gives the constant solution") {
  for (bool implicit : {true, false}) {
    const Grid g = Grid::build(2, {1.0, 1.0}, {9, 9});
    const SpaceTimeField w = heat_extend(g, BoundarySeries::constant(g, 0.7), constant_field(g, 0.7), 0.1,
                                         implicit ? 0.01 : 1e-3, implicit);
    for (const Field& f : w.values)
      for (double v : f) CHECK(v == doctest::Approx(0.7).epsilon(1e-13));
  }
}

TEST_CASE("heat_extend: a spike decays monotonically with zero boundary data") {
  const Grid g = Grid::build(2, {1.0, 1.0}, {17, 17});
  Field w0(g.size(), 0.0);
  w0[g.index(8, 8)] = 1.0;
  const SpaceTimeField w = heat_extend(g, BoundarySeries::constant(g, 0.0), w0, 0.2, 0.002);
  for (std::size_t k = 1; k < w.values.size(); ++k) CHECK(sup(w.values[k]) <= sup(w.values[k - 1]));
  CHECK(sup(w.values.back()) < 0.05);
  CHECK(w.values.front() == w0);
}

TEST_CASE("heat_extend: 1-D profile rises toward the steady solution 1 - x") {
  const Grid g = Grid::build(1, {1.0}, {21});
  const BoundarySeries b({0.0}, {Field{1.0, 0.0}});
  const SpaceTimeField w = heat_extend(g, b, constant_field(g, 0.0), 2.0, 0.01);
  const std::size_t mid = 10;
  for (std::size_t k = 2; k < w.values.size(); ++k) CHECK(w.values[k][mid] >= w.values[k - 1][mid] - 1e-15);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(w.values.back()[i] - (1.0 - g.coords(i)[0])) <= 1e-6);
  CHECK(w.at(1.0).size() == g.size());
}

TEST_CASE("heat_extend: discrete maximum principle for 100 random pairs") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const bool two_d = trial % 2 == 0;
    const Grid g = two_d ? Grid::build(2, {1.0, 1.0}, {9, 9}) : Grid::build(1, {1.0}, {17});
    Field w0(g.size());
    for (double& v : w0) v = 2.0 * u(rng);
    std::vector<Field> bs(3, Field(g.boundary().size()));
    for (Field& f : bs)
      for (double& v : f) v = 3.0 * u(rng);
    const BoundarySeries b({0.0, 0.05, 0.1}, bs);
    const bool implicit = trial % 4 < 2;
    const SpaceTimeField w = heat_extend(g, b, w0, 0.1, implicit ? 0.005 : 0.001, implicit);
    const double hi = std::max(sup(w0), b.max());
    CHECK(w.min() >= -1e-12);
    CHECK(w.max() <= hi + 1e-12);
  }
}

TEST_CASE("heat_extend: explicit stability violation is refused") {
  const Grid g = Grid::build(1, {1.0}, {101});
  CHECK_THROWS_AS(heat_extend(g, BoundarySeries::constant(g, 0.0), constant_field(g, 0.0), 1.0, 0.01, false),
                  StepRefused);
  CHECK_NOTHROW(heat_extend(g, BoundarySeries::constant(g, 0.0), constant_field(g, 0.0), 1.0, 0.01, true));
}

TEST_CASE("mollify_field: contraction, bounds and monotone step profile") {
  const Grid g = Grid::build(2, {1.0, 1.0}, {33, 33});
  Field step(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) step[k] = g.coords(k)[0] < 0.5 ? 0.2 : 0.9;
  const Field m = mollify_field(g, step, 0.1);
  CHECK(inf(m) >= 0.2 - 1e-15);
  CHECK(sup(m) <= 0.9 + 1e-15);
  for (std::size_t j = 0; j < 33; ++j)
    for (std::size_t i = 1; i < 33; ++i) CHECK(m[g.index(i, j)] >= m[g.index(i - 1, j)] - 1e-15);
  CHECK(m[g.index(15, 4)] > 0.2);  // smeared across the jump

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-2.0, 5.0);
  Field r(g.size());
  for (double& v : r) v = u(rng);
  const Field mr = mollify_field(g, r, 0.07);
  CHECK(inf(mr) >= inf(r) - 1e-15);
  CHECK(sup(mr) <= sup(r) + 1e-15);
  CHECK(mollify_field(g, r, 0.0) == r);
}

TEST_CASE("mollify_field: first-order convergence in the radius") {
  const Grid g = Grid::build(1, {1.0}, {2049});
  Field f(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) f[k] = g.coords(k)[0];  // linear: only the edge truncation errs
  auto err = [&](double radius) {
    const Field m = mollify_field(g, f, radius);
    double e = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) e = std::max(e, std::abs(m[k] - f[k]));
    return e;
  };
  const double e1 = err(0.04), e2 = err(0.02), e3 = err(0.01);
  CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.1));
  CHECK(e2 / e3 == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("project_signs keeps the sign pattern across a single sign change") {
  const Grid g = Grid::build(2, {1.0, 1.0}, {17, 17});
  Field a;
  for (const BoundaryNode& b : g.boundary()) {
    const double s = b.arc;
    a.push_back(std::abs(s - 2.0) < 1e-12 ? 0.0 : (s < 2.0 ? 1.0 : -1.0));
  }
  const auto cls = classify_boundary(g, a);
  const Field sm = mollify_boundary(g, a, 0.3);
  const Field pa = project_signs(sm, a, cls, 0.0);
  CHECK(classify_boundary(g, pa).labels == cls.labels);
  for (std::size_t s = 0; s < a.size(); ++s) {
    if (cls.labels[s] == BoundaryLabel::Zero) CHECK(pa[s] == 0.0);
    CHECK(std::abs(pa[s]) <= 1.0);
  }
  CHECK(mollify_boundary(Grid::build(1, {1.0}, {5}), Field{-1.0, 2.0}, 0.5) == Field{-1.0, 2.0});
}

TEST_CASE("build_extension: traces, bounds and mollifier limit") {
  const Grid g = Grid::build(2, {1.0, 1.0}, {17, 17});
  const BoundarySeries a({0.0}, {edge_signs(g)});
  const Field w0 = constant_field(g, 0.25);
  const ExtensionResult r = build_extension(g, a, BoundarySeries::constant(g, 0.8), w0, 0.5, 0.02, 1.0);
  CHECK(r.omega_breve.values.front() == w0);
  CHECK(r.omega_breve.min() >= 0.0);
  CHECK(r.aleph_measured <= 0.8 + 1e-12);
  CHECK(r.aleph_measured == r.omega_breve.max());
  for (const Field& f : r.omega_breve_eps.values) {
    CHECK(inf(f) >= 0.0);
    CHECK(sup(f) <= 1.0);
  }
  const Field tr = r.omega_breve.at(0.25);
  for (std::size_t s = 0; s < g.boundary().size(); ++s)
    if (r.classification.labels[s] == BoundaryLabel::Minus) CHECK(tr[g.boundary()[s].node] == doctest::Approx(0.8));
  CHECK(classify_boundary(g, r.a_eps.at(0.3)).labels == r.classification.labels);
  CHECK(r.dirichlet(g, 0.1).size() == g.boundary().size());
  CHECK(!r.mollifier.empty());

  // eps = 0 leaves the data untouched.
  const ExtensionResult z = build_extension(g, a, BoundarySeries::constant(g, 0.8), w0, 0.5, 0.0, 1.0);
  CHECK(z.omega_breve_eps.values == z.omega_breve.values);
  CHECK(z.a_eps.values() == a.values());
}

TEST_CASE("build_extension: sign drift of a over time is a data error") {
  const Grid g = Grid::build(1, {1.0}, {9});
  const BoundarySeries a({0.0, 1.0}, {Field{-1.0, 1.0}, Field{1.0, 1.0}});
  CHECK_THROWS_AS(build_extension(g, a, BoundarySeries::constant(g, 1.0), constant_field(g, 0.0), 1.0, 0.01, 1.0),
                  DataError);
  Field neg = constant_field(g, 0.0);
  neg[3] = -1.0;
  CHECK_THROWS_AS(build_extension(g, BoundarySeries({0.0}, {Field{-1.0, 1.0}}), BoundarySeries::constant(g, 1.0), neg,
                                  1.0, 0.01, 1.0),
                  DataError);
}

TEST_CASE("BoundaryTable: CSV round trip and malformed input") {
  BoundaryTable t{{{0.0, 0.0, 1.5}, {0.0, 2.0, -0.25}, {1.0, 0.5, 3.0}}};
  std::stringstream ss;
  t.write_csv(ss);
  const BoundaryTable back = BoundaryTable::read_csv(ss);
  REQUIRE(back.rows.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(back.rows[k].t == t.rows[k].t);
    CHECK(back.rows[k].arc == t.rows[k].arc);
    CHECK(back.rows[k].value == t.rows[k].value);
  }
  std::istringstream bad("time,arc,value\n0,1\n");
  CHECK_THROWS_AS(BoundaryTable::read_csv(bad), IoError);
  std::istringstream empty("time,arc,value\n");
  CHECK_THROWS_AS(BoundaryTable::read_csv(empty), IoError);
}

TEST_CASE("BoundarySeries: linear in time, held outside the samples") {
  const BoundarySeries s({1.0, 3.0}, {Field{0.0, 2.0}, Field{4.0, 2.0}});
  CHECK(s.at(0.0) == Field{0.0, 2.0});
  CHECK(s.at(2.0) == Field{2.0, 2.0});
  CHECK(s.at(9.0) == Field{4.0, 2.0});
  CHECK(s.max() == 4.0);
  CHECK(s.min() == 0.0);
  CHECK_THROWS_AS(BoundarySeries({1.0, 1.0}, {Field{0.0}, Field{1.0}}), DataError);
}
