// SPDX-License-Identifier: Apache-2.0
//
// Acceptance criteria: one PASS / FAIL line each, exit status 1 when any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "vortexflux/diagnostics.hpp"
#include "vortexflux/elliptic.hpp"
#include "vortexflux/extension.hpp"
#include "vortexflux/io.hpp"

using namespace vflux;
using std::numbers::pi;

namespace {

int failed = 0;

void report(int id, const char* what, bool ok, const std::string& detail) {
  std::printf("[%s] %2d %s: %s\n", ok ? "PASS" : "FAIL", id, what, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failed;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

SimConfig load(const char* name) { return parse_config(std::string(VF_SOURCE_DIR "/configs/") + name).config; }

double manufactured_error(std::size_t n) {
  const Grid g = Grid::build(2, {1.0, 1.0}, {n, n});
  Field w(g.size()), exact(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto x = g.coords(k);
    exact[k] = std::cos(pi * x[0]) * std::cos(pi * x[1]);
    w[k] = (1.0 + 2.0 * pi * pi) * exact[k];
  }
  const Field h = solve_h(g, w, Field(g.boundary().size(), 0.0));
  double e = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) e = std::max(e, std::abs(h[k] - exact[k]));
  return e;
}

void criterion_1() {
  const Timer t;
  const double e32 = manufactured_error(33), e64 = manufactured_error(65);
  const double ratio = e32 / e64;
  const double s = t.seconds();
  report(1, "elliptic convergence", ratio >= 3.5 && ratio <= 4.5 && s < 10.0,
         fmt("err(1/32) %.3e, err(1/64) %.3e, ratio %.4f in [3.5, 4.5], %.2f s (< 10 s)", e32, e64, ratio, s));
}

void criterion_2() {
  const SimConfig c = load("constant.ini");
  const Trajectory tr = run(c);
  double dev = 0.0;
  for (const Snapshot& s : tr.snapshots)
    for (double v : s.omega) dev = std::max(dev, std::abs(v - 1.0));
  int iters = 0;
  for (const StepStats& st : tr.steps) iters = std::max(iters, st.iterations);
  report(2, "steady-state exactness", dev <= 1e-12 && iters <= 2,
         fmt("max |w - 1| %.3e (<= 1e-12), max Picard iterations %d (<= 2), %zu snapshots", dev, iters,
             tr.snapshots.size()));
}

// Gaussian bump initial density and a = A cos(2 pi s / 4 + phi) on the unit square.
SimConfig random_config(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SimConfig c;
  c.grid = Grid::build(2, {1.0, 1.0}, {33, 33});
  c.T = 0.5;
  c.epsilon = 1e-3 + 1.9e-2 * u(rng);
  c.output_dt = 0.05;
  const double amp = 0.1 + 0.4 * u(rng), phase = 2.0 * pi * u(rng);
  for (int k = 0; k < 64; ++k) {
    const double s = 4.0 * k / 64.0;
    c.data.a.rows.push_back({0.0, s, amp * std::cos(2.0 * pi * s / 4.0 + phase)});
  }
  c.data.b = BoundaryTable::constant(1.5 * u(rng));
  const double base = 0.3 * u(rng), peak = 0.5 + 1.5 * u(rng);
  const double cx = 0.3 + 0.4 * u(rng), cy = 0.3 + 0.4 * u(rng), width = 0.1 + 0.2 * u(rng);
  Field w0(c.grid.size());
  for (std::size_t k = 0; k < w0.size(); ++k) {
    const auto x = c.grid.coords(k);
    const double r2 = (x[0] - cx) * (x[0] - cx) + (x[1] - cy) * (x[1] - cy);
    w0[k] = base + peak * std::exp(-r2 / (width * width));
  }
  c.data.set_omega0(c.grid, w0);
  c.default_aleph();
  c.R = 2.0 * c.aleph;
  return c;
}

void criteria_3_4() {
  constexpr int kRuns = 20;
  std::vector<SimConfig> configs;
  for (int i = 0; i < kRuns; ++i) configs.push_back(random_config(1000 + i));

  const Timer t;
  double min_w = INFINITY;
  for (const SimConfig& c : configs) min_w = std::min(min_w, run(c).min_omega());
  const double s = t.seconds();
  report(3, "positivity suite", min_w >= -1e-10 && s < 120.0,
         fmt("%d runs on 33 x 33, min w %.3e (>= -1e-10), %.1f s (< 120 s)", kRuns, min_w, s));

  double worst = -INFINITY;
  int certified = 0;
  for (const SimConfig& c : configs) {
    const RStarResult r = estimate_R_star(c);
    if (!r.found) continue;
    ++certified;
    worst = std::max(worst, check_max_principle(*r.at_R, c.aleph).value);
  }
  report(4, "maximum principle at R*", certified == kRuns && worst <= 1e-8,
         fmt("%d/%d runs certified, largest max w - max(max h, aleph) = %.3e (<= 1e-8)", certified, kRuns, worst));
}

void criterion_5(const SimConfig& inflow) {
  const RStarResult r = estimate_R_star(inflow);
  const double d = r.found ? trajectory_difference(*r.at_R, *r.at_2R) : INFINITY;
  report(5, "cut-off inactivity", r.found && d < 1e-12,
         fmt("R* = %.6g after %zu probes, sup difference between R* and 2R* runs %.3e (< 1e-12)", r.R,
             r.probes.size(), d));
}

FamilyResult criteria_6_7(const SimConfig& sweep) {
  const FamilyResult fam = eps_continuation(sweep, sweep.sweep.eps_list, 4);
  const InvariantReport rep = family_report(fam);
  auto value = [&](const char* name) {
    const ReportEntry* e = rep.find(name);
    return e ? e->value : NAN;
  };
  const double l1 = value("family_l1_ratio"), mx = value("family_max_omega_ratio");
  const double ge = value("family_gradient_energy_ratio");
  const bool ok6 = rep.find("family_failures")->status == CheckStatus::Pass && l1 < 3.0 && mx < 1.1 && ge < 3.0;
  report(6, "epsilon uniformity", ok6,
         fmt("%zu members, max L1 ratio %.4f (< 3), max w ratio %.4f (< 1.1), sqrt(eps) grad energy ratio %.4f (< 3)",
             fam.members.size(), l1, mx, ge));

  bool strict = fam.cauchy.size() == fam.members.size() - 1;
  std::string dists;
  for (std::size_t i = 0; i < fam.cauchy.size(); ++i) {
    dists += fmt("%s%.4e", i ? ", " : "", fam.cauchy[i].distance);
    strict = strict && std::isfinite(fam.cauchy[i].distance);
    if (i > 0) strict = strict && fam.cauchy[i].distance < fam.cauchy[i - 1].distance;
  }
  report(7, "limit transition", strict, "consecutive L2(0,T;H^-1) distances " + dists + " strictly decreasing");
  return fam;
}

void criterion_9(const SimConfig& sweep, const FamilyResult& fam) {
  // Boundary-layer table: sup over the family per sigma, J2 at the finest level.
  std::vector<double> sigmas = sweep.checks.sigmas;
  std::sort(sigmas.begin(), sigmas.end(), std::greater<>());
  std::vector<double> sup(sigmas.size(), 0.0);
  double j2_err = INFINITY;
  bool complete = true;
  for (const FamilyMember& m : fam.members) {
    if (!m.trajectory) {
      complete = false;
      continue;
    }
    const TestFunction psi = make_test_functions(sweep.grid, m.extension->classification, sweep.T, 1, sweep.seed).front();
    for (std::size_t k = 0; k < sigmas.size(); ++k) {
      const LayerFlux lf = boundary_layer_flux(*m.trajectory, *m.extension, sigmas[k], psi, sweep.data);
      sup[k] = std::max(sup[k], lf.J1);
      if (&m == &fam.members.back() && k + 1 == sigmas.size())
        j2_err = std::abs(lf.J2 - lf.target) / std::abs(lf.target);
    }
  }
  bool monotone = complete && sigmas.size() == 3 && fam.members.size() == 4;
  std::string col;
  for (std::size_t k = 0; k < sup.size(); ++k) {
    col += fmt("%s%.4e", k ? ", " : "", sup[k]);
    if (k > 0) monotone = monotone && sup[k] < sup[k - 1];
  }
  report(9, "boundary-layer limit", monotone && j2_err <= 0.05,
         fmt("sup_eps J1 for sigma %.3g, %.3g, %.3g: ", sigmas[0], sigmas[1], sigmas[2]) + col +
             fmt(" (decreasing); J2 relative error at the finest level %.4f (<= 0.05)", j2_err));
}

void criterion_8(const SimConfig& inflow) {
  // eps tracks the spacing so that every level halves dt, spacing and the viscous layer together.
  std::vector<double> worst;
  for (std::size_t n : {101u, 201u, 401u}) {
    SimConfig c = inflow;
    c.grid = Grid::build(1, {1.0}, {n});
    c.epsilon = 0.1 * c.grid.spacing(0);
    c.output_dt = 0.0;
    c.data.set_omega0(c.grid, Field(n, 0.0));
    const ExtensionResult ext = make_extension(c);
    const Trajectory tr = run(c, ext);
    double r = 0.0;
    for (const TestFunction& psi : make_test_functions(c.grid, ext.classification, c.T, 3, c.seed))
      r = std::max(r, weak_residual(tr, psi, c.data, ext.classification).residual);
    worst.push_back(r);
  }
  const double q1 = worst[0] / worst[1], q2 = worst[1] / worst[2];
  report(8, "weak identity refinement", q1 >= 1.5 && q2 >= 1.5,
         fmt("largest residual over 3 psi at N = 101, 201, 401: %.4e, %.4e, %.4e; ratios %.3f, %.3f (>= 1.5)",
             worst[0], worst[1], worst[2], q1, q2));
}

void criterion_10() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // About a third of the samples are zero so that the lower bound is exercised.
  auto sample = [&] { return u(rng) < 0.3 ? 0.0 : 2.0 * u(rng); };
  double below = INFINITY, above = -INFINITY;
  for (int trial = 0; trial < 100; ++trial) {
    const Grid g = trial % 2 ? Grid::build(1, {1.0}, {33}) : Grid::build(2, {1.0, 1.0}, {17, 17});
    Field w0(g.size());
    for (double& v : w0) v = sample();
    std::vector<Field> bs(4, Field(g.boundary().size()));
    for (Field& f : bs)
      for (double& v : f) v = sample();
    const BoundarySeries b({0.0, 0.1, 0.2, 0.3}, bs);
    const SpaceTimeField w = heat_extend(g, b, w0, 0.3, 0.003, true);
    const double hi = std::max(*std::max_element(w0.begin(), w0.end()), b.max());
    below = std::min(below, w.min());
    above = std::max(above, w.max() - hi);
  }
  double dev = 0.0;
  for (int dim : {1, 2})
    for (double c : {0.0, 0.6, 1.0, 3.7})
      for (bool implicit : {true, false}) {
        const Grid g = dim == 1 ? Grid::build(1, {1.0}, {33}) : Grid::build(2, {1.0, 1.0}, {17, 17});
        const SpaceTimeField w =
            heat_extend(g, BoundarySeries::constant(g, c), constant_field(g, c), 0.3, implicit ? 0.003 : 3e-4, implicit);
        for (const Field& f : w.values)
          for (double v : f) dev = std::max(dev, std::abs(v - c));
      }
  report(10, "heat extension bounds", below >= 0.0 && above <= 1e-12 && dev == 0.0,
         fmt("100 random pairs: min %.3e (>= 0), excess over max(inputs) %.3e (<= 1e-12); constant data deviation %.3e (exact)", below,
             above, dev));
}

void criterion_11() {
  const Grid g = Grid::build(2, {1.0, 1.0}, {9, 9});
  const GreenOperators G = build_green_operators(g);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double err = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    Field w(g.size()), a(g.boundary().size());
    for (double& v : w) v = u(rng);
    for (double& v : a) v = u(rng);
    const Field h = solve_h(g, w, a);
    const Field k = G.apply(w, a);
    for (std::size_t i = 0; i < h.size(); ++i) err = std::max(err, std::abs(h[i] - k[i]));
  }
  const double kmin = G.K1.minCoeff();
  report(11, "Green representation", err <= 1e-10 && kmin >= -1e-12,
         fmt("10 pairs on 9 x 9, max |h - (K1 w + K2 a)| %.3e (<= 1e-10), min K1 entry %.3e (>= -1e-12)", err, kmin));
}

}  // namespace

int main() {
  const Timer total;
  const SimConfig inflow = load("inflow.ini");
  const SimConfig sweep = load("inflow_sweep.ini");
  criterion_1();
  criterion_2();
  criteria_3_4();
  criterion_5(inflow);
  const FamilyResult fam = criteria_6_7(sweep);
  criterion_8(inflow);
  criterion_9(sweep, fam);
  criterion_10();
  criterion_11();
  std::printf("%d criteria failed, %.1f s\n", failed, total.seconds());
  return failed ? 1 : 0;
}
