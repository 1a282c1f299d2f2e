// SPDX-License-Identifier: Apache-2.0
#include "vortexflux/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <numbers>
#include <random>
#include <sstream>

#include "vortexflux/error.hpp"

namespace vflux {

const char* to_string(CheckStatus s) noexcept {
  switch (s) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::Info: return "info";
  }
  return "?";
}

CheckStatus parse_check_status(const std::string& text) {
  if (text == "pass") return CheckStatus::Pass;
  if (text == "fail") return CheckStatus::Fail;
  if (text == "info") return CheckStatus::Info;
  throw IoError("unknown check status '" + text + "'");
}

void InvariantReport::add(ReportEntry e) {
  for (const ReportEntry& x : entries)
    if (x.name == e.name) throw Error("duplicate report entry " + e.name);
  entries.push_back(std::move(e));
}

void InvariantReport::add(std::string name, bool ok, double value, double tolerance, std::string reference) {
  add({std::move(name), ok ? CheckStatus::Pass : CheckStatus::Fail, value, tolerance, std::move(reference)});
}

void InvariantReport::info(std::string name, double value, std::string reference) {
  add({std::move(name), CheckStatus::Info, value, 0.0, std::move(reference)});
}

const ReportEntry* InvariantReport::find(const std::string& name) const {
  for (const ReportEntry& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

bool InvariantReport::passed() const {
  return std::none_of(entries.begin(), entries.end(), [](const ReportEntry& e) { return e.status == CheckStatus::Fail; });
}

std::vector<std::string> InvariantReport::failures() const {
  std::vector<std::string> out;
  for (const ReportEntry& e : entries)
    if (e.status == CheckStatus::Fail) out.push_back(e.name);
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw IoError("malformed number '" + s + "'");
  return v;
}

}  // namespace

void InvariantReport::write_csv(std::ostream& os) const {
  os << "# epsilon " << fmt(epsilon) << '\n'
     << "# R " << fmt(R) << '\n'
     << "# grid " << grid << '\n'
     << "# dt_min " << fmt(dt_min) << '\n'
     << "# dt_max " << fmt(dt_max) << '\n'
     << "name,status,value,tolerance,reference\n";
  for (const ReportEntry& e : entries)
    os << e.name << ',' << to_string(e.status) << ',' << fmt(e.value) << ',' << fmt(e.tolerance) << ','
       << quote(e.reference) << '\n';
}

InvariantReport InvariantReport::read_csv(std::istream& is) {
  InvariantReport r;
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto sp = line.find(' ', 2);
      const std::string key = line.substr(2, sp == std::string::npos ? std::string::npos : sp - 2);
      const std::string val = sp == std::string::npos ? std::string() : line.substr(sp + 1);
      if (key == "epsilon") r.epsilon = parse_double(val);
      else if (key == "R") r.R = parse_double(val);
      else if (key == "grid") r.grid = val;
      else if (key == "dt_min") r.dt_min = parse_double(val);
      else if (key == "dt_max") r.dt_max = parse_double(val);
      continue;
    }
    if (!header) {
      if (line != "name,status,value,tolerance,reference") throw IoError("unexpected report header: " + line);
      header = true;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 5) throw IoError("malformed report row: " + line);
    r.entries.push_back({f[0], parse_check_status(f[1]), parse_double(f[2]), parse_double(f[3]), f[4]});
  }
  if (!header) throw IoError("report has no header row");
  return r;
}

std::string InvariantReport::summary() const {
  std::ostringstream os;
  std::size_t pass = 0, fail = 0, info = 0;
  for (const ReportEntry& e : entries) {
    if (e.status == CheckStatus::Pass) ++pass;
    else if (e.status == CheckStatus::Fail) ++fail;
    else ++info;
  }
  os << "invariant report: epsilon " << epsilon << ", R " << R << ", " << grid << ", dt in [" << dt_min << ", "
     << dt_max << "]\n";
  for (const ReportEntry& e : entries) {
    char line[256];
    std::snprintf(line, sizeof line, "  %-4s  %-36s %14.6g", to_string(e.status), e.name.c_str(), e.value);
    os << line;
    if (e.status != CheckStatus::Info) os << "  (tol " << e.tolerance << ")";
    os << '\n';
  }
  os << pass << " passed, " << fail << " failed, " << info << " informational\n";
  return os.str();
}

ReportEntry check_positivity(const Trajectory& traj) {
  const double tol = -1e-10 * std::max(traj.aleph, 1.0);
  const double m = traj.min_omega();
  return {"positivity", m >= tol ? CheckStatus::Pass : CheckStatus::Fail, m, tol,
          "vortex density stays nonnegative"};
}

std::vector<std::pair<double, double>> l1_series(const Trajectory& traj) {
  std::vector<std::pair<double, double>> out;
  for (const Snapshot& s : traj.snapshots) out.emplace_back(s.t, l1_norm(traj.grid, s.omega));
  return out;
}

ReportEntry check_l1_series(const Trajectory& traj) {
  const double m = traj.max_l1();
  return {"l1_bound", std::isfinite(m) ? CheckStatus::Pass : CheckStatus::Fail, m, INFINITY,
          "L1 norm of the density bounded in time"};
}

ReportEntry check_max_principle(const Trajectory& traj, double aleph) {
  const double excess = traj.max_omega() - std::max(traj.max_h(), aleph);
  return {"max_principle", excess <= 1e-8 ? CheckStatus::Pass : CheckStatus::Fail, excess, 1e-8,
          "max w <= max(max h, aleph); value is the excess"};
}

ReportEntry check_gradient_energy(const Trajectory& traj) {
  return {"gradient_energy", CheckStatus::Info, traj.gradient_energy(), 0.0,
          "sqrt(eps) ||grad w||_L2 over the space-time domain"};
}

double TestFunction::time_factor(double t) const { return std::pow(std::max(0.0, 1.0 - t / T), p); }

double TestFunction::time_derivative(double t) const {
  return -p / T * std::pow(std::max(0.0, 1.0 - t / T), p - 1.0);
}

void TestFunction::verify(const Grid& grid, const BoundaryClassification& cls) {
  vanishes_at_T = time_factor(T) == 0.0;
  vanishes_off_inflow = true;
  for (std::size_t s = 0; s < grid.boundary().size(); ++s)
    if (cls.labels[s] != BoundaryLabel::Minus && S[grid.boundary()[s].node] != 0.0) vanishes_off_inflow = false;
}

std::vector<TestFunction> make_test_functions(const Grid& grid, const BoundaryClassification& cls, double T,
                                              std::size_t count, std::uint64_t seed) {
  const auto& bnd = grid.boundary();
  const double sm = grid.min_extent() / 8.0;
  Field mask(grid.size(), 1.0);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto x = grid.coords(k);
    double D = INFINITY;
    for (std::size_t s = 0; s < bnd.size(); ++s) {
      if (cls.labels[s] == BoundaryLabel::Minus) continue;
      const auto y = grid.coords(bnd[s].node);
      D = std::min(D, std::hypot(x[0] - y[0], x[1] - y[1]));
    }
    const double u = std::clamp((D - sm) / sm, 0.0, 1.0);
    mask[k] = u * u * (3.0 - 2.0 * u);
  }

  std::mt19937_64 rng(seed);
  auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::vector<TestFunction> out;
  for (std::size_t m = 1; m <= count; ++m) {
    TestFunction f;
    f.T = T;
    f.frequency = static_cast<int>(m);
    f.amplitude = 0.2 + 0.4 * uniform();
    f.p = 2.0 + static_cast<double>(rng() % 2);
    f.S.resize(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const auto x = grid.coords(k);
      double c = std::cos(m * std::numbers::pi * x[0] / grid.extent(0));
      if (grid.dimension() == 2) c *= std::cos(m * std::numbers::pi * x[1] / grid.extent(1));
      f.S[k] = mask[k] * (1.0 + f.amplitude * c);
    }
    f.verify(grid, cls);
    if (!f.admissible()) throw Error("generated test function is not admissible");
    out.push_back(std::move(f));
  }
  return out;
}

namespace {

double cell_avg(const std::vector<std::size_t>& n, std::span<const double> f) {
  double s = 0.0;
  for (std::size_t k : n) s += f[k];
  return s / static_cast<double>(n.size());
}

std::array<double, 2> cell_grad(const Grid& g, const std::vector<std::size_t>& n, std::span<const double> f) {
  if (g.dimension() == 1) return {(f[n[1]] - f[n[0]]) / g.spacing(0), 0.0};
  return {0.5 * ((f[n[1]] - f[n[0]]) + (f[n[2]] - f[n[3]])) / g.spacing(0),
          0.5 * ((f[n[3]] - f[n[0]]) + (f[n[2]] - f[n[1]])) / g.spacing(1)};
}

std::array<double, 2> cell_velocity(const Grid& g, std::size_t c, const FaceVelocity& v) {
  const std::size_t cx = g.count(0) - 1;
  const std::size_t i = c % cx;
  const std::size_t j = c / cx;
  if (g.dimension() == 1) return {v.x[x_face(g, i, 0)], 0.0};
  return {0.5 * (v.x[x_face(g, i, j)] + v.x[x_face(g, i, j + 1)]),
          0.5 * (v.y[y_face(g, i, j)] + v.y[y_face(g, i + 1, j)])};
}

// Trapezoid weights over the snapshot times.
std::vector<double> time_weights(const Trajectory& traj) {
  const auto& s = traj.snapshots;
  std::vector<double> w(s.size(), 0.0);
  for (std::size_t k = 1; k < s.size(); ++k) {
    const double dt = s[k].t - s[k - 1].t;
    w[k - 1] += 0.5 * dt;
    w[k] += 0.5 * dt;
  }
  return w;
}

double inflow_boundary_integral(const Trajectory& traj, const TestFunction& psi, const ModelData& data,
                                const BoundaryClassification& cls) {
  const Grid& g = traj.grid;
  const BoundarySeries a = data.a_on(g);
  const BoundarySeries b = data.b_on(g);
  const auto w = time_weights(traj);
  double total = 0.0;
  for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
    const double t = traj.snapshots[s].t;
    const Field at = a.at(t);
    const Field bt = b.at(t);
    double sum = 0.0;
    for (std::size_t q = 0; q < g.boundary().size(); ++q)
      if (cls.labels[q] == BoundaryLabel::Minus)
        sum += g.boundary()[q].measure * at[q] * bt[q] * psi.S[g.boundary()[q].node];
    total += w[s] * sum * psi.time_factor(t);
  }
  return total;
}

}  // namespace

WeakTerms weak_residual(const Trajectory& traj, const TestFunction& psi, const ModelData& data,
                        const BoundaryClassification& cls) {
  if (!psi.admissible()) throw DataError("test function is not admissible");
  const Grid& g = traj.grid;
  if (psi.S.size() != g.size()) throw DataError("test function does not match the grid");
  WeakTerms out;
  const auto w = time_weights(traj);
  const double vol = g.cell_volume();
  for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
    const Snapshot& snap = traj.snapshots[s];
    const FaceVelocity v = face_velocity(g, snap.h);
    const double f = psi.time_factor(snap.t);
    const double df = psi.time_derivative(snap.t);
    double sum = 0.0;
    for (std::size_t c = 0; c < g.cell_count(); ++c) {
      const auto n = g.cell_nodes(c);
      const auto grad = cell_grad(g, n, psi.S);
      const auto vc = cell_velocity(g, c, v);
      sum += cell_avg(n, snap.omega) * (cell_avg(n, psi.S) * df + (vc[0] * grad[0] + vc[1] * grad[1]) * f);
    }
    out.transport += w[s] * sum * vol;
  }
  const Field w0 = data.omega0_on(g);
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    const auto n = g.cell_nodes(c);
    out.initial += cell_avg(n, w0) * cell_avg(n, psi.S) * vol;
  }
  out.initial *= psi.time_factor(0.0);
  out.boundary = inflow_boundary_integral(traj, psi, data, cls);
  const double scale = std::max({std::abs(out.transport), std::abs(out.initial), std::abs(out.boundary)});
  out.residual = scale > 0.0 ? std::abs(out.transport + out.initial - out.boundary) / scale : 0.0;
  return out;
}

LayerFlux boundary_layer_flux(const Trajectory& traj, const ExtensionResult& ext, double sigma,
                              const TestFunction& psi, const ModelData& data) {
  const Grid& g = traj.grid;
  const Field chi = unit_approx(g, distance_field(g), sigma);
  const auto w = time_weights(traj);
  const double vol = g.cell_volume();
  LayerFlux out;
  out.sigma = sigma;

  std::vector<std::size_t> band;  // cells where grad chi does not vanish
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    const auto n = g.cell_nodes(c);
    const auto gc = cell_grad(g, n, chi);
    if (gc[0] != 0.0 || gc[1] != 0.0) band.push_back(c);
  }
  for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
    const Snapshot& snap = traj.snapshots[s];
    const FaceVelocity v = face_velocity(g, snap.h);
    const Field wb = ext.omega_breve_eps.at(snap.t);
    const double f = psi.time_factor(snap.t);
    double j1 = 0.0, j2 = 0.0;
    for (std::size_t c : band) {
      const auto n = g.cell_nodes(c);
      const auto gc = cell_grad(g, n, chi);
      const auto vc = cell_velocity(g, c, v);
      const double flux = (vc[0] * gc[0] + vc[1] * gc[1]) * cell_avg(n, psi.S) * f;
      double z = 0.0;
      for (std::size_t k : n) z += std::abs(snap.omega[k] - wb[k]);
      j1 += z / static_cast<double>(n.size()) * flux;
      j2 += cell_avg(n, wb) * flux;
    }
    out.J1 += w[s] * j1 * vol;
    out.J2 += w[s] * j2 * vol;
  }
  out.target = -inflow_boundary_integral(traj, psi, data, ext.classification);
  return out;
}

double b1_sign_violation(const Trajectory& traj, const BoundaryClassification& cls, double collar) {
  const Grid& g = traj.grid;
  std::size_t checked = 0, bad = 0;
  for (const Snapshot& snap : traj.snapshots) {
    const NodalVector v = velocity(g, snap.h);
    for (std::size_t k : g.interior()) {
      const auto x = g.coords(k);
      const auto [i, j] = g.ij(k);
      // nearest side, inward gradient of d, foot node on that side
      double d = x[0];
      std::array<double, 2> grad{1.0, 0.0};
      std::size_t foot = g.index(0, j);
      if (g.extent(0) - x[0] < d) { d = g.extent(0) - x[0]; grad = {-1.0, 0.0}; foot = g.index(g.count(0) - 1, j); }
      if (g.dimension() == 2) {
        if (x[1] < d) { d = x[1]; grad = {0.0, 1.0}; foot = g.index(i, 0); }
        if (g.extent(1) - x[1] < d) { d = g.extent(1) - x[1]; grad = {0.0, -1.0}; foot = g.index(i, g.count(1) - 1); }
      }
      if (d >= collar) continue;
      const BoundaryLabel label = cls.labels[g.boundary_slot(foot)];
      if (label == BoundaryLabel::Zero) continue;
      const double vd = v.x[k] * grad[0] + (g.dimension() == 2 ? v.y[k] * grad[1] : 0.0);
      ++checked;
      if ((label == BoundaryLabel::Minus && !(vd > 0.0)) || (label == BoundaryLabel::Plus && !(vd < 0.0))) ++bad;
    }
  }
  return checked ? static_cast<double>(bad) / static_cast<double>(checked) : 0.0;
}

std::vector<ModulusEntry> gradient_modulus(const Trajectory& traj) {
  const Grid& g = traj.grid;
  std::vector<NodalVector> grads;
  for (const Snapshot& s : traj.snapshots) grads.push_back(velocity(g, s.h));
  std::vector<ModulusEntry> out;
  const std::size_t n = traj.snapshots.size();
  for (std::size_t lag = 1; lag < n; lag *= 2) {
    ModulusEntry e;
    for (std::size_t s = 0; s + lag < n; ++s) {
      e.dt = std::max(e.dt, traj.snapshots[s + lag].t - traj.snapshots[s].t);
      for (std::size_t k = 0; k < g.size(); ++k) {
        double d = std::pow(grads[s + lag].x[k] - grads[s].x[k], 2);
        if (g.dimension() == 2) d += std::pow(grads[s + lag].y[k] - grads[s].y[k], 2);
        e.value = std::max(e.value, std::sqrt(d));
      }
    }
    out.push_back(e);
  }
  return out;
}

namespace {

std::string tag(const char* prefix, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%.6g", prefix, x);
  return buf;
}

}  // namespace

InvariantReport validate_trajectory(const Trajectory& traj, const ExtensionResult& ext, const SimConfig& cfg) {
  const Grid& g = traj.grid;
  InvariantReport rep;
  rep.epsilon = traj.epsilon;
  rep.R = traj.R;
  rep.grid = g.describe();
  rep.dt_min = INFINITY;
  rep.dt_max = 0.0;
  for (const StepStats& s : traj.steps) {
    rep.dt_min = std::min(rep.dt_min, s.dt);
    rep.dt_max = std::max(rep.dt_max, s.dt);
  }
  if (traj.steps.empty()) rep.dt_min = 0.0;

  bool times_ok = !traj.snapshots.empty() && traj.snapshots.front().t == 0.0 &&
                  std::abs(traj.snapshots.back().t - cfg.T) <= 1e-12 * std::max(1.0, cfg.T);
  for (std::size_t s = 1; s < traj.snapshots.size(); ++s)
    times_ok = times_ok && traj.snapshots[s].t > traj.snapshots[s - 1].t;
  rep.add("snapshot_times", times_ok, static_cast<double>(traj.snapshots.size()), 0.0,
          "snapshot times increase strictly from 0 to T");
  if (traj.snapshots.empty()) return rep;

  const Field w0 = ext.omega_breve_eps.at(0.0);
  double init = 0.0;
  for (std::size_t k = 0; k < w0.size(); ++k) init = std::max(init, std::abs(traj.snapshots.front().omega[k] - w0[k]));
  rep.add("initial_data", init <= 1e-12, init, 1e-12, "w(., 0) equals the mollified extension at t = 0");

  rep.add(check_positivity(traj));
  rep.add(check_l1_series(traj));
  rep.add(check_max_principle(traj, cfg.aleph));
  rep.add(check_gradient_energy(traj));

  double defect = 0.0;
  for (const StepStats& s : traj.steps) defect = std::max(defect, s.l1 > 0.0 ? std::abs(s.mass_defect) / s.l1 : std::abs(s.mass_defect));
  if (cfg.implicit_diffusion) rep.info("mass_balance", defect, "discrete mass identity per step (implicit diffusion)");
  else rep.add("mass_balance", defect <= 1e-10, defect, 1e-10, "discrete mass identity per step relative to ||w||_1");

  const EllipticSolver solver(g, cfg.elliptic);
  double res = 0.0;
  for (const Snapshot& s : traj.snapshots)
    res = std::max(res, solver.residual(s.h, cutoff(s.omega, traj.R), ext.a_eps.at(s.t)));
  rep.add("field_residual", res <= cfg.elliptic.solver_tol, res, cfg.elliptic.solver_tol,
          "stored h solves -Lap h + h = [w]_R with flux data a_eps");

  double stats = 0.0;
  std::size_t matched = 0;
  for (std::size_t s = 1, k = 0; s < traj.snapshots.size(); ++s) {
    const Snapshot& snap = traj.snapshots[s];
    while (k < traj.steps.size() && traj.steps[k].t < snap.t) ++k;
    if (k == traj.steps.size()) break;
    const StepStats& st = traj.steps[k];
    if (st.t != snap.t) continue;
    ++matched;
    const auto [lo, hi] = std::minmax_element(snap.omega.begin(), snap.omega.end());
    const double scale = std::max(1.0, std::abs(st.l1));
    stats = std::max({stats, std::abs(l1_norm(g, snap.omega) - st.l1) / scale, std::abs(*lo - st.min_omega),
                      std::abs(*hi - st.max_omega)});
  }
  const bool stats_ok = stats <= 1e-12 && matched + 1 == traj.snapshots.size();
  rep.add("step_statistics", stats_ok, stats, 1e-12, "stored snapshots agree with the per-step statistics");

  double contraction = 0.0;
  int iters = 0;
  for (const StepStats& s : traj.steps) {
    contraction = std::max(contraction, s.contraction);
    iters = std::max(iters, s.iterations);
  }
  if (cfg.lagged) {
    rep.info("picard_contraction", contraction, "single coupling sweep per step");
  } else {
    rep.add("picard_contraction", contraction < 1.0, contraction, 1.0, "largest final ratio of Picard increments");
  }
  rep.info("picard_iterations", iters, "largest Picard iteration count per step");

  bool labels_ok = true;
  for (const Field& a : ext.a_eps.values())
    labels_ok = labels_ok && classify_boundary(g, a, cfg.extension.tol_sign).labels == ext.classification.labels;
  rep.add("a_eps_sign_pattern", labels_ok, labels_ok ? 0.0 : 1.0, 0.0,
          "mollified a keeps the inflow / outflow / tangential labels");
  rep.info("cutoff_level_ratio", traj.max_omega() / traj.R, "max w / R; below 1 means the cut-off never engages");

  const ModelData& data = cfg.data;
  const auto psis = make_test_functions(g, ext.classification, cfg.T, cfg.checks.psi_count, cfg.seed);
  bool admissible = true;
  for (std::size_t i = 0; i < psis.size(); ++i) {
    admissible = admissible && psis[i].admissible();
    const WeakTerms wt = weak_residual(traj, psis[i], data, ext.classification);
    rep.info(tag("weak_residual_psi", static_cast<double>(i + 1)), wt.residual,
             "normalized residual of the weak identity");
  }
  rep.add("test_functions_admissible", admissible, static_cast<double>(psis.size()), 0.0,
          "psi(., T) = 0 and psi = 0 on the outflow and tangential parts");

  std::vector<double> sigmas = cfg.checks.sigmas;
  if (sigmas.empty()) sigmas = {g.min_extent() / 16.0, g.min_extent() / 32.0, g.min_extent() / 64.0};
  if (!psis.empty()) {
    for (double sigma : sigmas) {
      if (!(sigma > 0.0 && 2.0 * sigma < 0.5 * g.min_extent())) continue;
      const LayerFlux lf = boundary_layer_flux(traj, ext, sigma, psis.front(), data);
      rep.info(tag("layer_J1_sigma", sigma), lf.J1, "boundary-layer term with |w - w_breve_eps|");
      rep.info(tag("layer_J2_sigma", sigma), lf.J2, "boundary-layer term with w_breve_eps");
      if (sigma == sigmas.front()) rep.info("layer_target", lf.target, "-int int a b psi over the inflow part");
    }
  }

  rep.info("b1_sign_violation", b1_sign_violation(traj, ext.classification, cfg.checks.collar_fraction * g.min_extent()),
           "fraction of collar nodes where v . grad d has the wrong sign");
  for (const ModulusEntry& m : gradient_modulus(traj))
    rep.info(tag("grad_h_modulus_dt", m.dt), m.value, "max |grad h(t2) - grad h(t1)| over x");
  return rep;
}

InvariantReport family_report(const FamilyResult& fam) {
  InvariantReport rep;
  std::size_t failed = 0;
  std::vector<const FamilyMember*> ok;
  for (const FamilyMember& m : fam.members) {
    if (m.trajectory) ok.push_back(&m);
    else ++failed;
  }
  if (!fam.members.empty()) rep.epsilon = fam.members.back().epsilon;
  if (!ok.empty()) {
    rep.R = ok.front()->trajectory->R;
    rep.grid = ok.front()->trajectory->grid.describe();
  }
  rep.info("family_size", static_cast<double>(fam.members.size()), "members of the epsilon family");
  rep.add("family_failures", failed == 0, static_cast<double>(failed), 0.0, "members whose run failed");
  if (ok.size() >= 2) {
    auto ratio = [&](auto get) {
      double lo = INFINITY, hi = -INFINITY;
      for (const FamilyMember* m : ok) {
        lo = std::min(lo, get(*m));
        hi = std::max(hi, get(*m));
      }
      return lo > 0.0 ? hi / lo : INFINITY;
    };
    const double l1 = ratio([](const FamilyMember& m) { return m.max_l1; });
    const double mx = ratio([](const FamilyMember& m) { return m.max_omega; });
    const double ge = ratio([](const FamilyMember& m) { return m.gradient_energy; });
    const double gh = ratio([](const FamilyMember& m) { return m.max_grad_h; }) - 1.0;
    rep.add("family_l1_ratio", l1 < 3.0, l1, 3.0, "max ||w||_1 uniform in epsilon (max/min)");
    rep.add("family_max_omega_ratio", mx < 1.1, mx, 1.1, "max w uniform in epsilon (max/min)");
    rep.add("family_gradient_energy_ratio", ge < 3.0, ge, 3.0, "sqrt(eps) ||grad w|| uniform in epsilon (max/min)");
    rep.add("family_grad_h_variation", gh < 0.1, gh, 0.1, "max |grad h| uniform in epsilon (max/min - 1)");
  }
  bool any_nan = false;
  for (const CauchyEntry& c : fam.cauchy) any_nan = any_nan || std::isnan(c.distance);
  if (fam.cauchy.size() >= 2 && !any_nan) {
    double worst = 0.0;
    for (std::size_t i = 1; i < fam.cauchy.size(); ++i)
      worst = std::max(worst, fam.cauchy[i].distance / fam.cauchy[i - 1].distance);
    rep.add("cauchy_decreasing", worst < 1.0, worst, 1.0,
            "consecutive L2(0,T;H^-1) distances decrease (largest ratio)");
  }
  for (const CauchyEntry& c : fam.cauchy)
    if (!std::isnan(c.distance)) rep.info(tag("cauchy_eps", c.eps_fine), c.distance, "L2(0,T;H^-1) distance to the previous epsilon");
  if (fam.refinement) {
    rep.info("refinement_sup_difference", fam.refinement->sup_difference, "fixed epsilon, grid 2n-1 vs n (sup)");
    rep.info("refinement_hminus1_difference", fam.refinement->l2_difference, "fixed epsilon, grid 2n-1 vs n (L2 H^-1)");
  }
  return rep;
}

void add_r_star_entries(InvariantReport& report, const RStarResult& r) {
  report.add("r_star_certificate", r.found, r.found ? r.R : 0.0, 0.0,
             "cut-off inactive at R and 2R gives the same trajectory");
  if (r.found) {
    double diff = 0.0;
    for (const RProbe& p : r.probes)
      if (p.R == r.R) diff = p.difference;
    report.info("r_star_difference", diff, "sup difference between the runs at R* and 2R*");
    report.info("r_star_probes", static_cast<double>(r.probes.size()), "levels probed");
  }
}

}  // namespace vflux
