// SPDX-License-Identifier: Apache-2.0
#include "vortexflux/coupling.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include "vortexflux/error.hpp"

namespace vflux {

namespace {

double l2(std::span<const double> f) {
  double s = 0.0;
  for (double v : f) s += v * v;
  return std::sqrt(s);
}

// Runs fn(i) for i in [0, n) on up to `workers` threads; exceptions are rethrown.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

Field ModelData::omega0_on(const Grid& grid) const {
  if (omega0.size() != omega0_grid.size()) throw DataError("initial density does not match its grid");
  if (grid == omega0_grid) return omega0;
  if (grid.dimension() != omega0_grid.dimension()) throw DataError("initial density has the wrong dimension");
  const Grid& src = omega0_grid;
  Field out(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto x = grid.coords(k);
    std::array<std::size_t, 2> lo{0, 0};
    std::array<double, 2> w{0.0, 0.0};
    for (int ax = 0; ax < src.dimension(); ++ax) {
      const double u = std::clamp(x[ax] / src.spacing(ax), 0.0, static_cast<double>(src.count(ax) - 1));
      lo[ax] = std::min(static_cast<std::size_t>(u), src.count(ax) - 2);
      w[ax] = u - static_cast<double>(lo[ax]);
    }
    if (src.dimension() == 1) {
      out[k] = (1.0 - w[0]) * omega0[src.index(lo[0])] + w[0] * omega0[src.index(lo[0] + 1)];
    } else {
      const double f00 = omega0[src.index(lo[0], lo[1])];
      const double f10 = omega0[src.index(lo[0] + 1, lo[1])];
      const double f01 = omega0[src.index(lo[0], lo[1] + 1)];
      const double f11 = omega0[src.index(lo[0] + 1, lo[1] + 1)];
      out[k] = (1.0 - w[0]) * (1.0 - w[1]) * f00 + w[0] * (1.0 - w[1]) * f10 + (1.0 - w[0]) * w[1] * f01 +
               w[0] * w[1] * f11;
    }
  }
  return out;
}

void ModelData::set_omega0(const Grid& grid, Field values) {
  if (values.size() != grid.size()) throw DataError("initial density does not match its grid");
  omega0_grid = grid;
  omega0 = std::move(values);
}

void SimConfig::validate() const {
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("T must be positive", "T");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be nonnegative", "epsilon");
  if (!(R > 0.0) || !std::isfinite(R)) throw ConfigError("R must be positive", "R");
  if (!(picard_tol > 0.0)) throw ConfigError("picard_tol must be positive", "picard_tol");
  if (picard_max_iters < 1) throw ConfigError("picard_max_iters must be at least 1", "picard_max_iters");
  if (!(relaxation > 0.0 && relaxation <= 1.0)) throw ConfigError("relaxation must lie in (0, 1]", "relaxation");
  if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("cfl must lie in (0, 1]", "cfl");
  if (!(dt_max > 0.0)) throw ConfigError("dt_max must be positive", "dt_max");
  if (!(output_dt >= 0.0)) throw ConfigError("output_dt must be nonnegative", "output_dt");
  const Field w0 = data.omega0_on(grid);
  const double w0max = w0.empty() ? 0.0 : *std::max_element(w0.begin(), w0.end());
  const double bmax = data.b_on(grid).max();
  if (!(aleph >= w0max)) throw ConfigError("aleph must be at least max(omega0)", "aleph");
  if (!(aleph >= bmax)) throw ConfigError("aleph must be at least max(b)", "aleph");
  for (std::size_t k = 1; k < sweep.eps_list.size(); ++k)
    if (!(sweep.eps_list[k] < sweep.eps_list[k - 1])) throw ConfigError("eps_list must decrease strictly", "eps_list");
  for (double e : sweep.eps_list)
    if (!(e > 0.0)) throw ConfigError("eps_list entries must be positive", "eps_list");
}

void SimConfig::default_aleph() {
  const Field w0 = data.omega0_on(grid);
  const double w0max = w0.empty() ? 0.0 : *std::max_element(w0.begin(), w0.end());
  aleph = std::max(w0max, data.b_on(grid).max());
  aleph_defaulted = true;
}

double cell_gradient_energy(const Grid& g, std::span<const double> w) {
  double s = 0.0;
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    const auto n = g.cell_nodes(c);
    if (g.dimension() == 1) {
      const double gx = (w[n[1]] - w[n[0]]) / g.spacing(0);
      s += gx * gx;
    } else {
      const double gx = 0.5 * ((w[n[1]] - w[n[0]]) + (w[n[2]] - w[n[3]])) / g.spacing(0);
      const double gy = 0.5 * ((w[n[3]] - w[n[0]]) + (w[n[2]] - w[n[1]])) / g.spacing(1);
      s += gx * gx + gy * gy;
    }
  }
  return s * g.cell_volume();
}

double l1_norm(const Grid& g, std::span<const double> w) {
  double s = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) s += std::abs(w[k]) * g.node_weight(k);
  return s;
}

double Trajectory::gradient_energy() const {
  double s = 0.0;
  for (const StepStats& st : steps) s += st.dt * st.grad_sq;
  return std::sqrt(epsilon * s);
}

namespace {

// Maximum that keeps a NaN so corrupted statistics cannot hide.
double nan_max(double a, double b) { return std::isnan(a) || std::isnan(b) ? NAN : std::max(a, b); }

template <class F>
double max_over(const std::vector<StepStats>& steps, F&& f, double init) {
  double m = init;
  for (const StepStats& s : steps) m = nan_max(m, f(s));
  return m;
}

}  // namespace

double Trajectory::max_omega() const {
  double m = -INFINITY;
  for (const Snapshot& s : snapshots) m = std::max(m, *std::max_element(s.omega.begin(), s.omega.end()));
  return max_over(steps, [](const StepStats& s) { return s.max_omega; }, m);
}

double Trajectory::min_omega() const {
  double m = INFINITY;
  for (const Snapshot& s : snapshots) m = std::min(m, *std::min_element(s.omega.begin(), s.omega.end()));
  for (const StepStats& s : steps) m = std::min(m, s.min_omega);
  return m;
}

double Trajectory::max_h() const {
  double m = -INFINITY;
  for (const Snapshot& s : snapshots) m = std::max(m, *std::max_element(s.h.begin(), s.h.end()));
  return max_over(steps, [](const StepStats& s) { return s.max_h; }, m);
}

double Trajectory::max_l1() const {
  double m = 0.0;
  for (const Snapshot& s : snapshots) m = nan_max(m, l1_norm(grid, s.omega));
  return max_over(steps, [](const StepStats& s) { return s.l1; }, m);
}

double Trajectory::max_grad_h() const {
  double m = 0.0;
  for (const Snapshot& s : snapshots) m = std::max(m, velocity(grid, s.h).max_abs());
  return max_over(steps, [](const StepStats& s) { return s.max_grad_h; }, m);
}

PicardResult picard_solve_step(const StepContext& ctx, std::span<const double> omega_n, double t,
                               std::span<const double> a_next, std::span<const double> dirichlet_next) {
  const Grid& g = ctx.grid;
  const double R = ctx.transport.R;
  PicardResult r;
  Field w(omega_n.begin(), omega_n.end());
  for (int k = 1; k <= ctx.picard_max_iters; ++k) {
    const Field h = ctx.solver.solve(cutoff(w, R), a_next);
    FaceVelocity v = face_velocity(g, h);
    Field next = advect_diffuse_step(g, omega_n, v, ctx.transport, dirichlet_next);
    if (ctx.relaxation < 1.0)
      for (std::size_t i = 0; i < next.size(); ++i) next[i] = (1.0 - ctx.relaxation) * w[i] + ctx.relaxation * next[i];

    double diff = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) diff += (next[i] - w[i]) * (next[i] - w[i]);
    diff = std::sqrt(diff);
    const double scale = l2(w);
    if (!r.increments.empty() && r.increments.back() > 0.0) r.contraction.push_back(diff / r.increments.back());
    r.increments.push_back(diff);
    r.iterations = k;
    r.v = std::move(v);
    w = std::move(next);
    if (ctx.lagged || diff <= ctx.picard_tol * scale) {
      r.omega = std::move(w);
      r.h = ctx.solver.solve(cutoff(r.omega, R), a_next);
      return r;
    }
  }
  throw PicardError(t + ctx.transport.dt, r.increments);
}

ExtensionResult make_extension(const SimConfig& cfg) {
  return build_extension(cfg.grid, cfg.data.a_on(cfg.grid), cfg.data.b_on(cfg.grid), cfg.data.omega0_on(cfg.grid),
                         cfg.T, cfg.epsilon, cfg.aleph, cfg.extension);
}

Trajectory run(const SimConfig& cfg) { return run(cfg, make_extension(cfg)); }

Trajectory run(const SimConfig& cfg, const ExtensionResult& ext) {
  cfg.validate();
  const Grid& g = cfg.grid;
  const EllipticSolver solver(g, cfg.elliptic);

  Trajectory traj;
  traj.grid = g;
  traj.epsilon = cfg.epsilon;
  traj.R = cfg.R;
  traj.aleph = cfg.aleph;

  double t = 0.0;
  Field omega = ext.omega_breve_eps.at(0.0);
  Field h = solver.solve(cutoff(omega, cfg.R), ext.a_eps.at(0.0));
  traj.snapshots.push_back({0.0, omega, h});

  StepContext ctx{g, solver, {}, cfg.picard_tol, cfg.picard_max_iters, cfg.relaxation, cfg.lagged};
  ctx.transport.epsilon = cfg.epsilon;
  ctx.transport.R = cfg.R;
  ctx.transport.cfl_target = cfg.cfl;
  ctx.transport.dt_max = cfg.dt_max;
  ctx.transport.implicit_diffusion = cfg.implicit_diffusion;

  const double time_eps = 1e-12 * std::max(1.0, cfg.T);
  std::size_t out_index = 1;
  auto next_output = [&] {
    if (cfg.output_dt <= 0.0) return cfg.T;
    return std::min(cfg.T, static_cast<double>(out_index) * cfg.output_dt);
  };

  while (t < cfg.T - time_eps) {
    const double target = next_output();
    const FaceVelocity v0 = face_velocity(g, h);
    double dt = cfl_dt(g, v0, cfg.epsilon, cfg.cfl, cfg.dt_max);
    const double remaining = target - t;
    dt = remaining / std::max(1.0, std::ceil(remaining / dt - 1e-9));

    PicardResult step;
    int retries = 0;
    for (;;) {
      ctx.transport.dt = dt;
      try {
        step = picard_solve_step(ctx, omega, t, ext.a_eps.at(t + dt), ext.dirichlet(g, t + dt));
        break;
      } catch (const StepRefused& e) {
        if (++retries > 30) throw;
        dt = std::min(0.5 * dt, cfg.cfl * e.admissible());
      }
    }

    StepStats st;
    st.dt = dt;
    st.t = (std::abs(t + dt - target) <= time_eps) ? target : t + dt;
    st.iterations = step.iterations;
    st.contraction = step.contraction.empty() ? 0.0 : step.contraction.back();
    st.retries = retries;
    if (!cfg.implicit_diffusion) st.mass_defect = mass_balance_defect(g, omega, step.omega, step.v, ctx.transport);

    omega = std::move(step.omega);
    h = std::move(step.h);
    t = st.t;
    st.l1 = l1_norm(g, omega);
    st.min_omega = *std::min_element(omega.begin(), omega.end());
    st.max_omega = *std::max_element(omega.begin(), omega.end());
    st.max_h = *std::max_element(h.begin(), h.end());
    st.max_grad_h = velocity(g, h).max_abs();
    st.grad_sq = cell_gradient_energy(g, omega);
    traj.steps.push_back(st);

    if (cfg.output_dt <= 0.0 || t == target) {
      traj.snapshots.push_back({t, omega, h});
      if (t == target) ++out_index;
    }
  }
  return traj;
}

double trajectory_difference(const Trajectory& a, const Trajectory& b) {
  if (!(a.grid == b.grid) || a.snapshots.size() != b.snapshots.size() || a.steps.size() != b.steps.size())
    return INFINITY;
  double d = 0.0;
  for (std::size_t s = 0; s < a.snapshots.size(); ++s) {
    if (a.snapshots[s].t != b.snapshots[s].t) return INFINITY;
    for (std::size_t k = 0; k < a.snapshots[s].omega.size(); ++k) {
      d = std::max(d, std::abs(a.snapshots[s].omega[k] - b.snapshots[s].omega[k]));
      d = std::max(d, std::abs(a.snapshots[s].h[k] - b.snapshots[s].h[k]));
    }
  }
  for (std::size_t s = 0; s < a.steps.size(); ++s) {
    const StepStats& x = a.steps[s];
    const StepStats& y = b.steps[s];
    if (x.t != y.t) return INFINITY;
    d = std::max({d, std::abs(x.max_omega - y.max_omega), std::abs(x.min_omega - y.min_omega),
                  std::abs(x.max_h - y.max_h), std::abs(x.l1 - y.l1)});
  }
  return d;
}

RStarResult estimate_R_star(const SimConfig& cfg) { return estimate_R_star(cfg, make_extension(cfg), 1); }

RStarResult estimate_R_star(const SimConfig& cfg, const ExtensionResult& ext, std::size_t workers) {
  std::map<double, std::shared_ptr<const Trajectory>> cache;
  std::mutex mu;
  auto get = [&](double R) {
    {
      std::lock_guard lock(mu);
      if (auto it = cache.find(R); it != cache.end()) return it->second;
    }
    SimConfig c = cfg;
    c.R = R;
    auto tr = std::make_shared<const Trajectory>(run(c, ext));
    std::lock_guard lock(mu);
    return cache.emplace(R, tr).first->second;
  };

  RStarResult out;
  auto probe = [&](double R) {
    std::shared_ptr<const Trajectory> r1, r2;
    parallel_for(2, workers, [&](std::size_t i) {
      if (i == 0) r1 = get(R);
      else r2 = get(2.0 * R);
    });
    RProbe p;
    p.R = R;
    p.max_omega = r1->max_omega();
    p.difference = trajectory_difference(*r1, *r2);
    p.passed = p.max_omega < 0.99 * R && p.difference < 1e-10;
    out.probes.push_back(p);
    return p.passed;
  };

  const double start = cfg.aleph > 0.0 ? cfg.aleph : 1.0;
  double lo = 0.0;
  double hi = start;
  bool ok = probe(hi);
  while (!ok) {
    lo = hi;
    hi *= 2.0;
    if (hi > start * cfg.sweep.r_cap_factor) return out;
    ok = probe(hi);
  }
  if (lo == 0.0) lo = 0.5 * hi;
  for (int s = 0; s < cfg.sweep.bisection_steps; ++s) {
    const double mid = 0.5 * (lo + hi);
    if (probe(mid)) hi = mid;
    else lo = mid;
  }
  out.found = true;
  out.R = hi;
  out.at_R = get(hi);
  out.at_2R = get(2.0 * hi);
  return out;
}

double hminus1_distance(const Trajectory& a, const Trajectory& b) {
  if (!(a.grid == b.grid) || a.snapshots.size() != b.snapshots.size())
    throw DataError("trajectories do not share a grid and snapshot times");
  const HMinusOneNorm norm(a.grid);
  double integral = 0.0;
  double prev = 0.0;
  for (std::size_t s = 0; s < a.snapshots.size(); ++s) {
    if (std::abs(a.snapshots[s].t - b.snapshots[s].t) > 1e-12 * std::max(1.0, a.snapshots[s].t))
      throw DataError("snapshot times differ");
    Field d(a.snapshots[s].omega.size());
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = a.snapshots[s].omega[k] - b.snapshots[s].omega[k];
    const double cur = norm.squared(d);
    if (s > 0) integral += 0.5 * (a.snapshots[s].t - a.snapshots[s - 1].t) * (prev + cur);
    prev = cur;
  }
  return std::sqrt(integral);
}

Grid refined_grid(const Grid& g) {
  std::vector<double> ext;
  std::vector<std::size_t> cnt;
  for (int ax = 0; ax < g.dimension(); ++ax) {
    ext.push_back(g.extent(ax));
    cnt.push_back(2 * g.count(ax) - 1);
  }
  return Grid::build(g.dimension(), ext, cnt);
}

FamilyResult eps_continuation(const SimConfig& cfg, const std::vector<double>& eps_list, std::size_t workers) {
  for (std::size_t k = 1; k < eps_list.size(); ++k)
    if (!(eps_list[k] < eps_list[k - 1])) throw ConfigError("eps_list must decrease strictly", "eps_list");
  for (double e : eps_list)
    if (!(e > 0.0)) throw ConfigError("eps_list entries must be positive", "eps_list");

  FamilyResult out;
  out.members.resize(eps_list.size());
  const bool refine = cfg.sweep.refine && !eps_list.empty();
  std::shared_ptr<const Trajectory> fine;
  parallel_for(eps_list.size() + (refine ? 1 : 0), workers, [&](std::size_t i) {
    SimConfig c = cfg;
    if (i == eps_list.size()) {
      c.epsilon = eps_list.front();
      c.grid = refined_grid(cfg.grid);
      fine = std::make_shared<const Trajectory>(run(c));
      return;
    }
    FamilyMember& m = out.members[i];
    m.epsilon = c.epsilon = eps_list[i];
    try {
      auto ext = std::make_shared<const ExtensionResult>(make_extension(c));
      auto tr = std::make_shared<const Trajectory>(run(c, *ext));
      m.max_l1 = tr->max_l1();
      m.max_omega = tr->max_omega();
      m.max_grad_h = tr->max_grad_h();
      m.gradient_energy = tr->gradient_energy();
      m.extension = std::move(ext);
      m.trajectory = std::move(tr);
    } catch (const std::exception& e) {
      m.error = e.what();
    }
  });

  for (std::size_t i = 0; i + 1 < out.members.size(); ++i) {
    CauchyEntry e{out.members[i].epsilon, out.members[i + 1].epsilon};
    if (out.members[i].trajectory && out.members[i + 1].trajectory)
      e.distance = hminus1_distance(*out.members[i].trajectory, *out.members[i + 1].trajectory);
    out.cauchy.push_back(e);
  }

  if (refine && fine && out.members.front().trajectory) {
    const Trajectory& coarse = *out.members.front().trajectory;
    Trajectory restricted = coarse;  // fine values on the coarse nodes, coarse snapshot times
    RefinementEntry r;
    r.epsilon = eps_list.front();
    if (fine->snapshots.size() != coarse.snapshots.size())
      throw DataError("refined run stored a different number of snapshots");
    for (std::size_t s = 0; s < coarse.snapshots.size(); ++s) {
      for (std::size_t k = 0; k < coarse.grid.size(); ++k) {
        const auto [i, j] = coarse.grid.ij(k);
        const std::size_t fk = fine->grid.index(2 * i, 2 * j);
        restricted.snapshots[s].omega[k] = fine->snapshots[s].omega[fk];
        restricted.snapshots[s].h[k] = fine->snapshots[s].h[fk];
        r.sup_difference =
            std::max(r.sup_difference, std::abs(restricted.snapshots[s].omega[k] - coarse.snapshots[s].omega[k]));
      }
    }
    r.l2_difference = hminus1_distance(coarse, restricted);
    out.refinement = r;
  }
  return out;
}

}  // namespace vflux
