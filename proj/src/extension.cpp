// SPDX-License-Identifier: Apache-2.0
#include "vortexflux/extension.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <ostream>
#include <sstream>

#include "vortexflux/elliptic.hpp"
#include "vortexflux/error.hpp"

namespace vflux {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Linear interpolation weight pair for t in a sorted list.
std::pair<std::size_t, double> bracket(const std::vector<double>& times, double t) {
  if (times.size() == 1 || t <= times.front()) return {0, 0.0};
  if (t >= times.back()) return {times.size() - 1, 0.0};
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - times.begin());
  const std::size_t lo = hi - 1;
  return {lo, (t - times[lo]) / (times[hi] - times[lo])};
}

Field lerp(const std::vector<double>& times, const std::vector<Field>& values, double t) {
  const auto [lo, w] = bracket(times, t);
  if (w == 0.0) return values[lo];
  Field out(values[lo].size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = (1.0 - w) * values[lo][k] + w * values[lo + 1][k];
  return out;
}

double arc_distance(const Grid& g, double s1, double s2) {
  const double d = std::abs(s1 - s2);
  if (g.dimension() == 1) return d;
  return std::min(d, g.boundary_length() - d);
}

double kernel(double s) {
  const double q = 1.0 - s * s;
  return q > 0.0 ? q * q : 0.0;
}

}  // namespace

BoundaryTable BoundaryTable::constant(double value) { return BoundaryTable{{{0.0, 0.0, value}}}; }

BoundaryTable BoundaryTable::read_csv(std::istream& is, const std::string& origin) {
  BoundaryTable table;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    Row r;
    if (!(ls >> r.t >> r.arc >> r.value)) {
      if (table.rows.empty() && lineno == 1) continue;  // header row
      throw IoError(origin + ": malformed row at line " + std::to_string(lineno));
    }
    if (!std::isfinite(r.t) || !std::isfinite(r.arc) || !std::isfinite(r.value))
      throw DataError(origin + ": non-finite value at line " + std::to_string(lineno));
    table.rows.push_back(r);
  }
  if (table.rows.empty()) throw IoError(origin + ": no data rows");
  return table;
}

BoundaryTable BoundaryTable::read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_csv(in, path);
}

void BoundaryTable::write_csv(std::ostream& os) const {
  os.precision(17);
  os << "time,arc,value\n";
  for (const Row& r : rows) os << r.t << ',' << r.arc << ',' << r.value << '\n';
}

BoundarySeries::BoundarySeries(std::vector<double> times, std::vector<Field> values)
    : times_(std::move(times)), values_(std::move(values)) {
  if (times_.empty() || times_.size() != values_.size())
    throw DataError("boundary series needs one value set per sample time");
  for (std::size_t k = 1; k < times_.size(); ++k)
    if (!(times_[k] > times_[k - 1])) throw DataError("boundary sample times must increase strictly");
  for (const Field& f : values_)
    if (f.size() != values_.front().size()) throw DataError("boundary sample sets differ in size");
}

BoundarySeries BoundarySeries::constant(const Grid& grid, double value) {
  return BoundarySeries({0.0}, {Field(grid.boundary().size(), value)});
}

BoundarySeries BoundarySeries::sample(const Grid& grid, std::vector<double> times,
                                      const std::function<double(const BoundaryNode&, double)>& f) {
  std::vector<Field> values;
  for (double t : times) {
    Field v;
    for (const BoundaryNode& n : grid.boundary()) v.push_back(f(n, t));
    values.push_back(std::move(v));
  }
  return BoundarySeries(std::move(times), std::move(values));
}

BoundarySeries BoundarySeries::from_table(const Grid& grid, const BoundaryTable& table) {
  std::map<double, std::vector<std::pair<double, double>>> slices;
  for (const auto& r : table.rows) slices[r.t].emplace_back(r.arc, r.value);
  const double period = grid.boundary_length();
  std::vector<double> times;
  std::vector<Field> values;
  for (auto& [t, pts] : slices) {
    std::sort(pts.begin(), pts.end());
    Field v;
    for (const BoundaryNode& n : grid.boundary()) {
      const double s = n.arc;
      if (pts.size() == 1) {
        v.push_back(pts.front().second);
        continue;
      }
      auto hi = std::lower_bound(pts.begin(), pts.end(), std::make_pair(s, -std::numeric_limits<double>::infinity()));
      if (hi != pts.end() && hi->first == s) {
        v.push_back(hi->second);
        continue;
      }
      std::pair<double, double> p0, p1;
      if (hi == pts.begin() || hi == pts.end()) {
        if (grid.dimension() == 1) {  // clamp outside the sampled range
          v.push_back(hi == pts.begin() ? pts.front().second : pts.back().second);
          continue;
        }
        p0 = pts.back();
        p1 = pts.front();
        if (hi == pts.begin()) p0.first -= period;
        else p1.first += period;
      } else {
        p0 = *(hi - 1);
        p1 = *hi;
      }
      const double w = (s - p0.first) / (p1.first - p0.first);
      v.push_back((1.0 - w) * p0.second + w * p1.second);
    }
    times.push_back(t);
    values.push_back(std::move(v));
  }
  return BoundarySeries(std::move(times), std::move(values));
}

Field BoundarySeries::at(double t) const {
  if (empty()) throw DataError("empty boundary series");
  return lerp(times_, values_, t);
}

double BoundarySeries::max() const {
  double m = -INFINITY;
  for (const Field& f : values_)
    for (double v : f) m = std::max(m, v);
  return m;
}

double BoundarySeries::min() const {
  double m = INFINITY;
  for (const Field& f : values_)
    for (double v : f) m = std::min(m, v);
  return m;
}

Field constant_field(const Grid& grid, double value) { return Field(grid.size(), value); }

const char* to_string(GammaExtension mode) noexcept {
  return mode == GammaExtension::Taper ? "taper" : "data";
}

GammaExtension parse_gamma_extension(const std::string& text) {
  if (text == "taper") return GammaExtension::Taper;
  if (text == "data") return GammaExtension::Data;
  throw ConfigError("expected taper or data", "gamma_extension");
}

BoundarySeries extend_gamma(const Grid& grid, const BoundarySeries& b, const BoundaryClassification& cls,
                            const ExtensionOptions& options) {
  const auto& bnd = grid.boundary();
  if (cls.labels.size() != bnd.size()) throw DataError("classification does not match the grid");
  for (std::size_t k = 0; k < b.times().size(); ++k) {
    if (b.values()[k].size() != bnd.size()) throw DataError("b sample count does not match the grid");
    for (double v : b.values()[k])
      if (v < 0.0 || !std::isfinite(v))
        throw DataError("inflow data b must be finite and nonnegative (t = " + std::to_string(b.times()[k]) + ")");
  }
  if (options.gamma == GammaExtension::Data) return b;

  const double L = options.taper_length > 0.0 ? options.taper_length : 0.25 * grid.min_extent();
  std::vector<std::size_t> minus;
  for (std::size_t s = 0; s < bnd.size(); ++s)
    if (cls.labels[s] == BoundaryLabel::Minus) minus.push_back(s);

  // nearest inflow node and taper factor per boundary node
  std::vector<std::size_t> nearest(bnd.size(), Grid::npos);
  Field factor(bnd.size(), 0.0);
  for (std::size_t s = 0; s < bnd.size(); ++s) {
    if (cls.labels[s] == BoundaryLabel::Minus) {
      nearest[s] = s;
      factor[s] = 1.0;
      continue;
    }
    double best = INFINITY;
    for (std::size_t m : minus) {
      const double r = arc_distance(grid, bnd[s].arc, bnd[m].arc);
      if (r < best) {
        best = r;
        nearest[s] = m;
      }
    }
    if (best < L) factor[s] = 0.5 * (1.0 + std::cos(std::numbers::pi * best / L));
  }

  std::vector<Field> values;
  for (const Field& bv : b.values()) {
    Field out(bnd.size(), 0.0);
    for (std::size_t s = 0; s < bnd.size(); ++s)
      if (nearest[s] != Grid::npos) out[s] = factor[s] * bv[nearest[s]];
    values.push_back(std::move(out));
  }
  return BoundarySeries(b.times(), std::move(values));
}

Field SpaceTimeField::at(double t) const {
  if (times.empty()) throw DataError("empty space-time field");
  return lerp(times, values, t);
}

double SpaceTimeField::max() const {
  double m = -INFINITY;
  for (const Field& f : values) m = std::max(m, *std::max_element(f.begin(), f.end()));
  return m;
}

double SpaceTimeField::min() const {
  double m = INFINITY;
  for (const Field& f : values) m = std::min(m, *std::min_element(f.begin(), f.end()));
  return m;
}

SpaceTimeField heat_extend(const Grid& grid, const BoundarySeries& b_ext, const Field& omega0, double T, double dt,
                           bool implicit) {
  if (omega0.size() != grid.size()) throw DataError("initial density size does not match the grid");
  if (!(T > 0.0)) throw ConfigError("final time must be positive", "T");
  if (!(dt > 0.0)) throw ConfigError("extension step must be positive", "heat_dt");
  const std::size_t n = static_cast<std::size_t>(std::max(1.0, std::ceil(T / dt - 1e-9)));
  const double step = T / static_cast<double>(n);

  double rate = 0.0;
  for (int ax = 0; ax < grid.dimension(); ++ax) rate += 2.0 / (grid.spacing(ax) * grid.spacing(ax));
  if (!implicit && step * rate > 1.0) throw StepRefused(step, 1.0 / rate);

  SpaceTimeField out;
  out.times.reserve(n + 1);
  out.values.reserve(n + 1);
  out.times.push_back(0.0);
  out.values.push_back(omega0);

  // Five-point Laplacian written as differences so that it vanishes exactly on constants.
  auto laplacian = [&](const Field& w, std::size_t node) {
    const auto [i, j] = grid.ij(node);
    const double c = w[node];
    double lap = ((w[grid.index(i + 1, j)] - c) + (w[grid.index(i - 1, j)] - c)) / (grid.spacing(0) * grid.spacing(0));
    if (grid.dimension() == 2)
      lap += ((w[grid.index(i, j + 1)] - c) + (w[grid.index(i, j - 1)] - c)) / (grid.spacing(1) * grid.spacing(1));
    return lap;
  };

  std::unique_ptr<DirichletProblem> be;
  if (implicit) be = std::make_unique<DirichletProblem>(grid, 1.0, step);
  for (std::size_t k = 1; k <= n; ++k) {
    const double t = k == n ? T : static_cast<double>(k) * step;
    const Field bnd = b_ext.at(t);
    const Field& prev = out.values.back();
    Field next = prev;
    if (implicit) {
      // Backward Euler for the increment: (I - dt Lap) d = dt Lap prev, d = bnd - prev on the boundary.
      Field rhs(grid.size(), 0.0), dbnd(bnd.size());
      for (std::size_t node : grid.interior()) rhs[node] = step * laplacian(prev, node);
      for (std::size_t s = 0; s < bnd.size(); ++s) dbnd[s] = bnd[s] - prev[grid.boundary()[s].node];
      const Field d = be->solve(rhs, dbnd);
      for (std::size_t node : grid.interior()) next[node] += d[node];
    } else {
      for (std::size_t node : grid.interior()) next[node] += step * laplacian(prev, node);
    }
    for (std::size_t s = 0; s < bnd.size(); ++s) next[grid.boundary()[s].node] = bnd[s];
    out.times.push_back(t);
    out.values.push_back(std::move(next));
  }
  return out;
}

namespace {

// Smooths f along one axis with the truncated, renormalized kernel.
Field smooth_axis(const Grid& grid, const Field& f, int axis, double radius) {
  const double dx = grid.spacing(axis);
  const int half = static_cast<int>(std::floor(radius / dx));
  if (half < 1) return f;
  std::vector<double> w(half + 1);
  for (int k = 0; k <= half; ++k) w[k] = kernel(k * dx / radius);

  const std::size_t n = grid.count(axis);
  Field out(f.size());
  for (std::size_t node = 0; node < f.size(); ++node) {
    const auto ij = grid.ij(node);
    const long c = static_cast<long>(ij[axis]);
    double acc = 0.0;
    double norm = 0.0;
    for (int k = -half; k <= half; ++k) {
      const long p = c + k;
      if (p < 0 || p >= static_cast<long>(n)) continue;
      auto q = ij;
      q[axis] = static_cast<std::size_t>(p);
      const double wk = w[std::abs(k)];
      acc += wk * f[grid.index(q[0], q[1])];
      norm += wk;
    }
    out[node] = acc / norm;
  }
  return out;
}

}  // namespace

Field mollify_field(const Grid& grid, const Field& f, double radius) {
  if (f.size() != grid.size()) throw DataError("field size does not match the grid");
  Field out = smooth_axis(grid, f, 0, radius);
  if (grid.dimension() == 2) out = smooth_axis(grid, out, 1, radius);
  return out;
}

Field mollify_boundary(const Grid& grid, const Field& a, double radius) {
  const auto& bnd = grid.boundary();
  if (a.size() != bnd.size()) throw DataError("boundary sample count does not match the grid");
  if (grid.dimension() == 1 || radius < grid.min_spacing()) return a;
  Field out(a.size());
  for (std::size_t s = 0; s < bnd.size(); ++s) {
    double acc = 0.0;
    double norm = 0.0;
    for (std::size_t q = 0; q < bnd.size(); ++q) {
      const double w = kernel(arc_distance(grid, bnd[s].arc, bnd[q].arc) / radius) * bnd[q].measure;
      acc += w * a[q];
      norm += w;
    }
    out[s] = acc / norm;
  }
  return out;
}

Field project_signs(const Field& smoothed, const Field& fallback, const BoundaryClassification& cls,
                    double tol_sign) {
  Field out(smoothed.size());
  for (std::size_t s = 0; s < smoothed.size(); ++s) {
    switch (cls.labels[s]) {
      case BoundaryLabel::Plus: out[s] = smoothed[s] > tol_sign ? smoothed[s] : fallback[s]; break;
      case BoundaryLabel::Minus: out[s] = smoothed[s] < -tol_sign ? smoothed[s] : fallback[s]; break;
      case BoundaryLabel::Zero: out[s] = 0.0; break;
    }
  }
  return out;
}

Field ExtensionResult::dirichlet(const Grid& grid, double t) const {
  const Field w = omega_breve_eps.at(t);
  Field out;
  out.reserve(grid.boundary().size());
  for (const BoundaryNode& n : grid.boundary()) out.push_back(w[n.node]);
  return out;
}

ExtensionResult build_extension(const Grid& grid, const BoundarySeries& a, const BoundarySeries& b,
                                const Field& omega0, double T, double epsilon, double aleph,
                                const ExtensionOptions& options) {
  if (omega0.size() != grid.size()) throw DataError("initial density size does not match the grid");
  for (double v : omega0)
    if (v < 0.0 || !std::isfinite(v)) throw DataError("initial density must be finite and nonnegative");
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be nonnegative", "epsilon");

  ExtensionResult r;
  r.classification = classify_boundary(grid, a.at(0.0), options.tol_sign);
  for (std::size_t k = 0; k < a.times().size(); ++k) {
    const auto cls = classify_boundary(grid, a.values()[k], options.tol_sign);
    if (cls.labels != r.classification.labels)
      throw DataError("sign pattern of a at t = " + std::to_string(a.times()[k]) +
                      " differs from the pattern at t = 0");
  }

  r.b_ext = extend_gamma(grid, b, r.classification, options);
  const double dt = options.heat_dt > 0.0 ? options.heat_dt : T / 200.0;
  r.omega_breve = heat_extend(grid, r.b_ext, omega0, T, dt, options.heat_implicit);
  r.aleph_measured = r.omega_breve.max();

  r.mollifier_radius = options.mollifier_scale * epsilon;
  std::ostringstream desc;
  desc << "separable (1-s^2)^2 kernel, radius " << r.mollifier_radius << ", spatial only";
  r.mollifier = desc.str();

  r.omega_breve_eps.times = r.omega_breve.times;
  for (const Field& f : r.omega_breve.values) {
    Field m = mollify_field(grid, f, r.mollifier_radius);
    for (double& v : m) v = std::clamp(v, 0.0, aleph);
    r.omega_breve_eps.values.push_back(std::move(m));
  }

  std::vector<Field> a_eps;
  for (const Field& ak : a.values())
    a_eps.push_back(project_signs(mollify_boundary(grid, ak, r.mollifier_radius), ak, r.classification,
                                  options.tol_sign));
  r.a_eps = BoundarySeries(a.times(), std::move(a_eps));
  return r;
}

}  // namespace vflux
