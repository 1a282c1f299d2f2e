// SPDX-License-Identifier: Apache-2.0
#include "vortexflux/elliptic.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "vortexflux/error.hpp"

namespace vflux {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

const char* to_string(BoundaryMode mode) noexcept {
  switch (mode) {
    case BoundaryMode::Neumann: return "neumann";
    case BoundaryMode::Robin: return "robin";
    case BoundaryMode::Dirichlet: return "dirichlet";
  }
  return "?";
}

BoundaryMode parse_boundary_mode(const std::string& text) {
  if (text == "neumann") return BoundaryMode::Neumann;
  if (text == "robin") return BoundaryMode::Robin;
  if (text == "dirichlet") return BoundaryMode::Dirichlet;
  throw ConfigError("unknown boundary mode '" + text + "'", "boundary_mode");
}

namespace {

std::size_t stride(const Grid& g, int axis) { return axis == 0 ? 1 : g.count(0); }

// Full nodal operator rows. Boundary rows use the ghost value
// h_ghost = h_inner - 2 dx (a + kappa h) so that -grad h . n = a + kappa h.
SpMat assemble(const Grid& g, const EllipticOptions& opt, Field& row_weight) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(g.size() * (1 + 2 * g.dimension()));
  row_weight.assign(g.size(), 1.0);
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (opt.mode == BoundaryMode::Dirichlet && g.is_boundary(k)) {
      trip.emplace_back(k, k, 1.0);
      continue;
    }
    double diag = 1.0;
    const auto p = g.ij(k);
    for (int ax = 0; ax < g.dimension(); ++ax) {
      const double dx = g.spacing(ax);
      const double inv = 1.0 / (dx * dx);
      const std::size_t s = stride(g, ax);
      const std::size_t n = g.count(ax);
      diag += 2.0 * inv;
      if (p[ax] > 0 && p[ax] + 1 < n) {
        trip.emplace_back(k, k - s, -inv);
        trip.emplace_back(k, k + s, -inv);
      } else {
        trip.emplace_back(k, p[ax] == 0 ? k + s : k - s, -2.0 * inv);
        row_weight[k] *= 0.5;
        if (opt.mode == BoundaryMode::Robin) diag += 2.0 * opt.robin_kappa / dx;
      }
    }
    trip.emplace_back(k, k, diag);
  }
  SpMat a(g.size(), g.size());
  a.setFromTriplets(trip.begin(), trip.end());
  a.makeCompressed();
  return a;
}

double boundary_load_factor(const Grid& g, std::size_t k) {
  double f = 0.0;
  for (int ax = 0; ax < g.dimension(); ++ax)
    if (g.on_low(k, ax) || g.on_high(k, ax)) f -= 2.0 / g.spacing(ax);
  return f;
}

Vec to_vec(std::span<const double> s) { return Eigen::Map<const Vec>(s.data(), static_cast<Eigen::Index>(s.size())); }

Field to_field(const Vec& v) { return Field(v.data(), v.data() + v.size()); }

}  // namespace

struct EllipticSolver::Impl {
  Grid grid;
  EllipticOptions options;
  SpMat a;
  Field row_weight;
  Eigen::SimplicialLDLT<SpMat> ldlt;
  Eigen::SparseLU<SpMat> lu;

  Impl(const Grid& g, EllipticOptions opt) : grid(g), options(opt) {
    a = assemble(grid, options, row_weight);
    if (options.mode == BoundaryMode::Dirichlet) {
      lu.analyzePattern(a);
      lu.factorize(a);
      if (lu.info() != Eigen::Success) throw SolverError("sparse LU factorization failed", 0.0);
    } else {
      // Row scaling by the trapezoid weights symmetrizes the ghost-node rows.
      const SpMat sym = Eigen::Map<const Vec>(row_weight.data(), row_weight.size()).asDiagonal() * a;
      ldlt.compute(sym);
      if (ldlt.info() != Eigen::Success) throw SolverError("sparse LDLT factorization failed", 0.0);
    }
  }

  Vec raw_solve(const Vec& rhs) const {
    if (options.mode == BoundaryMode::Dirichlet) return lu.solve(rhs);
    const Vec scaled = Eigen::Map<const Vec>(row_weight.data(), row_weight.size()).asDiagonal() * rhs;
    return ldlt.solve(scaled);
  }
};

EllipticSolver::EllipticSolver(const Grid& grid, EllipticOptions options)
    : impl_(std::make_unique<Impl>(grid, options)) {}
EllipticSolver::~EllipticSolver() = default;
EllipticSolver::EllipticSolver(EllipticSolver&&) noexcept = default;
EllipticSolver& EllipticSolver::operator=(EllipticSolver&&) noexcept = default;

const Grid& EllipticSolver::grid() const noexcept { return impl_->grid; }
const EllipticOptions& EllipticSolver::options() const noexcept { return impl_->options; }
std::size_t EllipticSolver::nonzeros() const noexcept { return static_cast<std::size_t>(impl_->a.nonZeros()); }

Field EllipticSolver::rhs(std::span<const double> source, std::span<const double> a) const {
  const Grid& g = impl_->grid;
  if (source.size() != g.size()) throw DataError("source size does not match the grid");
  if (a.size() != g.boundary().size()) throw DataError("boundary sample count does not match the grid");
  Field r(source.begin(), source.end());
  for (std::size_t b = 0; b < g.boundary().size(); ++b) {
    const std::size_t k = g.boundary()[b].node;
    if (impl_->options.mode == BoundaryMode::Dirichlet) r[k] = a[b];
    else r[k] += boundary_load_factor(g, k) * a[b];
  }
  return r;
}

Field EllipticSolver::solve(std::span<const double> source, std::span<const double> a) const {
  for (double s : source)
    if (!std::isfinite(s)) throw DataError("non-finite source value");
  const Vec rhs_v = to_vec(rhs(source, a));
  Vec h = impl_->raw_solve(rhs_v);
  double res = (impl_->a * h - rhs_v).lpNorm<Eigen::Infinity>();
  for (int refine = 0; refine < 3 && res > impl_->options.solver_tol; ++refine) {
    h += impl_->raw_solve(rhs_v - impl_->a * h);
    res = (impl_->a * h - rhs_v).lpNorm<Eigen::Infinity>();
  }
  if (!(res <= impl_->options.solver_tol)) throw SolverError("elliptic solve above tolerance", res);
  return to_field(h);
}

double EllipticSolver::residual(std::span<const double> h, std::span<const double> source,
                                std::span<const double> a) const {
  return (impl_->a * to_vec(h) - to_vec(rhs(source, a))).lpNorm<Eigen::Infinity>();
}

double EllipticSolver::interior_residual(std::span<const double> h, std::span<const double> source,
                                         std::span<const double> a) const {
  const Vec r = impl_->a * to_vec(h) - to_vec(rhs(source, a));
  double m = 0.0;
  for (std::size_t k : impl_->grid.interior()) m = std::max(m, std::abs(r[static_cast<Eigen::Index>(k)]));
  return m;
}

void EllipticSolver::dump_coo(std::ostream& os) const {
  os.precision(17);
  for (int c = 0; c < impl_->a.outerSize(); ++c)
    for (SpMat::InnerIterator it(impl_->a, c); it; ++it) os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

Eigen::MatrixXd EllipticSolver::dense_matrix() const { return Eigen::MatrixXd(impl_->a); }

Field solve_h(const Grid& grid, std::span<const double> omega, std::span<const double> a,
              const EllipticOptions& options) {
  return EllipticSolver(grid, options).solve(omega, a);
}

double NodalVector::max_abs() const noexcept {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  for (double v : y) m = std::max(m, std::abs(v));
  return m;
}

NodalVector velocity(const Grid& g, std::span<const double> h) {
  if (h.size() != g.size()) throw DataError("h size does not match the grid");
  NodalVector v;
  for (int ax = 0; ax < g.dimension(); ++ax) {
    Field& comp = ax == 0 ? v.x : v.y;
    comp.resize(g.size());
    const std::size_t s = stride(g, ax);
    const std::size_t n = g.count(ax);
    const double two_dx = 2.0 * g.spacing(ax);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const std::size_t p = g.ij(k)[ax];
      double grad;
      if (p == 0) grad = (-3.0 * h[k] + 4.0 * h[k + s] - h[k + 2 * s]) / two_dx;
      else if (p + 1 == n) grad = (3.0 * h[k] - 4.0 * h[k - s] + h[k - 2 * s]) / two_dx;
      else grad = (h[k + s] - h[k - s]) / two_dx;
      comp[k] = -grad;
    }
  }
  return v;
}

Field GreenOperators::apply(std::span<const double> source, std::span<const double> a) const {
  const Vec h = K1 * to_vec(source) + K2 * to_vec(a);
  return to_field(h);
}

GreenOperators build_green_operators(const Grid& g, const EllipticOptions& options) {
  if (g.size() > options.dense_cap)
    throw ConfigError("grid has " + std::to_string(g.size()) + " nodes, above the dense cap of " +
                          std::to_string(options.dense_cap) + "; use solve_h instead",
                      "dense_cap");
  Field w;
  const Eigen::MatrixXd a = Eigen::MatrixXd(assemble(g, options, w));
  const Eigen::MatrixXd inv = a.partialPivLu().inverse();

  const std::size_t nb = g.boundary().size();
  Eigen::MatrixXd load = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(nb));
  for (std::size_t b = 0; b < nb; ++b) {
    const std::size_t k = g.boundary()[b].node;
    load(k, b) = options.mode == BoundaryMode::Dirichlet ? 1.0 : boundary_load_factor(g, k);
  }

  GreenOperators out;
  out.K1 = inv;
  if (options.mode == BoundaryMode::Dirichlet)
    for (const auto& bn : g.boundary()) out.K1.col(static_cast<Eigen::Index>(bn.node)).setZero();
  out.K2 = inv * load;
  return out;
}

double discrete_kernel(const GreenOperators& green, const Grid& grid, std::size_t x, std::size_t y) {
  return green.K1(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) / grid.node_weight(y);
}

KernelBoundReport kernel_bound_check(const GreenOperators& green, const Grid& g) {
  if (g.dimension() != 2) throw ConfigError("kernel envelope check needs a 2-D grid", "dimension");
  KernelBoundReport rep;
  rep.near_radius = 0.25 * g.min_extent();
  rep.min_kernel = std::numeric_limits<double>::infinity();
  auto envelope = [](double r) { return 1.0 + std::abs(std::log(r)); };
  auto dist = [&](std::size_t x, std::size_t y) {
    const auto p = g.coords(x);
    const auto q = g.coords(y);
    return std::hypot(p[0] - q[0], p[1] - q[1]);
  };

  for (std::size_t x = 0; x < g.size(); ++x)
    for (std::size_t y = 0; y < g.size(); ++y) {
      if (x == y) continue;
      const double k = discrete_kernel(green, g, x, y);
      rep.min_kernel = std::min(rep.min_kernel, k);
      const double r = dist(x, y);
      rep.envelope_constant = std::max(rep.envelope_constant, std::abs(k) / envelope(r));
      if (r <= rep.near_radius) rep.near_constant = std::max(rep.near_constant, std::abs(k) / envelope(r));
    }

  std::size_t violations = 0;
  for (std::size_t x = 0; x < g.size(); ++x)
    for (std::size_t y = 0; y < g.size(); ++y) {
      if (x == y) continue;
      ++rep.entries;
      const double k = std::abs(discrete_kernel(green, g, x, y));
      if (k > rep.envelope_constant * envelope(dist(x, y)) * (1.0 + 1e-12)) ++violations;
    }
  rep.violation_fraction = rep.entries ? static_cast<double>(violations) / rep.entries : 0.0;
  return rep;
}

struct DirichletProblem::Impl {
  Grid grid;
  double stiffness;
  std::vector<std::size_t> interior_slot;
  Eigen::SimplicialLLT<SpMat> llt;

  Impl(const Grid& g, double mass, double stiff) : grid(g), stiffness(stiff) {
    if (!(mass >= 0.0) || !(stiff >= 0.0) || !(mass + stiff > 0.0))
      throw ConfigError("Dirichlet problem needs nonnegative coefficients with positive sum");
    interior_slot.assign(g.size(), Grid::npos);
    const auto& in = g.interior();
    for (std::size_t m = 0; m < in.size(); ++m) interior_slot[in[m]] = m;
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t m = 0; m < in.size(); ++m) {
      const std::size_t k = in[m];
      double diag = mass;
      for (int ax = 0; ax < g.dimension(); ++ax) {
        const double inv = stiff / (g.spacing(ax) * g.spacing(ax));
        const std::size_t s = stride(g, ax);
        diag += 2.0 * inv;
        for (std::size_t nb : {k - s, k + s})
          if (interior_slot[nb] != Grid::npos) trip.emplace_back(m, interior_slot[nb], -inv);
      }
      trip.emplace_back(m, m, diag);
    }
    SpMat a(in.size(), in.size());
    a.setFromTriplets(trip.begin(), trip.end());
    llt.compute(a);
    if (llt.info() != Eigen::Success) throw SolverError("Dirichlet factorization failed", 0.0);
  }
};

DirichletProblem::DirichletProblem(const Grid& grid, double mass, double stiffness)
    : impl_(std::make_unique<Impl>(grid, mass, stiffness)) {}
DirichletProblem::~DirichletProblem() = default;
DirichletProblem::DirichletProblem(DirichletProblem&&) noexcept = default;
DirichletProblem& DirichletProblem::operator=(DirichletProblem&&) noexcept = default;

Field DirichletProblem::solve(std::span<const double> rhs, std::span<const double> boundary_values) const {
  const Grid& g = impl_->grid;
  if (rhs.size() != g.size()) throw DataError("rhs size does not match the grid");
  if (boundary_values.size() != g.boundary().size()) throw DataError("boundary value count does not match the grid");
  Field out(g.size(), 0.0);
  for (std::size_t b = 0; b < g.boundary().size(); ++b) out[g.boundary()[b].node] = boundary_values[b];

  const auto& in = g.interior();
  Vec r(static_cast<Eigen::Index>(in.size()));
  for (std::size_t m = 0; m < in.size(); ++m) {
    const std::size_t k = in[m];
    double v = rhs[k];
    for (int ax = 0; ax < g.dimension(); ++ax) {
      const double inv = impl_->stiffness / (g.spacing(ax) * g.spacing(ax));
      const std::size_t s = stride(g, ax);
      for (std::size_t nb : {k - s, k + s})
        if (impl_->interior_slot[nb] == Grid::npos) v += inv * out[nb];
    }
    r[static_cast<Eigen::Index>(m)] = v;
  }
  const Vec u = impl_->llt.solve(r);
  for (std::size_t m = 0; m < in.size(); ++m) out[in[m]] = u[static_cast<Eigen::Index>(m)];
  return out;
}

HMinusOneNorm::HMinusOneNorm(const Grid& grid) : grid_(grid), problem_(grid, 1.0, 1.0) {}

double HMinusOneNorm::squared(std::span<const double> u) const {
  if (u.size() != grid_.size()) throw DataError("field size does not match the grid");
  Field src(u.begin(), u.end());
  const Field zero(grid_.boundary().size(), 0.0);
  const Field w = problem_.solve(src, zero);
  double s = 0.0;
  for (std::size_t k : grid_.interior()) s += u[k] * w[k];
  return grid_.cell_volume() * s;
}

double HMinusOneNorm::norm(std::span<const double> u) const { return std::sqrt(std::max(0.0, squared(u))); }

}  // namespace vflux
