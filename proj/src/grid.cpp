// SPDX-License-Identifier: Apache-2.0
#include "vortexflux/grid.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "vortexflux/error.hpp"

namespace vflux {

Grid Grid::build(int dimension, std::vector<double> extents, std::vector<std::size_t> counts) {
  if (dimension != 1 && dimension != 2) throw ConfigError("dimension must be 1 or 2", "dimension");
  if (extents.size() != static_cast<std::size_t>(dimension))
    throw ConfigError("expected one extent per axis", "extents");
  if (counts.size() != static_cast<std::size_t>(dimension))
    throw ConfigError("expected one node count per axis", "counts");

  Grid g;
  g.dim_ = dimension;
  for (int ax = 0; ax < dimension; ++ax) {
    if (!(extents[ax] > 0.0) || !std::isfinite(extents[ax]))
      throw ConfigError("extents must be positive", "extents");
    if (counts[ax] < 3) throw ConfigError("at least 3 nodes per axis are required", "counts");
    g.extents_[ax] = extents[ax];
    g.counts_[ax] = counts[ax];
    g.spacing_[ax] = extents[ax] / static_cast<double>(counts[ax] - 1);
  }

  const std::size_t nx = g.counts_[0];
  const std::size_t ny = g.counts_[1];
  g.slot_.assign(g.size(), npos);

  auto push = [&](std::size_t k, std::array<double, 2> n, double arc, double measure) {
    g.slot_[k] = g.boundary_.size();
    g.boundary_.push_back({k, n, arc, measure});
  };

  if (dimension == 1) {
    push(0, {-1.0, 0.0}, 0.0, 1.0);
    push(nx - 1, {1.0, 0.0}, g.extents_[0], 1.0);
  } else {
    const double hx = g.spacing_[0];
    const double hy = g.spacing_[1];
    const double lx = g.extents_[0];
    const double ly = g.extents_[1];
    const double corner = 0.5 * (hx + hy);
    // bottom edge, left to right; corner (0,0) opens it
    for (std::size_t i = 0; i + 1 < nx; ++i)
      push(g.index(i, 0), {0.0, -1.0}, i * hx, i == 0 ? corner : hx);
    // right edge, bottom to top
    for (std::size_t j = 0; j + 1 < ny; ++j)
      push(g.index(nx - 1, j), {1.0, 0.0}, lx + j * hy, j == 0 ? corner : hy);
    // top edge, right to left
    for (std::size_t i = nx - 1; i > 0; --i)
      push(g.index(i, ny - 1), {0.0, 1.0}, lx + ly + (nx - 1 - i) * hx, i == nx - 1 ? corner : hx);
    // left edge, top to bottom
    for (std::size_t j = ny - 1; j > 0; --j)
      push(g.index(0, j), {-1.0, 0.0}, 2.0 * lx + ly + (ny - 1 - j) * hy, j == ny - 1 ? corner : hy);
  }

  for (std::size_t k = 0; k < g.size(); ++k)
    if (g.slot_[k] == npos) g.interior_.push_back(k);
  return g;
}

double Grid::min_extent() const noexcept {
  return dim_ == 1 ? extents_[0] : std::min(extents_[0], extents_[1]);
}

double Grid::min_spacing() const noexcept {
  return dim_ == 1 ? spacing_[0] : std::min(spacing_[0], spacing_[1]);
}

std::array<double, 2> Grid::coords(std::size_t k) const noexcept {
  const auto [i, j] = ij(k);
  return {static_cast<double>(i) * spacing_[0], dim_ == 2 ? static_cast<double>(j) * spacing_[1] : 0.0};
}

bool Grid::is_boundary(std::size_t k) const noexcept { return slot_[k] != npos; }

double Grid::cell_volume() const noexcept { return dim_ == 1 ? spacing_[0] : spacing_[0] * spacing_[1]; }

double Grid::node_weight(std::size_t k) const noexcept {
  double w = cell_volume();
  for (int ax = 0; ax < dim_; ++ax)
    if (on_low(k, ax) || on_high(k, ax)) w *= 0.5;
  return w;
}

double Grid::boundary_length() const noexcept {
  return dim_ == 1 ? 2.0 : 2.0 * (extents_[0] + extents_[1]);
}

std::size_t Grid::cell_count() const noexcept {
  return dim_ == 1 ? counts_[0] - 1 : (counts_[0] - 1) * (counts_[1] - 1);
}

std::vector<std::size_t> Grid::cell_nodes(std::size_t c) const {
  const std::size_t cx = counts_[0] - 1;
  const std::size_t i = c % cx;
  const std::size_t j = c / cx;
  if (dim_ == 1) return {index(i), index(i + 1)};
  return {index(i, j), index(i + 1, j), index(i + 1, j + 1), index(i, j + 1)};
}

std::array<double, 2> Grid::cell_center(std::size_t c) const {
  const std::size_t cx = counts_[0] - 1;
  const double i = static_cast<double>(c % cx) + 0.5;
  const double j = static_cast<double>(c / cx) + 0.5;
  return {i * spacing_[0], dim_ == 2 ? j * spacing_[1] : 0.0};
}

void Grid::write_header(std::ostream& os) const {
  os.precision(17);
  os << "# dimension " << dim_ << '\n' << "# extents";
  for (int ax = 0; ax < dim_; ++ax) os << ' ' << extents_[ax];
  os << '\n' << "# counts";
  for (int ax = 0; ax < dim_; ++ax) os << ' ' << counts_[ax];
  os << '\n';
}

std::string Grid::describe() const {
  std::ostringstream os;
  os << dim_ << "D ";
  for (int ax = 0; ax < dim_; ++ax) os << (ax ? "x" : "") << counts_[ax];
  os << " nodes on ";
  for (int ax = 0; ax < dim_; ++ax) os << (ax ? "x" : "") << extents_[ax];
  return os.str();
}

bool Grid::operator==(const Grid& other) const noexcept {
  return dim_ == other.dim_ && extents_ == other.extents_ && counts_ == other.counts_;
}

Grid read_grid_header(std::istream& is) {
  int dim = 0;
  std::vector<double> extents;
  std::vector<std::size_t> counts;
  std::string line;
  for (int n = 0; n < 3 && std::getline(is, line); ++n) {
    std::istringstream ls(line);
    std::string hash, key;
    ls >> hash >> key;
    if (hash != "#") throw IoError("malformed grid header line: " + line);
    if (key == "dimension") {
      ls >> dim;
    } else if (key == "extents") {
      for (double v; ls >> v;) extents.push_back(v);
    } else if (key == "counts") {
      for (std::size_t v; ls >> v;) counts.push_back(v);
    } else {
      throw IoError("unexpected grid header key: " + key);
    }
  }
  return Grid::build(dim, std::move(extents), std::move(counts));
}

const char* to_string(BoundaryLabel label) noexcept {
  switch (label) {
    case BoundaryLabel::Plus: return "plus";
    case BoundaryLabel::Zero: return "zero";
    case BoundaryLabel::Minus: return "minus";
  }
  return "?";
}

BoundaryClassification classify_boundary(const Grid& grid, std::span<const double> a, double tol_sign) {
  const auto& bnd = grid.boundary();
  if (a.size() != bnd.size()) throw DataError("boundary sample count does not match the grid");
  BoundaryClassification out;
  out.labels.reserve(bnd.size());
  for (std::size_t b = 0; b < bnd.size(); ++b) {
    BoundaryLabel l = BoundaryLabel::Zero;
    if (a[b] > tol_sign) l = BoundaryLabel::Plus;
    else if (a[b] < -tol_sign) l = BoundaryLabel::Minus;
    out.labels.push_back(l);
    switch (l) {
      case BoundaryLabel::Plus: out.measure_plus += bnd[b].measure; break;
      case BoundaryLabel::Zero: out.measure_zero += bnd[b].measure; break;
      case BoundaryLabel::Minus: out.measure_minus += bnd[b].measure; break;
    }
  }
  return out;
}

double distance_to_boundary(const Grid& grid, std::array<double, 2> x) noexcept {
  double d = std::min(x[0], grid.extent(0) - x[0]);
  if (grid.dimension() == 2) d = std::min({d, x[1], grid.extent(1) - x[1]});
  return d;
}

Field distance_field(const Grid& grid) {
  Field d(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k)
    d[k] = grid.is_boundary(k) ? 0.0 : distance_to_boundary(grid, grid.coords(k));
  return d;
}

double unit_approx(double d, double sigma) noexcept {
  if (d >= 2.0 * sigma) return 1.0;
  if (d <= sigma) return 0.0;
  return (d - sigma) / sigma;
}

Field unit_approx(const Grid& grid, std::span<const double> d, double sigma) {
  if (!(sigma > 0.0) || !(2.0 * sigma < 0.5 * grid.min_extent()))
    throw ConfigError("sigma must satisfy 0 < 2 sigma < min extent / 2", "sigma");
  if (d.size() != grid.size()) throw DataError("distance field size does not match the grid");
  Field out(d.size());
  std::transform(d.begin(), d.end(), out.begin(), [sigma](double v) { return unit_approx(v, sigma); });
  return out;
}

}  // namespace vflux
