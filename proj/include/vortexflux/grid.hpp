// SPDX-License-Identifier: Apache-2.0
//
// Structured node grids on an interval or a rectangle, boundary metadata,
// inflow/outflow classification and the distance-based cut-off of unity.
#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace vflux {

/// Nodal values on a Grid, stored in grid index order (x fastest).
using Field = std::vector<double>;

struct BoundaryNode {
  std::size_t node = 0;            ///< grid node index
  std::array<double, 2> normal{};  ///< outward unit normal (axis aligned)
  double arc = 0.0;                ///< arc-length position along the boundary
  double measure = 0.0;            ///< discrete boundary measure carried by the node
};

/// Uniform vertex-centred grid. Boundary nodes are listed counter-clockwise
/// starting at the origin; in 1-D the list is {left, right}.
class Grid {
 public:
  static Grid build(int dimension, std::vector<double> extents, std::vector<std::size_t> counts);

  int dimension() const noexcept { return dim_; }
  double extent(int axis) const { return extents_[axis]; }
  std::size_t count(int axis) const { return counts_[axis]; }
  double spacing(int axis) const { return spacing_[axis]; }
  double min_extent() const noexcept;
  double min_spacing() const noexcept;

  std::size_t size() const noexcept { return counts_[0] * counts_[1]; }
  std::size_t index(std::size_t i, std::size_t j = 0) const noexcept { return j * counts_[0] + i; }
  std::array<std::size_t, 2> ij(std::size_t k) const noexcept { return {k % counts_[0], k / counts_[0]}; }
  std::array<double, 2> coords(std::size_t k) const noexcept;

  bool is_boundary(std::size_t k) const noexcept;
  /// True when node k lies on the low/high face of the given axis.
  bool on_low(std::size_t k, int axis) const noexcept { return ij(k)[axis] == 0; }
  bool on_high(std::size_t k, int axis) const noexcept { return ij(k)[axis] + 1 == counts_[axis]; }

  const std::vector<BoundaryNode>& boundary() const noexcept { return boundary_; }
  const std::vector<std::size_t>& interior() const noexcept { return interior_; }
  /// Position of node k in boundary(), or npos for interior nodes.
  std::size_t boundary_slot(std::size_t k) const noexcept { return slot_[k]; }
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  /// Cell (dual control volume) size: product of spacings.
  double cell_volume() const noexcept;
  /// Trapezoid quadrature weight of node k (cell volume scaled by 1/2 per boundary axis).
  double node_weight(std::size_t k) const noexcept;
  /// Length of the boundary (perimeter in 2-D, number of end points in 1-D).
  double boundary_length() const noexcept;

  /// Number of cells [i,i+1] x [j,j+1].
  std::size_t cell_count() const noexcept;
  /// Corner node indices of cell c (1-D: two nodes, 2-D: four nodes, counter-clockwise).
  std::vector<std::size_t> cell_nodes(std::size_t c) const;
  std::array<double, 2> cell_center(std::size_t c) const;

  void write_header(std::ostream& os) const;
  std::string describe() const;

  bool operator==(const Grid& other) const noexcept;

 private:
  Grid() = default;

  int dim_ = 1;
  std::array<double, 2> extents_{1.0, 0.0};
  std::array<std::size_t, 2> counts_{1, 1};
  std::array<double, 2> spacing_{1.0, 1.0};
  std::vector<BoundaryNode> boundary_;
  std::vector<std::size_t> interior_;
  std::vector<std::size_t> slot_;
};

/// Parses the "# dimension / # extents / # counts" header written by Grid::write_header.
Grid read_grid_header(std::istream& is);

enum class BoundaryLabel { Plus, Zero, Minus };

const char* to_string(BoundaryLabel label) noexcept;

struct BoundaryClassification {
  std::vector<BoundaryLabel> labels;  ///< one per Grid::boundary() entry
  double measure_plus = 0.0;
  double measure_zero = 0.0;
  double measure_minus = 0.0;

  bool operator==(const BoundaryClassification&) const = default;
};

/// Labels each boundary node by the sign of the normal velocity a = v.n.
BoundaryClassification classify_boundary(const Grid& grid, std::span<const double> a, double tol_sign = 0.0);

/// Distance to the boundary, positive inside (closed form on the rectangle).
Field distance_field(const Grid& grid);
double distance_to_boundary(const Grid& grid, std::array<double, 2> x) noexcept;

/// Continuous cut-off of unity: 0 for d <= sigma, (d - sigma)/sigma in between, 1 for d >= 2 sigma.
double unit_approx(double d, double sigma) noexcept;
/// Node-wise cut-off of unity; sigma must satisfy 0 < 2 sigma < min_extent / 2.
Field unit_approx(const Grid& grid, std::span<const double> d, double sigma);

}  // namespace vflux
