// SPDX-License-Identifier: Apache-2.0
//
// Sampled boundary data, extension of the inflow data b and the initial
// density to a space-time function by the heat equation, and the mollified
// data used by the regularized problem.
#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "vortexflux/grid.hpp"

namespace vflux {

/// Raw boundary samples: rows (time, arc-length position, value). In 1-D the
/// arc position is the x coordinate of the end point.
struct BoundaryTable {
  struct Row {
    double t = 0.0;
    double arc = 0.0;
    double value = 0.0;
  };
  std::vector<Row> rows;

  static BoundaryTable constant(double value);
  static BoundaryTable read_csv(std::istream& is, const std::string& origin = "boundary table");
  static BoundaryTable read_csv_file(const std::string& path);
  void write_csv(std::ostream& os) const;
};

/// Boundary values on the nodes of a grid at increasing sample times,
/// linearly interpolated in time and held constant outside the sample range.
class BoundarySeries {
 public:
  BoundarySeries() = default;
  BoundarySeries(std::vector<double> times, std::vector<Field> values);

  static BoundarySeries constant(const Grid& grid, double value);
  /// f(node, t) sampled at the given times.
  static BoundarySeries sample(const Grid& grid, std::vector<double> times,
                               const std::function<double(const BoundaryNode&, double)>& f);
  /// Linear interpolation along the boundary (periodic in 2-D) of each time slice.
  static BoundarySeries from_table(const Grid& grid, const BoundaryTable& table);

  Field at(double t) const;
  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<Field>& values() const noexcept { return values_; }
  bool empty() const noexcept { return times_.empty(); }
  double max() const;
  double min() const;

 private:
  std::vector<double> times_;
  std::vector<Field> values_;
};

/// Field with the same value at every node.
Field constant_field(const Grid& grid, double value);

enum class GammaExtension {
  Taper,  ///< b kept on the inflow part, cosine decay to 0 along the boundary elsewhere
  Data    ///< supplied b samples used on the whole boundary
};

const char* to_string(GammaExtension mode) noexcept;
GammaExtension parse_gamma_extension(const std::string& text);

struct ExtensionOptions {
  double tol_sign = 0.0;
  GammaExtension gamma = GammaExtension::Taper;
  /// Arc length over which b decays away from the inflow part; 0 selects min_extent / 4.
  double taper_length = 0.0;
  /// Heat-equation step and storage cadence; 0 selects T / 200.
  double heat_dt = 0.0;
  bool heat_implicit = true;
  /// Mollifier radius as a multiple of epsilon.
  double mollifier_scale = 1.0;
};

/// b extended to every boundary node; throws DataError on negative samples.
BoundarySeries extend_gamma(const Grid& grid, const BoundarySeries& b, const BoundaryClassification& cls,
                            const ExtensionOptions& options = {});

/// Space-time field stored at uniform times, linear interpolation in between.
struct SpaceTimeField {
  std::vector<double> times;
  std::vector<Field> values;

  Field at(double t) const;
  double max() const;
  double min() const;
};

/// w_t - Lap w = 0 with w(., 0) = omega0 and w = b_ext on the boundary for t > 0.
SpaceTimeField heat_extend(const Grid& grid, const BoundarySeries& b_ext, const Field& omega0, double T,
                           double dt, bool implicit = true);

/// Separable (1 - s^2)^2 kernel of the given radius, truncated and renormalized at the edges.
Field mollify_field(const Grid& grid, const Field& f, double radius);
/// Periodic smoothing of boundary values along the perimeter (identity in 1-D).
Field mollify_boundary(const Grid& grid, const Field& a, double radius);
/// Forces the labels of `cls`: wrong-sign values fall back to `fallback`, Zero nodes become 0.
Field project_signs(const Field& smoothed, const Field& fallback, const BoundaryClassification& cls,
                    double tol_sign);

struct ExtensionResult {
  BoundaryClassification classification;
  BoundarySeries b_ext;
  SpaceTimeField omega_breve;
  SpaceTimeField omega_breve_eps;
  BoundarySeries a_eps;
  double aleph_measured = 0.0;
  double mollifier_radius = 0.0;
  std::string mollifier;  ///< kernel description for run metadata

  Field dirichlet(const Grid& grid, double t) const;
};

/// Full pipeline: classification, sign-pattern check, extension of b, heat
/// extension, mollification at level epsilon, clamp to [0, aleph].
ExtensionResult build_extension(const Grid& grid, const BoundarySeries& a, const BoundarySeries& b,
                                const Field& omega0, double T, double epsilon, double aleph,
                                const ExtensionOptions& options = {});

}  // namespace vflux
