// SPDX-License-Identifier: Apache-2.0
//
// Runtime checks over completed trajectories: positivity, L1 and maximum
// bounds, gradient energy, the weak identity against admissible test
// functions, boundary-layer fluxes, and epsilon-family uniformity.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vortexflux/coupling.hpp"

namespace vflux {

enum class CheckStatus { Pass, Fail, Info };

const char* to_string(CheckStatus s) noexcept;
CheckStatus parse_check_status(const std::string& text);

struct ReportEntry {
  std::string name;
  CheckStatus status = CheckStatus::Info;
  double value = 0.0;
  double tolerance = 0.0;
  std::string reference;  ///< the estimate the check stands for

  bool operator==(const ReportEntry&) const = default;
};

struct InvariantReport {
  double epsilon = 0.0;
  double R = 0.0;
  std::string grid;
  double dt_min = 0.0;
  double dt_max = 0.0;
  std::vector<ReportEntry> entries;

  void add(ReportEntry e);
  /// Pass / Fail from a boolean.
  void add(std::string name, bool ok, double value, double tolerance, std::string reference);
  void info(std::string name, double value, std::string reference);
  const ReportEntry* find(const std::string& name) const;
  bool passed() const;
  std::vector<std::string> failures() const;

  void write_csv(std::ostream& os) const;
  static InvariantReport read_csv(std::istream& is);
  std::string summary() const;

  bool operator==(const InvariantReport&) const = default;
};

ReportEntry check_positivity(const Trajectory& traj);
/// Time series (t, ||w(t)||_1) over the stored snapshots.
std::vector<std::pair<double, double>> l1_series(const Trajectory& traj);
ReportEntry check_l1_series(const Trajectory& traj);
ReportEntry check_max_principle(const Trajectory& traj, double aleph);
ReportEntry check_gradient_energy(const Trajectory& traj);

/// psi(x, t) = S(x) (1 - t/T)^p.
struct TestFunction {
  Field S;          ///< spatial profile at the nodes
  double T = 1.0;
  double p = 2.0;
  int frequency = 0;
  double amplitude = 0.0;
  bool vanishes_at_T = false;
  bool vanishes_off_inflow = false;  ///< zero on every Plus / Zero boundary node

  double time_factor(double t) const;
  double time_derivative(double t) const;
  bool admissible() const { return vanishes_at_T && vanishes_off_inflow; }
  /// Verifies both flags on the grid.
  void verify(const Grid& grid, const BoundaryClassification& cls);
};

/// Frequencies 1..count with seeded amplitudes and time exponents; each
/// profile is masked to vanish near the Plus / Zero boundary nodes.
std::vector<TestFunction> make_test_functions(const Grid& grid, const BoundaryClassification& cls, double T,
                                              std::size_t count, std::uint64_t seed);

struct WeakTerms {
  double transport = 0.0;  ///< int int w (psi_t + v . grad psi)
  double initial = 0.0;    ///< int w0 psi(., 0)
  double boundary = 0.0;   ///< int int over the inflow part of a b psi
  double residual = 0.0;   ///< |transport + initial - boundary| / largest magnitude
};

/// Midpoint rule on cells, trapezoid over the snapshots. Uses the original
/// data a, b (inflow part) and omega0.
WeakTerms weak_residual(const Trajectory& traj, const TestFunction& psi, const ModelData& data,
                        const BoundaryClassification& cls);

struct LayerFlux {
  double sigma = 0.0;
  double J1 = 0.0;
  double J2 = 0.0;
  double target = 0.0;  ///< -int int over the inflow part of a b psi
};

LayerFlux boundary_layer_flux(const Trajectory& traj, const ExtensionResult& ext, double sigma,
                              const TestFunction& psi, const ModelData& data);

/// Fraction of collar nodes (within collar of the boundary) where v . grad d
/// has the wrong sign for the nearest boundary label.
double b1_sign_violation(const Trajectory& traj, const BoundaryClassification& cls, double collar);

struct ModulusEntry {
  double dt = 0.0;
  double value = 0.0;  ///< max over x and snapshot pairs of |grad h(t2) - grad h(t1)|
};
std::vector<ModulusEntry> gradient_modulus(const Trajectory& traj);

/// Every single-run check for a trajectory produced from `config`.
InvariantReport validate_trajectory(const Trajectory& traj, const ExtensionResult& ext, const SimConfig& config);

/// Family uniformity and the Cauchy monotonicity of the H^-1 distances.
InvariantReport family_report(const FamilyResult& family);

/// R* certificate entries.
void add_r_star_entries(InvariantReport& report, const RStarResult& r);

}  // namespace vflux
