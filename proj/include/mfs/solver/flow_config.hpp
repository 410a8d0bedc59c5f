#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "mfs/core/errors.hpp"
#include "mfs/core/grid.hpp"

namespace mfs::solver {

enum class Phase { Invading = 0, Resident = 1 };

/// Inputs of the two-phase Darcy problem apart from the permeability field.
struct FlowConfig {
  Grid grid = Grid::square(64);
  double porosity = 0.25;
  std::array<double, 2> viscosities{1.0, 1.0};
  std::array<double, 2> residual_saturations{0.0, 0.0};
  double p_left = 10.2;
  double p_right = 10.1;
  double s_inject = 1.0;
  /// Uniform sink term q_l per unit volume for each phase.
  std::array<double, 2> forcing{0.0, 0.0};
  double t_end = 60'000.0;
  double cfl = 0.98;
  std::vector<double> snapshot_times = uniform_snapshots(60'000.0, 8);
  double pressure_tolerance = 1e-10;
  long max_steps = 5'000'000;

  /// `count` equally spaced times in (0, t_end], the last one at t_end.
  static std::vector<double> uniform_snapshots(double t_end, int count) {
    std::vector<double> t(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i) t[i] = t_end * (i + 1) / count;
    return t;
  }

  /// Same physics on a different grid.
  FlowConfig on_grid(const Grid& g) const {
    FlowConfig c = *this;
    c.grid = g;
    return c;
  }

  /// The 1D pipe approximation along x1 with the same resolution.
  FlowConfig line() const { return on_grid(Grid::line(grid.nx, grid.length_x)); }

  /// Rescales the horizon, keeping the same number of uniform snapshots.
  FlowConfig with_horizon(double new_t_end) const {
    FlowConfig c = *this;
    c.t_end = new_t_end;
    c.snapshot_times = uniform_snapshots(new_t_end, static_cast<int>(snapshot_times.size()));
    return c;
  }

  void validate() const {
    grid.validate();
    if (!(porosity > 0.0 && porosity <= 1.0)) throw ArgumentError("porosity must be in (0, 1]");
    for (double mu : viscosities)
      if (!(mu > 0.0)) throw ArgumentError("viscosities must be positive");
    for (double sr : residual_saturations)
      if (!(sr >= 0.0 && sr < 1.0)) throw ArgumentError("residual saturations must be in [0, 1)");
    if (!(residual_saturations[0] + residual_saturations[1] < 1.0))
      throw ArgumentError("residual saturations must sum to less than 1");
    if (!(s_inject >= 0.0 && s_inject <= 1.0)) throw ArgumentError("s_inject must be in [0, 1]");
    if (!(t_end > 0.0)) throw ArgumentError("t_end must be positive");
    if (!(cfl > 0.0 && cfl <= 1.0)) throw ArgumentError("cfl must be in (0, 1]");
    if (!(pressure_tolerance > 0.0)) throw ArgumentError("pressure_tolerance must be positive");
    if (snapshot_times.empty()) throw ArgumentError("at least one snapshot time is required");
    for (std::size_t i = 0; i < snapshot_times.size(); ++i) {
      const double t = snapshot_times[i];
      if (!(t > 0.0 && t <= t_end)) throw ArgumentError("snapshot times must lie in (0, t_end]");
      if (i > 0 && !(t > snapshot_times[i - 1]))
        throw ArgumentError("snapshot times must be strictly increasing");
    }
    if (max_steps <= 0) throw ArgumentError("max_steps must be positive");
  }
};

/// Brooks-Corey relative permeability of `phase` at invading saturation s:
/// clamp((S_l - S_l^r) / (1 - sum S^r), 0, 1) with S_1 = s, S_2 = 1 - s.
inline double relperm(double s, Phase phase, const std::array<double, 2>& residuals) {
  const double sl = phase == Phase::Invading ? s : 1.0 - s;
  const double r = residuals[static_cast<int>(phase)];
  const double kr = (sl - r) / (1.0 - residuals[0] - residuals[1]);
  return std::clamp(kr, 0.0, 1.0);
}

struct Mobilities {
  double invading;
  double resident;
  double total() const noexcept { return invading + resident; }
};

inline Mobilities mobilities(double s, const FlowConfig& c) {
  return {relperm(s, Phase::Invading, c.residual_saturations) / c.viscosities[0],
          relperm(s, Phase::Resident, c.residual_saturations) / c.viscosities[1]};
}

/// Fractional flow of the invading phase, f = lambda_1 / lambda_t.
inline double fractional_flow(double s, const FlowConfig& c) {
  const auto m = mobilities(s, c);
  const double t = m.total();
  return t > 0.0 ? m.invading / t : 0.0;
}

/// Lipschitz bound of f on [0, 1] estimated from fine secants.
inline double max_fractional_flow_slope(const FlowConfig& c, int intervals = 20'000) {
  double slope = 0.0;
  double prev = fractional_flow(0.0, c);
  for (int i = 1; i <= intervals; ++i) {
    const double s = static_cast<double>(i) / intervals;
    const double f = fractional_flow(s, c);
    slope = std::max(slope, std::abs(f - prev) * intervals);
    prev = f;
  }
  return slope;
}

}  // namespace mfs::solver
