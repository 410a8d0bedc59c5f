#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mfs/randfield/kl_basis.hpp"
#include "mfs/solver/flow_config.hpp"
#include "mfs/solver/pressure.hpp"
#include "mfs/solver/transport.hpp"

namespace mfs::solver {

/// Invading-phase saturation snapshots, time-major: snapshots[t * cells + c].
struct SaturationSeries {
  Grid grid;
  std::vector<double> times;
  std::vector<double> snapshots;

  std::size_t num_times() const noexcept { return times.size(); }
  std::span<const double> snapshot(std::size_t t) const {
    return {snapshots.data() + t * grid.cells(), grid.cells()};
  }
  double at(std::size_t t, int i, int j) const { return snapshots[t * grid.cells() + grid.index(i, j)]; }
};

/// Bookkeeping of one run, used by the conservation and boundedness checks.
struct SimulationDiagnostics {
  long steps = 0;
  /// Largest excursion of S_1 outside [0, 1] before clamping.
  double max_bound_violation = 0.0;
  /// sum phi V (S_end - S_0).
  double mass_change = 0.0;
  /// Time-integrated net invading-phase boundary inflow.
  double boundary_influx = 0.0;
  /// Time-integrated invading-phase sink volume.
  double sink_volume = 0.0;
  double max_pressure_residual = 0.0;

  double mass_balance_error() const {
    const double scale = std::max({std::abs(mass_change), std::abs(boundary_influx), 1e-300});
    return std::abs(mass_change - (boundary_influx - sink_volume)) / scale;
  }
};

struct SimulationResult {
  SaturationSeries series;
  SimulationDiagnostics diagnostics;
};

/// IMPES integration from S_1 = 0 to t_end: the pressure is solved every step
/// with the current mobilities, then saturation advances explicitly with a
/// CFL-limited step. Snapshots are linearly interpolated in time.
inline SimulationResult simulate_traced(const randfield::Field& k, const FlowConfig& config) {
  config.validate();
  if (!k.grid.same_shape(config.grid)) throw ArgumentError("field grid does not match flow grid");
  const Grid& g = config.grid;
  const std::size_t n = g.cells();

  PressureSolver pressure(config, k.values);
  const double max_slope = max_fractional_flow_slope(config);
  const double pore = config.porosity * g.cell_measure();

  SimulationResult out;
  out.series.grid = g;
  out.series.times = config.snapshot_times;
  out.series.snapshots.reserve(config.snapshot_times.size() * n);
  auto& diag = out.diagnostics;

  std::vector<double> s(n, 0.0);
  double t = 0.0;
  std::size_t next_snapshot = 0;
  const double eps_t = 1e-12 * config.t_end;

  while (next_snapshot < config.snapshot_times.size()) {
    if (diag.steps >= config.max_steps)
      throw NumericalError("t_end unreachable within " + std::to_string(config.max_steps) +
                           " steps (reached t = " + std::to_string(t) + ")");
    const auto ps = pressure.solve(s);
    diag.max_pressure_residual = std::max(diag.max_pressure_residual, ps.relative_residual);
    double dt = stable_time_step(ps, config, max_slope);
    const bool last = !(dt < config.t_end - t - eps_t);
    if (last) dt = config.t_end - t;

    auto step = advance_saturation(s, ps, config, dt);
    diag.boundary_influx += step.boundary_influx;
    diag.sink_volume += dt * config.forcing[0] * g.measure();
    for (double v : step.saturation)
      diag.max_bound_violation = std::max({diag.max_bound_violation, -v, v - 1.0});
    const double t_new = last ? config.t_end : t + dt;

    while (next_snapshot < config.snapshot_times.size() &&
           config.snapshot_times[next_snapshot] <= t_new + (last ? eps_t : 0.0)) {
      const double ts = config.snapshot_times[next_snapshot];
      const double w = std::clamp((ts - t) / (t_new - t), 0.0, 1.0);
      for (std::size_t c = 0; c < n; ++c) {
        const double v = w == 1.0 ? step.saturation[c] : s[c] + w * (step.saturation[c] - s[c]);
        out.series.snapshots.push_back(std::clamp(v, 0.0, 1.0));
      }
      ++next_snapshot;
    }

    for (std::size_t c = 0; c < n; ++c) s[c] = std::clamp(step.saturation[c], 0.0, 1.0);
    t = t_new;
    ++diag.steps;
  }

  for (double v : s) diag.mass_change += pore * v;
  return out;
}

inline SaturationSeries simulate(const randfield::Field& k, const FlowConfig& config) {
  return simulate_traced(k, config).series;
}

}  // namespace mfs::solver
