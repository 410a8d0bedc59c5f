#pragma once

#include <algorithm>
#include <limits>
#include <span>
#include <vector>

#include "mfs/solver/flow_config.hpp"
#include "mfs/solver/pressure.hpp"

namespace mfs::solver {

/// Result of one explicit saturation step.
struct TransportStep {
  std::vector<double> saturation;
  /// Net invading-phase volume entering through Gamma_l and Gamma_r.
  double boundary_influx = 0.0;
};

/// Largest stable step: cfl * min over cells of phi V / (max f' * outflow),
/// where outflow is the total flux leaving the cell across all its faces.
inline double stable_time_step(const PressureSolution& ps, const FlowConfig& c, double max_slope) {
  const Grid& g = c.grid;
  const int nx = g.nx, ny = g.ny;
  const double ax = g.dy(), ay = g.dx();
  const double pore = c.porosity * g.cell_measure();
  double dt = std::numeric_limits<double>::infinity();
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const std::size_t row = static_cast<std::size_t>(j) * (nx + 1);
      double out = std::max(ps.vx[row + i + 1], 0.0) * ax + std::max(-ps.vx[row + i], 0.0) * ax;
      if (ny > 1) {
        out += std::max(ps.vy[static_cast<std::size_t>(j + 1) * nx + i], 0.0) * ay;
        out += std::max(-ps.vy[static_cast<std::size_t>(j) * nx + i], 0.0) * ay;
      }
      if (out > 0.0 && max_slope > 0.0) dt = std::min(dt, pore / (max_slope * out));
    }
  return c.cfl * dt;
}

/// Explicit single-point-upwind update of S_1 over `dt`.
///
/// The invading-phase flux through a face is the total face flux times
/// f(S_upwind), upwinding on the sign of the total flux. Inflow through
/// Gamma_l carries s_inject; backflow through Gamma_r would carry the
/// initial resident state S_1 = 0.
inline TransportStep advance_saturation(std::span<const double> s, const PressureSolution& ps,
                                        const FlowConfig& c, double dt) {
  const Grid& g = c.grid;
  const int nx = g.nx, ny = g.ny;
  const double ax = g.dy(), ay = g.dx();
  const double scale = dt / (c.porosity * g.cell_measure());

  std::vector<double> f(g.cells());
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = fractional_flow(s[k], c);
  const double f_inject = fractional_flow(c.s_inject, c);
  const double f_resident = fractional_flow(0.0, c);

  // Net invading-phase volume rate into each cell.
  std::vector<double> net(g.cells(), 0.0);
  double boundary = 0.0;
  for (int j = 0; j < ny; ++j) {
    const std::size_t row = static_cast<std::size_t>(j) * (nx + 1);
    for (int i = 0; i <= nx; ++i) {
      const double flux = ps.vx[row + i] * ax;
      if (flux == 0.0) continue;
      double phase;
      if (i == 0) {
        phase = flux * (flux > 0.0 ? f_inject : f[g.index(0, j)]);
        net[g.index(0, j)] += phase;
        boundary += phase;
      } else if (i == nx) {
        phase = flux * (flux > 0.0 ? f[g.index(nx - 1, j)] : f_resident);
        net[g.index(nx - 1, j)] -= phase;
        boundary -= phase;
      } else {
        const std::size_t a = g.index(i - 1, j), b = g.index(i, j);
        phase = flux * (flux > 0.0 ? f[a] : f[b]);
        net[a] -= phase;
        net[b] += phase;
      }
    }
  }
  if (ny > 1) {
    for (int j = 1; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const double flux = ps.vy[static_cast<std::size_t>(j) * nx + i] * ay;
        if (flux == 0.0) continue;
        const std::size_t a = g.index(i, j - 1), b = g.index(i, j);
        const double phase = flux * (flux > 0.0 ? f[a] : f[b]);
        net[a] -= phase;
        net[b] += phase;
      }
  }

  TransportStep step{std::vector<double>(s.begin(), s.end()), boundary * dt};
  const double sink = dt * c.forcing[0] / c.porosity;
  for (std::size_t k = 0; k < net.size(); ++k) step.saturation[k] += scale * net[k] - sink;
  return step;
}

}  // namespace mfs::solver
