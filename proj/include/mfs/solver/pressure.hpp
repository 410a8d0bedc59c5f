#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mfs/core/errors.hpp"
#include "mfs/randfield/kl_basis.hpp"
#include "mfs/solver/flow_config.hpp"

namespace mfs::solver {

/// Cell pressures and total Darcy velocities on faces.
///
/// x-faces are indexed j * (nx + 1) + i for i in [0, nx] (i = 0 is Gamma_l),
/// y-faces j * nx + i for j in [0, ny] (j = 0 is Gamma_b; absent in 1D).
struct PressureSolution {
  std::vector<double> pressure;
  std::vector<double> vx;
  std::vector<double> vy;
  double relative_residual = 0.0;
};

/// Two-point flux approximation of div(k lambda_t(S) grad P) = q_1 + q_2 with
/// Dirichlet pressure on Gamma_l / Gamma_r and no flow on Gamma_b / Gamma_t.
///
/// Works with the shifted unknown P - p_right so that rounding is relative to
/// the pressure drop rather than the absolute pressure level. 1D systems are
/// tridiagonal and use the Thomas algorithm; 2D systems use a sparse LDL^T
/// factorization whose symbolic analysis is shared across steps. The
/// numerical factorization is redone only when the cell mobilities change,
/// and the solve is skipped when both operator and right-hand side are
/// bitwise unchanged (the result would be bitwise identical).
class PressureSolver {
 public:
  PressureSolver(const FlowConfig& config, std::span<const double> permeability)
      : config_(config), k_(permeability.begin(), permeability.end()) {
    if (k_.size() != config.grid.cells())
      throw ArgumentError("permeability size does not match the flow grid");
    for (double v : k_)
      if (!(v > 0.0) || !std::isfinite(v)) throw ArgumentError("permeability must be positive");
  }

  const FlowConfig& config() const noexcept { return config_; }

  PressureSolution solve(std::span<const double> saturation) {
    const Grid& g = config_.grid;
    if (saturation.size() != g.cells()) throw ArgumentError("saturation size mismatch");
    std::vector<double> mob(g.cells());
    for (std::size_t c = 0; c < mob.size(); ++c)
      mob[c] = k_[c] * mobilities(saturation[c], config_).total();

    const bool same_operator = !mob_.empty() && mob == mob_;
    if (!same_operator) {
      mob_ = std::move(mob);
      assemble();
    }
    if (!(same_operator && have_solution_)) {
      if (g.ny == 1)
        solve_tridiagonal();
      else
        solve_sparse(same_operator);
      have_solution_ = true;
    }
    return fluxes();
  }

 private:
  static double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

  void assemble() {
    const Grid& g = config_.grid;
    const int nx = g.nx, ny = g.ny;
    const double dx = g.dx(), dy = g.dy();
    tx_.assign(static_cast<std::size_t>(nx + 1) * ny, 0.0);
    ty_.assign(ny > 1 ? static_cast<std::size_t>(nx) * (ny + 1) : 0, 0.0);
    for (int j = 0; j < ny; ++j) {
      const std::size_t row = static_cast<std::size_t>(j) * (nx + 1);
      tx_[row] = 2.0 * dy * mob_[g.index(0, j)] / dx;
      tx_[row + nx] = 2.0 * dy * mob_[g.index(nx - 1, j)] / dx;
      for (int i = 1; i < nx; ++i)
        tx_[row + i] = dy / dx * harmonic(mob_[g.index(i - 1, j)], mob_[g.index(i, j)]);
    }
    for (int j = 1; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        ty_[static_cast<std::size_t>(j) * nx + i] =
            dx / dy * harmonic(mob_[g.index(i, j - 1)], mob_[g.index(i, j)]);

    diag_.assign(g.cells(), 0.0);
    rhs_.assign(g.cells(), 0.0);
    const double q_total = config_.forcing[0] + config_.forcing[1];
    const double drop = config_.p_left - config_.p_right;
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const std::size_t c = g.index(i, j);
        const std::size_t row = static_cast<std::size_t>(j) * (nx + 1);
        double d = tx_[row + i] + tx_[row + i + 1];
        if (ny > 1) d += ty_[static_cast<std::size_t>(j) * nx + i] + ty_[static_cast<std::size_t>(j + 1) * nx + i];
        diag_[c] = d;
        double b = -q_total * g.cell_measure();
        if (i == 0) b += tx_[row] * drop;
        rhs_[c] = b;
      }
  }

  void solve_tridiagonal() {
    const int n = config_.grid.nx;
    // Row i: -t_i u_{i-1} + diag_i u_i - t_{i+1} u_{i+1} = rhs_i.
    std::vector<double> cprime(n), dprime(n);
    double denom = diag_[0];
    cprime[0] = n > 1 ? -tx_[1] / denom : 0.0;
    dprime[0] = rhs_[0] / denom;
    for (int i = 1; i < n; ++i) {
      const double lower = -tx_[i];
      denom = diag_[i] - lower * cprime[i - 1];
      if (!(denom > 0.0)) throw NumericalError("pressure system is not positive definite");
      cprime[i] = i + 1 < n ? -tx_[i + 1] / denom : 0.0;
      dprime[i] = (rhs_[i] - lower * dprime[i - 1]) / denom;
    }
    u_.assign(n, 0.0);
    u_[n - 1] = dprime[n - 1];
    for (int i = n - 2; i >= 0; --i) u_[i] = dprime[i] - cprime[i] * u_[i + 1];
    check_residual();
  }

  void solve_sparse(bool same_operator) {
    const Grid& g = config_.grid;
    const auto n = static_cast<Eigen::Index>(g.cells());
    if (!same_operator) {
      std::vector<Eigen::Triplet<double>> trip;
      trip.reserve(g.cells() * 5);
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
          const auto c = static_cast<Eigen::Index>(g.index(i, j));
          trip.emplace_back(c, c, diag_[c]);
          const std::size_t row = static_cast<std::size_t>(j) * (g.nx + 1);
          if (i > 0) trip.emplace_back(c, c - 1, -tx_[row + i]);
          if (i + 1 < g.nx) trip.emplace_back(c, c + 1, -tx_[row + i + 1]);
          if (j > 0) trip.emplace_back(c, c - g.nx, -ty_[static_cast<std::size_t>(j) * g.nx + i]);
          if (j + 1 < g.ny)
            trip.emplace_back(c, c + g.nx, -ty_[static_cast<std::size_t>(j + 1) * g.nx + i]);
        }
      matrix_.resize(n, n);
      matrix_.setFromTriplets(trip.begin(), trip.end());
      if (!analyzed_) {
        ldlt_.analyzePattern(matrix_);
        analyzed_ = true;
      }
      ldlt_.factorize(matrix_);
      if (ldlt_.info() != Eigen::Success)
        throw NumericalError("pressure system is singular or indefinite");
    }
    const Eigen::Map<const Eigen::VectorXd> b(rhs_.data(), n);
    Eigen::VectorXd x = ldlt_.solve(b);
    if (ldlt_.info() != Eigen::Success) throw NumericalError("pressure back-substitution failed");
    u_.assign(x.data(), x.data() + n);
    check_residual();
  }

  void check_residual() {
    const Grid& g = config_.grid;
    double r2 = 0.0, b2 = 0.0;
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const std::size_t c = g.index(i, j);
        const std::size_t row = static_cast<std::size_t>(j) * (g.nx + 1);
        double au = diag_[c] * u_[c];
        if (i > 0) au -= tx_[row + i] * u_[c - 1];
        if (i + 1 < g.nx) au -= tx_[row + i + 1] * u_[c + 1];
        if (j > 0) au -= ty_[static_cast<std::size_t>(j) * g.nx + i] * u_[c - g.nx];
        if (j + 1 < g.ny) au -= ty_[static_cast<std::size_t>(j + 1) * g.nx + i] * u_[c + g.nx];
        const double r = rhs_[c] - au;
        r2 += r * r;
        b2 += rhs_[c] * rhs_[c];
      }
    residual_ = b2 > 0.0 ? std::sqrt(r2 / b2) : std::sqrt(r2);
    if (!(residual_ <= config_.pressure_tolerance))
      throw NumericalError("pressure solve did not reach tolerance (relative residual " +
                           std::to_string(residual_) + ")");
  }

  PressureSolution fluxes() const {
    const Grid& g = config_.grid;
    const int nx = g.nx, ny = g.ny;
    const double drop = config_.p_left - config_.p_right;
    const double ax = g.dy(), ay = g.dx();
    PressureSolution out;
    out.relative_residual = residual_;
    out.pressure.resize(g.cells());
    for (std::size_t c = 0; c < g.cells(); ++c) out.pressure[c] = u_[c] + config_.p_right;
    out.vx.assign(static_cast<std::size_t>(nx + 1) * ny, 0.0);
    for (int j = 0; j < ny; ++j) {
      const std::size_t row = static_cast<std::size_t>(j) * (nx + 1);
      out.vx[row] = tx_[row] * (drop - u_[g.index(0, j)]) / ax;
      for (int i = 1; i < nx; ++i)
        out.vx[row + i] = tx_[row + i] * (u_[g.index(i - 1, j)] - u_[g.index(i, j)]) / ax;
      out.vx[row + nx] = tx_[row + nx] * u_[g.index(nx - 1, j)] / ax;
    }
    if (ny > 1) {
      out.vy.assign(static_cast<std::size_t>(nx) * (ny + 1), 0.0);
      for (int j = 1; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
          out.vy[static_cast<std::size_t>(j) * nx + i] =
              ty_[static_cast<std::size_t>(j) * nx + i] *
              (u_[g.index(i, j - 1)] - u_[g.index(i, j)]) / ay;
    }
    return out;
  }

  FlowConfig config_;
  std::vector<double> k_;
  std::vector<double> mob_;
  std::vector<double> tx_, ty_, diag_, rhs_, u_;
  double residual_ = 0.0;
  bool have_solution_ = false;
  bool analyzed_ = false;
  Eigen::SparseMatrix<double> matrix_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

/// One-shot pressure solve for the saturation state `s`.
inline PressureSolution solve_pressure(const randfield::Field& k, std::span<const double> s,
                                       const FlowConfig& config) {
  if (!k.grid.same_shape(config.grid)) throw ArgumentError("field grid does not match flow grid");
  PressureSolver solver(config, k.values);
  return solver.solve(s);
}

}  // namespace mfs::solver
