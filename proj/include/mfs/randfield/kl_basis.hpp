#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mfs/core/errors.hpp"
#include "mfs/core/grid.hpp"
#include "mfs/core/rng.hpp"
#include "mfs/randfield/covariance.hpp"
#include "mfs/randfield/covariance_operator.hpp"

namespace mfs::randfield {

/// Truncated Karhunen-Loeve basis of the log-permeability field.
///
/// Eigenvectors are stored one mode per column and are orthonormal under the
/// cell-measure-weighted inner product <u, v> = w * sum_i u_i v_i.
struct KlBasis {
  Grid grid;
  CovarianceSpec spec;
  Eigen::VectorXd eigenvalues;   ///< non-increasing, >= 0
  Eigen::MatrixXd eigenvectors;  ///< cells x num_modes

  int num_modes() const noexcept { return static_cast<int>(eigenvalues.size()); }

  /// Truncated pointwise variance sum_i lambda_i phi_i(x)^2.
  Eigen::VectorXd truncated_variance() const {
    return eigenvectors.array().square().matrix() * eigenvalues;
  }

  /// Truncated covariance sum_i lambda_i phi_i(a) phi_i(b).
  double truncated_covariance(std::size_t a, std::size_t b) const {
    return (eigenvectors.row(a).transpose().array() * eigenvectors.row(b).transpose().array() *
            eigenvalues.array())
        .sum();
  }
};

/// A realization of k = exp(Y) on a grid.
struct Field {
  Grid grid;
  std::vector<double> values;
  std::vector<double> log_values;
};

/// Options for the eigensolver.
struct KlSolverOptions {
  /// Grids up to this many cells use a dense symmetric eigensolver.
  std::size_t dense_limit = 1024;
  double tolerance = 1e-9;
  int max_iterations = 1000;
  std::uint64_t start_seed = 0x4B4C;
};

/// Dense cell-centre covariance matrix C(x_i, x_j) (unweighted).
inline Eigen::MatrixXd covariance_matrix(const CovarianceSpec& spec, const Grid& grid) {
  const auto n = static_cast<Eigen::Index>(grid.cells());
  Eigen::MatrixXd c(n, n);
  for (int ja = 0; ja < grid.ny; ++ja)
    for (int ia = 0; ia < grid.nx; ++ia) {
      const auto a = static_cast<Eigen::Index>(grid.index(ia, ja));
      for (int jb = 0; jb < grid.ny; ++jb)
        for (int ib = 0; ib < grid.nx; ++ib) {
          const double r = std::hypot((ia - ib) * grid.dx(),
                                      grid.dim == Dim::D1 ? 0.0 : (ja - jb) * grid.dy());
          c(a, static_cast<Eigen::Index>(grid.index(ib, jb))) = spec(r);
        }
    }
  return c;
}

namespace detail {

/// Flips each column so that its largest-magnitude entry is positive.
inline void fix_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index m = 0; m < vectors.cols(); ++m) {
    Eigen::Index arg = 0;
    vectors.col(m).cwiseAbs().maxCoeff(&arg);
    if (vectors(arg, m) < 0.0) vectors.col(m) *= -1.0;
  }
}

struct EigenPairs {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // Euclidean-orthonormal columns
};

inline EigenPairs dense_top_pairs(const CovarianceSpec& spec, const Grid& grid, int p) {
  const Eigen::MatrixXd a = covariance_matrix(spec, grid) * grid.cell_measure();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success)
    throw NumericalError("dense covariance eigensolver failed to converge");
  const auto n = a.rows();
  EigenPairs out{Eigen::VectorXd(p), Eigen::MatrixXd(n, p)};
  for (int m = 0; m < p; ++m) {
    out.values(m) = es.eigenvalues()(n - 1 - m);
    out.vectors.col(m) = es.eigenvectors().col(n - 1 - m);
  }
  return out;
}

/// Block subspace iteration with Rayleigh-Ritz extraction on the FFT operator.
inline EigenPairs iterative_top_pairs(const CovarianceSpec& spec, const Grid& grid, int p,
                                      const KlSolverOptions& opt) {
  CovarianceOperator op(spec, grid);
  const auto n = static_cast<Eigen::Index>(grid.cells());
  const Eigen::Index block = std::min<Eigen::Index>(n, std::max(2 * p, p + 16));

  Eigen::MatrixXd q(n, block);
  {
    const auto start = draw_standard_normals(opt.start_seed, static_cast<std::size_t>(n * block));
    q = Eigen::Map<const Eigen::MatrixXd>(start.data(), n, block);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(q);
    q = qr.householderQ() * Eigen::MatrixXd::Identity(n, block);
  }

  Eigen::MatrixXd z(n, block);
  double worst = 0.0;
  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    for (Eigen::Index c = 0; c < block; ++c)
      op.apply(std::span<const double>(q.col(c).data(), n), std::span<double>(z.col(c).data(), n));

    Eigen::MatrixXd h = q.transpose() * z;
    h = 0.5 * (h + h.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    if (es.info() != Eigen::Success) throw NumericalError("Rayleigh-Ritz eigensolver failed");
    const Eigen::MatrixXd u = es.eigenvectors().rowwise().reverse();
    const Eigen::VectorXd theta = es.eigenvalues().reverse();

    const Eigen::MatrixXd x = q * u;
    const Eigen::MatrixXd ax = z * u;
    const double scale = std::max(theta(0), 1e-300);
    worst = 0.0;
    for (int m = 0; m < p; ++m)
      worst = std::max(worst, (ax.col(m) - theta(m) * x.col(m)).norm() / scale);

    if (worst <= opt.tolerance) {
      return {theta.head(p), x.leftCols(p)};
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(ax);
    q = qr.householderQ() * Eigen::MatrixXd::Identity(n, block);
  }
  throw NumericalError("KL subspace iteration did not converge after " +
                       std::to_string(opt.max_iterations) +
                       " iterations (relative residual " + std::to_string(worst) + ")");
}

}  // namespace detail

/// Computes the top `num_modes` KL eigenpairs of the exponential covariance
/// discretized at cell centres (Nystrom collocation with cell-measure weights).
inline KlBasis build_kl_basis(const CovarianceSpec& spec, const Grid& grid, int num_modes,
                              const KlSolverOptions& opt = {}) {
  spec.validate();
  grid.validate();
  if (num_modes <= 0) throw ArgumentError("num_modes must be positive");
  if (static_cast<std::size_t>(num_modes) > grid.cells())
    throw ArgumentError("num_modes (" + std::to_string(num_modes) + ") exceeds cell count (" +
                        std::to_string(grid.cells()) + ")");

  const double w = grid.cell_measure();
  const auto n = static_cast<Eigen::Index>(grid.cells());
  KlBasis basis{grid, spec, Eigen::VectorXd::Zero(num_modes), Eigen::MatrixXd(n, num_modes)};

  if (spec.variance == 0.0) {
    basis.eigenvectors = Eigen::MatrixXd::Identity(n, num_modes) / std::sqrt(w);
    return basis;
  }

  const bool dense = grid.cells() <= opt.dense_limit ||
                     static_cast<std::size_t>(4 * num_modes) >= grid.cells();
  auto pairs = dense ? detail::dense_top_pairs(spec, grid, num_modes)
                     : detail::iterative_top_pairs(spec, grid, num_modes, opt);
  detail::fix_signs(pairs.vectors);
  basis.eigenvalues = pairs.values.cwiseMax(0.0);
  basis.eigenvectors = pairs.vectors / std::sqrt(w);
  return basis;
}

/// Y = mean + sum_i sqrt(lambda_i) xi_i phi_i, k = exp(Y).
inline Field sample_field(const KlBasis& basis, std::span<const double> xi) {
  if (xi.size() != static_cast<std::size_t>(basis.num_modes()))
    throw ArgumentError("sample_field: expected " + std::to_string(basis.num_modes()) +
                        " coefficients, got " + std::to_string(xi.size()));
  const Eigen::Map<const Eigen::VectorXd> coeff(xi.data(), basis.num_modes());
  const Eigen::VectorXd weights = basis.eigenvalues.cwiseSqrt().cwiseProduct(coeff);
  const Eigen::VectorXd y =
      (basis.eigenvectors * weights).array() + basis.spec.mean;

  Field f{basis.grid, std::vector<double>(y.size()), std::vector<double>(y.data(), y.data() + y.size())};
  std::transform(f.log_values.begin(), f.log_values.end(), f.values.begin(),
                 [](double v) { return std::exp(v); });
  return f;
}

/// Field drawn with coefficients from `seed`.
inline Field sample_field(const KlBasis& basis, std::uint64_t seed) {
  const auto xi = draw_standard_normals(seed, static_cast<std::size_t>(basis.num_modes()));
  return sample_field(basis, xi);
}

/// Field with k(x) = exp(log_values[x]).
inline Field field_from_log(const Grid& grid, std::vector<double> log_values) {
  if (log_values.size() != grid.cells()) throw ArgumentError("field size does not match grid");
  Field f{grid, std::vector<double>(log_values.size()), std::move(log_values)};
  std::transform(f.log_values.begin(), f.log_values.end(), f.values.begin(),
                 [](double v) { return std::exp(v); });
  return f;
}

}  // namespace mfs::randfield
