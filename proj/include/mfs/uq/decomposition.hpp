#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "mfs/core/errors.hpp"

namespace mfs::uq {

/// Mean-square-error split of an estimator of E[Q]. With m the trial mean,
/// r = E[Q_M] (working resolution) and f = E[Q] (refined):
///   discrepancy = mean (trial - f)^2 = bias_sq + variance
///   bias_sq     = (m - f)^2 = eps_disc_sq + eps_est_sq - eps_star_sq
///   eps_disc_sq = (r - f)^2, eps_est_sq = (m - r)^2,
///   eps_star_sq = -2 (m - r)(r - f), eps_samp_sq = variance.
struct BiasVarianceReport {
  double discrepancy = 0.0;
  double bias_sq = 0.0;
  double variance = 0.0;
  double eps_disc_sq = 0.0;
  double eps_est_sq = 0.0;
  double eps_samp_sq = 0.0;
  double eps_star_sq = 0.0;
  double trial_mean = 0.0;

  /// Relative residuals of the two identities above.
  double mse_residual() const {
    return std::abs(discrepancy - (bias_sq + variance)) / std::max(std::abs(discrepancy), 1e-300);
  }
  double bias_residual() const {
    const double rhs = eps_disc_sq + eps_est_sq - eps_star_sq;
    const double scale = std::max({std::abs(bias_sq), eps_disc_sq + eps_est_sq + std::abs(eps_star_sq), 1e-300});
    return std::abs(bias_sq - rhs) / scale;
  }
};

/// Mean and population variance, two-pass.
inline std::pair<double, double> mean_variance(std::span<const double> x) {
  if (x.empty()) throw ArgumentError("mean_variance: empty input");
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return {m, s / static_cast<double>(x.size())};
}

inline BiasVarianceReport bias_variance_decompose(std::span<const double> trials, double reference_mean,
                                                  double fine_reference_mean) {
  if (trials.size() < 2) throw ArgumentError("bias_variance_decompose: need at least 2 trials");
  for (double v : trials)
    if (!std::isfinite(v)) throw ArgumentError("bias_variance_decompose: non-finite trial");
  const auto [m, var] = mean_variance(trials);
  const double r = reference_mean, f = fine_reference_mean;
  BiasVarianceReport b;
  b.trial_mean = m;
  double d = 0.0;
  for (double v : trials) d += (v - f) * (v - f);
  b.discrepancy = d / static_cast<double>(trials.size());
  b.variance = b.eps_samp_sq = var;
  b.bias_sq = (m - f) * (m - f);
  b.eps_disc_sq = (r - f) * (r - f);
  b.eps_est_sq = (m - r) * (m - r);
  b.eps_star_sq = -2.0 * (m - r) * (r - f);
  return b;
}

/// Least-squares slope of ln(error) against ln(n).
inline double fit_convergence_rate(std::span<const std::pair<double, double>> pairs) {
  if (pairs.size() < 3) throw ArgumentError("fit_convergence_rate: need at least 3 (n, error) pairs");
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [n, err] = pairs[i];
    if (!(n > 0.0) || !(err > 0.0) || !std::isfinite(n) || !std::isfinite(err))
      throw ArgumentError("fit_convergence_rate: n and error must be positive");
    if (i > 0 && !(n > pairs[i - 1].first)) throw ArgumentError("fit_convergence_rate: n must be strictly increasing");
    sx += std::log(n);
    sy += std::log(err);
  }
  const double k = static_cast<double>(pairs.size());
  const double mx = sx / k, my = sy / k;
  double sxy = 0.0, sxx = 0.0;
  for (const auto& [n, err] : pairs) {
    const double dx = std::log(n) - mx;
    sxy += dx * (std::log(err) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace mfs::uq
