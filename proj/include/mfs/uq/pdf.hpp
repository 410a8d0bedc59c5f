#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "mfs/uq/breakthrough.hpp"

namespace mfs::uq {

inline constexpr double kPdfSmoothing = 1e-6;

/// Binned probability mass on fixed edges.
struct Pdf {
  std::vector<double> bin_edges;      // B + 1, strictly increasing
  std::vector<double> probabilities;  // B, sums to 1
  std::size_t censored = 0;      // excluded from the bins
  std::size_t out_of_range = 0;  // clamped into the first or last bin

  std::size_t bins() const noexcept { return probabilities.size(); }
  bool operator==(const Pdf&) const = default;
};

inline void check_edges(std::span<const double> edges) {
  if (edges.size() < 2) throw ArgumentError("pdf: need at least one bin");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw ArgumentError("pdf: bin edges must be strictly increasing");
}

/// `bins` equal bins on [lo, hi] widened by `widen` of the range on each side.
inline std::vector<double> uniform_edges(double lo, double hi, int bins, double widen = 0.0) {
  if (bins < 1) throw ArgumentError("pdf: need at least one bin");
  if (!(std::isfinite(lo) && std::isfinite(hi) && hi >= lo)) throw ArgumentError("pdf: invalid range");
  double pad = (hi - lo) * widen;
  if (!(hi - lo + 2 * pad > 0.0)) pad = std::max(std::abs(lo) * 0.05, 1.0);
  lo -= pad;
  hi += pad;
  std::vector<double> e(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) e[i] = lo + (hi - lo) * i / bins;
  e.back() = hi;
  return e;
}

/// Edges shared by every compared estimator: the uncensored reference range
/// widened 5% on each side, 40 bins.
inline std::vector<double> shared_edges(std::span<const BreakthroughSample> reference, int bins = 40,
                                        double widen = 0.05) {
  const auto t = uncensored(reference);
  if (t.empty()) throw EstimationError("pdf: every reference sample is censored");
  const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
  return uniform_edges(*lo, *hi, bins, widen);
}

/// Histogram of `samples` on `edges`, plus alpha per bin, renormalized.
inline Pdf estimate_pdf(std::span<const double> samples, std::span<const double> edges, std::size_t censored = 0,
                        double alpha = kPdfSmoothing) {
  check_edges(edges);
  if (samples.empty()) throw EstimationError("pdf: no uncensored samples");
  const std::size_t b = edges.size() - 1;
  Pdf p;
  p.bin_edges.assign(edges.begin(), edges.end());
  p.censored = censored;
  std::vector<double> counts(b, 0.0);
  for (double x : samples) {
    if (!std::isfinite(x)) throw ArgumentError("pdf: non-finite sample");
    std::size_t k;
    if (x < edges.front()) {
      k = 0;
      ++p.out_of_range;
    } else if (x > edges.back()) {
      k = b - 1;
      ++p.out_of_range;
    } else {
      k = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
      k = std::min(k == 0 ? 0 : k - 1, b - 1);
    }
    counts[k] += 1.0;
  }
  const double n = static_cast<double>(samples.size());
  p.probabilities.resize(b);
  double total = 0.0;
  for (std::size_t k = 0; k < b; ++k) total += (p.probabilities[k] = counts[k] / n + alpha);
  for (auto& v : p.probabilities) v /= total;
  return p;
}

inline Pdf estimate_pdf(std::span<const BreakthroughSample> samples, std::span<const double> edges,
                        double alpha = kPdfSmoothing) {
  const auto t = uncensored(samples);
  if (t.empty()) throw EstimationError("pdf: every sample is censored");
  return estimate_pdf(t, edges, samples.size() - t.size(), alpha);
}

namespace detail {

inline void check_same_edges(const Pdf& p, const Pdf& q) {
  if (p.bin_edges != q.bin_edges) throw ArgumentError("pdf comparison needs identical bin edges");
  if (p.probabilities.size() + 1 != p.bin_edges.size() || q.probabilities.size() + 1 != q.bin_edges.size())
    throw ArgumentError("pdf: probabilities do not match the bin edges");
}

}  // namespace detail

/// Mean over bins of |p_i - q_i|.
inline double mae_pdf(const Pdf& p, const Pdf& q) {
  detail::check_same_edges(p, q);
  double s = 0.0;
  for (std::size_t i = 0; i < p.bins(); ++i) s += std::abs(p.probabilities[i] - q.probabilities[i]);
  return s / static_cast<double>(p.bins());
}

/// KL(p || q) = sum p_i ln(p_i / q_i), with 0 ln 0 = 0.
inline double kl_divergence(const Pdf& p, const Pdf& q) {
  detail::check_same_edges(p, q);
  double s = 0.0;
  for (std::size_t i = 0; i < p.bins(); ++i) {
    const double a = p.probabilities[i], b = q.probabilities[i];
    if (a == 0.0) continue;
    if (!(b > 0.0)) throw ArgumentError("kl_divergence: q must be positive where p is");
    s += a * std::log(a / b);
  }
  return std::max(s, 0.0);
}

}  // namespace mfs::uq
