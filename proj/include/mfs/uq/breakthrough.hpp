#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfs/solver/simulate.hpp"

namespace mfs::uq {

enum class Source : std::uint8_t { Solver2D = 0, Surrogate = 1 };

inline std::string to_string(Source s) { return s == Source::Solver2D ? "solver2d" : "surrogate"; }

/// How a 2D snapshot is reduced to the scalar probe value at x1.
///   ColumnAverage: x2-average, interpolated between the bracketing columns
///   Midline:       the same interpolation on the middle row only
///   ColumnMax:     largest value over x2 of the interpolated column
enum class ProbeMode : std::uint8_t { ColumnAverage = 0, Midline = 1, ColumnMax = 2 };

inline std::string to_string(ProbeMode m) {
  switch (m) {
    case ProbeMode::ColumnAverage: return "column-average";
    case ProbeMode::Midline: return "midline";
    case ProbeMode::ColumnMax: return "column-max";
  }
  return "?";
}

inline ProbeMode parse_probe_mode(const std::string& s) {
  if (s == "column-average") return ProbeMode::ColumnAverage;
  if (s == "midline") return ProbeMode::Midline;
  if (s == "column-max") return ProbeMode::ColumnMax;
  throw ArgumentError("unknown probe mode '" + s + "' (expected column-average, midline or column-max)");
}

struct BreakthroughSample {
  std::optional<double> t_b;  // empty when censored
  Source source = Source::Solver2D;

  bool censored() const noexcept { return !t_b.has_value(); }
  bool operator==(const BreakthroughSample&) const = default;
};

struct ProbeOptions {
  double x1 = 100.0;
  double threshold = 0.15;
  ProbeMode mode = ProbeMode::ColumnAverage;
};

/// Probe value of every snapshot in `series`.
inline std::vector<double> probe_values(const solver::SaturationSeries& series, double x1,
                                        ProbeMode mode = ProbeMode::ColumnAverage) {
  const Grid& g = series.grid;
  if (!(x1 >= 0.0 && x1 <= g.length_x)) throw ArgumentError("probe position outside the domain");
  const double pos = x1 / g.dx() - 0.5;
  const int i0 = std::clamp(static_cast<int>(std::floor(pos)), 0, g.nx - 1);
  const int i1 = std::min(i0 + 1, g.nx - 1);
  const double w = std::clamp(pos - i0, 0.0, 1.0);
  const int ny = g.dim == Dim::D1 ? 1 : g.ny;
  std::vector<double> out(series.num_times());
  for (std::size_t t = 0; t < out.size(); ++t) {
    auto column = [&](int j) { return (1.0 - w) * series.at(t, i0, j) + w * series.at(t, i1, j); };
    double v = 0.0;
    switch (mode) {
      case ProbeMode::ColumnAverage:
        for (int j = 0; j < ny; ++j) v += column(j);
        v /= ny;
        break;
      case ProbeMode::Midline: v = column(ny / 2); break;
      case ProbeMode::ColumnMax:
        for (int j = 0; j < ny; ++j) v = std::max(v, column(j));
        break;
    }
    out[t] = v;
  }
  return out;
}

/// First time the probe reaches `threshold`, linearly interpolated between
/// the bracketing snapshots; censored if it never does.
inline BreakthroughSample first_crossing(std::span<const double> times, std::span<const double> probe,
                                         double threshold, Source source = Source::Solver2D) {
  if (times.size() != probe.size()) throw ArgumentError("first_crossing: times and probe values differ in length");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ArgumentError("threshold must be in (0, 1)");
  for (std::size_t t = 0; t < probe.size(); ++t) {
    if (probe[t] < threshold) continue;
    if (t == 0) return {times[0], source};
    const double a = (threshold - probe[t - 1]) / (probe[t] - probe[t - 1]);
    return {times[t - 1] + a * (times[t] - times[t - 1]), source};
  }
  return {std::nullopt, source};
}

inline BreakthroughSample breakthrough_time(const solver::SaturationSeries& series, const ProbeOptions& probe = {},
                                            Source source = Source::Solver2D) {
  const auto values = probe_values(series, probe.x1, probe.mode);
  return first_crossing(series.times, values, probe.threshold, source);
}

inline BreakthroughSample breakthrough_time(const solver::SaturationSeries& series, double probe_x1,
                                            double threshold = 0.15) {
  return breakthrough_time(series, ProbeOptions{probe_x1, threshold, ProbeMode::ColumnAverage});
}

/// Uncensored breakthrough times in sample order.
inline std::vector<double> uncensored(std::span<const BreakthroughSample> samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples)
    if (s.t_b) out.push_back(*s.t_b);
  return out;
}

inline std::size_t censored_count(std::span<const BreakthroughSample> samples) {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.censored(); }));
}

}  // namespace mfs::uq
