#pragma once

#include <span>
#include <string>
#include <vector>

#include "mfs/dataset/sample.hpp"
#include "mfs/randfield/kl_basis.hpp"
#include "mfs/solver/simulate.hpp"

namespace mfs::dataset {

/// A 1D permeability field with its 1D saturation history.
struct LineSolution {
  randfield::Field field;
  solver::SaturationSeries series;
};

namespace detail {

inline void check_line(const LineSolution& line, int width, std::size_t t_out) {
  const std::size_t w = static_cast<std::size_t>(width);
  if (line.field.log_values.size() != w || line.series.grid.cells() != w)
    throw ArgumentError("lift: 1D solution has length " + std::to_string(line.field.log_values.size()) +
                        ", expected " + std::to_string(width));
  if (line.series.num_times() != t_out) throw ArgumentError("lift: snapshot counts differ");
  if (line.series.snapshots.size() != t_out * w) throw ArgumentError("lift: malformed snapshot series");
}

// Writes `line` into row `row` of every channel of `s`.
inline void put_row(SamplePair& s, const LineSolution& line, int row, int height, int width) {
  const std::size_t w = static_cast<std::size_t>(width);
  const std::size_t plane = static_cast<std::size_t>(height) * w;
  const std::size_t off = static_cast<std::size_t>(row) * w;
  for (std::size_t i = 0; i < w; ++i) s.input[off + i] = static_cast<float>(line.field.log_values[i]);
  for (std::size_t t = 0; t < line.series.num_times(); ++t)
    for (std::size_t i = 0; i < w; ++i)
      s.target[t * plane + off + i] = static_cast<float>(line.series.snapshots[t * w + i]);
}

}  // namespace detail

/// Replicates one 1D pair `height` times along x2.
inline SamplePair lift_low_frequency(const LineSolution& line, int height, double cost = 0.0) {
  if (height < 1) throw ArgumentError("lift: height must be positive");
  const int width = static_cast<int>(line.field.log_values.size());
  const std::size_t t_out = line.series.num_times();
  detail::check_line(line, width, t_out);

  SamplePair s;
  s.fidelity = Fidelity::Low1DLowFreq;
  s.cost_seconds = static_cast<float>(cost);
  s.input.resize(static_cast<std::size_t>(height) * width);
  s.target.resize(t_out * height * width);
  for (int r = 0; r < height; ++r) detail::put_row(s, line, r, height, width);
  return s;
}

/// Stacks `lines` as rows: row i of input and of every target channel comes
/// from lines[i] alone.
inline SamplePair lift_high_frequency(std::span<const LineSolution> lines, int height,
                                      double cost = 0.0) {
  if (height < 1) throw ArgumentError("lift: height must be positive");
  if (lines.size() != static_cast<std::size_t>(height))
    throw ArgumentError("lift: expected " + std::to_string(height) + " 1D solutions, got " +
                        std::to_string(lines.size()));
  const int width = static_cast<int>(lines[0].field.log_values.size());
  const std::size_t t_out = lines[0].series.num_times();
  for (const auto& line : lines) detail::check_line(line, width, t_out);

  SamplePair s;
  s.fidelity = Fidelity::Low1DHighFreq;
  s.cost_seconds = static_cast<float>(cost);
  s.input.resize(static_cast<std::size_t>(height) * width);
  s.target.resize(t_out * height * width);
  for (int r = 0; r < height; ++r) detail::put_row(s, lines[r], r, height, width);
  return s;
}

}  // namespace mfs::dataset
