#pragma once

#include <string>

#include "mfs/core/binary_io.hpp"
#include "mfs/solver/simulate.hpp"

namespace mfs::solver {

// SAT1 debug dump (little-endian):
//   "SAT1" | dim u8 | nx u32 | ny u32 | n_times u32 | times f64[n_times] |
//   snapshots f32[n_times * cells] (time-major)

inline void save_snapshots(const SaturationSeries& series, const std::string& path) {
  io::Writer w;
  w.magic("SAT1");
  w.put(static_cast<std::uint8_t>(series.grid.dim));
  w.put(static_cast<std::uint32_t>(series.grid.nx));
  w.put(static_cast<std::uint32_t>(series.grid.ny));
  w.put(static_cast<std::uint32_t>(series.times.size()));
  w.put_array(std::span<const double>(series.times));
  w.put_converted<float>(std::span<const double>(series.snapshots));
  w.write_file(path);
}

/// Loads a dump; snapshot values come back rounded to f32 precision.
inline SaturationSeries load_snapshots(const std::string& path, double length_x = 150.0,
                                       double length_y = 150.0) {
  auto r = io::Reader::from_file(path);
  r.expect_magic("SAT1");
  const auto dim_offset = r.offset();
  const auto dim = r.get<std::uint8_t>("dim");
  if (dim != 1 && dim != 2) throw FormatError("invalid dimension tag", dim_offset);
  SaturationSeries s;
  s.grid.dim = static_cast<Dim>(dim);
  s.grid.nx = static_cast<int>(r.get<std::uint32_t>("nx"));
  s.grid.ny = static_cast<int>(r.get<std::uint32_t>("ny"));
  s.grid.length_x = length_x;
  s.grid.length_y = dim == 1 ? 1.0 : length_y;
  const auto nt = r.get<std::uint32_t>("n_times");
  r.require(static_cast<std::uint64_t>(nt) * (8 + 4 * s.grid.cells()), "snapshot payload");
  s.times.resize(nt);
  s.snapshots.resize(static_cast<std::size_t>(nt) * s.grid.cells());
  r.get_array(std::span<double>(s.times), "times");
  r.get_converted<float>(std::span<double>(s.snapshots), "snapshots");
  r.expect_end();
  return s;
}

}  // namespace mfs::solver
