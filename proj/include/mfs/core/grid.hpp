#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "mfs/core/errors.hpp"

namespace mfs {

enum class Dim : std::uint8_t { D1 = 1, D2 = 2 };

/// Uniform cell-centred grid on [0, length_x] x [0, length_y].
///
/// x1 (index i, `nx` cells) is the flow direction; x2 (index j, `ny` cells)
/// is transverse. Storage is row-major with one row per x2 index, so an
/// image of the grid is `ny` rows by `nx` columns. 1D grids have ny == 1.
struct Grid {
  Dim dim = Dim::D2;
  int nx = 64;
  int ny = 64;
  double length_x = 150.0;
  double length_y = 150.0;

  static Grid line(int n, double length = 150.0) { return {Dim::D1, n, 1, length, 1.0}; }
  static Grid square(int n, double length = 150.0) { return {Dim::D2, n, n, length, length}; }
  static Grid rect(int nx, int ny, double lx = 150.0, double ly = 150.0) {
    return {Dim::D2, nx, ny, lx, ly};
  }

  std::size_t cells() const noexcept { return static_cast<std::size_t>(nx) * ny; }
  double dx() const noexcept { return length_x / nx; }
  double dy() const noexcept { return dim == Dim::D1 ? 1.0 : length_y / ny; }
  /// Cell measure: length in 1D, area in 2D.
  double cell_measure() const noexcept { return dim == Dim::D1 ? dx() : dx() * dy(); }
  double measure() const noexcept { return cell_measure() * static_cast<double>(cells()); }
  std::size_t index(int i, int j) const noexcept {
    return static_cast<std::size_t>(j) * nx + static_cast<std::size_t>(i);
  }
  double x_center(int i) const noexcept { return (i + 0.5) * dx(); }
  double y_center(int j) const noexcept { return (j + 0.5) * dy(); }

  void validate() const {
    if (nx <= 0 || ny <= 0) throw ArgumentError("grid needs positive cell counts");
    if (dim == Dim::D1 && ny != 1) throw ArgumentError("1D grid must have ny == 1");
    if (!(length_x > 0.0) || !(length_y > 0.0)) throw ArgumentError("grid lengths must be positive");
  }

  bool same_shape(const Grid& o) const noexcept {
    return dim == o.dim && nx == o.nx && ny == o.ny;
  }
  bool operator==(const Grid&) const = default;

  std::string describe() const {
    return dim == Dim::D1 ? std::to_string(nx) : std::to_string(ny) + "x" + std::to_string(nx);
  }
};

}  // namespace mfs
