#pragma once

#include <string>

#include "mfs/core/binary_io.hpp"
#include "mfs/randfield/kl_basis.hpp"

namespace mfs::randfield {

// KLB1 layout (little-endian):
//   "KLB1" | dim u8 | nx u32 | ny u32 | p u32 | mean f64 | variance f64 |
//   correlation_length f64 | kernel u8 | eigenvalues p*f64 |
//   eigenvectors p*cells*f64 (mode-major)
// Domain lengths are not part of the format; the loader takes them.

inline void save_basis(const KlBasis& basis, const std::string& path) {
  io::Writer w;
  w.magic("KLB1");
  w.put(static_cast<std::uint8_t>(basis.grid.dim));
  w.put(static_cast<std::uint32_t>(basis.grid.nx));
  w.put(static_cast<std::uint32_t>(basis.grid.ny));
  w.put(static_cast<std::uint32_t>(basis.num_modes()));
  w.put(basis.spec.mean);
  w.put(basis.spec.variance);
  w.put(basis.spec.correlation_length);
  w.put(static_cast<std::uint8_t>(basis.spec.kernel));
  w.put_array(std::span<const double>(basis.eigenvalues.data(), basis.eigenvalues.size()));
  w.put_array(std::span<const double>(basis.eigenvectors.data(), basis.eigenvectors.size()));
  w.write_file(path);
}

inline KlBasis load_basis(const std::string& path, double length_x = 150.0,
                          double length_y = 150.0) {
  auto r = io::Reader::from_file(path);
  r.expect_magic("KLB1");
  const auto dim_offset = r.offset();
  const auto dim = r.get<std::uint8_t>("dim");
  if (dim != 1 && dim != 2) throw FormatError("invalid dimension tag", dim_offset);
  KlBasis b;
  b.grid.dim = static_cast<Dim>(dim);
  b.grid.nx = static_cast<int>(r.get<std::uint32_t>("nx"));
  b.grid.ny = static_cast<int>(r.get<std::uint32_t>("ny"));
  b.grid.length_x = length_x;
  b.grid.length_y = dim == 1 ? 1.0 : length_y;
  const auto p = r.get<std::uint32_t>("num_modes");
  b.spec.mean = r.get<double>("mean");
  b.spec.variance = r.get<double>("variance");
  b.spec.correlation_length = r.get<double>("correlation_length");
  const auto kernel_offset = r.offset();
  if (r.get<std::uint8_t>("kernel") != 0) throw FormatError("unknown kernel tag", kernel_offset);
  try {
    b.grid.validate();
    b.spec.validate();
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("invalid header: ") + e.what(), r.offset());
  }
  const auto n = static_cast<Eigen::Index>(b.grid.cells());
  r.require(static_cast<std::uint64_t>(p) * (1 + n) * sizeof(double), "basis payload");
  b.eigenvalues.resize(p);
  b.eigenvectors.resize(n, p);
  r.get_array(std::span<double>(b.eigenvalues.data(), p), "eigenvalues");
  r.get_array(std::span<double>(b.eigenvectors.data(), b.eigenvectors.size()), "eigenvectors");
  r.expect_end();
  return b;
}

}  // namespace mfs::randfield
