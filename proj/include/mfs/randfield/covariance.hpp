#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "mfs/core/errors.hpp"

namespace mfs::randfield {

enum class Kernel : std::uint8_t { Exponential = 0 };

/// Stationary covariance of the Gaussian log-permeability Y = ln k.
struct CovarianceSpec {
  double mean = 0.0;
  double variance = 2.0;
  double correlation_length = 19.0;
  Kernel kernel = Kernel::Exponential;

  void validate() const {
    if (!(variance >= 0.0)) throw ArgumentError("covariance variance must be >= 0");
    if (!(correlation_length > 0.0)) throw ArgumentError("correlation length must be > 0");
    if (!std::isfinite(mean)) throw ArgumentError("covariance mean must be finite");
    if (kernel != Kernel::Exponential) throw ArgumentError("unsupported covariance kernel");
  }

  /// C(r) for separation distance r >= 0.
  double operator()(double distance) const noexcept {
    return variance * std::exp(-std::abs(distance) / correlation_length);
  }

  bool operator==(const CovarianceSpec&) const = default;
};

}  // namespace mfs::randfield
