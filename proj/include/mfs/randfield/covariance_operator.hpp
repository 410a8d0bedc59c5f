#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <span>
#include <vector>

#include "mfs/core/grid.hpp"
#include "mfs/randfield/covariance.hpp"

namespace mfs::randfield {

namespace detail {
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Matrix-free product with the cell-measure-weighted covariance matrix
/// A = w * C(x_i, x_j) on a uniform grid.
///
/// The covariance matrix of a stationary kernel on a uniform grid is
/// (block-)Toeplitz, so it embeds in a circulant of twice the size per axis
/// and the product reduces to one forward and one inverse real FFT.
class CovarianceOperator {
 public:
  CovarianceOperator(const CovarianceSpec& spec, const Grid& grid)
      : grid_(grid),
        mx_(2 * grid.nx),
        my_(grid.ny == 1 ? 1 : 2 * grid.ny),
        spectral_count_(static_cast<std::size_t>(my_) * (mx_ / 2 + 1)) {
    real_ = fftw_alloc_real(static_cast<std::size_t>(mx_) * my_);
    spec_ = fftw_alloc_complex(spectral_count_);
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      if (my_ == 1) {
        forward_ = fftw_plan_dft_r2c_1d(mx_, real_, spec_, FFTW_ESTIMATE);
        inverse_ = fftw_plan_dft_c2r_1d(mx_, spec_, real_, FFTW_ESTIMATE);
      } else {
        forward_ = fftw_plan_dft_r2c_2d(my_, mx_, real_, spec_, FFTW_ESTIMATE);
        inverse_ = fftw_plan_dft_c2r_2d(my_, mx_, spec_, real_, FFTW_ESTIMATE);
      }
    }

    const double w = grid.cell_measure();
    const double dx = grid.dx();
    const double dy = grid.dy();
    for (int b = 0; b < my_; ++b) {
      const int db = std::min(b, my_ - b);
      for (int a = 0; a < mx_; ++a) {
        const int da = std::min(a, mx_ - a);
        const double r = std::hypot(da * dx, grid.ny == 1 ? 0.0 : db * dy);
        real_[static_cast<std::size_t>(b) * mx_ + a] = w * spec(r);
      }
    }
    fftw_execute(forward_);
    kernel_hat_.resize(spectral_count_);
    const double scale = 1.0 / (static_cast<double>(mx_) * my_);
    for (std::size_t k = 0; k < spectral_count_; ++k)
      kernel_hat_[k] = std::complex<double>(spec_[k][0], spec_[k][1]) * scale;
  }

  CovarianceOperator(const CovarianceOperator&) = delete;
  CovarianceOperator& operator=(const CovarianceOperator&) = delete;

  ~CovarianceOperator() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
    fftw_free(real_);
    fftw_free(spec_);
  }

  std::size_t size() const noexcept { return grid_.cells(); }

  /// out = A * in. Not thread-safe (shares scratch buffers).
  void apply(std::span<const double> in, std::span<double> out) {
    std::fill(real_, real_ + static_cast<std::size_t>(mx_) * my_, 0.0);
    for (int j = 0; j < grid_.ny; ++j)
      for (int i = 0; i < grid_.nx; ++i)
        real_[static_cast<std::size_t>(j) * mx_ + i] = in[grid_.index(i, j)];
    fftw_execute(forward_);
    for (std::size_t k = 0; k < spectral_count_; ++k) {
      const std::complex<double> v(spec_[k][0], spec_[k][1]);
      const auto prod = v * kernel_hat_[k];
      spec_[k][0] = prod.real();
      spec_[k][1] = prod.imag();
    }
    fftw_execute(inverse_);
    for (int j = 0; j < grid_.ny; ++j)
      for (int i = 0; i < grid_.nx; ++i)
        out[grid_.index(i, j)] = real_[static_cast<std::size_t>(j) * mx_ + i];
  }

 private:
  Grid grid_;
  int mx_;
  int my_;
  std::size_t spectral_count_;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
  std::vector<std::complex<double>> kernel_hat_;
};

}  // namespace mfs::randfield
