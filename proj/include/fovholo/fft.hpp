#pragma once

// Centered, unitary 2D DFT backed by FFTW.
//
// "Centered" means the zero-frequency sample sits at index (width/2, height/2)
// on both sides of the transform, i.e. out = fftshift(fft2(ifftshift(in))).
// Every transform is scaled by 1/sqrt(width*height) so forward and inverse
// are adjoint to each other and preserve the sum of squared magnitudes.

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <utility>

#include "fovholo/grid.hpp"

namespace fovholo {

namespace detail {

// The FFTW planner is not re-entrant; plan creation and destruction go through this lock.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

class CenteredFft2d {
 public:
  CenteredFft2d(std::size_t width, std::size_t height) : width_(width), height_(height) {
    detail::require(width >= 1 && height >= 1, "fft: empty grid");
    const std::size_t n = width * height;
    buffer_ = fftw_alloc_complex(n);
    std::lock_guard lock(detail::fftw_planner_mutex());
    // FFTW_ESTIMATE keeps the plan choice independent of timing, so results are reproducible.
    forward_ = fftw_plan_dft_2d(static_cast<int>(height), static_cast<int>(width), buffer_, buffer_,
                                FFTW_FORWARD, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_2d(static_cast<int>(height), static_cast<int>(width), buffer_, buffer_,
                                FFTW_BACKWARD, FFTW_ESTIMATE);
    scale_ = 1.0 / std::sqrt(static_cast<double>(n));
  }

  CenteredFft2d(const CenteredFft2d&) = delete;
  CenteredFft2d& operator=(const CenteredFft2d&) = delete;

  CenteredFft2d(CenteredFft2d&& other) noexcept { swap(other); }
  CenteredFft2d& operator=(CenteredFft2d&& other) noexcept {
    if (this != &other) {
      release();
      swap(other);
    }
    return *this;
  }

  ~CenteredFft2d() { release(); }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }

  /// in and out may alias.
  void forward(std::span<const Complex> in, std::span<Complex> out) { run(forward_, in, out); }
  void inverse(std::span<const Complex> in, std::span<Complex> out) { run(inverse_, in, out); }

  ComplexGrid forward(const ComplexGrid& in) {
    ComplexGrid out(in.width(), in.height());
    forward(in.data(), out.data());
    return out;
  }
  ComplexGrid inverse(const ComplexGrid& in) {
    ComplexGrid out(in.width(), in.height());
    inverse(in.data(), out.data());
    return out;
  }

 private:
  void run(fftw_plan plan, std::span<const Complex> in, std::span<Complex> out) {
    const std::size_t n = width_ * height_;
    detail::require(in.size() == n && out.size() == n, "fft: buffer size does not match plan");
    const std::size_t hx = width_ / 2;
    const std::size_t hy = height_ / 2;
    // ifftshift on the way in
    for (std::size_t y = 0; y < height_; ++y) {
      const std::size_t sy = (y + hy) % height_;
      for (std::size_t x = 0; x < width_; ++x) {
        const Complex v = in[sy * width_ + (x + hx) % width_];
        buffer_[y * width_ + x][0] = v.real();
        buffer_[y * width_ + x][1] = v.imag();
      }
    }
    fftw_execute(plan);
    // fftshift on the way out
    const std::size_t fx = width_ - hx;
    const std::size_t fy = height_ - hy;
    for (std::size_t y = 0; y < height_; ++y) {
      const std::size_t sy = (y + fy) % height_;
      for (std::size_t x = 0; x < width_; ++x) {
        const fftw_complex& v = buffer_[sy * width_ + (x + fx) % width_];
        out[y * width_ + x] = Complex(v[0] * scale_, v[1] * scale_);
      }
    }
  }

  void release() noexcept {
    if (buffer_ == nullptr) return;
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      fftw_destroy_plan(forward_);
      fftw_destroy_plan(inverse_);
    }
    fftw_free(buffer_);
    buffer_ = nullptr;
  }

  void swap(CenteredFft2d& other) noexcept {
    std::swap(width_, other.width_);
    std::swap(height_, other.height_);
    std::swap(buffer_, other.buffer_);
    std::swap(forward_, other.forward_);
    std::swap(inverse_, other.inverse_);
    std::swap(scale_, other.scale_);
  }

  std::size_t width_ = 0;
  std::size_t height_ = 0;
  fftw_complex* buffer_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
  double scale_ = 1.0;
};

}  // namespace fovholo
