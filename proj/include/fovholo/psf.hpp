#pragma once

// Retinal point-spread kernels: the Gaussian population model, Zernike-synthesized
// individual eyes, and their application to image-plane fields.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "fovholo/fft.hpp"
#include "fovholo/grid.hpp"
#include "fovholo/wavefield.hpp"

namespace fovholo {

/// Square, odd-sided, non-negative kernel whose taps sum to one.
class PsfKernel : public RealGrid {
 public:
  PsfKernel() : RealGrid(1, 1, 1.0) {}

  /// Validates shape and sign, then rescales the taps to unit sum.
  explicit PsfKernel(RealGrid taps) : RealGrid(std::move(taps)) {
    detail::require(width() == height(), "psf kernel must be square");
    detail::require(width() % 2 == 1, "psf kernel side must be odd");
    double total = 0.0;
    for (double t : *this) {
      detail::require(std::isfinite(t) && t >= 0.0, "psf kernel taps must be finite and non-negative");
      total += t;
    }
    detail::require(total > 0.0, "psf kernel taps sum to zero");
    for (double& t : *this) t /= total;
  }

  std::size_t side() const noexcept { return width(); }
  std::size_t radius() const noexcept { return width() / 2; }

  /// Sum of squared taps: the fraction of energy a spectrally flat field keeps after convolution.
  double energy_transmission() const {
    double s = 0.0;
    for (double t : *this) s += t * t;
    return s;
  }

  bool is_delta() const { return side() == 1 || (*this)(radius(), radius()) == 1.0; }
};

inline PsfKernel delta_kernel() { return PsfKernel(); }

/// Smallest odd integer >= 6*sigma + 1.
inline std::size_t default_support(double sigma) {
  auto s = static_cast<std::size_t>(std::ceil(6.0 * sigma + 1.0));
  return s % 2 == 1 ? s : s + 1;
}

/// Sampled isotropic Gaussian in image-plane pixels. support == 0 selects default_support(sigma).
/// sigma == 0 is rejected unless allow_delta is set, in which case a delta kernel is returned.
inline PsfKernel gaussian_kernel(double sigma, std::size_t support = 0, bool allow_delta = false) {
  if (sigma == 0.0 && allow_delta) return delta_kernel();
  detail::require(sigma > 0.0 && std::isfinite(sigma), "gaussian_kernel: sigma must be positive");
  if (support == 0) support = default_support(sigma);
  detail::require(support % 2 == 1, "gaussian_kernel: support must be odd");
  detail::require(support >= 3, "gaussian_kernel: support must be at least 3");
  RealGrid taps(support, support);
  const double c = static_cast<double>(support / 2);
  for (std::size_t y = 0; y < support; ++y) {
    for (std::size_t x = 0; x < support; ++x) {
      const double dx = static_cast<double>(x) - c;
      const double dy = static_cast<double>(y) - c;
      taps(x, y) = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
  }
  return PsfKernel(std::move(taps));
}

// ---------------------------------------------------------------------------
// Airy disk

/// Angle of the first Airy minimum, 1.22 * wavelength / aperture (radians).
inline double airy_first_minimum(double wavelength, double aperture) {
  detail::require(wavelength > 0.0 && aperture > 0.0, "airy_first_minimum: inputs must be positive");
  return 1.22 * wavelength / aperture;
}

/// Converts an angle to image-plane pixels at the given projection distance.
inline double psf_extent_pixels(double angle, double projection_distance, double image_pitch) {
  detail::require(angle >= 0.0, "psf_extent_pixels: angle must be non-negative");
  detail::require(projection_distance > 0.0 && image_pitch > 0.0,
                  "psf_extent_pixels: distance and pitch must be positive");
  return projection_distance * std::tan(angle) / image_pitch;
}

// ---------------------------------------------------------------------------
// Zernike polynomials (double index n, m; unit-variance normalization on the unit disk)

struct ZernikeMode {
  int n = 0;
  int m = 0;
  double coeff_um = 0.0;
};

inline bool zernike_index_valid(int n, int m) {
  return n >= 0 && std::abs(m) <= n && (n - std::abs(m)) % 2 == 0;
}

/// OSA/ANSI single index j = (n*(n+2) + m) / 2.
inline int osa_index(int n, int m) {
  detail::require(zernike_index_valid(n, m), "invalid Zernike (n, m)");
  return (n * (n + 2) + m) / 2;
}

inline std::pair<int, int> osa_to_nm(int j) {
  detail::require(j >= 0, "OSA index must be non-negative");
  int n = 0;
  while ((n + 1) * (n + 2) / 2 <= j) ++n;
  const int m = 2 * j - n * (n + 2);
  return {n, m};
}

inline double zernike_radial(int n, int m, double rho) {
  m = std::abs(m);
  double r = 0.0;
  for (int k = 0; k <= (n - m) / 2; ++k) {
    const double num = std::tgamma(n - k + 1.0);
    const double den = std::tgamma(k + 1.0) * std::tgamma((n + m) / 2 - k + 1.0) *
                       std::tgamma((n - m) / 2 - k + 1.0);
    r += ((k % 2 == 0) ? 1.0 : -1.0) * num / den * std::pow(rho, n - 2 * k);
  }
  return r;
}

/// Z_n^m(rho, theta) with the Noll normalization sqrt(2(n+1)/(1+delta_m0)):
/// every mode has unit RMS over the unit disk.
inline double zernike(int n, int m, double rho, double theta) {
  detail::require(zernike_index_valid(n, m), "invalid Zernike (n, m)");
  const double norm = std::sqrt((2.0 * (n + 1)) / (m == 0 ? 2.0 : 1.0));
  const double radial = zernike_radial(n, m, rho);
  if (m == 0) return norm * radial;
  return m > 0 ? norm * radial * std::cos(m * theta) : norm * radial * std::sin(-m * theta);
}

struct ZernikeSpec {
  std::vector<ZernikeMode> modes;
  double pupil_diameter_mm = 5.0;
  double wavelength = 550e-9;     // meters
  std::size_t pupil_samples = 64; // pupil diameter in transform samples
  // Angular size of one image-plane pixel on the retina. The PSF is computed on a finer
  // angular lattice and box-integrated onto pixels of this size. <= 0 keeps the native
  // transform sampling (transform size = 2 * pupil_samples, one sample per pixel).
  double pixel_arcmin = 1.0;

  void validate() const {
    for (const auto& mode : modes) {
      if (!zernike_index_valid(mode.n, mode.m)) {
        detail::fail("zernike: invalid mode (n=" + std::to_string(mode.n) + ", m=" + std::to_string(mode.m) + ")");
      }
      detail::require(std::isfinite(mode.coeff_um), "zernike: coefficient must be finite");
    }
    detail::require(pupil_diameter_mm > 0.0, "zernike: pupil diameter must be positive");
    detail::require(wavelength > 0.0, "zernike: wavelength must be positive");
    detail::require(pupil_samples >= 8, "zernike: need at least 8 pupil samples");
  }
};

/// Wavefront error in micrometers at normalized pupil coordinates.
inline double zernike_wavefront(const std::vector<ZernikeMode>& modes, double rho, double theta) {
  double w = 0.0;
  for (const auto& mode : modes) w += mode.coeff_um * zernike(mode.n, mode.m, rho, theta);
  return w;
}

struct ZernikeSampling {
  std::size_t transform_size = 0;
  std::size_t bin = 1;  // fine samples per output pixel along each axis (odd)
};

inline ZernikeSampling zernike_sampling(const ZernikeSpec& spec) {
  const auto np = static_cast<double>(spec.pupil_samples);
  if (spec.pixel_arcmin <= 0.0) return {2 * spec.pupil_samples, 1};
  const double d = spec.pupil_diameter_mm * 1e-3;
  const double pixel_rad = spec.pixel_arcmin / 60.0 * std::numbers::pi / 180.0;
  // fine angular sample = wavelength * Np / (G * D); one pixel spans `bin` of them
  for (std::size_t bin = 1;; bin += 2) {
    const double g = static_cast<double>(bin) * spec.wavelength * np / (d * pixel_rad);
    if (g >= 2.0 * np) return {static_cast<std::size_t>(std::lround(g)), bin};
  }
}

/// Intensity PSF of an aberrated circular pupil, box-integrated onto out_size x out_size
/// image pixels around the optical axis and normalized to unit sum.
inline PsfKernel zernike_psf(const ZernikeSpec& spec, std::size_t out_size) {
  spec.validate();
  detail::require(out_size % 2 == 1, "zernike_psf: output size must be odd");
  const auto [g, bin] = zernike_sampling(spec);
  const double half_pupil = static_cast<double>(spec.pupil_samples) / 2.0;
  const double k_um = kTwoPi / (spec.wavelength * 1e6);
  const std::size_t centre = g / 2;

  ComplexGrid pupil(g, g);
  for (std::size_t y = 0; y < g; ++y) {
    const double v = (static_cast<double>(y) - static_cast<double>(centre)) / half_pupil;
    for (std::size_t x = 0; x < g; ++x) {
      const double u = (static_cast<double>(x) - static_cast<double>(centre)) / half_pupil;
      const double rho = std::hypot(u, v);
      if (rho > 1.0) continue;
      const double theta = std::atan2(v, u);
      pupil(x, y) = std::polar(1.0, k_um * zernike_wavefront(spec.modes, rho, theta));
    }
  }
  CenteredFft2d fft(g, g);
  const RealGrid fine = intensity(fft.forward(pupil));

  RealGrid taps(out_size, out_size);
  const auto half_out = static_cast<long>(out_size / 2);
  const auto half_bin = static_cast<long>(bin / 2);
  const auto gl = static_cast<long>(g);
  for (long oy = 0; oy < static_cast<long>(out_size); ++oy) {
    for (long ox = 0; ox < static_cast<long>(out_size); ++ox) {
      const long cy = static_cast<long>(centre) + (oy - half_out) * static_cast<long>(bin);
      const long cx = static_cast<long>(centre) + (ox - half_out) * static_cast<long>(bin);
      double acc = 0.0;
      for (long dy = -half_bin; dy <= half_bin; ++dy) {
        for (long dx = -half_bin; dx <= half_bin; ++dx) {
          // the sampled PSF is periodic in the transform window
          const long fy = ((cy + dy) % gl + gl) % gl;
          const long fx = ((cx + dx) % gl + gl) % gl;
          acc += fine(static_cast<std::size_t>(fx), static_cast<std::size_t>(fy));
        }
      }
      taps(static_cast<std::size_t>(ox), static_cast<std::size_t>(oy)) = acc;
    }
  }
  return PsfKernel(std::move(taps));
}

// ---------------------------------------------------------------------------
// Convolution with a kernel (zero-padded, output the same size as the input)

namespace detail {

// out[p] += sum_k kernel[k] * in[p + sign * (k - c)]; sign = -1 convolves, +1 correlates.
template <class T>
void accumulate_shifted(const Grid<T>& in, const PsfKernel& kernel, int sign, Grid<T>& out) {
  const auto w = static_cast<long>(in.width());
  const auto h = static_cast<long>(in.height());
  const auto c = static_cast<long>(kernel.radius());
  const auto side = static_cast<long>(kernel.side());
  for (long ky = 0; ky < side; ++ky) {
    const long sy = sign * (ky - c);
    for (long kx = 0; kx < side; ++kx) {
      const double tap = kernel(static_cast<std::size_t>(kx), static_cast<std::size_t>(ky));
      if (tap == 0.0) continue;
      const long sx = sign * (kx - c);
      const long x0 = std::max(0L, -sx);
      const long x1 = std::min(w, w - sx);
      const long y0 = std::max(0L, -sy);
      const long y1 = std::min(h, h - sy);
      for (long y = y0; y < y1; ++y) {
        T* dst = &out(0, static_cast<std::size_t>(y));
        const T* src = &in(0, static_cast<std::size_t>(y + sy));
        for (long x = x0; x < x1; ++x) dst[x] += tap * src[x + sx];
      }
    }
  }
}

}  // namespace detail

template <class T>
Grid<T> convolve(const Grid<T>& in, const PsfKernel& kernel) {
  detail::require(kernel.side() <= in.width() && kernel.side() <= in.height(),
                  "apply_retinal_psf: kernel larger than field");
  Grid<T> out(in.width(), in.height());
  detail::accumulate_shifted(in, kernel, -1, out);
  return out;
}

/// Adjoint of convolve(): correlation with the same kernel.
template <class T>
Grid<T> correlate(const Grid<T>& in, const PsfKernel& kernel) {
  detail::require(kernel.side() <= in.width() && kernel.side() <= in.height(),
                  "apply_retinal_psf: kernel larger than field");
  Grid<T> out(in.width(), in.height());
  detail::accumulate_shifted(in, kernel, +1, out);
  return out;
}

/// Superposes neighbouring complex amplitudes on the retina: the image-plane field is
/// convolved (not its intensity) with the real kernel.
inline ComplexField apply_retinal_psf(const ComplexField& field, const PsfKernel& kernel) {
  return ComplexField(convolve(field.grid(), kernel), field.optics());
}

/// Incoherent blur of an intensity image, for ablation against the coherent model.
inline RealGrid apply_intensity_psf(const RealGrid& image, const PsfKernel& kernel) {
  return convolve(image, kernel);
}

}  // namespace fovholo
