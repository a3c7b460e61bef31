#pragma once

// Complex optical fields, SLM phase masks and the propagation operators
// linking the SLM (hologram) plane to the image plane.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>

#include "fovholo/fft.hpp"
#include "fovholo/grid.hpp"

namespace fovholo {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Sampling metadata shared by a field and the optics it travels through.
struct Optics {
  double pitch = 8e-6;         // meters per pixel, square pixels
  double wavelength = 532e-9;  // meters
};

/// A grid of complex amplitudes together with its sampling pitch and wavelength.
class ComplexField {
 public:
  ComplexField() = default;

  ComplexField(std::size_t width, std::size_t height, Optics optics, Complex fill = {})
      : grid_(width, height, fill), optics_(optics) {
    validate_metadata();
  }

  ComplexField(ComplexGrid grid, Optics optics) : grid_(std::move(grid)), optics_(optics) {
    validate_metadata();
  }

  std::size_t width() const noexcept { return grid_.width(); }
  std::size_t height() const noexcept { return grid_.height(); }
  std::size_t size() const noexcept { return grid_.size(); }
  double pitch() const noexcept { return optics_.pitch; }
  double wavelength() const noexcept { return optics_.wavelength; }
  const Optics& optics() const noexcept { return optics_; }

  ComplexGrid& grid() noexcept { return grid_; }
  const ComplexGrid& grid() const noexcept { return grid_; }

  Complex& operator()(std::size_t x, std::size_t y) { return grid_(x, y); }
  const Complex& operator()(std::size_t x, std::size_t y) const { return grid_(x, y); }
  Complex& operator[](std::size_t i) { return grid_[i]; }
  const Complex& operator[](std::size_t i) const { return grid_[i]; }

  /// Throws if any sample is NaN or infinite.
  void require_finite(const std::string& context) const {
    for (const Complex& v : grid_) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
        throw std::invalid_argument(context + ": field contains a non-finite sample");
      }
    }
  }

 private:
  void validate_metadata() const {
    detail::require(grid_.width() >= 1 && grid_.height() >= 1, "field must be at least 1x1");
    detail::require(optics_.pitch > 0.0, "field pitch must be positive");
    detail::require(optics_.wavelength > 0.0, "field wavelength must be positive");
  }

  ComplexGrid grid_;
  Optics optics_;
};

/// SLM phase values in radians.
class PhaseMask : public RealGrid {
 public:
  using RealGrid::RealGrid;
  PhaseMask() = default;
  explicit PhaseMask(RealGrid values) : RealGrid(std::move(values)) {}
};

enum class PropagationMethod { fourier, angular_spectrum, direct };

struct PropagationSpec {
  PropagationMethod method = PropagationMethod::fourier;
  double distance = 0.0;  // meters; ignored for fourier
  double wavelength = 532e-9;

  void validate() const {
    detail::require(wavelength > 0.0, "propagation: wavelength must be positive");
    if (method != PropagationMethod::fourier) {
      detail::require(distance > 0.0, "propagation: distance must be positive");
    }
  }
};

// ---------------------------------------------------------------------------
// Hologram field and intensity

/// U_H = illumination * exp(j * phase), pixelwise.
inline ComplexField make_hologram_field(const PhaseMask& phase, const ComplexField& illumination) {
  require_same_shape(phase, illumination.grid(), "make_hologram_field");
  ComplexField out(illumination.width(), illumination.height(), illumination.optics());
  for (std::size_t i = 0; i < phase.size(); ++i) {
    out[i] = illumination[i] * std::polar(1.0, phase[i]);
  }
  return out;
}

/// Uniform real illumination of the given amplitude (1 = unit illumination).
inline ComplexField make_hologram_field(const PhaseMask& phase, Optics optics = {}, double amplitude = 1.0) {
  ComplexField out(phase.width(), phase.height(), optics);
  for (std::size_t i = 0; i < phase.size(); ++i) out[i] = std::polar(amplitude, phase[i]);
  return out;
}

inline RealGrid intensity(const ComplexGrid& field) {
  RealGrid out(field.width(), field.height());
  for (std::size_t i = 0; i < field.size(); ++i) out[i] = std::norm(field[i]);
  return out;
}

inline RealGrid intensity(const ComplexField& field) { return intensity(field.grid()); }

/// Sum of |u|^2.
inline double energy(const ComplexGrid& field) {
  double e = 0.0;
  for (const Complex& v : field) e += std::norm(v);
  return e;
}

inline double energy(const ComplexField& field) { return energy(field.grid()); }

// ---------------------------------------------------------------------------
// Fourier (far-field) propagation

inline ComplexField propagate_fourier(const ComplexField& field) {
  CenteredFft2d fft(field.width(), field.height());
  return ComplexField(fft.forward(field.grid()), field.optics());
}

inline ComplexField inverse_propagate_fourier(const ComplexField& field) {
  CenteredFft2d fft(field.width(), field.height());
  return ComplexField(fft.inverse(field.grid()), field.optics());
}

// ---------------------------------------------------------------------------
// Angular spectrum propagation

/// Transfer function of free space for spatial frequencies (fx, fy) in cycles/meter.
/// Zero outside the propagating disc sqrt(fx^2 + fy^2) < 1/wavelength.
inline Complex asm_transfer(double fx, double fy, double z, double wavelength) {
  const double f2 = fx * fx + fy * fy;
  if (f2 * wavelength * wavelength >= 1.0) return {0.0, 0.0};
  const double root = std::sqrt(1.0 - wavelength * wavelength * f2);
  return std::polar(1.0, kTwoPi * (z / wavelength) * root);
}

struct AsmOptions {
  // Zero-padding factor applied before transforming; 0 picks the smallest power of two that
  // keeps the geometric spread of the band-limited field inside the padded window.
  std::size_t padding = 0;
};

/// Padding chosen by AsmOptions{0}: the field spreads by z * tan(theta_max) on each side,
/// with sin(theta_max) = min(1, wavelength / (2 * pitch)).
inline std::size_t asm_auto_padding(std::size_t side, double pitch, double wavelength, double z) {
  const double s = std::min(1.0, wavelength / (2.0 * pitch));
  const double spread = s < 1.0 ? z * s / std::sqrt(1.0 - s * s) : z * 1e3;
  const double needed = static_cast<double>(side) + 2.0 * spread / pitch;
  std::size_t pad = 1;
  while (static_cast<double>(pad * side) < needed && pad < 64) pad *= 2;
  return pad;
}

/// Output = inverse(transform(field) * H(z)); z == 0 returns the input unchanged.
inline ComplexField propagate_asm(const ComplexField& field, double z, AsmOptions options = {}) {
  detail::require(z >= 0.0 && std::isfinite(z), "propagate_asm: distance must be non-negative");
  if (z == 0.0) return field;
  const std::size_t w = field.width();
  const std::size_t h = field.height();
  const std::size_t pad = options.padding == 0
                              ? asm_auto_padding(std::max(w, h), field.pitch(), field.wavelength(), z)
                              : options.padding;
  const std::size_t pw = w * pad;
  const std::size_t ph = h * pad;
  const std::size_t ox = (pw - w) / 2;
  const std::size_t oy = (ph - h) / 2;

  ComplexGrid padded(pw, ph);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) padded(x + ox, y + oy) = field(x, y);

  CenteredFft2d fft(pw, ph);
  ComplexGrid spectrum = fft.forward(padded);
  const double dfx = 1.0 / (static_cast<double>(pw) * field.pitch());
  const double dfy = 1.0 / (static_cast<double>(ph) * field.pitch());
  for (std::size_t y = 0; y < ph; ++y) {
    const double fy = (static_cast<double>(y) - static_cast<double>(ph / 2)) * dfy;
    for (std::size_t x = 0; x < pw; ++x) {
      const double fx = (static_cast<double>(x) - static_cast<double>(pw / 2)) * dfx;
      spectrum(x, y) *= asm_transfer(fx, fy, z, field.wavelength());
    }
  }
  ComplexGrid back = fft.inverse(spectrum);

  ComplexField out(w, h, field.optics());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) out(x, y) = back(x + ox, y + oy);
  return out;
}

// ---------------------------------------------------------------------------
// Direct scalar diffraction sum (oracle)

struct DirectOptions {
  std::size_t max_side = 64;  // refuse larger grids, cost is O(N^4)
  bool obliquity = false;     // multiply the kernel by z / rho (Rayleigh-Sommerfeld I)
};

/// Brute-force evaluation of
///   out(x, y) = 1/(j*lambda) * sum in(zeta, eta) * exp(j*k*rho) / rho * pitch^2,
///   rho = sqrt((zeta - x)^2 + (eta - y)^2 + z^2),
/// with source and observation points on the same pixel-centre lattice.
inline ComplexField propagate_direct(const ComplexField& field, double z, DirectOptions options = {}) {
  detail::require(z > 0.0 && std::isfinite(z), "propagate_direct: distance must be positive");
  if (field.width() > options.max_side || field.height() > options.max_side) {
    detail::fail("propagate_direct: grid " + std::to_string(field.width()) + "x" +
                 std::to_string(field.height()) + " exceeds the oracle limit of " +
                 std::to_string(options.max_side) + " per side (cost grows as N^4)");
  }
  const std::size_t w = field.width();
  const std::size_t h = field.height();
  const double p = field.pitch();
  const double k = kTwoPi / field.wavelength();
  const Complex prefactor = p * p / Complex(0.0, field.wavelength());

  ComplexField out(w, h, field.optics());
  for (std::size_t oy = 0; oy < h; ++oy) {
    for (std::size_t ox = 0; ox < w; ++ox) {
      Complex acc{0.0, 0.0};
      for (std::size_t sy = 0; sy < h; ++sy) {
        const double dy = (static_cast<double>(sy) - static_cast<double>(oy)) * p;
        for (std::size_t sx = 0; sx < w; ++sx) {
          const double dx = (static_cast<double>(sx) - static_cast<double>(ox)) * p;
          const double rho = std::sqrt(dx * dx + dy * dy + z * z);
          double weight = 1.0 / rho;
          if (options.obliquity) weight *= z / rho;
          acc += field(sx, sy) * std::polar(weight, k * rho);
        }
      }
      out(ox, oy) = prefactor * acc;
    }
  }
  return out;
}

/// True when the point-sampled diffraction kernel is free of aliasing over the whole grid:
/// the local kernel frequency r / (lambda * rho) stays below 1 / (2 * pitch) for every
/// source/observation offset r on the grid.
inline bool direct_sampling_valid(std::size_t width, std::size_t height, double pitch, double wavelength,
                                  double z) {
  const double rx = static_cast<double>(width - 1) * pitch;
  const double ry = static_cast<double>(height - 1) * pitch;
  const double r = std::sqrt(rx * rx + ry * ry);
  const double rho = std::sqrt(r * r + z * z);
  return r / (wavelength * rho) < 1.0 / (2.0 * pitch);
}

inline ComplexField propagate(const ComplexField& field, const PropagationSpec& spec) {
  spec.validate();
  switch (spec.method) {
    case PropagationMethod::fourier:
      return propagate_fourier(field);
    case PropagationMethod::angular_spectrum:
      return propagate_asm(field, spec.distance);
    case PropagationMethod::direct:
      return propagate_direct(field, spec.distance);
  }
  return field;
}

// ---------------------------------------------------------------------------
// Phase wrapping and quantization

/// Wraps into [0, 2*pi) and rounds to the nearest of 2^bits uniformly spaced levels.
inline PhaseMask wrap_quantize_phase(const PhaseMask& phase, int bits) {
  detail::require(bits >= 1 && bits <= 16, "wrap_quantize_phase: bits must be in [1, 16]");
  const double levels = std::ldexp(1.0, bits);
  const double step = kTwoPi / levels;
  PhaseMask out(phase.width(), phase.height());
  for (std::size_t i = 0; i < phase.size(); ++i) {
    double wrapped = std::fmod(phase[i], kTwoPi);
    if (wrapped < 0.0) wrapped += kTwoPi;
    double level = std::round(wrapped / step);
    if (level >= levels) level -= levels;  // rounding up past 2*pi lands on level 0
    out[i] = level * step;
  }
  return out;
}

inline double wrap_phase(double phi) {
  double w = std::fmod(phi, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  return w >= kTwoPi ? 0.0 : w;
}

// ---------------------------------------------------------------------------
// Test fields

/// Sum of `count` Gaussian beamlets (1/e^2 half-width 2*width_px pixels) at random positions
/// within the central half of the grid, with random complex weights and small linear phase
/// tilts. The spectrum is band-limited well inside the grid's Nyquist limit, which is what
/// a point-sampled diffraction sum needs to be a faithful reference.
inline ComplexField beamlet_field(std::size_t width, std::size_t height, std::uint64_t seed, Optics optics = {},
                                  std::size_t count = 3, double width_px = 1.0) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  auto normal = [&] {
    const double u1 = 1.0 - uniform(0.0, 1.0);
    const double u2 = uniform(0.0, 1.0);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  };
  ComplexField field(width, height, optics);
  const double cx = static_cast<double>(width / 2);
  const double cy = static_cast<double>(height / 2);
  for (std::size_t b = 0; b < count; ++b) {
    const double x0 = uniform(-static_cast<double>(width) / 4, static_cast<double>(width) / 4);
    const double y0 = uniform(-static_cast<double>(height) / 4, static_cast<double>(height) / 4);
    const double re = normal();
    const Complex a(re, normal());
    const double tx = uniform(-0.5, 0.5);
    const double ty = uniform(-0.5, 0.5);
    for (std::size_t y = 0; y < height; ++y) {
      const double Y = static_cast<double>(y) - cy;
      for (std::size_t x = 0; x < width; ++x) {
        const double X = static_cast<double>(x) - cx;
        const double r2 = (X - x0) * (X - x0) + (Y - y0) * (Y - y0);
        field(x, y) += a * std::polar(std::exp(-r2 / (2.0 * width_px * width_px)), tx * X + ty * Y);
      }
    }
  }
  return field;
}

}  // namespace fovholo
