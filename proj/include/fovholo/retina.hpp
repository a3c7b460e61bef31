#pragma once

// Midget retinal ganglion cell (mRGC) density and the gaze-contingent foveation mask.

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <algorithm>

#include "fovholo/grid.hpp"

namespace fovholo {

/// Fitting constants of one visual-field meridian.
struct MeridianParams {
  double a = 1.0;   // weight of the polynomial term, 0 < a <= 1
  double r2 = 1.0;  // degrees
  double re = 1.0;  // degrees
};

/// Density model constants. Meridians are indexed 1..4 (temporal, superior, nasal, inferior);
/// defaults are the published fits of Watson (2014), Table 1.
struct RetinalModel {
  double rho_cone = 14804.6;  // cones / deg^2 at the foveal centre
  std::array<MeridianParams, 4> meridians{{
      {0.9851, 1.058, 22.14},  // 1: temporal
      {0.9935, 1.035, 16.35},  // 2: superior
      {0.9729, 1.084, 7.633},  // 3: nasal
      {0.996, 0.9932, 12.13},  // 4: inferior
  }};
  // Meridians used for the horizontal and vertical terms of the mask. Left/right eye
  // handedness is not modelled; swap these to mirror the assignment.
  int x_meridian = 1;
  int y_meridian = 2;

  void validate() const {
    detail::require(rho_cone > 0.0, "retinal model: rho_cone must be positive");
    for (const auto& m : meridians) {
      detail::require(m.a > 0.0 && m.a <= 1.0, "retinal model: a must lie in (0, 1]");
      detail::require(m.r2 > 0.0 && m.re > 0.0, "retinal model: r2 and re must be positive");
    }
    detail::require(x_meridian >= 1 && x_meridian <= 4 && y_meridian >= 1 && y_meridian <= 4,
                    "retinal model: meridian assignment must be in 1..4");
  }

  const MeridianParams& meridian(int m) const {
    detail::require(m >= 1 && m <= 4, "meridian index must be in 1..4");
    return meridians[static_cast<std::size_t>(m - 1)];
  }
};

/// mRGC density (cells / deg^2) at eccentricity r (degrees) along meridian m:
///   2 rho_cone (1 + r/41.03)^-1 [a (1 + r/r2)^-2 + (1 - a) exp(-r/re)]
inline double mrgc_density(double r, int m, const RetinalModel& model = {}) {
  detail::require(r >= 0.0 && std::isfinite(r), "mrgc_density: eccentricity must be non-negative");
  const MeridianParams& p = model.meridian(m);
  const double falloff = 1.0 / (1.0 + r / 41.03);
  const double poly = 1.0 / ((1.0 + r / p.r2) * (1.0 + r / p.r2));
  return 2.0 * model.rho_cone * falloff * (p.a * poly + (1.0 - p.a) * std::exp(-r / p.re));
}

/// Image extent and gaze. Gaze is in degrees relative to the image centre pixel
/// (width/2, height/2); +x points right, +y points down the rows.
struct ViewingGeometry {
  std::size_t width = 256;
  std::size_t height = 256;
  double fov_deg = 16.0;  // horizontal field of view
  double gaze_x = 0.0;
  double gaze_y = 0.0;
  bool tan_mapping = false;  // perspective (tan) pixel->degree mapping instead of linear

  double degrees_per_pixel() const { return fov_deg / static_cast<double>(width); }
  double pixels_per_degree() const { return static_cast<double>(width) / fov_deg; }

  /// Visual angle of a pixel centre relative to the image centre (not the gaze).
  std::pair<double, double> pixel_angle(double px, double py) const {
    const double dx = px - static_cast<double>(width / 2);
    const double dy = py - static_cast<double>(height / 2);
    if (!tan_mapping) return {dx * degrees_per_pixel(), dy * degrees_per_pixel()};
    const double half = fov_deg / 2.0 * std::numbers::pi / 180.0;
    const double focal = static_cast<double>(width) / 2.0 / std::tan(half);
    constexpr double to_deg = 180.0 / std::numbers::pi;
    return {std::atan(dx / focal) * to_deg, std::atan(dy / focal) * to_deg};
  }

  void validate() const {
    detail::require(width >= 1 && height >= 1, "viewing geometry: empty image");
    detail::require(fov_deg > 0.0 && fov_deg < 180.0, "viewing geometry: field of view must be in (0, 180)");
    const auto [x0, y0] = pixel_angle(0.0, 0.0);
    const auto [x1, y1] = pixel_angle(static_cast<double>(width - 1), static_cast<double>(height - 1));
    detail::require(gaze_x >= x0 && gaze_x <= x1 && gaze_y >= y0 && gaze_y <= y1,
                    "viewing geometry: gaze lies outside the image");
  }
};

/// Per-pixel visual coordinates relative to the gaze point, in degrees.
struct EccentricityMap {
  RealGrid x;
  RealGrid y;
  RealGrid r;
};

inline EccentricityMap eccentricity_map(const ViewingGeometry& geometry) {
  geometry.validate();
  EccentricityMap out{RealGrid(geometry.width, geometry.height), RealGrid(geometry.width, geometry.height),
                      RealGrid(geometry.width, geometry.height)};
  for (std::size_t py = 0; py < geometry.height; ++py) {
    for (std::size_t px = 0; px < geometry.width; ++px) {
      const auto [ax, ay] = geometry.pixel_angle(static_cast<double>(px), static_cast<double>(py));
      const double x = ax - geometry.gaze_x;
      const double y = ay - geometry.gaze_y;
      out.x(px, py) = x;
      out.y(px, py) = y;
      out.r(px, py) = std::hypot(x, y);
    }
  }
  return out;
}

/// Sampling-likelihood weights, peak-normalized to 1.
class FoveationMask : public RealGrid {
 public:
  using RealGrid::RealGrid;
  FoveationMask() = default;
  explicit FoveationMask(RealGrid weights) : RealGrid(std::move(weights)) {}
};

/// Un-normalized mask value r / sqrt((2/sqrt 3) (x^2/rho(r, mx) + y^2/rho(r, my))).
/// At r = 0 both meridian densities equal 2 rho_cone, so the limit is direction independent:
/// sqrt(rho(0) * sqrt(3) / 2).
inline double foveation_weight(double x, double y, const RetinalModel& model = {}) {
  const double r = std::hypot(x, y);
  if (r == 0.0) return std::sqrt(mrgc_density(0.0, model.x_meridian, model) * std::sqrt(3.0) / 2.0);
  const double rho_x = mrgc_density(r, model.x_meridian, model);
  const double rho_y = mrgc_density(r, model.y_meridian, model);
  return r / std::sqrt((2.0 / std::sqrt(3.0)) * (x * x / rho_x + y * y / rho_y));
}

inline FoveationMask foveation_mask(const ViewingGeometry& geometry, const RetinalModel& model = {}) {
  model.validate();
  const EccentricityMap ecc = eccentricity_map(geometry);
  FoveationMask mask(geometry.width, geometry.height);
  double peak = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = foveation_weight(ecc.x[i], ecc.y[i], model);
    peak = std::max(peak, mask[i]);
  }
  for (double& v : mask) v /= peak;
  return mask;
}

inline FoveationMask unit_mask(std::size_t width, std::size_t height) { return FoveationMask(width, height, 1.0); }

}  // namespace fovholo
