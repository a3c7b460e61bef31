#pragma once

// Image-quality metrics and the condition comparison report.

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fovholo/grid.hpp"
#include "fovholo/retina.hpp"

namespace fovholo {

inline double mse(const RealGrid& a, const RealGrid& b) {
  require_same_shape(a, b, "mse");
  detail::require(!a.empty(), "mse: empty images");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

/// 10 log10(peak^2 / mse) with peak 1; identical inputs give +infinity.
inline double psnr_from_mse(double error) {
  if (error == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / error);
}

inline double psnr(const RealGrid& a, const RealGrid& b) { return psnr_from_mse(mse(a, b)); }

namespace detail {

// 'valid' separable filtering with a 1D kernel along x then y
inline RealGrid filter_valid(const RealGrid& in, const std::vector<double>& k) {
  const std::size_t r = k.size();
  const std::size_t w = in.width() - r + 1;
  const std::size_t h = in.height() - r + 1;
  RealGrid tmp(w, in.height());
  for (std::size_t y = 0; y < in.height(); ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < r; ++i) acc += k[i] * in(x + i, y);
      tmp(x, y) = acc;
    }
  RealGrid out(w, h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < r; ++i) acc += k[i] * tmp(x, y + i);
      out(x, y) = acc;
    }
  return out;
}

}  // namespace detail

struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Structural similarity with a Gaussian window, averaged over every window position that
/// fits entirely inside the image.
inline double ssim(const RealGrid& a, const RealGrid& b, const SsimOptions& opt = {}) {
  require_same_shape(a, b, "ssim");
  detail::require(a.width() >= opt.window && a.height() >= opt.window, "ssim: image smaller than window");
  std::vector<double> k(opt.window);
  double total = 0.0;
  const double c = static_cast<double>(opt.window / 2);
  for (std::size_t i = 0; i < opt.window; ++i) {
    const double d = static_cast<double>(i) - c;
    k[i] = std::exp(-d * d / (2.0 * opt.sigma * opt.sigma));
    total += k[i];
  }
  for (double& v : k) v /= total;

  RealGrid aa(a.width(), a.height()), bb(a.width(), a.height()), ab(a.width(), a.height());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const RealGrid mu_a = detail::filter_valid(a, k);
  const RealGrid mu_b = detail::filter_valid(b, k);
  const RealGrid s_aa = detail::filter_valid(aa, k);
  const RealGrid s_bb = detail::filter_valid(bb, k);
  const RealGrid s_ab = detail::filter_valid(ab, k);

  const double c1 = (opt.k1 * opt.dynamic_range) * (opt.k1 * opt.dynamic_range);
  const double c2 = (opt.k2 * opt.dynamic_range) * (opt.k2 * opt.dynamic_range);
  double acc = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double va = s_aa[i] - ma * ma;
    const double vb = s_bb[i] - mb * mb;
    const double cov = s_ab[i] - ma * mb;
    acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return acc / static_cast<double>(mu_a.size());
}

struct RegionMse {
  double foveal = 0.0;
  double peripheral = 0.0;
  std::size_t foveal_pixels = 0;
  std::size_t peripheral_pixels = 0;
};

/// MSE inside (r <= radius) and outside the fovea around the gaze point.
inline RegionMse region_split_mse(const RealGrid& a, const RealGrid& b, const ViewingGeometry& geometry,
                                  double fovea_radius_deg = 3.0) {
  require_same_shape(a, b, "region_split_mse");
  detail::require(a.width() == geometry.width && a.height() == geometry.height,
                  "region_split_mse: geometry does not match image size");
  const EccentricityMap ecc = eccentricity_map(geometry);
  RegionMse out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (ecc.r[i] <= fovea_radius_deg) {
      out.foveal += d * d;
      ++out.foveal_pixels;
    } else {
      out.peripheral += d * d;
      ++out.peripheral_pixels;
    }
  }
  detail::require(out.foveal_pixels > 0, "region_split_mse: foveal region is empty");
  detail::require(out.peripheral_pixels > 0, "region_split_mse: peripheral region is empty");
  out.foveal /= static_cast<double>(out.foveal_pixels);
  out.peripheral /= static_cast<double>(out.peripheral_pixels);
  return out;
}

/// Rescales a simulated image so its mean luminance equals the target's, the way a display's
/// brightness would be calibrated before viewing. All simulated images are compared after this.
inline RealGrid match_mean(const RealGrid& image, const RealGrid& target) {
  require_same_shape(image, target, "match_mean");
  const double mi = mean(image);
  RealGrid out = image;
  if (mi <= 0.0) return out;
  const double s = mean(target) / mi;
  for (double& v : out) v *= s;
  return out;
}

// ---------------------------------------------------------------------------
// Report

struct ImageMetrics {
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double foveal_mse = 0.0;
  double peripheral_mse = 0.0;
};

inline ImageMetrics evaluate_image(const RealGrid& image, const RealGrid& target, const ViewingGeometry& geometry,
                                   double fovea_radius_deg = 3.0) {
  ImageMetrics m;
  m.mse = mse(image, target);
  m.psnr = psnr_from_mse(m.mse);
  m.ssim = ssim(image, target);
  const RegionMse split = region_split_mse(image, target, geometry, fovea_radius_deg);
  m.foveal_mse = split.foveal;
  m.peripheral_mse = split.peripheral;
  return m;
}

/// One evaluated (image, condition) pair, measured on the simulated retinal image (through
/// the evaluation PSF) and on the raw reconstruction.
struct ReportRow {
  std::string image;
  std::string condition;
  ImageMetrics retinal;
  ImageMetrics reconstruction;
  // mse / baseline mse on the same image
  double normalized_retinal = 0.0;
  double normalized_reconstruction = 0.0;
};

struct ConditionSummary {
  std::string condition;
  std::size_t images = 0;
  ImageMetrics retinal;  // means over images
  ImageMetrics reconstruction;
  double normalized_retinal = 0.0;
  double normalized_reconstruction = 0.0;
};

struct MetricsReport {
  std::vector<ReportRow> rows;
  std::vector<ConditionSummary> summary;  // in order of first appearance
};

namespace detail {

inline double normalized(double value, double baseline) {
  if (baseline == 0.0) return value == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return value / baseline;
}

inline void accumulate(ImageMetrics& acc, const ImageMetrics& m) {
  acc.mse += m.mse;
  acc.psnr += m.psnr;
  acc.ssim += m.ssim;
  acc.foveal_mse += m.foveal_mse;
  acc.peripheral_mse += m.peripheral_mse;
}

inline void divide(ImageMetrics& acc, double n) {
  acc.mse /= n;
  acc.psnr /= n;
  acc.ssim /= n;
  acc.foveal_mse /= n;
  acc.peripheral_mse /= n;
}

}  // namespace detail

/// Fills the normalized columns of every row and aggregates per condition.
/// Every image needs a baseline row.
inline MetricsReport normalized_report(std::vector<ReportRow> rows) {
  std::map<std::string, const ReportRow*> baseline;
  for (const auto& row : rows) {
    if (row.condition == "baseline") baseline[row.image] = &row;
  }
  std::vector<std::pair<double, double>> norms;
  for (const auto& row : rows) {
    auto it = baseline.find(row.image);
    if (it == baseline.end()) detail::fail("normalized_report: missing baseline for image '" + row.image + "'");
    if (row.condition == "baseline") {
      norms.emplace_back(1.0, 1.0);
    } else {
      norms.emplace_back(detail::normalized(row.retinal.mse, it->second->retinal.mse),
                         detail::normalized(row.reconstruction.mse, it->second->reconstruction.mse));
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].normalized_retinal = norms[i].first;
    rows[i].normalized_reconstruction = norms[i].second;
  }

  MetricsReport report;
  std::map<std::string, std::size_t> index;
  for (const auto& row : rows) {
    auto [it, inserted] = index.try_emplace(row.condition, report.summary.size());
    if (inserted) report.summary.push_back(ConditionSummary{row.condition, 0, {}, {}, 0.0, 0.0});
    ConditionSummary& s = report.summary[it->second];
    ++s.images;
    detail::accumulate(s.retinal, row.retinal);
    detail::accumulate(s.reconstruction, row.reconstruction);
    s.normalized_retinal += row.normalized_retinal;
    s.normalized_reconstruction += row.normalized_reconstruction;
  }
  for (auto& s : report.summary) {
    const auto n = static_cast<double>(s.images);
    detail::divide(s.retinal, n);
    detail::divide(s.reconstruction, n);
    s.normalized_retinal /= n;
    s.normalized_reconstruction /= n;
  }
  report.rows = std::move(rows);
  return report;
}

}  // namespace fovholo
