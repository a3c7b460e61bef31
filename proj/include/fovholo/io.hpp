#pragma once

// File formats: PFM grids, grayscale PNG, Zernike and retinal-constant CSV files.

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "fovholo/errors.hpp"
#include "fovholo/grid.hpp"
#include "fovholo/psf.hpp"
#include "fovholo/retina.hpp"
#include "fovholo/wavefield.hpp"

namespace fovholo {

/// Unreadable or malformed input, or an unwritable output path.
class IoError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

namespace fs = std::filesystem;

namespace detail {

inline float byteswap_float(float f) {
  auto u = std::bit_cast<std::uint32_t>(f);
  u = (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
  return std::bit_cast<float>(u);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// PFM: "Pf" header, little-endian float32 (scale -1.0), rows stored bottom to top.

inline void write_pfm(const fs::path& path, const RealGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "Pf\n" << grid.width() << ' ' << grid.height() << "\n-1.0\n";
  std::vector<float> row(grid.width());
  for (std::size_t r = grid.height(); r-- > 0;) {
    for (std::size_t x = 0; x < grid.width(); ++x) row[x] = static_cast<float>(grid(x, r));
    if constexpr (std::endian::native == std::endian::big) {
      for (float& f : row) f = detail::byteswap_float(f);
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline RealGrid read_pfm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::string magic;
  std::size_t w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  if (!in || magic != "Pf" || w == 0 || h == 0 || scale == 0.0) {
    throw IoError(path.string() + ": not a grayscale PFM file");
  }
  in.get();
  const bool little = scale < 0.0;
  RealGrid grid(w, h);
  std::vector<float> row(w);
  for (std::size_t r = h; r-- > 0;) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(w * sizeof(float)));
    if (!in) throw IoError(path.string() + ": truncated PFM data");
    const bool swap = little != (std::endian::native == std::endian::little);
    for (std::size_t x = 0; x < w; ++x) {
      float f = row[x];
      if (swap) f = detail::byteswap_float(f);
      grid(x, r) = f;
    }
  }
  return grid;
}

/// Writes `<stem>.re.pfm` and `<stem>.im.pfm`.
inline void write_complex_pfm(const fs::path& stem, const ComplexGrid& field) {
  RealGrid re(field.width(), field.height()), im(field.width(), field.height());
  for (std::size_t i = 0; i < field.size(); ++i) {
    re[i] = field[i].real();
    im[i] = field[i].imag();
  }
  write_pfm(stem.string() + ".re.pfm", re);
  write_pfm(stem.string() + ".im.pfm", im);
}

inline ComplexField read_complex_pfm(const fs::path& stem, Optics optics = {}) {
  const RealGrid re = read_pfm(stem.string() + ".re.pfm");
  const RealGrid im = read_pfm(stem.string() + ".im.pfm");
  if (!re.same_shape(im)) throw IoError(stem.string() + ": real and imaginary parts differ in size");
  ComplexGrid g(re.width(), re.height());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = {re[i], im[i]};
  return ComplexField(std::move(g), optics);
}

inline void write_kernel_pfm(const fs::path& path, const PsfKernel& kernel) { write_pfm(path, kernel); }

inline PsfKernel read_kernel_pfm(const fs::path& path) {
  try {
    return PsfKernel(read_pfm(path));
  } catch (const std::invalid_argument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// sRGB transfer

inline double srgb_to_linear(double v) {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

inline double linear_to_srgb(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return v <= 0.0031308 ? v * 12.92 : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

// ---------------------------------------------------------------------------
// PNG

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline void png_error_handler(png_structp, png_const_charp msg) { throw IoError(std::string("libpng: ") + msg); }
inline void png_warning_handler(png_structp, png_const_charp) {}

// Samples are row-major, one channel; bit_depth is 8 or 16.
inline void write_gray_png(const fs::path& path, std::size_t width, std::size_t height, int bit_depth,
                           const std::vector<std::uint16_t>& samples) {
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler, png_warning_handler);
  if (!png) throw IoError("libpng: out of memory");
  png_infop info = png_create_info_struct(png);
  try {
    if (!info) throw IoError("libpng: out of memory");
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    // keep the encoder output reproducible: no timestamp chunk, fixed compression
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    const std::size_t bytes = bit_depth == 16 ? 2 : 1;
    std::vector<png_byte> row(width * bytes);
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const std::uint16_t v = samples[y * width + x];
        if (bytes == 2) {
          row[2 * x] = static_cast<png_byte>(v >> 8);
          row[2 * x + 1] = static_cast<png_byte>(v & 0xff);
        } else {
          row[x] = static_cast<png_byte>(v);
        }
      }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
}

}  // namespace detail

/// Reads an 8- or 16-bit PNG as a grayscale image in [0, 1]. Colour images are reduced to
/// luma; alpha is dropped. With srgb_decode the stored values are linearized.
inline RealGrid read_png_gray(const fs::path& path, bool srgb_decode = true) {
  detail::FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw IoError("cannot read " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError(path.string() + ": not a PNG file");
  }
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_error_handler, detail::png_warning_handler);
  if (!png) throw IoError("libpng: out of memory");
  png_infop info = png_create_info_struct(png);
  RealGrid image;
  try {
    if (!info) throw IoError("libpng: out of memory");
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (color & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    png_read_update_info(png, info);

    const std::size_t w = png_get_image_width(png, info);
    const std::size_t h = png_get_image_height(png, info);
    const int out_depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<png_byte> buffer(rowbytes * h);
    std::vector<png_bytep> rows(h);
    for (std::size_t y = 0; y < h; ++y) rows[y] = buffer.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);

    image = RealGrid(w, h);
    const double maxval = out_depth == 16 ? 65535.0 : 255.0;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double raw = out_depth == 16 ? (rows[y][2 * x] << 8 | rows[y][2 * x + 1]) : rows[y][x];
        const double v = raw / maxval;
        image(x, y) = srgb_decode ? srgb_to_linear(v) : v;
      }
    }
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

/// 16-bit phase PNG: sample v encodes v * 2pi / 65536, so [0, 65535] covers [0, 2pi).
inline std::uint16_t phase_to_sample(double phi) {
  const double levels = 65536.0;
  auto v = static_cast<std::int64_t>(std::llround(wrap_phase(phi) / kTwoPi * levels));
  return static_cast<std::uint16_t>(v % 65536);
}

inline double sample_to_phase(std::uint16_t v) { return static_cast<double>(v) * kTwoPi / 65536.0; }

inline void write_phase_png(const fs::path& path, const PhaseMask& phase) {
  std::vector<std::uint16_t> samples(phase.size());
  for (std::size_t i = 0; i < phase.size(); ++i) samples[i] = phase_to_sample(phase[i]);
  detail::write_gray_png(path, phase.width(), phase.height(), 16, samples);
}

inline PhaseMask read_phase_png(const fs::path& path) {
  const RealGrid raw = read_png_gray(path, false);
  PhaseMask phase(raw.width(), raw.height());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    phase[i] = sample_to_phase(static_cast<std::uint16_t>(std::lround(raw[i] * 65535.0)));
  }
  return phase;
}

/// 8-bit grayscale PNG of values clamped to [0, 1]; srgb_encode applies the display transfer.
inline void write_gray8_png(const fs::path& path, const RealGrid& image, bool srgb_encode = true) {
  std::vector<std::uint16_t> samples(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = srgb_encode ? linear_to_srgb(image[i]) : std::clamp(image[i], 0.0, 1.0);
    samples[i] = static_cast<std::uint16_t>(std::lround(v * 255.0));
  }
  detail::write_gray_png(path, image.width(), image.height(), 8, samples);
}

/// Heatmap for inspection: linear map of [min, max] onto [0, 255].
inline void write_heatmap_png(const fs::path& path, const RealGrid& values) {
  if (values.empty()) throw IoError("heatmap of an empty grid");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double span = *hi - *lo;
  RealGrid scaled(values.width(), values.height());
  for (std::size_t i = 0; i < values.size(); ++i) scaled[i] = span > 0.0 ? (values[i] - *lo) / span : 1.0;
  write_gray8_png(path, scaled, false);
}

// ---------------------------------------------------------------------------
// Resampling

/// Area-averaging resize (box filter with fractional pixel overlap).
inline RealGrid resize_area(const RealGrid& in, std::size_t width, std::size_t height) {
  detail::require(!in.empty() && width > 0 && height > 0, "resize: empty image");
  if (in.width() == width && in.height() == height) return in;

  auto weights = [](std::size_t n_in, std::size_t n_out) {
    // for each output sample, list of (input index, weight)
    std::vector<std::vector<std::pair<std::size_t, double>>> w(n_out);
    const double scale = static_cast<double>(n_in) / static_cast<double>(n_out);
    for (std::size_t o = 0; o < n_out; ++o) {
      const double a = static_cast<double>(o) * scale;
      const double b = a + scale;
      for (auto i = static_cast<std::size_t>(std::floor(a)); i < n_in && static_cast<double>(i) < b; ++i) {
        const double overlap = std::min(b, static_cast<double>(i + 1)) - std::max(a, static_cast<double>(i));
        if (overlap > 0.0) w[o].emplace_back(i, overlap / scale);
      }
    }
    return w;
  };
  const auto wx = weights(in.width(), width);
  const auto wy = weights(in.height(), height);
  RealGrid tmp(width, in.height());
  for (std::size_t y = 0; y < in.height(); ++y)
    for (std::size_t x = 0; x < width; ++x) {
      double acc = 0.0;
      for (const auto& [i, w] : wx[x]) acc += w * in(i, y);
      tmp(x, y) = acc;
    }
  RealGrid out(width, height);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      double acc = 0.0;
      for (const auto& [i, w] : wy[y]) acc += w * tmp(x, i);
      out(x, y) = acc;
    }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  return cells;
}

// Non-empty, non-comment lines split into cells.
inline std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    rows.push_back(split_csv(line));
  }
  return rows;
}

inline double parse_number(const std::string& s, const fs::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(path.string() + ": bad number '" + s + "'");
  }
}

inline int parse_int(const std::string& s, const fs::path& path) {
  const double v = parse_number(s, path);
  if (v != std::floor(v)) throw IoError(path.string() + ": expected an integer, got '" + s + "'");
  return static_cast<int>(v);
}

}  // namespace detail

/// Zernike coefficients. Header `n,m,coeff_um` (double index) or `j,coeff_um` (OSA/ANSI single
/// index j = (n(n+2)+m)/2). Polynomials use unit-variance (Noll) normalization over the pupil.
inline std::vector<ZernikeMode> read_zernike_csv(const fs::path& path) {
  const auto rows = detail::read_csv_rows(path);
  if (rows.empty()) throw IoError(path.string() + ": empty Zernike file");
  const auto& header = rows.front();
  const bool double_index = header == std::vector<std::string>{"n", "m", "coeff_um"};
  const bool single_index = header == std::vector<std::string>{"j", "coeff_um"};
  if (!double_index && !single_index) {
    throw IoError(path.string() + ": header must be 'n,m,coeff_um' or 'j,coeff_um'");
  }
  std::vector<ZernikeMode> modes;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) throw IoError(path.string() + ": wrong column count on row " + std::to_string(r));
    ZernikeMode mode;
    if (double_index) {
      mode.n = detail::parse_int(row[0], path);
      mode.m = detail::parse_int(row[1], path);
      mode.coeff_um = detail::parse_number(row[2], path);
    } else {
      const int j = detail::parse_int(row[0], path);
      if (j < 0) throw IoError(path.string() + ": negative OSA index");
      std::tie(mode.n, mode.m) = osa_to_nm(j);
      mode.coeff_um = detail::parse_number(row[1], path);
    }
    if (!zernike_index_valid(mode.n, mode.m)) {
      throw IoError(path.string() + ": invalid Zernike index (n=" + std::to_string(mode.n) +
                    ", m=" + std::to_string(mode.m) + ")");
    }
    modes.push_back(mode);
  }
  return modes;
}

inline void write_zernike_csv(const fs::path& path, const std::vector<ZernikeMode>& modes) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "n,m,coeff_um\n";
  for (const auto& m : modes) out << m.n << ',' << m.m << ',' << m.coeff_um << '\n';
}

/// Meridian constants override, header `meridian,a,r2,re`. Rows replace the matching meridian
/// of `base`; meridians not listed keep their values.
inline RetinalModel read_retina_constants_csv(const fs::path& path, RetinalModel base = {}) {
  const auto rows = detail::read_csv_rows(path);
  if (rows.empty() || rows.front() != std::vector<std::string>{"meridian", "a", "r2", "re"}) {
    throw IoError(path.string() + ": header must be 'meridian,a,r2,re'");
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 4) throw IoError(path.string() + ": wrong column count on row " + std::to_string(r));
    const int m = detail::parse_int(row[0], path);
    if (m < 1 || m > 4) throw IoError(path.string() + ": meridian must be 1..4");
    auto& p = base.meridians[static_cast<std::size_t>(m - 1)];
    p.a = detail::parse_number(row[1], path);
    p.r2 = detail::parse_number(row[2], path);
    p.re = detail::parse_number(row[3], path);
  }
  try {
    base.validate();
  } catch (const std::invalid_argument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return base;
}

}  // namespace fovholo
