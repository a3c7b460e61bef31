#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fovholo/errors.hpp"

namespace fovholo {

using Complex = std::complex<double>;

/// Dense row-major 2D grid. Index (x, y) addresses column x of row y.
template <class T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;

  Grid(std::size_t width, std::size_t height, T fill = T{})
      : width_(width), height_(height), data_(width * height, fill) {}

  Grid(std::size_t width, std::size_t height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    detail::require(data_.size() == width_ * height_, "grid data length does not match width * height");
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t x, std::size_t y) { return data_[y * width_ + x]; }
  const T& operator()(std::size_t x, std::size_t y) const { return data_[y * width_ + x]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  template <class U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<T> data_;
};

using RealGrid = Grid<double>;
using ComplexGrid = Grid<Complex>;

template <class A, class B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const std::string& context) {
  if (!a.same_shape(b)) {
    detail::fail(context + ": dimension mismatch (" + std::to_string(a.width()) + "x" +
                 std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                 std::to_string(b.height()) + ")");
  }
}

template <class T>
double sum(const Grid<T>& g) {
  double s = 0.0;
  for (const auto& v : g) s += v;
  return s;
}

inline double mean(const RealGrid& g) { return g.empty() ? 0.0 : sum(g) / static_cast<double>(g.size()); }

}  // namespace fovholo
