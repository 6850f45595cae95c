#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "firelabel/error.hpp"

namespace firelabel {

// Row-major 2-D raster. The Tag parameter keeps semantically different
// rasters (temperatures, masks, distances, ...) from mixing by accident.
template <typename T, typename Tag>
class Grid {
 public:
  using value_type = T;

  Grid() = default;

  Grid(std::size_t width, std::size_t height, T fill = T{})
      : width_(width), height_(height), values_(width * height, fill) {
    check_dims();
  }

  Grid(std::size_t width, std::size_t height, std::vector<T> values)
      : width_(width), height_(height), values_(std::move(values)) {
    check_dims();
    if (values_.size() != width_ * height_) {
      throw ValidationError("grid value count " + std::to_string(values_.size()) +
                            " does not match " + std::to_string(width_) + "x" +
                            std::to_string(height_));
    }
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  T& operator()(std::size_t x, std::size_t y) { return values_[y * width_ + x]; }
  const T& operator()(std::size_t x, std::size_t y) const { return values_[y * width_ + x]; }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  bool contains(long x, long y) const noexcept {
    return x >= 0 && y >= 0 && static_cast<std::size_t>(x) < width_ &&
           static_cast<std::size_t>(y) < height_;
  }

  std::span<const T> values() const noexcept { return values_; }
  std::span<T> values() noexcept { return values_; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  template <typename OtherT, typename OtherTag>
  bool same_shape(const Grid<OtherT, OtherTag>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  void check_dims() const {
    if (width_ == 0 || height_ == 0) throw ValidationError("grid dimensions must be positive");
  }

  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<T> values_;
};

struct TemperatureTag {};
struct GrayTag {};
struct MaskTag {};
struct EdgeTag {};
struct DistanceTag {};
struct ProbTag {};
struct LogitTag {};

/// Per-pixel temperature in degrees Celsius.
using TemperatureGrid = Grid<double, TemperatureTag>;
/// 8-bit intensity image.
using GrayImage = Grid<std::uint8_t, GrayTag>;
/// 0 = background, 1 = fire / foreground.
using BinaryMask = Grid<std::uint8_t, MaskTag>;
/// 1 = edge pixel.
using EdgeMap = Grid<std::uint8_t, EdgeTag>;
/// Euclidean distance (pixels) to the nearest edge pixel.
using DistanceField = Grid<double, DistanceTag>;
/// Fire probability per pixel; background probability is 1 - p.
using ProbMap = Grid<double, ProbTag>;
/// Unbounded pre-activation of a temperature head.
using TempLogits = Grid<double, LogitTag>;

// Interleaved 8-bit image with 1 or 3 channels.
struct Image8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> data;

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) {
    return data[(y * width + x) * channels + c];
  }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
    return data[(y * width + x) * channels + c];
  }

  friend bool operator==(const Image8&, const Image8&) = default;
};

inline Image8 make_image(std::size_t width, std::size_t height, std::size_t channels) {
  if (width == 0 || height == 0) throw ValidationError("image dimensions must be positive");
  if (channels != 1 && channels != 3) throw ValidationError("image must have 1 or 3 channels");
  return Image8{width, height, channels, std::vector<std::uint8_t>(width * height * channels, 0)};
}

inline std::size_t count_nonzero(const BinaryMask& mask) {
  std::size_t n = 0;
  for (auto v : mask) n += v != 0;
  return n;
}

template <typename A, typename ATag, typename B, typename BTag>
void require_same_shape(const Grid<A, ATag>& a, const Grid<B, BTag>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ValidationError(std::string(what) + ": dimension mismatch (" + std::to_string(a.width()) +
                          "x" + std::to_string(a.height()) + " vs " + std::to_string(b.width()) +
                          "x" + std::to_string(b.height()) + ")");
  }
}

}  // namespace firelabel
