#pragma once

// Server-side visualizations: jet-colormapped temperature and mask boundary
// overlays.

#include <array>
#include <cmath>

#include "firelabel/cv_kernels.hpp"
#include "firelabel/grid.hpp"
#include "firelabel/radiometric.hpp"

namespace firelabel {

using Rgb = std::array<std::uint8_t, 3>;

// Piecewise-linear jet: channel c(x) = clamp(1.5 - |4x - k|) with k = 3, 2, 1
// for red, green, blue.
inline const std::array<Rgb, 256>& jet_lut() {
  static const auto lut = [] {
    std::array<Rgb, 256> t{};
    auto channel = [](double x, double k) {
      const double v = std::clamp(1.5 - std::abs(4.0 * x - k), 0.0, 1.0);
      return static_cast<std::uint8_t>(std::lround(255.0 * v));
    };
    for (std::size_t i = 0; i < 256; ++i) {
      const double x = static_cast<double>(i) / 255.0;
      t[i] = {channel(x, 3.0), channel(x, 2.0), channel(x, 1.0)};
    }
    return t;
  }();
  return lut;
}

/// Temperatures mapped linearly over [clip_min, clip_max] onto the jet table.
inline Image8 render_jet(const TemperatureGrid& grid, const CalibrationPolicy& policy = {}) {
  Image8 img = make_image(grid.width(), grid.height(), 3);
  const auto& lut = jet_lut();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = (std::clamp(grid[i], policy.clip_min, policy.clip_max) - policy.clip_min) /
                     (policy.clip_max - policy.clip_min);
    const auto& c = lut[static_cast<std::size_t>(std::lround(x * 255.0))];
    std::copy(c.begin(), c.end(), img.data.begin() + static_cast<std::ptrdiff_t>(3 * i));
  }
  return img;
}

inline Image8 to_rgb(const Image8& img) {
  if (img.channels == 3) return img;
  Image8 out = make_image(img.width, img.height, 3);
  for (std::size_t i = 0; i < img.width * img.height; ++i)
    out.data[3 * i] = out.data[3 * i + 1] = out.data[3 * i + 2] = img.data[i];
  return out;
}

/// Outer boundary of a mask: dilate(mask) minus mask.
inline BinaryMask mask_boundary(const BinaryMask& mask) {
  auto d = dilate3x3(mask);
  for (std::size_t i = 0; i < d.size(); ++i)
    if (mask[i]) d[i] = 0;
  return d;
}

inline constexpr Rgb kOverlayColor{0, 255, 0};

// Nearest-neighbour resampling, for drawing a thermal-resolution mask over a
// larger RGB frame.
inline BinaryMask resize_nearest(const BinaryMask& mask, std::size_t width, std::size_t height) {
  if (mask.width() == width && mask.height() == height) return mask;
  BinaryMask out(width, height);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      out(x, y) = mask(x * mask.width() / width, y * mask.height() / height);
  return out;
}

/// Paint the mask boundary over a copy of the base image. The mask is
/// resampled when the base image has a different resolution.
inline Image8 overlay_boundary(const Image8& base, const BinaryMask& mask, Rgb color = kOverlayColor) {
  Image8 out = to_rgb(base);
  const auto edge = mask_boundary(resize_nearest(mask, base.width, base.height));
  for (std::size_t i = 0; i < edge.size(); ++i)
    if (edge[i]) std::copy(color.begin(), color.end(), out.data.begin() + static_cast<std::ptrdiff_t>(3 * i));
  return out;
}

}  // namespace firelabel
