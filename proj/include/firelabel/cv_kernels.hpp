#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "firelabel/grid.hpp"
#include "firelabel/radiometric.hpp"

namespace firelabel {

struct OtsuResult {
  double tau = 0.0;                     // threshold in the input's units
  double between_class_variance = 0.0;  // in squared input units
  std::size_t bin_index = 0;            // class 0 = bins [0, bin_index]
};

/// Otsu's threshold over 256 equal bins spanning [lo, hi]. Candidate splits
/// sit on bin boundaries; ties resolve to the lowest bin. Throws when fewer
/// than two bins are occupied.
inline OtsuResult otsu_threshold(std::span<const double> values, double lo, double hi) {
  if (values.size() < 2) throw ValidationError("otsu_threshold needs at least 2 samples");
  if (!(hi > lo)) throw ValidationError("otsu_threshold needs hi > lo");

  std::array<std::size_t, kHistogramBins> hist{};
  for (double v : values) ++hist[histogram_bin(v, lo, hi)];

  const double width = (hi - lo) / static_cast<double>(kHistogramBins);
  auto center = [&](std::size_t b) { return lo + (static_cast<double>(b) + 0.5) * width; };

  const double total = static_cast<double>(values.size());
  double total_sum = 0.0;
  for (std::size_t b = 0; b < kHistogramBins; ++b) total_sum += static_cast<double>(hist[b]) * center(b);

  double n0 = 0.0, sum0 = 0.0;
  double best = -1.0;
  std::size_t best_bin = 0;
  for (std::size_t t = 0; t + 1 < kHistogramBins; ++t) {
    n0 += static_cast<double>(hist[t]);
    sum0 += static_cast<double>(hist[t]) * center(t);
    const double n1 = total - n0;
    if (n0 == 0.0 || n1 == 0.0) continue;
    const double w0 = n0 / total, w1 = n1 / total;
    const double diff = sum0 / n0 - (total_sum - sum0) / n1;
    const double var = w0 * w1 * diff * diff;
    if (var > best) {
      best = var;
      best_bin = t;
    }
  }
  if (best < 0.0) throw ValidationError("degenerate histogram: no valid Otsu split");
  return {lo + static_cast<double>(best_bin + 1) * width, best, best_bin};
}

inline OtsuResult otsu_threshold(const TemperatureGrid& grid, const CalibrationPolicy& policy) {
  return otsu_threshold(grid.values(), policy.clip_min, policy.clip_max);
}

inline OtsuResult otsu_threshold(const GrayImage& gray) {
  std::vector<double> values(gray.begin(), gray.end());
  return otsu_threshold(values, 0.0, 255.0);
}

/// 1 where value >= threshold.
template <typename T, typename Tag>
BinaryMask binarize(const Grid<T, Tag>& input, double threshold) {
  BinaryMask out(input.width(), input.height());
  for (std::size_t i = 0; i < input.size(); ++i)
    out[i] = static_cast<double>(input[i]) >= threshold ? 1 : 0;
  return out;
}

inline std::vector<double> gaussian_kernel(double sigma) {
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double w = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (auto& w : k) w /= sum;
  return k;
}

/// Separable Gaussian with radius ceil(3 sigma), borders replicated.
template <typename Tag>
Grid<double, Tag> gaussian_blur(const Grid<double, Tag>& grid, double sigma) {
  if (!(sigma > 0.0)) throw ValidationError("gaussian_blur needs sigma > 0");
  const auto kernel = gaussian_kernel(sigma);
  const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  const auto w = static_cast<std::ptrdiff_t>(grid.width());
  const auto h = static_cast<std::ptrdiff_t>(grid.height());

  Grid<double, Tag> tmp(grid.width(), grid.height());
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        const auto xx = std::clamp<std::ptrdiff_t>(x + k, 0, w - 1);
        acc += kernel[static_cast<std::size_t>(k + radius)] * grid(xx, y);
      }
      tmp(x, y) = acc;
    }
  }
  Grid<double, Tag> out(grid.width(), grid.height());
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        const auto yy = std::clamp<std::ptrdiff_t>(y + k, 0, h - 1);
        acc += kernel[static_cast<std::size_t>(k + radius)] * tmp(x, yy);
      }
      out(x, y) = acc;
    }
  }
  return out;
}

struct Gradients {
  std::vector<double> gx, gy, magnitude;
};

// Unnormalized 3x3 Sobel with replicated borders.
template <typename Tag>
Gradients sobel(const Grid<double, Tag>& g) {
  const auto w = static_cast<std::ptrdiff_t>(g.width());
  const auto h = static_cast<std::ptrdiff_t>(g.height());
  auto at = [&](std::ptrdiff_t x, std::ptrdiff_t y) {
    return g(std::clamp<std::ptrdiff_t>(x, 0, w - 1), std::clamp<std::ptrdiff_t>(y, 0, h - 1));
  };
  Gradients out;
  out.gx.resize(g.size());
  out.gy.resize(g.size());
  out.magnitude.resize(g.size());
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      const double gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
      const double gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
      const auto i = static_cast<std::size_t>(y * w + x);
      out.gx[i] = gx;
      out.gy[i] = gy;
      out.magnitude[i] = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

/// Canny on a temperature grid. Thresholds are Sobel gradient magnitudes in
/// degC per pixel (unnormalized kernel, so a clean step of height H peaks near
/// 4H times the blurred slope).
inline EdgeMap canny(const TemperatureGrid& grid, double low, double high, double sigma) {
  if (low < 0.0 || low > high) throw ValidationError("canny needs 0 <= low <= high");
  const auto blurred = gaussian_blur(grid, sigma);
  const auto grad = sobel(blurred);
  const auto w = static_cast<std::ptrdiff_t>(grid.width());
  const auto h = static_cast<std::ptrdiff_t>(grid.height());
  auto mag = [&](std::ptrdiff_t x, std::ptrdiff_t y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0.0;
    return grad.magnitude[static_cast<std::size_t>(y * w + x)];
  };

  constexpr double tan22 = 0.41421356237309503;  // tan(22.5 deg)
  constexpr double tan67 = 2.4142135623730949;   // tan(67.5 deg)

  // 0 = suppressed, 1 = weak, 2 = strong
  std::vector<std::uint8_t> state(grid.size(), 0);
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      const auto i = static_cast<std::size_t>(y * w + x);
      const double m = grad.magnitude[i];
      if (m <= 0.0 || m < low) continue;
      const double gx = grad.gx[i], gy = grad.gy[i];
      const double ax = std::abs(gx), ay = std::abs(gy);
      std::ptrdiff_t dx, dy;
      if (ay < tan22 * ax) {
        dx = 1, dy = 0;
      } else if (ay >= tan67 * ax) {
        dx = 0, dy = 1;
      } else if ((gx > 0) == (gy > 0)) {
        dx = 1, dy = 1;
      } else {
        dx = -1, dy = 1;
      }
      if (m > mag(x - dx, y - dy) && m >= mag(x + dx, y + dy)) state[i] = m >= high ? 2 : 1;
    }
  }

  EdgeMap edges(grid.width(), grid.height());
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (state[i] == 2) {
      edges[i] = 1;
      stack.push_back(i);
    }
  }
  while (!stack.empty()) {
    const auto i = stack.back();
    stack.pop_back();
    const auto x = static_cast<std::ptrdiff_t>(i) % w, y = static_cast<std::ptrdiff_t>(i) / w;
    for (std::ptrdiff_t ny = y - 1; ny <= y + 1; ++ny) {
      for (std::ptrdiff_t nx = x - 1; nx <= x + 1; ++nx) {
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const auto j = static_cast<std::size_t>(ny * w + nx);
        if (state[j] == 1 && !edges[j]) {
          edges[j] = 1;
          stack.push_back(j);
        }
      }
    }
  }
  return edges;
}

/// Returned for every pixel when the edge map is empty.
inline constexpr double kNoEdgeDistance = std::numeric_limits<double>::infinity();

namespace detail {

// Lower envelope of parabolas; f and d are squared distances.
inline void distance_transform_1d(std::span<const double> f, std::span<double> d, std::vector<std::size_t>& v,
                                  std::vector<double>& z) {
  const std::size_t n = f.size();
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  std::size_t k = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  auto intersect = [&](std::size_t q, std::size_t p) {
    const auto qd = static_cast<double>(q), pd = static_cast<double>(p);
    return ((f[q] + qd * qd) - (f[p] + pd * pd)) / (2.0 * qd - 2.0 * pd);
  };
  for (std::size_t q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[k + 1] < static_cast<double>(q)) ++k;
    const double diff = static_cast<double>(q) - static_cast<double>(v[k]);
    d[q] = diff * diff + f[v[k]];
  }
}

}  // namespace detail

/// Exact Euclidean distance transform (separable lower-envelope method).
inline DistanceField euclidean_distance_transform(const EdgeMap& edges) {
  constexpr double far = 1e20;
  const std::size_t w = edges.width(), h = edges.height();
  std::vector<double> sq(edges.size());
  bool any = false;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    sq[i] = edges[i] ? 0.0 : far;
    any = any || edges[i];
  }
  DistanceField out(w, h, kNoEdgeDistance);
  if (!any) return out;

  std::vector<std::size_t> v;
  std::vector<double> z;
  std::vector<double> f(h), d(h);
  for (std::size_t x = 0; x < w; ++x) {
    for (std::size_t y = 0; y < h; ++y) f[y] = sq[y * w + x];
    detail::distance_transform_1d(f, d, v, z);
    for (std::size_t y = 0; y < h; ++y) sq[y * w + x] = d[y];
  }
  f.resize(w);
  d.resize(w);
  for (std::size_t y = 0; y < h; ++y) {
    std::copy_n(sq.begin() + static_cast<std::ptrdiff_t>(y * w), w, f.begin());
    detail::distance_transform_1d(f, d, v, z);
    for (std::size_t x = 0; x < w; ++x) out(x, y) = d[x] >= far / 2 ? kNoEdgeDistance : std::sqrt(d[x]);
  }
  return out;
}

/// |a and b| / |a or b|; two empty masks count as identical (1.0).
inline double iou(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b, "iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool pa = a[i] != 0, pb = b[i] != 0;
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline constexpr std::size_t kSsimWindow = 8;

namespace detail {

inline double ssim_plane(std::span<const double> a, std::span<const double> b, std::size_t w, std::size_t h) {
  if (w < kSsimWindow || h < kSsimWindow) throw ValidationError("ssim: image smaller than the 8x8 window");
  constexpr double L = 255.0;
  constexpr double c1 = (0.01 * L) * (0.01 * L);
  constexpr double c2 = (0.03 * L) * (0.03 * L);
  // Summed-area tables for x, y, x^2, y^2, xy.
  const std::size_t W = w + 1;
  std::vector<double> sa(W * (h + 1)), sb(sa.size()), saa(sa.size()), sbb(sa.size()), sab(sa.size());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double va = a[y * w + x], vb = b[y * w + x];
      const std::size_t i = (y + 1) * W + (x + 1), up = y * W + (x + 1), left = (y + 1) * W + x, diag = y * W + x;
      sa[i] = va + sa[up] + sa[left] - sa[diag];
      sb[i] = vb + sb[up] + sb[left] - sb[diag];
      saa[i] = va * va + saa[up] + saa[left] - saa[diag];
      sbb[i] = vb * vb + sbb[up] + sbb[left] - sbb[diag];
      sab[i] = va * vb + sab[up] + sab[left] - sab[diag];
    }
  }
  auto box = [&](const std::vector<double>& s, std::size_t x, std::size_t y) {
    const std::size_t x1 = x + kSsimWindow, y1 = y + kSsimWindow;
    return s[y1 * W + x1] - s[y * W + x1] - s[y1 * W + x] + s[y * W + x];
  };
  constexpr double n = static_cast<double>(kSsimWindow * kSsimWindow);
  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t y = 0; y + kSsimWindow <= h; ++y) {
    for (std::size_t x = 0; x + kSsimWindow <= w; ++x) {
      const double mx = box(sa, x, y) / n, my = box(sb, x, y) / n;
      const double vx = box(saa, x, y) / n - mx * mx;
      const double vy = box(sbb, x, y) / n - my * my;
      const double cxy = box(sab, x, y) / n - mx * my;
      total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

}  // namespace detail

/// Mean SSIM over all 8x8 windows (stride 1, no padding), L = 255.
/// Window variance and covariance are population (1/64) statistics.
inline double ssim(const GrayImage& a, const GrayImage& b) {
  require_same_shape(a, b, "ssim");
  std::vector<double> va(a.begin(), a.end()), vb(b.begin(), b.end());
  return detail::ssim_plane(va, vb, a.width(), a.height());
}

// Masks are compared as {0, 255} images.
inline double ssim(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b, "ssim");
  std::vector<double> va(a.size()), vb(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    va[i] = a[i] ? 255.0 : 0.0;
    vb[i] = b[i] ? 255.0 : 0.0;
  }
  return detail::ssim_plane(va, vb, a.width(), a.height());
}

/// Y = round(0.299 R + 0.587 G + 0.114 B). Single-channel input passes through.
inline GrayImage thermal_jpg_to_gray(const Image8& rgb) {
  GrayImage out(rgb.width, rgb.height);
  if (rgb.channels == 1) {
    std::copy(rgb.data.begin(), rgb.data.end(), out.begin());
    return out;
  }
  if (rgb.channels != 3) throw ValidationError("thermal_jpg_to_gray needs a 3-channel image");
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double y = 0.299 * rgb.data[3 * i] + 0.587 * rgb.data[3 * i + 1] + 0.114 * rgb.data[3 * i + 2];
    out[i] = static_cast<std::uint8_t>(std::clamp<long>(std::lround(y), 0, 255));
  }
  return out;
}

namespace detail {
template <bool Dilate>
BinaryMask morph3x3(const BinaryMask& m) {
  const auto w = static_cast<std::ptrdiff_t>(m.width()), h = static_cast<std::ptrdiff_t>(m.height());
  BinaryMask out(m.width(), m.height());
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      bool acc = !Dilate;
      for (std::ptrdiff_t ny = std::max<std::ptrdiff_t>(0, y - 1); ny <= std::min(h - 1, y + 1); ++ny)
        for (std::ptrdiff_t nx = std::max<std::ptrdiff_t>(0, x - 1); nx <= std::min(w - 1, x + 1); ++nx)
          acc = Dilate ? (acc || m(nx, ny)) : (acc && m(nx, ny));
      out(x, y) = acc ? 1 : 0;
    }
  }
  return out;
}
}  // namespace detail

// 3x3 morphology; only in-bounds neighbours take part.
inline BinaryMask erode3x3(const BinaryMask& m) { return detail::morph3x3<false>(m); }
inline BinaryMask dilate3x3(const BinaryMask& m) { return detail::morph3x3<true>(m); }

/// Mean temperature over mask pixels, or nullopt for an empty mask.
inline std::optional<double> masked_mean(const TemperatureGrid& grid, const BinaryMask& mask) {
  require_same_shape(grid, mask, "masked_mean");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (mask[i]) {
      sum += grid[i];
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace firelabel
