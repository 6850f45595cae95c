#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>

#include "firelabel/grid.hpp"

namespace firelabel {

// Clip range and the "treat with caution" level for radiometric temperatures.
// The defaults follow the M30T saturation point (500 degC) and the M2EA one
// (450 degC).
struct CalibrationPolicy {
  double clip_min = 0.0;
  double clip_max = 500.0;
  double caution_threshold = 450.0;

  void validate() const {
    if (!(std::isfinite(clip_min) && std::isfinite(clip_max) && std::isfinite(caution_threshold)))
      throw ValidationError("calibration policy values must be finite");
    if (!(clip_min < caution_threshold && caution_threshold <= clip_max))
      throw ValidationError("calibration policy requires clip_min < caution <= clip_max");
  }
};

struct SaturationStats {
  std::size_t pixels_above_caution = 0;
  std::size_t pixels_at_or_above_clip_max = 0;
  double fraction_caution = 0.0;
};

inline constexpr std::size_t kHistogramBins = 256;

struct GridStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  std::array<std::size_t, kHistogramBins> histogram{};
};

/// Clamp every temperature into [clip_min, clip_max].
inline TemperatureGrid calibrate(const TemperatureGrid& grid, const CalibrationPolicy& policy) {
  policy.validate();
  TemperatureGrid out = grid;
  for (auto& v : out) v = std::clamp(v, policy.clip_min, policy.clip_max);
  return out;
}

// Computed on the raw (unclipped) grid; after calibration nothing exceeds clip_max.
inline SaturationStats saturation_report(const TemperatureGrid& grid, const CalibrationPolicy& policy) {
  policy.validate();
  SaturationStats s;
  for (double v : grid) {
    if (v > policy.caution_threshold) ++s.pixels_above_caution;
    if (v >= policy.clip_max) ++s.pixels_at_or_above_clip_max;
  }
  s.fraction_caution = static_cast<double>(s.pixels_above_caution) / static_cast<double>(grid.size());
  return s;
}

// Bin b covers [lo + b*w, lo + (b+1)*w); the last bin is closed on the right.
// Values outside [lo, hi] land in the first or last bin.
inline std::size_t histogram_bin(double v, double lo, double hi) {
  const double scaled = (v - lo) / (hi - lo) * static_cast<double>(kHistogramBins);
  if (!(scaled > 0.0)) return 0;
  if (scaled >= static_cast<double>(kHistogramBins)) return kHistogramBins - 1;
  return static_cast<std::size_t>(scaled);
}

inline GridStats grid_stats(const TemperatureGrid& grid, const CalibrationPolicy& policy) {
  policy.validate();
  GridStats s;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (double v : grid) {
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
    sum += v;
    ++s.histogram[histogram_bin(v, policy.clip_min, policy.clip_max)];
  }
  s.mean = sum / static_cast<double>(grid.size());
  return s;
}

}  // namespace firelabel
