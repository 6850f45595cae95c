#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "firelabel/cv_kernels.hpp"
#include "firelabel/grid.hpp"
#include "firelabel/radiometric.hpp"

namespace firelabel {

enum class PointLabel { negative = 0, positive = 1 };

struct AutopointConfig {
  std::size_t pos_patch = 5;
  std::size_t neg_patch = 3;
  double epsilon = 25.0;  // dead zone around tau, degC
  double canny_high = 200.0;
  double canny_sigma = 1.0;
  double d_max = 20.0;
  std::size_t max_positive = 10;
  std::size_t max_negative = 10;

  void validate() const {
    auto odd = [](std::size_t p) { return p >= 3 && p % 2 == 1; };
    if (!odd(pos_patch) || !odd(neg_patch)) throw ValidationError("patch sizes must be odd and >= 3");
    if (!(epsilon >= 0.0)) throw ValidationError("epsilon must be >= 0");
    if (!(d_max > 0.0)) throw ValidationError("d_max must be > 0");
    if (!(canny_sigma > 0.0)) throw ValidationError("canny sigma must be > 0");
    if (!(canny_high >= 0.0)) throw ValidationError("canny high threshold must be >= 0");
    if (max_positive < 1 || max_negative < 1) throw ValidationError("point caps must be >= 1");
  }
};

struct PointPrompt {
  std::size_t x = 0;  // column
  std::size_t y = 0;  // row
  PointLabel label = PointLabel::positive;
  double patch_mean = 0.0;
  double edge_distance = 0.0;

  friend bool operator==(const PointPrompt&, const PointPrompt&) = default;
};

struct PointSet {
  std::vector<PointPrompt> positives;
  std::vector<PointPrompt> negatives;
  double tau = 0.0;
  std::size_t edge_pixels = 0;

  bool empty() const noexcept { return positives.empty() && negatives.empty(); }
  friend bool operator==(const PointSet&, const PointSet&) = default;
};

struct PatchCandidates {
  std::vector<PointPrompt> positives;
  std::vector<PointPrompt> negatives;
};

namespace detail {

inline void scan_tiles(const TemperatureGrid& grid, std::size_t patch, PointLabel label, double tau, double epsilon,
                       std::vector<PointPrompt>& out) {
  const double area = static_cast<double>(patch * patch);
  for (std::size_t oy = 0; oy + patch <= grid.height(); oy += patch) {
    for (std::size_t ox = 0; ox + patch <= grid.width(); ox += patch) {
      double sum = 0.0;
      for (std::size_t y = oy; y < oy + patch; ++y)
        for (std::size_t x = ox; x < ox + patch; ++x) sum += grid(x, y);
      const double mean = sum / area;
      const bool keep = label == PointLabel::positive ? mean >= tau + epsilon : mean <= tau - epsilon;
      if (keep) out.push_back({ox + patch / 2, oy + patch / 2, label, mean, 0.0});
    }
  }
}

}  // namespace detail

/// Tile the grid with non-overlapping windows (partial border windows are
/// dropped); positives and negatives use independent tilings.
inline PatchCandidates scan_patches(const TemperatureGrid& grid, double tau, const AutopointConfig& config) {
  config.validate();
  if (grid.width() < config.pos_patch || grid.height() < config.pos_patch || grid.width() < config.neg_patch ||
      grid.height() < config.neg_patch)
    throw ValidationError("grid smaller than patch size");
  PatchCandidates c;
  detail::scan_tiles(grid, config.pos_patch, PointLabel::positive, tau, config.epsilon, c.positives);
  detail::scan_tiles(grid, config.neg_patch, PointLabel::negative, tau, config.epsilon, c.negatives);
  return c;
}

namespace detail {

inline std::vector<PointPrompt> nearest_within(std::vector<PointPrompt> points, const DistanceField& field,
                                               double d_max, std::size_t cap) {
  std::vector<PointPrompt> kept;
  for (auto p : points) {
    p.edge_distance = field(p.x, p.y);
    if (p.edge_distance <= d_max) kept.push_back(p);
  }
  auto row_major = [](const PointPrompt& a, const PointPrompt& b) { return std::tie(a.y, a.x) < std::tie(b.y, b.x); };
  if (kept.size() > cap) {
    std::sort(kept.begin(), kept.end(), [&](const PointPrompt& a, const PointPrompt& b) {
      if (a.edge_distance != b.edge_distance) return a.edge_distance < b.edge_distance;
      return row_major(a, b);
    });
    kept.resize(cap);
  }
  std::sort(kept.begin(), kept.end(), row_major);
  return kept;
}

}  // namespace detail

/// Keep candidates within d_max of an edge, then the cap-many nearest per
/// label (ties in row-major order). Output is in row-major order.
inline PatchCandidates filter_by_edges(const PatchCandidates& candidates, const DistanceField& field,
                                       const AutopointConfig& config) {
  return {detail::nearest_within(candidates.positives, field, config.d_max, config.max_positive),
          detail::nearest_within(candidates.negatives, field, config.d_max, config.max_negative)};
}

/// Full locator on a calibrated grid. nullopt means a no-fire frame (Otsu
/// found no split).
inline std::optional<PointSet> autolocate(const TemperatureGrid& grid, const AutopointConfig& config,
                                          const CalibrationPolicy& policy = {}) {
  config.validate();
  OtsuResult otsu;
  try {
    otsu = otsu_threshold(grid, policy);
  } catch (const ValidationError&) {
    return std::nullopt;
  }
  // tau above the strong threshold would invert the hysteresis band.
  const double low = std::min(otsu.tau, config.canny_high);
  const auto edges = canny(grid, low, config.canny_high, config.canny_sigma);
  const auto field = euclidean_distance_transform(edges);
  const auto candidates = scan_patches(grid, otsu.tau, config);
  auto kept = filter_by_edges(candidates, field, config);

  PointSet set;
  set.positives = std::move(kept.positives);
  set.negatives = std::move(kept.negatives);
  set.tau = otsu.tau;
  set.edge_pixels = static_cast<std::size_t>(std::count(edges.begin(), edges.end(), std::uint8_t{1}));
  return set;
}

// ---- JSON: coordinates are (column, row), origin top-left ----

inline nlohmann::json point_to_json(const PointPrompt& p) {
  return {{"x", p.x}, {"y", p.y}, {"mean", p.patch_mean}, {"dist", p.edge_distance}};
}

inline nlohmann::json to_json(const PointSet& set) {
  nlohmann::json j;
  j["tau"] = set.tau;
  j["edge_pixels"] = set.edge_pixels;
  j["positives"] = nlohmann::json::array();
  j["negatives"] = nlohmann::json::array();
  for (const auto& p : set.positives) j["positives"].push_back(point_to_json(p));
  for (const auto& p : set.negatives) j["negatives"].push_back(point_to_json(p));
  return j;
}

// A no-fire frame serializes with tau = null and empty lists.
inline nlohmann::json no_fire_points_json() {
  return {{"tau", nullptr}, {"edge_pixels", 0}, {"positives", nlohmann::json::array()},
          {"negatives", nlohmann::json::array()}};
}

inline std::optional<PointSet> point_set_from_json(const nlohmann::json& j) {
  try {
    if (j.at("tau").is_null()) return std::nullopt;
    PointSet set;
    set.tau = j.at("tau").get<double>();
    set.edge_pixels = j.value("edge_pixels", std::size_t{0});
    auto read = [](const nlohmann::json& arr, PointLabel label, std::vector<PointPrompt>& out) {
      for (const auto& e : arr)
        out.push_back({e.at("x").get<std::size_t>(), e.at("y").get<std::size_t>(), label,
                       e.value("mean", 0.0), e.value("dist", 0.0)});
    };
    read(j.at("positives"), PointLabel::positive, set.positives);
    read(j.at("negatives"), PointLabel::negative, set.negatives);
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed point set JSON: ") + e.what());
  }
}

}  // namespace firelabel
