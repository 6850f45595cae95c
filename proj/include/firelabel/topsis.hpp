#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "firelabel/cv_kernels.hpp"
#include "firelabel/proposer.hpp"
#include "firelabel/radiometric.hpp"

namespace firelabel {

enum class Direction { benefit, cost };

struct CriterionSpec {
  std::string name;
  Direction direction = Direction::benefit;
  double weight = 1.0;
};

// Alternatives are rows, criteria columns.
struct DecisionMatrix {
  std::size_t alternatives = 0;
  std::vector<CriterionSpec> specs;
  std::vector<double> values;  // row-major, alternatives x specs.size()

  std::size_t criteria() const noexcept { return specs.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i * specs.size() + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * specs.size() + j]; }
};

struct TopsisResult {
  std::vector<double> closeness;
  std::size_t chosen_index = 0;
};

/// The five mask-selection criteria, in matrix column order.
inline std::vector<CriterionSpec> default_mask_criteria() {
  return {
      {"iou_otsu", Direction::benefit, 0.15},
      {"iou_thermal", Direction::benefit, 0.40},
      {"mean_temp_diff", Direction::cost, 0.15},
      {"confidence", Direction::benefit, 0.15},
      {"ssim_otsu", Direction::benefit, 0.15},
  };
}

/// Rank alternatives by relative closeness to the ideal point.
inline TopsisResult topsis_rank(const DecisionMatrix& m) {
  const std::size_t rows = m.alternatives, cols = m.criteria();
  if (rows == 0 || cols == 0 || m.values.size() != rows * cols) throw ValidationError("topsis: empty or ragged matrix");
  double weight_sum = 0.0;
  for (const auto& s : m.specs) {
    if (!(s.weight > 0.0)) throw ValidationError("topsis: weights must be > 0");
    weight_sum += s.weight;
  }
  for (double v : m.values)
    if (std::isnan(v)) throw ValidationError("topsis: NaN in decision matrix");

  std::vector<double> weighted(rows * cols, 0.0);
  for (std::size_t j = 0; j < cols; ++j) {
    double norm = 0.0;
    for (std::size_t i = 0; i < rows; ++i) norm += m.at(i, j) * m.at(i, j);
    norm = std::sqrt(norm);
    const double w = m.specs[j].weight / weight_sum;
    for (std::size_t i = 0; i < rows; ++i) weighted[i * cols + j] = norm == 0.0 ? 0.0 : m.at(i, j) / norm * w;
  }

  std::vector<double> ideal(cols), anti(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    double lo = weighted[j], hi = weighted[j];
    for (std::size_t i = 1; i < rows; ++i) {
      lo = std::min(lo, weighted[i * cols + j]);
      hi = std::max(hi, weighted[i * cols + j]);
    }
    const bool benefit = m.specs[j].direction == Direction::benefit;
    ideal[j] = benefit ? hi : lo;
    anti[j] = benefit ? lo : hi;
  }

  TopsisResult r;
  r.closeness.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    double dp = 0.0, dm = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double v = weighted[i * cols + j];
      dp += (v - ideal[j]) * (v - ideal[j]);
      dm += (v - anti[j]) * (v - anti[j]);
    }
    dp = std::sqrt(dp);
    dm = std::sqrt(dm);
    r.closeness[i] = (dp + dm) == 0.0 ? 0.0 : dm / (dp + dm);
  }
  for (std::size_t i = 1; i < rows; ++i)
    if (r.closeness[i] > r.closeness[r.chosen_index]) r.chosen_index = i;
  return r;
}

/// One row per proposal: IoU vs the TIFF Otsu mask, IoU vs the thresholded
/// thermal image, |mean T under proposal - mean T under Otsu mask|,
/// confidence, SSIM vs the Otsu mask. Empty proposals get clip_max as the
/// temperature difference.
inline DecisionMatrix build_criteria(const ProposalSet& proposals, const BinaryMask& otsu_mask,
                                     const BinaryMask& thermal_thresh_mask, const TemperatureGrid& tiff,
                                     std::vector<CriterionSpec> specs = default_mask_criteria(),
                                     const CalibrationPolicy& policy = {}) {
  if (specs.size() != 5) throw ValidationError("mask selection uses exactly five criteria");
  require_same_shape(otsu_mask, thermal_thresh_mask, "build_criteria");
  require_same_shape(tiff, otsu_mask, "build_criteria");
  for (const auto& p : proposals.proposals) require_same_shape(p.mask, otsu_mask, "build_criteria");

  DecisionMatrix m;
  m.alternatives = kProposalCount;
  m.specs = std::move(specs);
  m.values.resize(kProposalCount * 5);
  const auto otsu_mean = masked_mean(tiff, otsu_mask);
  for (std::size_t k = 0; k < kProposalCount; ++k) {
    const auto& mask = proposals.proposals[k].mask;
    const auto mean = masked_mean(tiff, mask);
    m.at(k, 0) = iou(otsu_mask, mask);
    m.at(k, 1) = iou(thermal_thresh_mask, mask);
    m.at(k, 2) = mean && otsu_mean ? std::abs(*mean - *otsu_mean) : policy.clip_max;
    m.at(k, 3) = proposals.proposals[k].confidence;
    m.at(k, 4) = ssim(otsu_mask, mask);
  }
  return m;
}

struct Selection {
  BinaryMask mask;
  DecisionMatrix matrix;
  TopsisResult result;
};

inline Selection select_mask(const ProposalSet& proposals, const BinaryMask& otsu_mask,
                             const BinaryMask& thermal_thresh_mask, const TemperatureGrid& tiff,
                             std::vector<CriterionSpec> specs = default_mask_criteria(),
                             const CalibrationPolicy& policy = {}) {
  auto matrix = build_criteria(proposals, otsu_mask, thermal_thresh_mask, tiff, std::move(specs), policy);
  auto result = topsis_rank(matrix);
  return {proposals.proposals[result.chosen_index].mask, std::move(matrix), std::move(result)};
}

/// Selection report: {"criteria": [[5] x 3], "weights", "closeness", "chosen"}.
inline nlohmann::json selection_report(const Selection& sel) {
  nlohmann::json j;
  j["criteria"] = nlohmann::json::array();
  for (std::size_t i = 0; i < sel.matrix.alternatives; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t c = 0; c < sel.matrix.criteria(); ++c) row.push_back(sel.matrix.at(i, c));
    j["criteria"].push_back(row);
  }
  j["criterion_names"] = nlohmann::json::array();
  j["weights"] = nlohmann::json::array();
  for (const auto& s : sel.matrix.specs) {
    j["criterion_names"].push_back(s.name);
    j["weights"].push_back(s.weight);
  }
  j["closeness"] = sel.result.closeness;
  j["chosen"] = sel.result.chosen_index;
  return j;
}

}  // namespace firelabel
