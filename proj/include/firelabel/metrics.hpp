#pragma once

#include <cmath>
#include <vector>

#include "firelabel/cv_kernels.hpp"

namespace firelabel {

struct SegScores {
  double iou_background = 0.0;
  double iou_fire = 0.0;
  double miou = 0.0;
  double acc_background = 0.0;
  double acc_fire = 0.0;
  double macc = 0.0;
};

struct TempAccuracy {
  double tolerance = 0.0;
  double fraction_within = 0.0;
  std::size_t pixels_evaluated = 0;
};

inline BinaryMask complement(const BinaryMask& m) {
  BinaryMask out(m.width(), m.height());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] ? 0 : 1;
  return out;
}

/// Per-class IoU and per-class accuracy (recall). A class absent from gt has
/// accuracy 1.
inline SegScores seg_scores(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_shape(pred, gt, "seg_scores");
  SegScores s;
  s.iou_fire = iou(pred, gt);
  s.iou_background = iou(complement(pred), complement(gt));
  std::size_t gt_fire = 0, gt_bg = 0, hit_fire = 0, hit_bg = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i]) {
      ++gt_fire;
      hit_fire += pred[i] != 0;
    } else {
      ++gt_bg;
      hit_bg += pred[i] == 0;
    }
  }
  s.acc_fire = gt_fire == 0 ? 1.0 : static_cast<double>(hit_fire) / static_cast<double>(gt_fire);
  s.acc_background = gt_bg == 0 ? 1.0 : static_cast<double>(hit_bg) / static_cast<double>(gt_bg);
  s.miou = (s.iou_background + s.iou_fire) / 2.0;
  s.macc = (s.acc_background + s.acc_fire) / 2.0;
  return s;
}

/// Fraction of region pixels with |pred - gt| <= tol.
inline TempAccuracy temp_tolerance_accuracy(const TemperatureGrid& pred, const TemperatureGrid& gt,
                                            const BinaryMask& region, double tol) {
  require_same_shape(pred, gt, "temp_tolerance_accuracy");
  require_same_shape(pred, region, "temp_tolerance_accuracy");
  if (!(tol >= 0.0)) throw ValidationError("tolerance must be >= 0");
  TempAccuracy a;
  a.tolerance = tol;
  std::size_t within = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!region[i]) continue;
    ++a.pixels_evaluated;
    within += std::abs(pred[i] - gt[i]) <= tol;
  }
  if (a.pixels_evaluated > 0) a.fraction_within = static_cast<double>(within) / static_cast<double>(a.pixels_evaluated);
  return a;
}

namespace detail {
inline void check_batch(std::size_t n, std::size_t batch_size) {
  if (n == 0) throw ValidationError("batch_aggregate needs a nonempty list");
  if (batch_size == 0) throw ValidationError("batch_size must be >= 1");
}
}  // namespace detail

/// Unweighted mean of consecutive batch means; the last batch may be partial.
inline SegScores batch_aggregate(const std::vector<SegScores>& items, std::size_t batch_size) {
  detail::check_batch(items.size(), batch_size);
  SegScores agg;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < items.size(); start += batch_size) {
    const std::size_t end = std::min(items.size(), start + batch_size);
    SegScores m;
    for (std::size_t i = start; i < end; ++i) {
      m.iou_background += items[i].iou_background;
      m.iou_fire += items[i].iou_fire;
      m.miou += items[i].miou;
      m.acc_background += items[i].acc_background;
      m.acc_fire += items[i].acc_fire;
      m.macc += items[i].macc;
    }
    const double n = static_cast<double>(end - start);
    agg.iou_background += m.iou_background / n;
    agg.iou_fire += m.iou_fire / n;
    agg.miou += m.miou / n;
    agg.acc_background += m.acc_background / n;
    agg.acc_fire += m.acc_fire / n;
    agg.macc += m.macc / n;
    ++batches;
  }
  const double b = static_cast<double>(batches);
  agg.iou_background /= b;
  agg.iou_fire /= b;
  agg.miou /= b;
  agg.acc_background /= b;
  agg.acc_fire /= b;
  agg.macc /= b;
  return agg;
}

// Entries with an empty region are left out of their batch mean; a batch with
// no usable entries is skipped. pixels_evaluated sums over all entries.
inline TempAccuracy batch_aggregate(const std::vector<TempAccuracy>& items, std::size_t batch_size) {
  detail::check_batch(items.size(), batch_size);
  TempAccuracy agg;
  agg.tolerance = items.front().tolerance;
  double sum_of_means = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < items.size(); start += batch_size) {
    const std::size_t end = std::min(items.size(), start + batch_size);
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t i = start; i < end; ++i) {
      agg.pixels_evaluated += items[i].pixels_evaluated;
      if (items[i].pixels_evaluated == 0) continue;
      sum += items[i].fraction_within;
      ++used;
    }
    if (used == 0) continue;
    sum_of_means += sum / static_cast<double>(used);
    ++batches;
  }
  agg.fraction_within = batches == 0 ? 0.0 : sum_of_means / static_cast<double>(batches);
  return agg;
}

}  // namespace firelabel
