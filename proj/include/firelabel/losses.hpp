#pragma once

// Reference implementations of the segmentation and temperature losses used
// to train the teacher and student networks. They return scalars only and
// are meant as regression oracles for external training code.

#include <algorithm>
#include <cmath>

#include "firelabel/grid.hpp"

namespace firelabel {

struct LossWeights {
  double lambda_dice = 0.5;
  double lambda_student_dice = 0.5;
  double lambda_flame_l1 = 1.0;

  void validate() const {
    if (lambda_dice < 0.0 || lambda_student_dice < 0.0 || lambda_flame_l1 < 0.0)
      throw ValidationError("loss weights must be >= 0");
  }
};

inline constexpr double kProbEpsilon = 1e-7;

/// Pixel-mean binary cross-entropy on p_fire, probabilities clamped to
/// [1e-7, 1 - 1e-7].
inline double cross_entropy(const ProbMap& pred, const BinaryMask& target) {
  require_same_shape(pred, target, "cross_entropy");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(pred[i], kProbEpsilon, 1.0 - kProbEpsilon);
    sum += target[i] ? -std::log(p) : -std::log(1.0 - p);
  }
  return sum / static_cast<double>(pred.size());
}

/// 1 - (2 sum(p t) + smooth) / (sum p + sum t + smooth).
inline double dice_loss(const ProbMap& pred, const BinaryMask& target, double smooth = 1.0) {
  require_same_shape(pred, target, "dice_loss");
  double inter = 0.0, sp = 0.0, st = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double t = target[i] ? 1.0 : 0.0;
    inter += pred[i] * t;
    sp += pred[i];
    st += t;
  }
  return 1.0 - (2.0 * inter + smooth) / (sp + st + smooth);
}

inline double teacher_loss(double ce, double dice, const LossWeights& w) { return ce + w.lambda_dice * dice; }

inline double teacher_loss(const ProbMap& pred, const BinaryMask& target, const LossWeights& w = {}) {
  w.validate();
  return teacher_loss(cross_entropy(pred, target), dice_loss(pred, target), w);
}

/// Mean |pred - gt| over fire pixels; 0 when the mask is empty.
inline double flame_l1(const TemperatureGrid& pred, const TemperatureGrid& gt, const BinaryMask& fire) {
  require_same_shape(pred, gt, "flame_l1");
  require_same_shape(pred, fire, "flame_l1");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (fire[i]) {
      sum += std::abs(pred[i] - gt[i]);
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

inline double student_total(double ce, double dice, double fl1, const LossWeights& w) {
  return ce + w.lambda_student_dice * dice + w.lambda_flame_l1 * fl1;
}

inline double sigmoid(double z) {
  // Split on sign so exp never overflows.
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// t_max * sigmoid(z) per pixel.
inline TemperatureGrid scale_temperature(const TempLogits& z, double t_max = 500.0) {
  TemperatureGrid out(z.width(), z.height());
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!std::isfinite(z[i])) throw ValidationError("scale_temperature: non-finite logit");
    out[i] = t_max * sigmoid(z[i]);
  }
  return out;
}

}  // namespace firelabel
