#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "statvo/geometry.hpp"
#include "statvo/types.hpp"

namespace statvo {

// Statistics of the residuals of keypoints outside every mover box; these
// points are presumed static and calibrate the residual scale of the frame.
struct ResidualStats {
  double d_th = 0.0;   // quantile threshold
  double d_min = 0.0;  // smallest residual
  int n_t = 0;         // residuals strictly below d_th
  double sum_d = 0.0;  // sum of residuals strictly below d_th
};

// Threshold at the zero-based floor(quantile * N) rank of the ascending
// residuals. Empty input yields no stats; the caller then treats the
// constraint as uninformative (score 1, zero confidence).
inline std::optional<ResidualStats> adaptive_threshold(
    std::vector<double> residuals, double quantile) {
  if (residuals.empty()) return std::nullopt;
  std::sort(residuals.begin(), residuals.end());
  const auto rank = std::min(
      static_cast<std::size_t>(quantile * static_cast<double>(residuals.size())),
      residuals.size() - 1);
  ResidualStats stats;
  stats.d_th = residuals[rank];
  stats.d_min = residuals.front();
  for (const double d : residuals) {
    if (d < stats.d_th) {
      ++stats.n_t;
      stats.sum_d += d;
    }
  }
  return stats;
}

// Static probability of a residual: 0.5 at d_th, 1/(1+e^-5) at d_min, with
// the slope set by the spread d_th - d_min. A collapsed spread degenerates to
// a step at d_th.
inline double sigmoid_probability(double d, const ResidualStats& stats,
                                  double slope) {
  const double spread = stats.d_th - stats.d_min;
  if (spread <= 0.0) return d <= stats.d_th ? 1.0 : 0.0;
  return 1.0 / (1.0 + std::exp((d - stats.d_th) * slope / spread));
}

// Confidence from the inlier count of the last pose solve; 0.5 at half the
// reference count.
inline double statistical_confidence(double n_ba, double th_ba) {
  return 1.0 / (1.0 + std::exp(-n_ba + 0.5 * th_ba));
}

// Confidence in the residual calibration itself: 1 when the below-threshold
// residuals are all near zero, 0 when they crowd the threshold or are absent.
inline double calculation_confidence(const ResidualStats& stats) {
  if (stats.n_t <= 0) return 0.0;
  return 1.0 - stats.sum_d / (static_cast<double>(stats.n_t) * stats.d_th);
}

struct ConfidencePair {
  double c_s = 0.0;
  double c_c = 0.0;
  double weight() const { return c_s * c_c; }
};

// One matched keypoint pair fed to a stage-2 constraint. `index` refers back
// to the caller's keypoint table; `outside` marks pairs outside every mover
// box (the calibration sample).
struct MatchedPair {
  std::size_t index = 0;
  PixelPoint prev;
  PixelPoint cur;
  bool outside = true;
};

struct StageResult {
  // Score per input pair; empty where the constraint could not be evaluated.
  std::vector<std::optional<double>> score;
  ConfidencePair confidence;
  std::optional<ResidualStats> stats;
  bool skipped = false;  // epipolar stage only: translation below threshold
};

// Projection constraint: reprojection residuals under the stage-1 relative
// pose, calibrated on outside-box pairs. Pairs without depth or landing
// behind the camera get no score.
inline StageResult projection_stage(std::span<const MatchedPair> pairs,
                                    const PoseSE3& prev_to_cur,
                                    const CameraIntrinsics& k, double quantile,
                                    double slope, double n_ba, double th_ba) {
  StageResult result;
  result.score.assign(pairs.size(), std::nullopt);
  std::vector<std::optional<double>> residual(pairs.size());
  std::vector<double> calibration;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!pairs[i].prev.z.has_value()) continue;
    residual[i] = projection_error(pairs[i].prev, pairs[i].cur, prev_to_cur, k);
    if (residual[i] && pairs[i].outside) calibration.push_back(*residual[i]);
  }
  result.stats = adaptive_threshold(std::move(calibration), quantile);
  if (!result.stats) {
    // No calibration sample: scores are uninformative with zero confidence.
    for (std::size_t i = 0; i < pairs.size(); ++i)
      if (residual[i]) result.score[i] = 1.0;
    return result;
  }
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (residual[i])
      result.score[i] = sigmoid_probability(*residual[i], *result.stats, slope);
  result.confidence.c_s = statistical_confidence(n_ba, th_ba);
  result.confidence.c_c = calculation_confidence(*result.stats);
  return result;
}

// Epipolar constraint under the stage-1 relative pose. When the translation
// does not exceed t_th the epipolar geometry is unreliable: every score is 0
// with zero confidence and the stage is marked skipped.
inline StageResult epipolar_stage(std::span<const MatchedPair> pairs,
                                  const PoseSE3& prev_to_cur,
                                  const CameraIntrinsics& k, double t_th,
                                  double quantile, double slope, double th_ba) {
  StageResult result;
  if (prev_to_cur.translation.norm() <= t_th) {
    result.score.assign(pairs.size(), 0.0);
    result.skipped = true;
    return result;
  }
  result.score.assign(pairs.size(), std::nullopt);
  const FundamentalMat f = fundamental_from_pose(prev_to_cur, k);
  std::vector<std::optional<double>> residual(pairs.size());
  std::vector<double> calibration;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    residual[i] = epipolar_distance(f, pairs[i].prev, pairs[i].cur);
    if (residual[i] && pairs[i].outside) calibration.push_back(*residual[i]);
  }
  const double used = static_cast<double>(calibration.size());
  result.stats = adaptive_threshold(std::move(calibration), quantile);
  if (!result.stats) {
    for (std::size_t i = 0; i < pairs.size(); ++i)
      if (residual[i]) result.score[i] = 1.0;
    return result;
  }
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (residual[i])
      result.score[i] = sigmoid_probability(*residual[i], *result.stats, slope);
  result.confidence.c_s = statistical_confidence(used, th_ba);
  result.confidence.c_c = calculation_confidence(*result.stats);
  return result;
}

struct FusionInputs {
  double stage1_k = 1.0;
  std::optional<double> kt;
  std::optional<double> kf;
  double w_t = 0.0;  // projection confidence product
  double w_f = 0.0;  // epipolar confidence product
  double o = 0.0;
  double o_th = 0.9;
  bool translation_above_threshold = false;
};

// Stage-2 fusion. High-dynamic objects take the pessimistic product of both
// constraints (projection only while the epipolar stage is skipped);
// low-dynamic objects take the confidence-weighted average. Without a usable
// constraint the stage-1 value stands.
inline double fuse_stage2(const FusionInputs& in) {
  if (!in.kt.has_value()) return in.stage1_k;
  if (in.o <= in.o_th) {
    if (in.translation_above_threshold && in.kf.has_value())
      return std::clamp(*in.kt * *in.kf, 0.0, 1.0);
    return std::clamp(*in.kt, 0.0, 1.0);
  }
  const double w_f = in.kf.has_value() ? in.w_f : 0.0;
  const double denom = in.w_t + w_f;
  if (denom <= 0.0) return in.stage1_k;
  const double kf = in.kf.has_value() ? *in.kf : 0.0;
  return std::clamp((*in.kt * in.w_t + kf * w_f) / denom, 0.0, 1.0);
}

// Safety gates after fusion:
//  (a) matched foreground points of a box with no predecessor are presumed
//      false matches and zeroed;
//  (b) unmatched points carry no pairwise evidence: foreground points are
//      zeroed, the rest inherit their map point's probability (1 without one).
inline void apply_gates(
    std::span<KeypointRecord> records,
    const std::vector<bool>& box_prev_associated,
    const std::function<std::optional<double>(const KeypointRecord&)>&
        map_probability) {
  for (auto& rec : records) {
    if (rec.matched_prev) {
      if (rec.in_foreground && rec.owner_box >= 0 &&
          !box_prev_associated[static_cast<std::size_t>(rec.owner_box)]) {
        rec.k = 0.0;
      }
      continue;
    }
    if (rec.in_foreground) {
      rec.k = 0.0;
    } else {
      const auto m = map_probability(rec);
      rec.k = m.value_or(1.0);
    }
  }
}

}  // namespace statvo
