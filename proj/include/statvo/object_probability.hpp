#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "statvo/geometry.hpp"
#include "statvo/types.hpp"

namespace statvo {

// Survival function of the chi-square law with 2 degrees of freedom,
// exp(-x/2): the probability that a squared residual at least this large
// arises from a static point.
inline double chi_square_static(double squared_residual) {
  if (squared_residual < 0.0) throw InvalidResidual();
  return std::exp(-0.5 * squared_residual);
}

// Static score of one flow pair: chi-square survival of its squared epipolar
// distance. Empty when the epipolar line is degenerate.
inline std::optional<double> pair_estimate(const PixelPoint& prev,
                                           const PixelPoint& cur,
                                           const FundamentalMat& f) {
  const auto d = epipolar_distance(f, prev, cur);
  if (!d) return std::nullopt;
  return chi_square_static((*d) * (*d));
}

// Object-level static probability: mean of the ascending-sorted pair scores
// at zero-based ranks floor(0.1*M), floor(0.2*M), floor(0.3*M). Low ranks are
// deliberate: a partially moving object should read as dynamic. With no
// scores the caller-provided fallback (previous O, or 0 for a new track) is
// returned.
inline double object_static_probability(std::vector<double> scores,
                                        double fallback) {
  if (scores.empty()) return fallback;
  std::sort(scores.begin(), scores.end());
  const auto m = static_cast<double>(scores.size());
  const auto last = scores.size() - 1;
  double sum = 0.0;
  for (const double q : {0.1, 0.2, 0.3}) {
    const auto rank = std::min(static_cast<std::size_t>(q * m), last);
    sum += scores[rank];
  }
  return sum / 3.0;
}

// O <= threshold means high dynamic: the boundary case is treated as moving.
inline DynamicAttribute classify_attribute(double o, double o_th) {
  return o <= o_th ? DynamicAttribute::high_dynamic
                   : DynamicAttribute::low_dynamic;
}

struct KeypointInit {
  double k = 1.0;
  int owner_box = -1;  // index of the owning mover box, -1 outside all boxes
};

// Initial keypoint probabilities: the owning box's O inside mover boxes
// (minimum O wins on overlap), 1.0 outside.
inline std::vector<KeypointInit> init_keypoint_probabilities(
    std::span<const FrameKeypoint> keypoints, std::span<const Box> boxes,
    std::span<const double> box_static_probability) {
  std::vector<KeypointInit> out(keypoints.size());
  for (std::size_t i = 0; i < keypoints.size(); ++i) {
    const auto& kp = keypoints[i];
    for (std::size_t b = 0; b < boxes.size(); ++b) {
      if (!boxes[b].contains(kp.pixel.u, kp.pixel.v)) continue;
      if (out[i].owner_box < 0 || box_static_probability[b] < out[i].k) {
        out[i].k = box_static_probability[b];
        out[i].owner_box = static_cast<int>(b);
      }
    }
  }
  return out;
}

}  // namespace statvo
