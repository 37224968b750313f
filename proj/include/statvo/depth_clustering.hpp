#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "statvo/types.hpp"

namespace statvo {

struct DbscanParams {
  double eps = 0.3;
  int min_pts = 3;
};

// Data-driven DBSCAN parameters for the depths inside one box: eps is the
// median 4th-nearest-neighbor distance clamped to [0.05, 1.0] m, min_pts is
// max(4, floor(0.1*N)). Fewer than 5 samples fall back to a fixed scale.
inline DbscanParams adaptive_dbscan_params(std::span<const double> depths) {
  const auto n = depths.size();
  if (n < 5) return DbscanParams{0.3, static_cast<int>(std::min<std::size_t>(n, 3))};

  std::vector<double> sorted(depths.begin(), depths.end());
  std::sort(sorted.begin(), sorted.end());

  // In 1-D the 4 nearest neighbors of a point lie among its 4 sorted
  // predecessors and successors.
  std::vector<double> knn(n);
  std::vector<double> gaps;
  for (std::size_t i = 0; i < n; ++i) {
    gaps.clear();
    for (std::size_t j = (i >= 4 ? i - 4 : 0); j <= std::min(i + 4, n - 1); ++j) {
      if (j == i) continue;
      gaps.push_back(std::abs(sorted[j] - sorted[i]));
    }
    std::sort(gaps.begin(), gaps.end());
    knn[i] = gaps[3];
  }
  std::nth_element(knn.begin(), knn.begin() + n / 2, knn.end());
  const double eps = std::clamp(knn[n / 2], 0.05, 1.0);
  const int min_pts = std::max(4, static_cast<int>(0.1 * static_cast<double>(n)));
  return DbscanParams{eps, min_pts};
}

struct DepthClusterResult {
  std::vector<std::vector<std::int64_t>> clusters;  // member ids, ascending
  std::vector<std::int64_t> noise;                  // ascending
  // Index of the foreground cluster: minimal mean depth when there are two or
  // more clusters, the single cluster otherwise, empty when all points are
  // noise.
  std::optional<int> foreground;
  DbscanParams params;
};

// 1-D DBSCAN over (id, depth) samples. The neighborhood is |d_i - d_j| <= eps
// and includes the point itself. Seeds and expansions proceed in ascending id
// order, so border points join the first core cluster that reaches them and
// the partition is deterministic. Samples without depth are noise.
inline DepthClusterResult dbscan(
    const std::vector<std::pair<std::int64_t, std::optional<double>>>& samples,
    const DbscanParams& params) {
  DepthClusterResult result;
  result.params = params;

  std::vector<std::pair<std::int64_t, std::optional<double>>> points(samples);
  std::sort(points.begin(), points.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  const auto n = points.size();

  auto neighbors = [&](std::size_t i) {
    std::vector<std::size_t> out;
    if (!points[i].second) return out;
    const double d = *points[i].second;
    for (std::size_t j = 0; j < n; ++j) {
      if (!points[j].second) continue;
      if (std::abs(*points[j].second - d) <= params.eps) out.push_back(j);
    }
    return out;
  };

  constexpr int kUnassigned = -1;
  std::vector<int> label(n, kUnassigned);
  int next_cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != kUnassigned || !points[i].second) continue;
    auto seed_neighbors = neighbors(i);
    if (static_cast<int>(seed_neighbors.size()) < params.min_pts) continue;

    const int cluster = next_cluster++;
    label[i] = cluster;
    std::vector<std::size_t> frontier(seed_neighbors.begin(), seed_neighbors.end());
    for (std::size_t f = 0; f < frontier.size(); ++f) {
      const std::size_t j = frontier[f];
      if (label[j] != kUnassigned) continue;
      label[j] = cluster;
      const auto local = neighbors(j);
      if (static_cast<int>(local.size()) < params.min_pts) continue;  // border
      frontier.insert(frontier.end(), local.begin(), local.end());
    }
  }

  result.clusters.resize(next_cluster);
  std::vector<double> depth_sum(next_cluster, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] == kUnassigned) {
      result.noise.push_back(points[i].first);
    } else {
      result.clusters[label[i]].push_back(points[i].first);
      depth_sum[label[i]] += *points[i].second;
    }
  }

  if (!result.clusters.empty()) {
    int best = 0;
    double best_mean = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < result.clusters.size(); ++c) {
      const double mean = depth_sum[c] / static_cast<double>(result.clusters[c].size());
      if (mean < best_mean) {
        best_mean = mean;
        best = static_cast<int>(c);
      }
    }
    result.foreground = best;
  }
  return result;
}

// Multiplier K^D applied to background and noise points of a box: a cubic
// lift below the threshold, the exact reciprocal above it. Both branches meet
// at K = O_Th where the updated value is 1. The K = 0 reciprocal case is the
// limit 1/K -> inf; stage1_update resolves the product to 1 there.
inline double background_probability(double k_current, double o, double o_th) {
  if (o > o_th) {
    if (k_current <= 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / k_current;
  }
  const double scale = (1.0 - o_th) / (o_th * o_th * o_th * o_th);
  return scale * k_current * k_current * k_current + 1.0;
}

// Coarse-stage update of the keypoints of one box. Foreground points of a
// high-dynamic object are zeroed, foreground points of a low-dynamic object
// stay untouched, background and noise points (including depth-less ones,
// which DBSCAN routed to noise) are rescaled by K^D and clamped to [0, 1].
// `index_of` maps keypoint ids to positions in `records`.
inline void stage1_update(std::span<KeypointRecord> records,
                          const std::function<std::size_t(std::int64_t)>& index_of,
                          const DepthClusterResult& clusters, double o,
                          DynamicAttribute attribute, double o_th) {
  auto rescale = [&](KeypointRecord& rec) {
    const double kd = background_probability(rec.k, o, o_th);
    rec.kd = kd;
    if (rec.k <= 0.0 && o > o_th) {
      rec.k = 1.0;  // limit of K * (1/K)
    } else {
      rec.k = std::clamp(rec.k * kd, 0.0, 1.0);
    }
  };

  for (std::size_t c = 0; c < clusters.clusters.size(); ++c) {
    const bool is_foreground =
        clusters.foreground && static_cast<int>(c) == *clusters.foreground;
    for (const auto id : clusters.clusters[c]) {
      KeypointRecord& rec = records[index_of(id)];
      if (is_foreground) {
        rec.in_foreground = true;
        if (attribute == DynamicAttribute::high_dynamic) {
          rec.k = 0.0;
          rec.kd = 0.0;
        }
        // Low-dynamic foreground keeps its initial probability.
      } else {
        rescale(rec);
      }
    }
  }
  for (const auto id : clusters.noise) rescale(records[index_of(id)]);
}

}  // namespace statvo
