#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <tuple>
#include <vector>

#include "statvo/errors.hpp"
#include "statvo/types.hpp"

namespace statvo {

namespace detail {

// Nearest-neighbor timestamp association within a window; greedy over
// ascending |dt| so each pose is used at most once.
inline std::vector<std::pair<std::size_t, std::size_t>> associate_timestamps(
    std::span<const TrajectoryEntry> est, std::span<const TrajectoryEntry> gt,
    double max_dt) {
  std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
  for (std::size_t i = 0; i < est.size(); ++i) {
    for (std::size_t j = 0; j < gt.size(); ++j) {
      const double dt = std::abs(est[i].timestamp - gt[j].timestamp);
      if (dt <= max_dt) candidates.emplace_back(dt, i, j);
    }
  }
  std::sort(candidates.begin(), candidates.end());
  std::vector<bool> est_used(est.size(), false), gt_used(gt.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& [dt, i, j] : candidates) {
    if (est_used[i] || gt_used[j]) continue;
    est_used[i] = true;
    gt_used[j] = true;
    pairs.emplace_back(i, j);
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

struct ErrorMoments {
  double rmse = 0.0;
  double sd = 0.0;
};

inline ErrorMoments moments(std::span<const double> errors) {
  const double n = static_cast<double>(errors.size());
  double sum = 0.0, sum_sq = 0.0;
  for (const double e : errors) {
    sum += e;
    sum_sq += e * e;
  }
  ErrorMoments out;
  out.rmse = std::sqrt(sum_sq / n);
  const double mean = sum / n;
  out.sd = std::sqrt(std::max(0.0, sum_sq / n - mean * mean));
  return out;
}

inline PoseSE3 world_from_camera(const TrajectoryEntry& e) {
  PoseSE3 p;
  p.rotation = e.orientation.normalized().toRotationMatrix();
  p.translation = e.translation;
  return p;
}

}  // namespace detail

struct AteResult {
  double rmse = 0.0;
  double sd = 0.0;
  int matched = 0;
};

// Absolute trajectory error: closed-form rigid alignment (no scale) of the
// estimated positions onto ground truth, then RMSE and standard deviation of
// the residual norms.
inline AteResult ate(std::span<const TrajectoryEntry> est,
                     std::span<const TrajectoryEntry> gt, double max_dt = 0.02) {
  const auto pairs = detail::associate_timestamps(est, gt, max_dt);
  if (pairs.size() < 2) throw EvalUnderconstrained();

  const auto n = pairs.size();
  Eigen::Matrix3Xd p_est(3, n), p_gt(3, n);
  for (std::size_t i = 0; i < n; ++i) {
    p_est.col(i) = est[pairs[i].first].translation;
    p_gt.col(i) = gt[pairs[i].second].translation;
  }

  const Eigen::Vector3d mean_est = p_est.rowwise().mean();
  const Eigen::Vector3d mean_gt = p_gt.rowwise().mean();
  const Eigen::Matrix3Xd c_est = p_est.colwise() - mean_est;
  const Eigen::Matrix3Xd c_gt = p_gt.colwise() - mean_gt;

  const Eigen::Matrix3d cov = c_est * c_gt.transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d s = Eigen::Vector3d::Ones();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) s.z() = -1.0;
  const Eigen::Matrix3d rot = svd.matrixV() * s.asDiagonal() * svd.matrixU().transpose();
  const Eigen::Vector3d trans = mean_gt - rot * mean_est;

  std::vector<double> errors(n);
  for (std::size_t i = 0; i < n; ++i)
    errors[i] = (p_gt.col(i) - (rot * p_est.col(i) + trans)).norm();
  const auto m = detail::moments(errors);
  return AteResult{m.rmse, m.sd, static_cast<int>(n)};
}

struct RpeResult {
  double trans_rmse = 0.0;
  double trans_sd = 0.0;
  double rot_rmse_deg = 0.0;
  double rot_sd_deg = 0.0;
  int pairs = 0;
};

// Relative pose error over a fixed frame delta: the discrepancy between the
// estimated and true motion over each (i, i + delta) pair of matched poses.
inline RpeResult rpe(std::span<const TrajectoryEntry> est,
                     std::span<const TrajectoryEntry> gt, int delta = 1,
                     double max_dt = 0.02) {
  if (delta < 1) throw EvalUnderconstrained();
  const auto pairs = detail::associate_timestamps(est, gt, max_dt);
  if (pairs.size() < static_cast<std::size_t>(delta) + 1) throw EvalUnderconstrained();

  std::vector<double> trans_err, rot_err;
  for (std::size_t i = 0; i + delta < pairs.size(); ++i) {
    const auto& [ei, gi] = pairs[i];
    const auto& [ej, gj] = pairs[i + delta];
    const PoseSE3 est_rel = detail::world_from_camera(est[ei]).inverse() *
                            detail::world_from_camera(est[ej]);
    const PoseSE3 gt_rel = detail::world_from_camera(gt[gi]).inverse() *
                           detail::world_from_camera(gt[gj]);
    const PoseSE3 err = gt_rel.inverse() * est_rel;
    trans_err.push_back(err.translation.norm());
    const double cos_angle =
        std::clamp(0.5 * (err.rotation.trace() - 1.0), -1.0, 1.0);
    rot_err.push_back(std::acos(cos_angle) * 180.0 / M_PI);
  }
  if (trans_err.empty()) throw EvalUnderconstrained();

  const auto mt = detail::moments(trans_err);
  const auto mr = detail::moments(rot_err);
  return RpeResult{mt.rmse, mt.sd, mr.rmse, mr.sd,
                   static_cast<int>(trans_err.size())};
}

}  // namespace statvo
