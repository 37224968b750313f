#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "statvo/geometry.hpp"
#include "statvo/types.hpp"

namespace statvo {

struct MapPoint {
  std::int64_t id = 0;
  Eigen::Vector3d position_w = Eigen::Vector3d::Zero();
  double static_probability = 1.0;  // M
  std::int64_t last_observed = 0;
};

struct Observation {
  Eigen::Vector3d point_w = Eigen::Vector3d::Zero();
  Eigen::Vector2d uv = Eigen::Vector2d::Zero();
  double weight = 1.0;
};

struct PoseOptimizerConfig {
  int max_iters = 10;
  double chi2_inlier = 5.991;  // 2-dof chi-square at 95%
  double huber_delta = 2.45;   // px, approximately sqrt(chi2_inlier)
};

struct PoseEstimate {
  PoseSE3 pose;
  int inliers = 0;      // weighted observations with unweighted chi2 below gate
  bool converged = false;
};

namespace detail {

// Huber loss on the squared residual norm; linear beyond delta.
inline double huber_cost(double squared_norm, double delta) {
  const double d2 = delta * delta;
  if (squared_norm <= d2) return squared_norm;
  return 2.0 * delta * std::sqrt(squared_norm) - d2;
}

inline double huber_weight(double squared_norm, double delta) {
  const double d2 = delta * delta;
  if (squared_norm <= d2) return 1.0;
  return delta / std::sqrt(squared_norm);
}

// Residual of one observation and its Jacobian with respect to a left
// multiplicative se(3) increment [v; w] at the current pose.
inline bool residual_jacobian(const Observation& obs, const PoseSE3& pose,
                              const CameraIntrinsics& k, Eigen::Vector2d* r,
                              Eigen::Matrix<double, 2, 6>* jac) {
  const Eigen::Vector3d p = pose.apply(obs.point_w);
  if (!(p.z() > 1e-9)) return false;
  const double inv_z = 1.0 / p.z();
  (*r) << k.fx * p.x() * inv_z + k.cx - obs.uv.x(),
          k.fy * p.y() * inv_z + k.cy - obs.uv.y();
  if (jac) {
    Eigen::Matrix<double, 2, 3> j_proj;
    j_proj << k.fx * inv_z, 0.0, -k.fx * p.x() * inv_z * inv_z,
              0.0, k.fy * inv_z, -k.fy * p.y() * inv_z * inv_z;
    Eigen::Matrix<double, 3, 6> j_point;
    j_point.block<3, 3>(0, 0).setIdentity();
    j_point.block<3, 3>(0, 3) = -skew(p);
    *jac = j_proj * j_point;
  }
  return true;
}

// Behind-camera observations pay a flat penalty much larger than any Huber
// term; otherwise a diverging pose that pushes points behind the camera
// would look cheaper than the truth.
inline constexpr double kBehindCameraCost = 1e12;

inline double total_cost(std::span<const Observation> obs, const PoseSE3& pose,
                         const CameraIntrinsics& k, double delta) {
  double cost = 0.0;
  Eigen::Vector2d r;
  for (const auto& o : obs) {
    if (o.weight <= 0.0) continue;
    if (!residual_jacobian(o, pose, k, &r, nullptr)) {
      cost += o.weight * kBehindCameraCost;
      continue;
    }
    cost += o.weight * huber_cost(r.squaredNorm(), delta);
  }
  return cost;
}

}  // namespace detail

namespace detail {

// One Levenberg-Marquardt descent on the weighted Huber objective at a fixed
// kernel width. Multiplicative damping keeps the iterate path invariant to a
// global rescaling of the weights. Every accepted step strictly decreases the
// objective at this delta.
inline std::pair<PoseSE3, bool> lm_descend(std::span<const Observation> observations,
                                           const PoseSE3& initial,
                                           const CameraIntrinsics& k,
                                           double huber_delta, int max_iters) {
  PoseSE3 pose = initial;
  double cost = total_cost(observations, pose, k, huber_delta);
  double lambda = 1e-4;
  bool converged = false;

  Eigen::Vector2d r;
  Eigen::Matrix<double, 2, 6> jac;
  for (int iter = 0; iter < max_iters; ++iter) {
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    for (const auto& o : observations) {
      if (o.weight <= 0.0) continue;
      if (!residual_jacobian(o, pose, k, &r, &jac)) continue;
      const double w = o.weight * huber_weight(r.squaredNorm(), huber_delta);
      h.noalias() += w * jac.transpose() * jac;
      g.noalias() += w * jac.transpose() * r;
    }

    bool accepted = false;
    for (int attempt = 0; attempt < 12; ++attempt) {
      Eigen::Matrix<double, 6, 6> damped = h;
      damped.diagonal() += lambda * h.diagonal();
      damped.diagonal() = damped.diagonal().cwiseMax(1e-18);
      const Eigen::Matrix<double, 6, 1> delta = damped.ldlt().solve(-g);
      // A per-step bound keeps near-flat (Huber-plateau) directions from
      // drifting the pose arbitrarily far on negligible cost changes.
      if (!delta.allFinite() || delta.norm() > 1.0) {
        lambda *= 10.0;
        continue;
      }
      const PoseSE3 candidate = exp_se3(delta) * pose;
      const double candidate_cost =
          total_cost(observations, candidate, k, huber_delta);
      if (candidate_cost < cost) {
        const double drop = cost - candidate_cost;
        pose = candidate;
        cost = candidate_cost;
        lambda = std::max(lambda * 0.5, 1e-12);
        accepted = true;
        if (delta.norm() < 1e-12 || drop <= 1e-14 * (1.0 + cost)) converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted || converged) {
      converged = converged || !accepted;  // stalled counts as settled
      break;
    }
  }
  return {pose, converged};
}

}  // namespace detail

// Motion-only pose refinement: minimizes the weighted Huber reprojection cost
// over SE(3). Graduated kernel: a plain least-squares descent first (its wide
// basin absorbs a poor motion prior), then the Huber objective from that
// iterate, so the robust kernel cannot lock onto whichever mode the prior
// happened to start in. Throws PoseUnderconstrained with fewer than 6
// positively weighted observations.
inline PoseEstimate optimize_pose(std::span<const Observation> observations,
                                  const PoseSE3& initial,
                                  const CameraIntrinsics& k,
                                  const PoseOptimizerConfig& cfg) {
  int usable = 0;
  for (const auto& o : observations)
    if (o.weight > 0.0) ++usable;
  if (usable < 6) throw PoseUnderconstrained();

  const double wide_delta = 1e9;  // quadratic everywhere that matters
  const auto coarse = detail::lm_descend(observations, initial, k, wide_delta,
                                         cfg.max_iters);
  const auto fine = detail::lm_descend(observations, coarse.first, k,
                                       cfg.huber_delta, cfg.max_iters);

  PoseEstimate out;
  out.pose = fine.first;
  out.converged = fine.second;
  Eigen::Vector2d r;
  for (const auto& o : observations) {
    if (o.weight <= 0.0) continue;
    if (!detail::residual_jacobian(o, out.pose, k, &r, nullptr)) continue;
    if (r.squaredNorm() < cfg.chi2_inlier) ++out.inliers;
  }
  return out;
}

// Joint optimization weight of a keypoint and its map point. A large gap
// between the two probabilities signals an association error; the point is
// excluded (empty) rather than trusted.
inline std::optional<double> compose_weight(double k, double m, double km_gap) {
  if (std::abs(k - m) > km_gap) return std::nullopt;
  return k * m;
}

// Exponential update of a map point's probability toward the fresh keypoint
// evidence; a contraction, so M stays in [0, 1] when K does.
inline double update_map_probability(double m, double k, double alpha) {
  return std::clamp((1.0 - alpha) * m + alpha * k, 0.0, 1.0);
}

struct CreatedMapPoint {
  std::size_t keypoint_index = 0;
  MapPoint point;
};

// New map points from the current frame: every keypoint with valid depth, a
// positive probability, and no existing association anchors a point at its
// back-projected world position, born with M = K.
inline std::vector<CreatedMapPoint> create_map_points(
    std::span<const FrameKeypoint> keypoints,
    std::span<const KeypointRecord> records,
    const PoseSE3& camera_from_world, const CameraIntrinsics& k,
    std::int64_t frame_id, std::int64_t& next_id) {
  std::vector<CreatedMapPoint> out;
  const PoseSE3 world_from_camera = camera_from_world.inverse();
  for (std::size_t i = 0; i < keypoints.size(); ++i) {
    const auto& kp = keypoints[i];
    const auto& rec = records[i];
    if (rec.map_point.has_value()) continue;
    if (!(rec.k > 0.0)) continue;
    if (!kp.pixel.z.has_value() || !(*kp.pixel.z > 0.0)) continue;
    CreatedMapPoint created;
    created.keypoint_index = i;
    created.point.id = next_id++;
    created.point.position_w = world_from_camera.apply(back_project(kp.pixel, k));
    created.point.static_probability = rec.k;
    created.point.last_observed = frame_id;
    out.push_back(created);
  }
  return out;
}

}  // namespace statvo
