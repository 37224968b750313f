#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "statvo/errors.hpp"

namespace statvo {

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  bool valid() const {
    return std::isfinite(fx) && std::isfinite(fy) && std::isfinite(cx) &&
           std::isfinite(cy) && fx > 0.0 && fy > 0.0;
  }

  // Inverse calibration matrix, used when mapping pixels to normalized rays.
  Eigen::Matrix3d inverse_matrix() const {
    Eigen::Matrix3d k_inv = Eigen::Matrix3d::Identity();
    k_inv(0, 0) = 1.0 / fx;
    k_inv(1, 1) = 1.0 / fy;
    k_inv(0, 2) = -cx / fx;
    k_inv(1, 2) = -cy / fy;
    return k_inv;
  }
};

struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
  std::optional<double> z;  // depth in meters, > 0 when present

  Eigen::Vector2d uv() const { return {u, v}; }
  Eigen::Vector3d homogeneous() const { return {u, v, 1.0}; }
};

// Rigid transform X_out = R * X_in + t. Engine poses map world coordinates
// into the camera frame.
struct PoseSE3 {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static PoseSE3 identity() { return {}; }

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const {
    return rotation * x + translation;
  }

  PoseSE3 inverse() const {
    PoseSE3 out;
    out.rotation = rotation.transpose();
    out.translation = -(rotation.transpose() * translation);
    return out;
  }

  // Composition (this ∘ rhs): applies rhs first. The rotation product is
  // snapped back onto SO(3): orthonormality drift survives multiplicative
  // pose updates, and motion extrapolation compounds it geometrically across
  // frames until the optimizer trades the spurious scale for z translation.
  PoseSE3 operator*(const PoseSE3& rhs) const {
    PoseSE3 out;
    out.rotation = Eigen::Quaterniond(rotation * rhs.rotation)
                       .normalized()
                       .toRotationMatrix();
    out.translation = rotation * rhs.translation + translation;
    return out;
  }

  double rotation_orthogonality_error() const {
    return (rotation * rotation.transpose() - Eigen::Matrix3d::Identity())
        .cwiseAbs()
        .maxCoeff();
  }
};

// T_{cur,prev}: maps previous-camera coordinates into the current camera.
// Invariant under a common rigid change of the world frame.
inline PoseSE3 relative_pose(const PoseSE3& prev_from_world,
                             const PoseSE3& cur_from_world) {
  return cur_from_world * prev_from_world.inverse();
}

struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
  Eigen::Vector2d center() const {
    return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)};
  }
  bool contains(double u, double v) const {
    return u >= x_min && u <= x_max && v >= y_min && v <= y_max;
  }
  bool valid() const {
    return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
           std::isfinite(y_max) && x_min < x_max && y_min < y_max;
  }
};

enum class BoxSource { detected, compensated };

struct DetectionBox {
  std::string class_label;
  Box box;
  double score = 1.0;
  BoxSource source = BoxSource::detected;
};

enum class DynamicAttribute { high_dynamic, low_dynamic };

struct FrameKeypoint {
  std::int64_t id = 0;
  PixelPoint pixel;
  // Id of the matched keypoint in the previous frame, when tracked.
  std::optional<std::int64_t> prev;
};

struct FlowPair {
  Eigen::Vector2d uv_prev = Eigen::Vector2d::Zero();
  Eigen::Vector2d uv_cur = Eigen::Vector2d::Zero();
};

// One pose sample of a camera-in-world trajectory.
struct TrajectoryEntry {
  double timestamp = 0.0;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();

  PoseSE3 camera_from_world() const {
    PoseSE3 world_from_camera;
    world_from_camera.rotation = orientation.normalized().toRotationMatrix();
    world_from_camera.translation = translation;
    return world_from_camera.inverse();
  }

  static TrajectoryEntry from_camera_pose(double timestamp,
                                          const PoseSE3& camera_from_world) {
    const PoseSE3 world_from_camera = camera_from_world.inverse();
    TrajectoryEntry entry;
    entry.timestamp = timestamp;
    entry.translation = world_from_camera.translation;
    entry.orientation = Eigen::Quaterniond(world_from_camera.rotation).normalized();
    if (entry.orientation.w() < 0.0) entry.orientation.coeffs() *= -1.0;
    return entry;
  }
};

// Per-keypoint record carried through one frame of the pipeline.
struct KeypointRecord {
  std::int64_t id = 0;
  double k = 1.0;
  double kd = 1.0;                  // stage-1 multiplier actually applied
  std::optional<double> kt;         // projection-constraint score
  std::optional<double> kf;         // epipolar-constraint score
  bool matched_prev = false;
  bool in_foreground = false;
  int owner_box = -1;               // owning mover box index, -1 outside
  std::optional<std::int64_t> map_point;
};

// One timestep of input: keypoints with optional depth and match links,
// detector boxes, optional dense flow pairs and ground truth.
struct Frame {
  std::int64_t id = 0;
  double timestamp = 0.0;
  CameraIntrinsics intrinsics;
  std::vector<FrameKeypoint> keypoints;
  std::vector<DetectionBox> detections;
  std::vector<FlowPair> flow_pairs;
  std::optional<TrajectoryEntry> gt;
};

}  // namespace statvo
