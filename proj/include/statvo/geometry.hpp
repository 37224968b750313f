#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "statvo/errors.hpp"
#include "statvo/random.hpp"
#include "statvo/types.hpp"

namespace statvo {

inline Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d s;
  s << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return s;
}

// Exponential map of se(3); xi = [v; w] with translation part first.
inline PoseSE3 exp_se3(const Eigen::Matrix<double, 6, 1>& xi) {
  const Eigen::Vector3d v = xi.head<3>();
  const Eigen::Vector3d w = xi.tail<3>();
  const double theta = w.norm();
  const Eigen::Matrix3d w_hat = skew(w);
  const Eigen::Matrix3d w_hat2 = w_hat * w_hat;

  double a, b, c;  // sin(t)/t, (1-cos(t))/t^2, (t-sin(t))/t^3
  if (theta < 1e-8) {
    a = 1.0 - theta * theta / 6.0;
    b = 0.5 - theta * theta / 24.0;
    c = 1.0 / 6.0 - theta * theta / 120.0;
  } else {
    const double t2 = theta * theta;
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / t2;
    c = (theta - std::sin(theta)) / (t2 * theta);
  }

  PoseSE3 out;
  out.rotation = Eigen::Matrix3d::Identity() + a * w_hat + b * w_hat2;
  const Eigen::Matrix3d v_mat = Eigen::Matrix3d::Identity() + b * w_hat + c * w_hat2;
  out.translation = v_mat * v;
  return out;
}

// Pixel with depth to camera-frame 3D point.
inline Eigen::Vector3d back_project(const PixelPoint& p, const CameraIntrinsics& k) {
  if (!p.z.has_value() || !(*p.z > 0.0)) throw DepthInvalid();
  const double z = *p.z;
  return {(p.u - k.cx) * z / k.fx, (p.v - k.cy) * z / k.fy, z};
}

// Camera-frame 3D point to pixel; the returned depth is the point's z.
inline PixelPoint project(const Eigen::Vector3d& x, const CameraIntrinsics& k) {
  if (!(x.z() > 0.0)) throw BehindCamera();
  PixelPoint p;
  p.u = k.fx * x.x() / x.z() + k.cx;
  p.v = k.fy * x.y() / x.z() + k.cy;
  p.z = x.z();
  return p;
}

// Reprojection residual d = ||cur - project(T * back_project(prev))|| in
// pixels. Empty when the transformed point lands behind the camera; such a
// point is unusable for motion evidence, not proof of dynamics.
inline std::optional<double> projection_error(const PixelPoint& prev,
                                              const PixelPoint& cur,
                                              const PoseSE3& prev_to_cur,
                                              const CameraIntrinsics& k) {
  const Eigen::Vector3d transformed = prev_to_cur.apply(back_project(prev, k));
  if (!(transformed.z() > 0.0)) return std::nullopt;
  return (cur.uv() - project(transformed, k).uv()).norm();
}

struct FundamentalMat {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();

  // Epipolar line in the current image induced by a previous-image pixel.
  Eigen::Vector3d epipolar_line(const PixelPoint& prev) const {
    return m * prev.homogeneous();
  }
};

namespace detail {

// Unit Frobenius norm with the dominant entry positive, so equal subspaces
// compare equal entrywise.
inline Eigen::Matrix3d normalize_fundamental(const Eigen::Matrix3d& f) {
  const double norm = f.norm();
  if (norm == 0.0) return f;
  Eigen::Matrix3d out = f / norm;
  int r = 0, c = 0;
  out.cwiseAbs().maxCoeff(&r, &c);
  if (out(r, c) < 0.0) out = -out;
  return out;
}

inline Eigen::Matrix3d enforce_rank2(const Eigen::Matrix3d& f) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(f, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d s = svd.singularValues();
  s.z() = 0.0;
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

}  // namespace detail

// F = K^-T [t]x R K^-1 for the relative transform taking previous-camera
// coordinates into the current camera.
inline FundamentalMat fundamental_from_pose(const PoseSE3& prev_to_cur,
                                            const CameraIntrinsics& k) {
  if (prev_to_cur.translation.norm() < 1e-15) throw DegenerateTranslation();
  const Eigen::Matrix3d k_inv = k.inverse_matrix();
  const Eigen::Matrix3d essential = skew(prev_to_cur.translation) * prev_to_cur.rotation;
  FundamentalMat f;
  f.m = detail::normalize_fundamental(k_inv.transpose() * essential * k_inv);
  return f;
}

// Point-to-epipolar-line distance of the current pixel, in pixels. Empty when
// the line direction is degenerate (A = B = 0).
inline std::optional<double> epipolar_distance(const FundamentalMat& f,
                                               const PixelPoint& prev,
                                               const PixelPoint& cur) {
  const Eigen::Vector3d line = f.epipolar_line(prev);
  const double ab = std::hypot(line.x(), line.y());
  if (!(ab > 1e-12 * line.norm()) || ab == 0.0) return std::nullopt;
  return std::abs(cur.homogeneous().dot(line)) / ab;
}

struct Correspondence {
  PixelPoint prev;
  PixelPoint cur;
};

struct RansacConfig {
  int iterations = 200;
  double inlier_px = 1.0;
  std::uint64_t seed = 0;
};

struct RansacResult {
  FundamentalMat f;
  std::vector<bool> inliers;
  int inlier_count = 0;
};

namespace detail {

// Normalized (Hartley) eight-point estimate over the selected pair indices.
inline std::optional<Eigen::Matrix3d> eight_point(
    std::span<const Correspondence> pairs, std::span<const int> idx) {
  const int n = static_cast<int>(idx.size());
  if (n < 8) return std::nullopt;

  Eigen::Vector2d mean_prev = Eigen::Vector2d::Zero();
  Eigen::Vector2d mean_cur = Eigen::Vector2d::Zero();
  for (int i : idx) {
    mean_prev += pairs[i].prev.uv();
    mean_cur += pairs[i].cur.uv();
  }
  mean_prev /= n;
  mean_cur /= n;

  double dist_prev = 0.0, dist_cur = 0.0;
  for (int i : idx) {
    dist_prev += (pairs[i].prev.uv() - mean_prev).norm();
    dist_cur += (pairs[i].cur.uv() - mean_cur).norm();
  }
  dist_prev /= n;
  dist_cur /= n;
  if (dist_prev < 1e-12 || dist_cur < 1e-12) return std::nullopt;
  const double s_prev = std::sqrt(2.0) / dist_prev;
  const double s_cur = std::sqrt(2.0) / dist_cur;

  auto normalizer = [](double s, const Eigen::Vector2d& mean) {
    Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
    t(0, 0) = s;
    t(1, 1) = s;
    t(0, 2) = -s * mean.x();
    t(1, 2) = -s * mean.y();
    return t;
  };
  const Eigen::Matrix3d t_prev = normalizer(s_prev, mean_prev);
  const Eigen::Matrix3d t_cur = normalizer(s_cur, mean_cur);

  Eigen::MatrixXd a(n, 9);
  for (int row = 0; row < n; ++row) {
    const Correspondence& pair = pairs[idx[row]];
    const Eigen::Vector3d p = t_prev * pair.prev.homogeneous();
    const Eigen::Vector3d q = t_cur * pair.cur.homogeneous();
    a.row(row) << q.x() * p.x(), q.x() * p.y(), q.x() * p.z(),
                  q.y() * p.x(), q.y() * p.y(), q.y() * p.z(),
                  q.z() * p.x(), q.z() * p.y(), q.z() * p.z();
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 1> fvec = svd.matrixV().col(8);
  Eigen::Matrix3d f_norm;
  f_norm << fvec(0), fvec(1), fvec(2), fvec(3), fvec(4), fvec(5), fvec(6), fvec(7), fvec(8);
  const Eigen::Matrix3d f = t_cur.transpose() * f_norm * t_prev;
  return normalize_fundamental(enforce_rank2(f));
}

}  // namespace detail

// Seeded RANSAC around the normalized eight-point solver. The final model is
// re-estimated on the best consensus set and inliers are flagged against it.
inline RansacResult estimate_fundamental_ransac(
    std::span<const Correspondence> pairs, const RansacConfig& cfg) {
  const int n = static_cast<int>(pairs.size());
  if (n < 8) throw InsufficientCorrespondences();

  Rng rng(cfg.seed);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  auto count_inliers = [&](const Eigen::Matrix3d& f, std::vector<bool>* flags) {
    FundamentalMat fm{f};
    int count = 0;
    for (int i = 0; i < n; ++i) {
      const auto d = epipolar_distance(fm, pairs[i].prev, pairs[i].cur);
      const bool in = d.has_value() && *d < cfg.inlier_px;
      if (flags) (*flags)[i] = in;
      count += in ? 1 : 0;
    }
    return count;
  };

  int best_count = -1;
  Eigen::Matrix3d best_f = Eigen::Matrix3d::Zero();
  std::vector<int> sample(8);
  for (int it = 0; it < cfg.iterations; ++it) {
    for (int j = 0; j < 8; ++j) {
      const std::size_t pick = j + rng.uniform_index(static_cast<std::size_t>(n - j));
      std::swap(order[j], order[pick]);
      sample[j] = order[j];
    }
    const auto f = detail::eight_point(pairs, sample);
    if (!f) continue;
    const int count = count_inliers(*f, nullptr);
    if (count > best_count) {
      best_count = count;
      best_f = *f;
    }
  }
  if (best_count < 8) throw NoConsensus();

  std::vector<bool> flags(n, false);
  count_inliers(best_f, &flags);
  std::vector<int> consensus;
  consensus.reserve(n);
  for (int i = 0; i < n; ++i)
    if (flags[i]) consensus.push_back(i);
  if (static_cast<int>(consensus.size()) >= 8) {
    if (const auto refined = detail::eight_point(pairs, consensus)) best_f = *refined;
  }

  RansacResult result;
  result.f.m = best_f;
  result.inliers.assign(n, false);
  result.inlier_count = count_inliers(best_f, &result.inliers);
  return result;
}

}  // namespace statvo
