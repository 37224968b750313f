#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "statvo/hungarian.hpp"
#include "statvo/types.hpp"

namespace statvo {

struct TrackerConfig {
  std::vector<std::string> mover_classes = {"person"};
  double gate_iou = 0.3;
  int max_compensation = 10;
  double process_noise_pos = 1.0;   // px^2 on center/size
  double process_noise_vel = 0.25;  // px^2/frame^2 on velocities
  double measurement_noise = 4.0;   // px^2
  double init_pos_var = 4.0;
  double init_vel_var = 100.0;

  bool is_mover(const std::string& cls) const {
    return std::find(mover_classes.begin(), mover_classes.end(), cls) !=
           mover_classes.end();
  }
};

// Constant-velocity track over (cx, cy, w, h) plus their velocities.
struct ObjectTrack {
  std::int64_t track_id = 0;
  Eigen::Matrix<double, 8, 1> state = Eigen::Matrix<double, 8, 1>::Zero();
  Eigen::Matrix<double, 8, 8> covariance = Eigen::Matrix<double, 8, 8>::Zero();
  int missed_count = 0;
  double static_probability = 0.0;  // O of the tracked object
  DynamicAttribute attribute = DynamicAttribute::high_dynamic;
  bool prev_associated = false;  // existed before the current frame
  std::string class_label;
  std::optional<Box> prev_box;  // box emitted for this track in the previous frame

  Box box() const {
    const double w = std::max(state(2), 1e-3);
    const double h = std::max(state(3), 1e-3);
    return Box{state(0) - 0.5 * w, state(1) - 0.5 * h,
               state(0) + 0.5 * w, state(1) + 0.5 * h};
  }
};

inline double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

namespace detail {

inline Eigen::Matrix<double, 8, 8> transition_matrix() {
  Eigen::Matrix<double, 8, 8> f = Eigen::Matrix<double, 8, 8>::Identity();
  for (int i = 0; i < 4; ++i) f(i, i + 4) = 1.0;
  return f;
}

// Covariance hygiene: symmetrize and clamp eigenvalues away from zero so the
// filter never carries an indefinite matrix.
inline void repair_covariance(Eigen::Matrix<double, 8, 8>& p) {
  p = 0.5 * (p + p.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 8, 8>> eig(p);
  if (eig.eigenvalues().minCoeff() >= 1e-9) return;
  const Eigen::Matrix<double, 8, 1> clamped =
      eig.eigenvalues().cwiseMax(1e-9);
  p = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  p = 0.5 * (p + p.transpose()).eval();
}

}  // namespace detail

inline ObjectTrack make_track(std::int64_t id, const DetectionBox& det,
                              const TrackerConfig& cfg) {
  ObjectTrack t;
  t.track_id = id;
  t.class_label = det.class_label;
  t.state.head<4>() << det.box.center().x(), det.box.center().y(),
      det.box.width(), det.box.height();
  t.covariance.diagonal().head<4>().setConstant(cfg.init_pos_var);
  t.covariance.diagonal().tail<4>().setConstant(cfg.init_vel_var);
  return t;
}

inline ObjectTrack kf_predict(ObjectTrack track, const TrackerConfig& cfg) {
  const Eigen::Matrix<double, 8, 8> f = detail::transition_matrix();
  Eigen::Matrix<double, 8, 8> q = Eigen::Matrix<double, 8, 8>::Zero();
  q.diagonal().head<4>().setConstant(cfg.process_noise_pos);
  q.diagonal().tail<4>().setConstant(cfg.process_noise_vel);
  track.state = f * track.state;
  track.covariance = f * track.covariance * f.transpose() + q;
  detail::repair_covariance(track.covariance);
  return track;
}

inline ObjectTrack kf_update(ObjectTrack track, const Box& measurement,
                             const TrackerConfig& cfg) {
  Eigen::Matrix<double, 4, 8> h = Eigen::Matrix<double, 4, 8>::Zero();
  h.block<4, 4>(0, 0).setIdentity();
  const Eigen::Matrix4d r =
      Eigen::Matrix4d::Identity() * cfg.measurement_noise;

  Eigen::Vector4d z;
  z << measurement.center().x(), measurement.center().y(), measurement.width(),
      measurement.height();
  const Eigen::Vector4d innovation = z - h * track.state;
  const Eigen::Matrix4d s = h * track.covariance * h.transpose() + r;
  const Eigen::Matrix<double, 8, 4> gain =
      track.covariance * h.transpose() * s.ldlt().solve(Eigen::Matrix4d::Identity());

  track.state += gain * innovation;
  // Joseph form keeps the update positive semidefinite.
  const Eigen::Matrix<double, 8, 8> ikh =
      Eigen::Matrix<double, 8, 8>::Identity() - gain * h;
  track.covariance = ikh * track.covariance * ikh.transpose() +
                     gain * r * gain.transpose();
  detail::repair_covariance(track.covariance);
  return track;
}

struct TrackStepResult {
  std::vector<DetectionBox> boxes;  // detected boxes plus compensated ones
  std::vector<std::int64_t> box_track_ids;
  std::vector<std::optional<Box>> box_prev_boxes;
  std::vector<bool> box_prev_associated;
  int compensated_count = 0;
};

// One tracking step: predict, associate detections (Hungarian on 1 - IoU,
// gated), update matched tracks, emit predicted boxes for missed tracks that
// are still within the compensation budget, spawn tracks for the rest.
// Detections are expected to be pre-filtered to mover classes.
inline TrackStepResult track_step(std::vector<ObjectTrack>& tracks,
                                  const std::vector<DetectionBox>& detections,
                                  const TrackerConfig& cfg,
                                  std::int64_t& next_track_id) {
  for (auto& t : tracks) {
    t = kf_predict(t, cfg);
    t.prev_associated = true;  // survived from an earlier frame
  }

  const int n_tracks = static_cast<int>(tracks.size());
  const int n_dets = static_cast<int>(detections.size());
  std::vector<int> det_track(n_dets, -1);
  std::vector<bool> track_matched(n_tracks, false);

  if (n_tracks > 0 && n_dets > 0) {
    Eigen::MatrixXd cost(n_tracks, n_dets);
    for (int i = 0; i < n_tracks; ++i)
      for (int j = 0; j < n_dets; ++j)
        cost(i, j) = 1.0 - iou(tracks[i].box(), detections[j].box);
    for (const auto& [i, j] : hungarian_solve(cost)) {
      if (iou(tracks[i].box(), detections[j].box) < cfg.gate_iou) continue;
      det_track[j] = i;
      track_matched[i] = true;
    }
  }

  TrackStepResult result;
  auto emit = [&](const DetectionBox& box, ObjectTrack& track) {
    result.boxes.push_back(box);
    result.box_track_ids.push_back(track.track_id);
    result.box_prev_boxes.push_back(track.prev_box);
    result.box_prev_associated.push_back(track.prev_associated);
  };

  // Matched and newly spawned tracks emit in detection order.
  for (int j = 0; j < n_dets; ++j) {
    DetectionBox box = detections[j];
    box.source = BoxSource::detected;
    if (det_track[j] >= 0) {
      ObjectTrack& track = tracks[det_track[j]];
      track = kf_update(std::move(track), box.box, cfg);
      track.missed_count = 0;
      emit(box, track);
    } else {
      ObjectTrack track = make_track(next_track_id++, box, cfg);
      track.prev_associated = false;
      emit(box, track);
      tracks.push_back(std::move(track));
    }
  }

  // Missed tracks within budget emit their prediction; the rest are dropped.
  std::vector<ObjectTrack> survivors;
  survivors.reserve(tracks.size());
  for (int i = 0; i < static_cast<int>(tracks.size()); ++i) {
    ObjectTrack& track = tracks[i];
    const bool is_new = i >= n_tracks;
    if (is_new || track_matched[i]) {
      survivors.push_back(std::move(track));
      continue;
    }
    if (track.missed_count < cfg.max_compensation) {
      DetectionBox box;
      box.class_label = track.class_label;
      box.box = track.box();
      box.score = 0.0;
      box.source = BoxSource::compensated;
      emit(box, track);
      ++result.compensated_count;
      ++track.missed_count;
      survivors.push_back(std::move(track));
    }
  }
  tracks = std::move(survivors);

  // Remember each track's current box for next frame's association map.
  for (auto& t : tracks) t.prev_box.reset();
  for (std::size_t b = 0; b < result.boxes.size(); ++b) {
    for (auto& t : tracks) {
      if (t.track_id == result.box_track_ids[b]) {
        t.prev_box = result.boxes[b].box;
        break;
      }
    }
  }
  return result;
}

}  // namespace statvo
