#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "statvo/errors.hpp"
#include "statvo/geometry.hpp"
#include "statvo/io.hpp"
#include "statvo/kvfile.hpp"
#include "statvo/random.hpp"
#include "statvo/types.hpp"

namespace statvo {

enum class TrajectoryKind { line, circle, sinusoid };

inline TrajectoryKind parse_trajectory_kind(const std::string& s) {
  if (s == "line") return TrajectoryKind::line;
  if (s == "circle") return TrajectoryKind::circle;
  if (s == "sinusoid") return TrajectoryKind::sinusoid;
  throw ConfigError("unknown trajectory kind: " + s);
}

struct ObjectSpec {
  std::string class_label = "person";
  int points = 50;
  Eigen::Vector3d center{0.0, 0.0, 3.0};
  Eigen::Vector3d half_extent{0.4, 0.4, 0.25};
  Eigen::Vector3d velocity{0.0, 0.0, 0.0};  // meters per frame, world axes
  double articulated_fraction = 0.3;        // share of points with own jitter
  double jitter_sigma = 0.03;               // meters, per frame and axis
  std::vector<std::pair<int, int>> dropouts;  // inclusive frame ranges
};

// Scene description for the deterministic generator. The camera keeps
// identity orientation and looks down +z; static structure sits in a depth
// band sampled through the frame-0 view.
struct SceneSpec {
  TrajectoryKind trajectory = TrajectoryKind::line;
  double extent = 1.0;     // line/sinusoid: total x travel over the sequence
  double radius = 0.0;     // circle
  double period = 0.0;     // circle/sinusoid frames per cycle; 0 = frame count
  double amplitude = 0.0;  // sinusoid lateral swing
  int frames = 100;
  double fps = 30.0;
  int static_points = 200;
  double static_depth_min = 4.0;
  double static_depth_max = 10.0;
  double pixel_noise = 0.0;
  double depth_noise = 0.0;
  double match_dropout = 0.1;
  double detection_pad = 4.0;
  int width = 640;
  int height = 480;
  CameraIntrinsics intrinsics{525.0, 525.0, 319.5, 239.5};
  std::vector<ObjectSpec> objects;

  double cycle_frames() const { return period > 0.0 ? period : frames; }

  void validate() const {
    if (frames < 1) throw ConfigError("frames must be >= 1");
    if (fps <= 0.0) throw ConfigError("fps must be > 0");
    if (static_points < 0) throw ConfigError("static_points must be >= 0");
    if (static_depth_min <= 0.0 || static_depth_max < static_depth_min)
      throw ConfigError("static depth band must satisfy 0 < min <= max");
    if (pixel_noise < 0.0 || depth_noise < 0.0)
      throw ConfigError("noise sigmas must be >= 0");
    if (match_dropout < 0.0 || match_dropout > 1.0)
      throw ConfigError("match_dropout must be in [0,1]");
    if (detection_pad < 1.0) throw ConfigError("detection_pad must be >= 1");
    if (width < 2 || height < 2) throw ConfigError("image size must be >= 2x2");
    if (!intrinsics.valid()) throw ConfigError("invalid intrinsics");
    if (radius < 0.0) throw ConfigError("radius must be >= 0");
    if (period < 0.0) throw ConfigError("period must be >= 0");
    for (std::size_t i = 0; i < objects.size(); ++i) {
      const auto& o = objects[i];
      const std::string tag = "object" + std::to_string(i);
      if (o.points < 0) throw ConfigError(tag + ": points must be >= 0");
      if (o.class_label.empty()) throw ConfigError(tag + ": empty class");
      if (o.articulated_fraction < 0.0 || o.articulated_fraction > 1.0)
        throw ConfigError(tag + ": articulated_fraction must be in [0,1]");
      if (o.jitter_sigma < 0.0) throw ConfigError(tag + ": jitter_sigma must be >= 0");
      if ((o.half_extent.array() <= 0.0).any())
        throw ConfigError(tag + ": half_extent must be positive");
      for (const auto& [a, b] : o.dropouts)
        if (a < 0 || b < a || b >= frames)
          throw ConfigError(tag + ": dropout range outside [0, frames)");
    }
  }
};

struct SpecWarning {
  std::string message;
};

struct SceneOutput {
  std::vector<Frame> frames;
  std::vector<TrajectoryEntry> trajectory;
  std::vector<KeypointLabel> labels;
  std::vector<SpecWarning> warnings;
};

// Camera center in world coordinates at frame f (orientation is identity).
inline Eigen::Vector3d camera_position(const SceneSpec& spec, int f) {
  const double cycle = spec.cycle_frames();
  const double phase = 2.0 * std::numbers::pi * f / cycle;
  switch (spec.trajectory) {
    case TrajectoryKind::line: {
      const double s = spec.frames > 1 ? static_cast<double>(f) / (spec.frames - 1) : 0.0;
      return {spec.extent * s, 0.0, 0.0};
    }
    case TrajectoryKind::circle:
      return {spec.radius * (std::cos(phase) - 1.0), spec.radius * std::sin(phase), 0.0};
    case TrajectoryKind::sinusoid: {
      const double s = spec.frames > 1 ? static_cast<double>(f) / (spec.frames - 1) : 0.0;
      return {spec.extent * s, spec.amplitude * std::sin(phase), 0.0};
    }
  }
  return Eigen::Vector3d::Zero();
}

inline PoseSE3 world_to_camera(const SceneSpec& spec, int f) {
  PoseSE3 pose = PoseSE3::identity();
  pose.translation = -camera_position(spec, f);
  return pose;
}

namespace detail {

struct ScenePoint {
  std::int64_t id = 0;
  Eigen::Vector3d base = Eigen::Vector3d::Zero();  // world position at frame 0
  int object = -1;          // -1 = static background
  bool articulated = false;
  bool dynamic_label = false;
};

}  // namespace detail

// Deterministic scene synthesis: world points fixed by (spec, seed), all
// per-frame randomness drawn from a stream derived from (seed, frame).
inline SceneOutput generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  SceneOutput out;

  // World points from the scene-level stream, in a fixed order.
  Rng scene_rng(splitmix64(seed ^ 0x5ce7e0a8d2615dbbULL));
  std::vector<detail::ScenePoint> points;
  const double mu = 0.05 * spec.width;
  const double mv = 0.05 * spec.height;
  for (int i = 0; i < spec.static_points; ++i) {
    detail::ScenePoint p;
    p.id = static_cast<std::int64_t>(points.size());
    const double u = scene_rng.uniform(mu, spec.width - mu);
    const double v = scene_rng.uniform(mv, spec.height - mv);
    const double z = scene_rng.uniform(spec.static_depth_min, spec.static_depth_max);
    p.base = back_project(PixelPoint{u, v, z}, spec.intrinsics);
    points.push_back(p);
  }
  std::vector<int> object_first(spec.objects.size(), 0);
  for (std::size_t o = 0; o < spec.objects.size(); ++o) {
    const auto& os = spec.objects[o];
    object_first[o] = static_cast<int>(points.size());
    const int articulated = static_cast<int>(
        std::llround(os.articulated_fraction * os.points));
    for (int j = 0; j < os.points; ++j) {
      detail::ScenePoint p;
      p.id = static_cast<std::int64_t>(points.size());
      for (int axis = 0; axis < 3; ++axis)
        p.base[axis] = os.center[axis] +
                       os.half_extent[axis] * scene_rng.uniform(-1.0, 1.0);
      p.object = static_cast<int>(o);
      p.articulated = j < articulated;
      p.dynamic_label = os.velocity.squaredNorm() > 0.0 ||
                        (p.articulated && os.jitter_sigma > 0.0);
      points.push_back(p);
    }
  }

  std::vector<bool> prev_visible(points.size(), false);
  std::vector<bool> object_seen(spec.objects.size(), false);

  out.frames.reserve(spec.frames);
  out.trajectory.reserve(spec.frames);
  for (int f = 0; f < spec.frames; ++f) {
    Rng frame_rng(splitmix64(seed) ^ splitmix64(0x9e3779b97f4a7c15ULL * (f + 1)));
    const PoseSE3 pose = world_to_camera(spec, f);

    // Jitter for every articulated point, visibility-independent draw count.
    std::vector<Eigen::Vector3d> offset(points.size(), Eigen::Vector3d::Zero());
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& p = points[i];
      if (p.object < 0) continue;
      const auto& os = spec.objects[p.object];
      offset[i] = os.velocity * f;
      if (p.articulated && os.jitter_sigma > 0.0)
        for (int axis = 0; axis < 3; ++axis)
          offset[i][axis] += frame_rng.gaussian(0.0, os.jitter_sigma);
    }

    Frame frame;
    frame.id = f;
    frame.timestamp = f / spec.fps;
    frame.intrinsics = spec.intrinsics;
    frame.gt = TrajectoryEntry{frame.timestamp, camera_position(spec, f),
                               Eigen::Quaterniond::Identity()};

    std::vector<bool> visible(points.size(), false);
    std::vector<std::size_t> emitted_point(points.size(), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Eigen::Vector3d pc = pose.apply(points[i].base + offset[i]);
      if (pc.z() <= 0.1) continue;
      PixelPoint px;
      try {
        px = project(pc, spec.intrinsics);
      } catch (const BehindCamera&) {
        continue;
      }
      if (px.u < 0.0 || px.u >= spec.width || px.v < 0.0 || px.v >= spec.height)
        continue;
      visible[i] = true;
      if (spec.pixel_noise > 0.0) {
        px.u += frame_rng.gaussian(0.0, spec.pixel_noise);
        px.v += frame_rng.gaussian(0.0, spec.pixel_noise);
      }
      if (spec.depth_noise > 0.0)
        px.z = std::max(0.05, *px.z + frame_rng.gaussian(0.0, spec.depth_noise));
      FrameKeypoint kp;
      kp.id = points[i].id;
      kp.pixel = px;
      emitted_point[i] = frame.keypoints.size();
      frame.keypoints.push_back(std::move(kp));
    }

    // Match links by point identity, a share broken at random.
    if (f > 0) {
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (!visible[i] || !prev_visible[i]) continue;
        bool keep = true;
        if (spec.match_dropout > 0.0)
          keep = frame_rng.uniform() >= spec.match_dropout;
        if (keep) frame.keypoints[emitted_point[i]].prev = points[i].id;
      }
    }

    for (std::size_t o = 0; o < spec.objects.size(); ++o) {
      const auto& os = spec.objects[o];
      bool dropped = false;
      for (const auto& [a, b] : os.dropouts)
        if (f >= a && f <= b) dropped = true;
      double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
      bool any = false;
      for (int j = 0; j < os.points; ++j) {
        const std::size_t i = static_cast<std::size_t>(object_first[o]) + j;
        if (!visible[i]) continue;
        const auto& px = frame.keypoints[emitted_point[i]].pixel;
        if (!any) {
          x0 = x1 = px.u;
          y0 = y1 = px.v;
          any = true;
        } else {
          x0 = std::min(x0, px.u);
          x1 = std::max(x1, px.u);
          y0 = std::min(y0, px.v);
          y1 = std::max(y1, px.v);
        }
      }
      if (any) object_seen[o] = true;
      if (!any || dropped) continue;
      DetectionBox det;
      det.class_label = os.class_label;
      det.box = Box{x0 - spec.detection_pad, y0 - spec.detection_pad,
                    x1 + spec.detection_pad, y1 + spec.detection_pad};
      det.score = 1.0;
      frame.detections.push_back(std::move(det));
    }

    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!visible[i]) continue;
      out.labels.push_back({f, points[i].id, points[i].dynamic_label});
    }

    out.trajectory.push_back(*frame.gt);
    out.frames.push_back(std::move(frame));
    prev_visible = std::move(visible);
  }

  for (std::size_t o = 0; o < spec.objects.size(); ++o)
    if (spec.objects[o].points > 0 && !object_seen[o])
      out.warnings.push_back(
          {"object " + std::to_string(o) + " never visible in any frame"});
  return out;
}

// Flat key=value scene file. Object fields use indexed keys
// (object0_points, object0_center, ...); vector values are comma-separated;
// dropout ranges are comma-separated "a-b" inclusive pairs.
inline SceneSpec load_scene_spec(const std::string& path) {
  SceneSpec spec;
  const auto entries = parse_flat_kv(path);
  auto fail = [&](const KeyValue& kv, const std::string& msg) -> ConfigError {
    return ConfigError(path + ":" + std::to_string(kv.line) + ": " + msg);
  };
  auto vec3 = [&](const KeyValue& kv) {
    const auto vals = parse_double_list(kv);
    if (vals.size() != 3) throw fail(kv, "expected 3 comma-separated values");
    return Eigen::Vector3d(vals[0], vals[1], vals[2]);
  };

  int object_count = 0;
  for (const auto& kv : entries)
    if (kv.key == "objects") object_count = static_cast<int>(parse_int(kv));
  if (object_count < 0) throw ConfigError(path + ": objects must be >= 0");
  spec.objects.resize(static_cast<std::size_t>(object_count));

  for (const auto& kv : entries) {
    const std::string& k = kv.key;
    if (k == "trajectory") spec.trajectory = parse_trajectory_kind(kv.value);
    else if (k == "extent") spec.extent = parse_double(kv);
    else if (k == "radius") spec.radius = parse_double(kv);
    else if (k == "period") spec.period = parse_double(kv);
    else if (k == "amplitude") spec.amplitude = parse_double(kv);
    else if (k == "frames") spec.frames = static_cast<int>(parse_int(kv));
    else if (k == "fps") spec.fps = parse_double(kv);
    else if (k == "static_points") spec.static_points = static_cast<int>(parse_int(kv));
    else if (k == "static_depth_min") spec.static_depth_min = parse_double(kv);
    else if (k == "static_depth_max") spec.static_depth_max = parse_double(kv);
    else if (k == "pixel_noise") spec.pixel_noise = parse_double(kv);
    else if (k == "depth_noise") spec.depth_noise = parse_double(kv);
    else if (k == "match_dropout") spec.match_dropout = parse_double(kv);
    else if (k == "detection_pad") spec.detection_pad = parse_double(kv);
    else if (k == "width") spec.width = static_cast<int>(parse_int(kv));
    else if (k == "height") spec.height = static_cast<int>(parse_int(kv));
    else if (k == "fx") spec.intrinsics.fx = parse_double(kv);
    else if (k == "fy") spec.intrinsics.fy = parse_double(kv);
    else if (k == "cx") spec.intrinsics.cx = parse_double(kv);
    else if (k == "cy") spec.intrinsics.cy = parse_double(kv);
    else if (k == "objects") { /* consumed above */ }
    else if (k.rfind("object", 0) == 0) {
      const auto underscore = k.find('_');
      if (underscore == std::string::npos || underscore == 6)
        throw fail(kv, "unknown key: " + k);
      int index = -1;
      try {
        index = std::stoi(k.substr(6, underscore - 6));
      } catch (const std::exception&) {
        throw fail(kv, "unknown key: " + k);
      }
      if (index < 0 || index >= object_count)
        throw fail(kv, "object index out of range: " + k);
      auto& os = spec.objects[static_cast<std::size_t>(index)];
      const std::string field = k.substr(underscore + 1);
      if (field == "class") os.class_label = kv.value;
      else if (field == "points") os.points = static_cast<int>(parse_int(kv));
      else if (field == "center") os.center = vec3(kv);
      else if (field == "half_extent") os.half_extent = vec3(kv);
      else if (field == "velocity") os.velocity = vec3(kv);
      else if (field == "articulated_fraction") os.articulated_fraction = parse_double(kv);
      else if (field == "jitter_sigma") os.jitter_sigma = parse_double(kv);
      else if (field == "dropouts") {
        os.dropouts.clear();
        for (const auto& range : parse_list(kv)) {
          if (range.empty()) continue;
          const auto dash = range.find('-');
          try {
            if (dash == std::string::npos) {
              const int a = std::stoi(range);
              os.dropouts.emplace_back(a, a);
            } else {
              const int a = std::stoi(range.substr(0, dash));
              const int b = std::stoi(range.substr(dash + 1));
              os.dropouts.emplace_back(a, b);
            }
          } catch (const std::exception&) {
            throw fail(kv, "bad dropout range: " + range);
          }
        }
      } else {
        throw fail(kv, "unknown key: " + k);
      }
    } else {
      throw fail(kv, "unknown key: " + k);
    }
  }
  spec.validate();
  return spec;
}

}  // namespace statvo
