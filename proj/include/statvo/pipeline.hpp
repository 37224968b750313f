#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "statvo/box_tracker.hpp"
#include "statvo/config.hpp"
#include "statvo/depth_clustering.hpp"
#include "statvo/errors.hpp"
#include "statvo/geometry.hpp"
#include "statvo/io.hpp"
#include "statvo/keypoint_probability.hpp"
#include "statvo/object_probability.hpp"
#include "statvo/pose_optimizer.hpp"
#include "statvo/random.hpp"
#include "statvo/types.hpp"

namespace statvo {

struct TrackDiag {
  std::int64_t track_id = 0;
  double o = 0.0;
  DynamicAttribute attribute = DynamicAttribute::high_dynamic;
  BoxSource source = BoxSource::detected;
  bool prev_associated = false;
  Box box;
};

struct FrameResult {
  std::int64_t frame_id = 0;
  double timestamp = 0.0;
  PoseSE3 pose_stage1;  // world -> camera after the coarse-weighted solve
  PoseSE3 pose_stage2;  // world -> camera after the refined-weighted solve
  bool tracking_lost = false;
  bool epipolar_skipped = false;
  int inliers_stage1 = 0;
  int inliers_stage2 = 0;
  int compensated_boxes = 0;
  int deleted_map_points = 0;
  int created_map_points = 0;
  std::vector<KeypointRecord> keypoints;
  std::vector<TrackDiag> tracks;
};

// Frame-by-frame engine: tracks mover boxes, scores object and keypoint
// static probabilities coarse-to-fine, and solves the camera pose twice per
// frame with those probabilities as observation weights. Value semantics:
// copying the engine snapshots its whole state.
class Engine {
 public:
  explicit Engine(EngineConfig cfg)
      : cfg_(std::move(cfg)), rng_(splitmix64(cfg_.seed)) {
    cfg_.validate();
  }

  const EngineConfig& config() const { return cfg_; }
  const std::map<std::int64_t, MapPoint>& map_points() const { return map_; }
  const std::vector<ObjectTrack>& tracks() const { return tracks_; }

  FrameResult process_frame(const Frame& frame);

 private:
  struct StageContext {
    std::vector<KeypointRecord> records;
    std::vector<MatchedPair> matched;     // pairs with a previous-frame link
    std::vector<Box> boxes;
    std::vector<double> box_o;
    std::vector<DynamicAttribute> box_attr;
  };

  void score_objects(const Frame& frame, const TrackStepResult& ts,
                     StageContext& ctx);
  void reassociate(const Frame& frame, StageContext& ctx,
                   const PoseSE3& prior) const;
  std::vector<Observation> collect_observations(const Frame& frame,
                                                const StageContext& ctx) const;

  EngineConfig cfg_;
  Rng rng_;
  std::vector<ObjectTrack> tracks_;
  std::int64_t next_track_id_ = 0;
  std::map<std::int64_t, MapPoint> map_;
  std::int64_t next_map_id_ = 0;
  std::unordered_map<std::int64_t, PixelPoint> prev_pixels_;
  std::unordered_map<std::int64_t, std::int64_t> prev_map_assoc_;
  PoseSE3 pose_prev_;
  PoseSE3 pose_prev2_;
  bool has_prev_ = false;
  bool has_prev2_ = false;
  std::int64_t frame_index_ = 0;
};

inline void Engine::score_objects(const Frame& frame, const TrackStepResult& ts,
                                  StageContext& ctx) {
  auto track_of = [&](std::size_t box) -> ObjectTrack& {
    for (auto& t : tracks_)
      if (t.track_id == ts.box_track_ids[box]) return t;
    throw EngineError("box without track");  // unreachable by construction
  };

  if (cfg_.mode != EngineMode::full) {
    for (std::size_t b = 0; b < ctx.boxes.size(); ++b) {
      ObjectTrack& t = track_of(b);
      t.static_probability = 0.0;
      t.attribute = DynamicAttribute::high_dynamic;
    }
    return;
  }

  // Frame-global fundamental matrix from presumed-static correspondences:
  // pairs outside every mover box, or all pairs when too few remain.
  std::vector<Correspondence> pool;
  for (const auto& mp : ctx.matched)
    if (mp.outside) pool.push_back({mp.prev, mp.cur});
  if (pool.size() < 8) {
    pool.clear();
    for (const auto& mp : ctx.matched) pool.push_back({mp.prev, mp.cur});
  }
  std::optional<FundamentalMat> lf;
  if (pool.size() >= 8) {
    RansacConfig rcfg = cfg_.ransac;
    rcfg.seed = rng_.next_u64();
    try {
      lf = estimate_fundamental_ransac(pool, rcfg).f;
    } catch (const NoConsensus&) {
      // No usable static geometry this frame; objects keep their previous O.
    }
  }

  for (std::size_t b = 0; b < ctx.boxes.size(); ++b) {
    ObjectTrack& t = track_of(b);
    const double fallback = t.prev_associated ? t.static_probability : 0.0;
    double o = fallback;
    if (lf) {
      std::vector<double> scores;
      if (!frame.flow_pairs.empty()) {
        for (const auto& fp : frame.flow_pairs) {
          if (!ctx.boxes[b].contains(fp.uv_cur.x(), fp.uv_cur.y())) continue;
          PixelPoint prev{fp.uv_prev.x(), fp.uv_prev.y(), std::nullopt};
          PixelPoint cur{fp.uv_cur.x(), fp.uv_cur.y(), std::nullopt};
          if (const auto s = pair_estimate(prev, cur, *lf)) scores.push_back(*s);
        }
      } else {
        for (const auto& mp : ctx.matched) {
          if (!ctx.boxes[b].contains(mp.cur.u, mp.cur.v)) continue;
          if (const auto s = pair_estimate(mp.prev, mp.cur, *lf)) scores.push_back(*s);
        }
      }
      o = object_static_probability(std::move(scores), fallback);
    }
    t.static_probability = o;
    t.attribute = classify_attribute(o, cfg_.o_th);
  }
}

// Keypoints whose match chain broke (or that never had one) are matched back
// to existing map points by projection at the prior pose. Without this, every
// broken chain would anchor a brand-new map point at the current pose
// estimate, letting the map datum random-walk away from its origin.
inline void Engine::reassociate(const Frame& frame, StageContext& ctx,
                                const PoseSE3& prior) const {
  if (map_.empty()) return;
  constexpr double radius_px = 4.0;
  constexpr double depth_tol = 0.10;  // relative

  std::set<std::int64_t> claimed;
  for (const auto& rec : ctx.records)
    if (rec.map_point) claimed.insert(*rec.map_point);

  struct Candidate {
    std::int64_t id;
    double u, v, z;
  };
  std::vector<Candidate> projected;
  projected.reserve(map_.size());
  for (const auto& [id, mp] : map_) {
    if (claimed.count(id)) continue;
    const Eigen::Vector3d pc = prior.apply(mp.position_w);
    if (pc.z() <= 1e-9) continue;
    projected.push_back({id, frame.intrinsics.fx * pc.x() / pc.z() + frame.intrinsics.cx,
                         frame.intrinsics.fy * pc.y() / pc.z() + frame.intrinsics.cy,
                         pc.z()});
  }

  for (std::size_t i = 0; i < ctx.records.size(); ++i) {
    auto& rec = ctx.records[i];
    if (rec.map_point) continue;
    const auto& px = frame.keypoints[i].pixel;
    double best = radius_px * radius_px;
    const Candidate* hit = nullptr;
    for (const auto& c : projected) {
      if (claimed.count(c.id)) continue;
      const double du = c.u - px.u;
      const double dv = c.v - px.v;
      const double d2 = du * du + dv * dv;
      if (d2 >= best) continue;
      if (px.z && std::abs(*px.z - c.z) > depth_tol * c.z) continue;
      best = d2;
      hit = &c;
    }
    if (hit) {
      rec.map_point = hit->id;
      claimed.insert(hit->id);
    }
  }
}

inline std::vector<Observation> Engine::collect_observations(
    const Frame& frame, const StageContext& ctx) const {
  std::vector<Observation> obs;
  for (std::size_t i = 0; i < ctx.records.size(); ++i) {
    const auto& rec = ctx.records[i];
    if (!rec.map_point) continue;
    const auto it = map_.find(*rec.map_point);
    if (it == map_.end()) continue;
    double weight = 1.0;
    if (cfg_.mode != EngineMode::unweighted) {
      const auto w =
          compose_weight(rec.k, it->second.static_probability, cfg_.km_gap);
      if (!w) continue;  // probability mismatch: exclude from the solve
      weight = *w;
    }
    Observation o;
    o.point_w = it->second.position_w;
    o.uv = frame.keypoints[i].pixel.uv();
    o.weight = weight;
    obs.push_back(o);
  }
  return obs;
}

inline FrameResult Engine::process_frame(const Frame& frame) {
  FrameResult result;
  result.frame_id = frame.id;
  result.timestamp = frame.timestamp;

  const bool bootstrap = frame_index_ == 0 || map_.empty();
  const bool weighted = cfg_.mode != EngineMode::unweighted;

  // 1. Mover boxes: associate detections to tracks, compensate dropouts.
  std::vector<DetectionBox> movers;
  for (const auto& det : frame.detections)
    if (cfg_.tracker.is_mover(det.class_label)) movers.push_back(det);
  const TrackStepResult ts = track_step(tracks_, movers, cfg_.tracker, next_track_id_);
  result.compensated_boxes = ts.compensated_count;

  StageContext ctx;
  ctx.boxes.reserve(ts.boxes.size());
  for (const auto& b : ts.boxes) ctx.boxes.push_back(b.box);

  // 2. Records and matched pairs against the previous frame.
  std::unordered_map<std::int64_t, std::size_t> index_of_id;
  ctx.records.resize(frame.keypoints.size());
  for (std::size_t i = 0; i < frame.keypoints.size(); ++i) {
    const auto& kp = frame.keypoints[i];
    auto& rec = ctx.records[i];
    rec.id = kp.id;
    index_of_id[kp.id] = i;
    if (kp.prev && has_prev_) {
      const auto it = prev_pixels_.find(*kp.prev);
      if (it != prev_pixels_.end()) {
        rec.matched_prev = true;
        MatchedPair pair;
        pair.index = i;
        pair.prev = it->second;
        pair.cur = kp.pixel;
        pair.outside = true;
        for (const auto& box : ctx.boxes) {
          if (box.contains(kp.pixel.u, kp.pixel.v)) {
            pair.outside = false;
            break;
          }
        }
        ctx.matched.push_back(std::move(pair));
        const auto assoc = prev_map_assoc_.find(*kp.prev);
        if (assoc != prev_map_assoc_.end() && map_.count(assoc->second))
          rec.map_point = assoc->second;
      }
    }
  }

  PoseSE3 prior = pose_prev_;
  if (has_prev2_) prior = (pose_prev_ * pose_prev2_.inverse()) * pose_prev_;
  if (frame_index_ == 0) prior = PoseSE3::identity();

  // 3. Recover broken map associations by projection at the prior pose.
  reassociate(frame, ctx, prior);

  // 4. Object static probabilities and attributes.
  score_objects(frame, ts, ctx);
  ctx.box_o.resize(ctx.boxes.size());
  ctx.box_attr.resize(ctx.boxes.size());
  for (std::size_t b = 0; b < ctx.boxes.size(); ++b) {
    for (const auto& t : tracks_) {
      if (t.track_id == ts.box_track_ids[b]) {
        ctx.box_o[b] = t.static_probability;
        ctx.box_attr[b] = t.attribute;
        break;
      }
    }
  }

  if (weighted) {
    // 5. Coarse stage: initialize keypoint probabilities from the owning box
    //    and reshape them per depth cluster.
    const auto init = init_keypoint_probabilities(frame.keypoints, ctx.boxes, ctx.box_o);
    for (std::size_t i = 0; i < ctx.records.size(); ++i) {
      ctx.records[i].k = init[i].k;
      ctx.records[i].owner_box = init[i].owner_box;
    }
    auto index_of = [&](std::int64_t id) { return index_of_id.at(id); };
    for (std::size_t b = 0; b < ctx.boxes.size(); ++b) {
      std::vector<std::pair<std::int64_t, std::optional<double>>> samples;
      std::vector<double> depths;
      for (const auto& rec : ctx.records) {
        if (rec.owner_box != static_cast<int>(b)) continue;
        const auto& z = frame.keypoints[index_of_id.at(rec.id)].pixel.z;
        samples.emplace_back(rec.id, z);
        if (z) depths.push_back(*z);
      }
      if (samples.empty()) continue;
      const auto params = adaptive_dbscan_params(depths);
      const auto clusters = dbscan(samples, params);
      stage1_update(ctx.records, index_of, clusters, ctx.box_o[b],
                    ctx.box_attr[b], cfg_.o_th);
    }
  }

  // 6. First pose solve under coarse weights.
  PoseSE3 pose1 = prior;
  {
    const auto obs = collect_observations(frame, ctx);
    int usable = 0;
    for (const auto& o : obs)
      if (o.weight > 0.0) ++usable;
    if (usable >= 6) {
      const auto est = optimize_pose(obs, prior, frame.intrinsics, cfg_.optimizer);
      pose1 = est.pose;
      result.inliers_stage1 = est.inliers;
    } else if (!bootstrap) {
      result.tracking_lost = true;
    }
  }
  result.pose_stage1 = pose1;

  // 7. Fine stage: projection and epipolar constraints under the stage-1
  //    relative motion, fused per keypoint, then gated.
  if (weighted && has_prev_) {
    const PoseSE3 rel = relative_pose(pose_prev_, pose1);
    const bool translation_above = rel.translation.norm() > cfg_.t_th;

    const auto proj = projection_stage(ctx.matched, rel, frame.intrinsics,
                                       cfg_.quantile, cfg_.sigmoid_slope,
                                       result.inliers_stage1, cfg_.th_ba);
    const auto epi = epipolar_stage(ctx.matched, rel, frame.intrinsics, cfg_.t_th,
                                    cfg_.quantile, cfg_.sigmoid_slope, cfg_.th_ba);
    result.epipolar_skipped = epi.skipped;

    for (std::size_t p = 0; p < ctx.matched.size(); ++p) {
      auto& rec = ctx.records[ctx.matched[p].index];
      if (rec.owner_box < 0) continue;  // only in-box keypoints are updated
      rec.kt = proj.score[p];
      rec.kf = epi.score[p];
      FusionInputs in;
      in.stage1_k = rec.k;
      in.kt = rec.kt;
      in.kf = rec.kf;
      in.w_t = proj.confidence.weight();
      in.w_f = epi.confidence.weight();
      in.o = ctx.box_o[static_cast<std::size_t>(rec.owner_box)];
      in.o_th = cfg_.o_th;
      in.translation_above_threshold = translation_above;
      rec.k = fuse_stage2(in);
    }
  }

  // Association gates run every frame; they need no previous pose.
  if (weighted) {
    apply_gates(ctx.records, ts.box_prev_associated,
                [&](const KeypointRecord& rec) -> std::optional<double> {
                  if (!rec.map_point) return std::nullopt;
                  const auto it = map_.find(*rec.map_point);
                  if (it == map_.end()) return std::nullopt;
                  return it->second.static_probability;
                });
  }

  // 8. Map-point probability maintenance with the final keypoint values.
  if (weighted) {
    for (auto& rec : ctx.records) {
      if (!rec.map_point) continue;
      const auto it = map_.find(*rec.map_point);
      if (it == map_.end()) continue;
      const double updated = update_map_probability(
          it->second.static_probability, rec.k, cfg_.map_alpha);
      if (updated < cfg_.map_delete_threshold) {
        map_.erase(it);
        rec.map_point.reset();
        ++result.deleted_map_points;
      } else {
        it->second.static_probability = updated;
        it->second.last_observed = frame.id;
      }
    }
  } else {
    for (auto& rec : ctx.records) {
      if (!rec.map_point) continue;
      const auto it = map_.find(*rec.map_point);
      if (it != map_.end()) it->second.last_observed = frame.id;
    }
  }

  // 9. Second pose solve under refined weights.
  PoseSE3 pose2 = pose1;
  {
    const auto obs = collect_observations(frame, ctx);
    int usable = 0;
    for (const auto& o : obs)
      if (o.weight > 0.0) ++usable;
    if (usable >= 6) {
      const auto est = optimize_pose(obs, pose1, frame.intrinsics, cfg_.optimizer);
      pose2 = est.pose;
      result.inliers_stage2 = est.inliers;
    } else if (!bootstrap) {
      result.tracking_lost = true;
    }
  }
  result.pose_stage2 = pose2;

  // 10. New map points anchored at the refined pose.
  for (const auto& created : create_map_points(frame.keypoints, ctx.records,
                                               pose2, frame.intrinsics,
                                               frame.id, next_map_id_)) {
    map_[created.point.id] = created.point;
    ctx.records[created.keypoint_index].map_point = created.point.id;
    ++result.created_map_points;
  }

  // 11. Roll state forward.
  prev_pixels_.clear();
  prev_map_assoc_.clear();
  for (std::size_t i = 0; i < frame.keypoints.size(); ++i) {
    prev_pixels_[frame.keypoints[i].id] = frame.keypoints[i].pixel;
    if (ctx.records[i].map_point)
      prev_map_assoc_[frame.keypoints[i].id] = *ctx.records[i].map_point;
  }
  pose_prev2_ = pose_prev_;
  has_prev2_ = has_prev_;
  pose_prev_ = pose2;
  has_prev_ = true;
  ++frame_index_;

  result.keypoints = std::move(ctx.records);
  result.tracks.reserve(ts.boxes.size());
  for (std::size_t b = 0; b < ts.boxes.size(); ++b) {
    TrackDiag diag;
    diag.track_id = ts.box_track_ids[b];
    diag.o = ctx.box_o[b];
    diag.attribute = ctx.box_attr[b];
    diag.source = ts.boxes[b].source;
    diag.prev_associated = ts.box_prev_associated[b];
    diag.box = ts.boxes[b].box;
    result.tracks.push_back(diag);
  }
  return result;
}

struct SequenceResult {
  std::vector<TrajectoryEntry> trajectory;
  std::vector<FrameResult> frames;
  int lost_frames = 0;
};

inline SequenceResult run_sequence(std::span<const Frame> frames,
                                   const EngineConfig& cfg) {
  Engine engine(cfg);
  SequenceResult out;
  out.trajectory.reserve(frames.size());
  out.frames.reserve(frames.size());
  for (const auto& frame : frames) {
    FrameResult result = engine.process_frame(frame);
    out.trajectory.push_back(
        TrajectoryEntry::from_camera_pose(frame.timestamp, result.pose_stage2));
    if (result.tracking_lost) ++out.lost_frames;
    out.frames.push_back(std::move(result));
  }
  return out;
}

// JSON-lines diagnostics, one object per frame: poses, counters, per-track
// and per-keypoint probabilities. Deterministic for identical runs.
inline void write_diagnostics(std::span<const FrameResult> frames,
                              const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot open file for writing: " + path);
  auto pose_json = [](const PoseSE3& pose) {
    const auto entry = TrajectoryEntry::from_camera_pose(0.0, pose);
    const auto& q = entry.orientation;
    return nlohmann::json{entry.translation.x(), entry.translation.y(),
                          entry.translation.z(), q.x(), q.y(), q.z(), q.w()};
  };
  for (const auto& fr : frames) {
    nlohmann::json j;
    j["frame"] = fr.frame_id;
    j["timestamp"] = fr.timestamp;
    j["pose_stage1"] = pose_json(fr.pose_stage1);
    j["pose_stage2"] = pose_json(fr.pose_stage2);
    j["tracking_lost"] = fr.tracking_lost;
    j["epipolar_skipped"] = fr.epipolar_skipped;
    j["inliers_stage1"] = fr.inliers_stage1;
    j["inliers_stage2"] = fr.inliers_stage2;
    j["compensated_boxes"] = fr.compensated_boxes;
    j["deleted_map_points"] = fr.deleted_map_points;
    j["created_map_points"] = fr.created_map_points;
    auto& tracks = j["tracks"] = nlohmann::json::array();
    for (const auto& t : fr.tracks) {
      tracks.push_back(
          {{"id", t.track_id},
           {"o", t.o},
           {"attribute", t.attribute == DynamicAttribute::high_dynamic ? "high" : "low"},
           {"source", t.source == BoxSource::detected ? "detected" : "compensated"},
           {"prev_associated", t.prev_associated},
           {"box", {t.box.x_min, t.box.y_min, t.box.x_max, t.box.y_max}}});
    }
    auto& kps = j["keypoints"] = nlohmann::json::array();
    for (const auto& rec : fr.keypoints) {
      nlohmann::json jk;
      jk["id"] = rec.id;
      jk["k"] = rec.k;
      jk["kd"] = rec.kd;
      jk["kt"] = rec.kt ? nlohmann::json(*rec.kt) : nlohmann::json(nullptr);
      jk["kf"] = rec.kf ? nlohmann::json(*rec.kf) : nlohmann::json(nullptr);
      jk["foreground"] = rec.in_foreground;
      jk["matched"] = rec.matched_prev;
      jk["box"] = rec.owner_box;
      jk["map_point"] = rec.map_point ? nlohmann::json(*rec.map_point) : nlohmann::json(nullptr);
      kps.push_back(std::move(jk));
    }
    out << j.dump() << '\n';
  }
}

}  // namespace statvo
