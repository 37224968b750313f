#pragma once

#include <cstdint>
#include <string>

#include "statvo/box_tracker.hpp"
#include "statvo/errors.hpp"
#include "statvo/geometry.hpp"
#include "statvo/kvfile.hpp"
#include "statvo/pose_optimizer.hpp"

namespace statvo {

// full      — both probability stages feed the pose weights.
// minus     — object probability forced to 0 (every mover box high dynamic).
// unweighted — every weight pinned to 1; diagnostic baseline.
enum class EngineMode { full, minus, unweighted };

inline EngineMode parse_engine_mode(const std::string& s) {
  if (s == "full") return EngineMode::full;
  if (s == "minus") return EngineMode::minus;
  if (s == "unweighted") return EngineMode::unweighted;
  throw ConfigError("unknown mode: " + s);
}

inline std::string to_string(EngineMode m) {
  switch (m) {
    case EngineMode::full: return "full";
    case EngineMode::minus: return "minus";
    default: return "unweighted";
  }
}

struct EngineConfig {
  double o_th = 0.9;                  // object static-probability threshold
  double t_th = 0.02;                 // m; epipolar stage needs more translation
  double quantile = 0.8;              // adaptive residual threshold rank
  double sigmoid_slope = 5.0;
  double map_delete_threshold = 0.3;  // map points below this M are removed
  double th_ba = 20.0;                // reference inlier count for confidence
  double km_gap = 0.4;                // max |K - M| before exclusion
  double map_alpha = 0.3;             // EMA rate of map-point probability
  EngineMode mode = EngineMode::full;
  std::uint64_t seed = 0;
  TrackerConfig tracker;
  RansacConfig ransac;
  PoseOptimizerConfig optimizer;

  void validate() const {
    if (!(o_th > 0.0 && o_th < 1.0)) throw ConfigError("o_th must be in (0, 1)");
    if (!(t_th >= 0.0)) throw ConfigError("t_th must be >= 0");
    if (!(quantile > 0.0 && quantile < 1.0)) throw ConfigError("quantile must be in (0, 1)");
    if (!(sigmoid_slope > 0.0)) throw ConfigError("sigmoid_slope must be > 0");
    if (!(map_delete_threshold >= 0.0 && map_delete_threshold <= 1.0))
      throw ConfigError("map_delete_threshold must be in [0, 1]");
    if (!(th_ba > 0.0)) throw ConfigError("th_ba must be > 0");
    if (!(km_gap >= 0.0 && km_gap <= 1.0)) throw ConfigError("km_gap must be in [0, 1]");
    if (!(map_alpha >= 0.0 && map_alpha <= 1.0)) throw ConfigError("map_alpha must be in [0, 1]");
    if (!(tracker.gate_iou >= 0.0 && tracker.gate_iou <= 1.0))
      throw ConfigError("gate_iou must be in [0, 1]");
    if (tracker.max_compensation < 0) throw ConfigError("max_compensation must be >= 0");
    if (ransac.iterations < 1) throw ConfigError("ransac_iters must be >= 1");
    if (!(ransac.inlier_px > 0.0)) throw ConfigError("ransac_px must be > 0");
    if (optimizer.max_iters < 1) throw ConfigError("max_opt_iters must be >= 1");
    if (!(optimizer.chi2_inlier > 0.0)) throw ConfigError("chi2_inlier must be > 0");
    if (!(optimizer.huber_delta > 0.0)) throw ConfigError("huber_delta must be > 0");
  }
};

// Loads a flat key = value config. Unknown keys are errors so typos cannot
// silently fall back to defaults.
inline EngineConfig load_engine_config(const std::string& path) {
  EngineConfig cfg;
  for (const auto& kv : parse_flat_kv(path)) {
    if (kv.key == "o_th") cfg.o_th = parse_double(kv);
    else if (kv.key == "t_th") cfg.t_th = parse_double(kv);
    else if (kv.key == "quantile") cfg.quantile = parse_double(kv);
    else if (kv.key == "sigmoid_slope") cfg.sigmoid_slope = parse_double(kv);
    else if (kv.key == "map_delete_threshold") cfg.map_delete_threshold = parse_double(kv);
    else if (kv.key == "th_ba") cfg.th_ba = parse_double(kv);
    else if (kv.key == "km_gap") cfg.km_gap = parse_double(kv);
    else if (kv.key == "map_alpha") cfg.map_alpha = parse_double(kv);
    else if (kv.key == "mode") cfg.mode = parse_engine_mode(kv.value);
    else if (kv.key == "seed") cfg.seed = parse_u64(kv);
    else if (kv.key == "mover_classes") cfg.tracker.mover_classes = parse_list(kv);
    else if (kv.key == "gate_iou") cfg.tracker.gate_iou = parse_double(kv);
    else if (kv.key == "max_compensation") cfg.tracker.max_compensation = static_cast<int>(parse_int(kv));
    else if (kv.key == "process_noise_pos") cfg.tracker.process_noise_pos = parse_double(kv);
    else if (kv.key == "process_noise_vel") cfg.tracker.process_noise_vel = parse_double(kv);
    else if (kv.key == "measurement_noise") cfg.tracker.measurement_noise = parse_double(kv);
    else if (kv.key == "init_pos_var") cfg.tracker.init_pos_var = parse_double(kv);
    else if (kv.key == "init_vel_var") cfg.tracker.init_vel_var = parse_double(kv);
    else if (kv.key == "ransac_iters") cfg.ransac.iterations = static_cast<int>(parse_int(kv));
    else if (kv.key == "ransac_px") cfg.ransac.inlier_px = parse_double(kv);
    else if (kv.key == "max_opt_iters") cfg.optimizer.max_iters = static_cast<int>(parse_int(kv));
    else if (kv.key == "chi2_inlier") cfg.optimizer.chi2_inlier = parse_double(kv);
    else if (kv.key == "huber_delta") cfg.optimizer.huber_delta = parse_double(kv);
    else throw ConfigError(path + ":" + std::to_string(kv.line) + ": unknown key '" + kv.key + "'");
  }
  cfg.validate();
  return cfg;
}

}  // namespace statvo
