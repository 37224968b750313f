#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "statvo/errors.hpp"
#include "statvo/types.hpp"

namespace statvo {

namespace detail {

inline void append_number(std::string& out, double value,
                          std::chars_format fmt, int precision) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value, fmt, precision);
  out.append(buf, res.ptr);
}

[[noreturn]] inline void load_fail(const std::string& path, int line,
                                   const std::string& what) {
  throw LoadError(path + ":" + std::to_string(line) + ": " + what);
}

}  // namespace detail

// --- frames file: one JSON object per line -------------------------------

inline nlohmann::json frame_to_json(const Frame& frame) {
  nlohmann::json j;
  j["id"] = frame.id;
  j["timestamp"] = frame.timestamp;
  j["intrinsics"] = {frame.intrinsics.fx, frame.intrinsics.fy,
                     frame.intrinsics.cx, frame.intrinsics.cy};
  auto& kps = j["keypoints"] = nlohmann::json::array();
  for (const auto& kp : frame.keypoints) {
    nlohmann::json jk;
    jk["id"] = kp.id;
    jk["uv"] = {kp.pixel.u, kp.pixel.v};
    if (kp.pixel.z) jk["z"] = *kp.pixel.z; else jk["z"] = nullptr;
    if (kp.prev) jk["prev"] = *kp.prev; else jk["prev"] = nullptr;
    kps.push_back(std::move(jk));
  }
  auto& dets = j["detections"] = nlohmann::json::array();
  for (const auto& det : frame.detections) {
    nlohmann::json jd;
    jd["cls"] = det.class_label;
    jd["box"] = {det.box.x_min, det.box.y_min, det.box.x_max, det.box.y_max};
    jd["score"] = det.score;
    dets.push_back(std::move(jd));
  }
  if (!frame.flow_pairs.empty()) {
    auto& flows = j["flow_pairs"] = nlohmann::json::array();
    for (const auto& fp : frame.flow_pairs) {
      flows.push_back({{"uv_prev", {fp.uv_prev.x(), fp.uv_prev.y()}},
                       {"uv_cur", {fp.uv_cur.x(), fp.uv_cur.y()}}});
    }
  }
  if (frame.gt) {
    const auto& q = frame.gt->orientation;
    j["gt"] = {frame.gt->translation.x(), frame.gt->translation.y(),
               frame.gt->translation.z(), q.x(), q.y(), q.z(), q.w()};
  }
  return j;
}

inline Frame frame_from_json(const nlohmann::json& j, const std::string& path,
                             int line) {
  Frame frame;
  try {
    frame.id = j.at("id").get<std::int64_t>();
    frame.timestamp = j.at("timestamp").get<double>();
    const auto& intr = j.at("intrinsics");
    if (!intr.is_array() || intr.size() != 4)
      detail::load_fail(path, line, "intrinsics must be [fx, fy, cx, cy]");
    frame.intrinsics = {intr[0].get<double>(), intr[1].get<double>(),
                        intr[2].get<double>(), intr[3].get<double>()};
    if (!frame.intrinsics.valid())
      detail::load_fail(path, line, "invalid intrinsics");

    std::unordered_set<std::int64_t> seen;
    for (const auto& jk : j.at("keypoints")) {
      FrameKeypoint kp;
      kp.id = jk.at("id").get<std::int64_t>();
      if (!seen.insert(kp.id).second)
        detail::load_fail(path, line, "duplicate keypoint id " + std::to_string(kp.id));
      const auto& uv = jk.at("uv");
      if (!uv.is_array() || uv.size() != 2)
        detail::load_fail(path, line, "keypoint uv must be [u, v]");
      kp.pixel.u = uv[0].get<double>();
      kp.pixel.v = uv[1].get<double>();
      if (jk.contains("z") && !jk.at("z").is_null()) {
        const double z = jk.at("z").get<double>();
        if (!(z > 0.0)) detail::load_fail(path, line, "keypoint depth must be > 0");
        kp.pixel.z = z;
      }
      if (jk.contains("prev") && !jk.at("prev").is_null())
        kp.prev = jk.at("prev").get<std::int64_t>();
      frame.keypoints.push_back(std::move(kp));
    }
    for (const auto& jd : j.at("detections")) {
      DetectionBox det;
      det.class_label = jd.at("cls").get<std::string>();
      const auto& box = jd.at("box");
      if (!box.is_array() || box.size() != 4)
        detail::load_fail(path, line, "detection box must be [x_min, y_min, x_max, y_max]");
      det.box = {box[0].get<double>(), box[1].get<double>(),
                 box[2].get<double>(), box[3].get<double>()};
      if (!det.box.valid()) detail::load_fail(path, line, "invalid detection box");
      det.score = jd.at("score").get<double>();
      if (!(det.score >= 0.0 && det.score <= 1.0))
        detail::load_fail(path, line, "detection score must be in [0, 1]");
      frame.detections.push_back(std::move(det));
    }
    if (j.contains("flow_pairs")) {
      for (const auto& jf : j.at("flow_pairs")) {
        FlowPair fp;
        const auto& p = jf.at("uv_prev");
        const auto& c = jf.at("uv_cur");
        fp.uv_prev = {p[0].get<double>(), p[1].get<double>()};
        fp.uv_cur = {c[0].get<double>(), c[1].get<double>()};
        frame.flow_pairs.push_back(fp);
      }
    }
    if (j.contains("gt") && !j.at("gt").is_null()) {
      const auto& g = j.at("gt");
      if (!g.is_array() || g.size() != 7)
        detail::load_fail(path, line, "gt must be [tx, ty, tz, qx, qy, qz, qw]");
      TrajectoryEntry entry;
      entry.timestamp = frame.timestamp;
      entry.translation = {g[0].get<double>(), g[1].get<double>(), g[2].get<double>()};
      entry.orientation = Eigen::Quaterniond(g[6].get<double>(), g[3].get<double>(),
                                             g[4].get<double>(), g[5].get<double>());
      frame.gt = entry;
    }
  } catch (const nlohmann::json::exception& e) {
    detail::load_fail(path, line, e.what());
  }
  return frame;
}

// Loads a JSON-lines frame sequence, validating the schema, strictly
// increasing timestamps, and that every match link names a keypoint of the
// immediately preceding record.
inline std::vector<Frame> load_sequence(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open file: " + path);
  std::vector<Frame> frames;
  std::unordered_set<std::int64_t> prev_ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) detail::load_fail(path, line_no, "invalid JSON");
    Frame frame = frame_from_json(j, path, line_no);
    if (!frames.empty() && !(frame.timestamp > frames.back().timestamp))
      detail::load_fail(path, line_no, "timestamps must be strictly increasing");
    for (const auto& kp : frame.keypoints) {
      if (kp.prev && prev_ids.find(*kp.prev) == prev_ids.end())
        detail::load_fail(path, line_no,
                          "match link to unknown previous keypoint " + std::to_string(*kp.prev));
    }
    prev_ids.clear();
    for (const auto& kp : frame.keypoints) prev_ids.insert(kp.id);
    frames.push_back(std::move(frame));
  }
  return frames;
}

inline void save_sequence(std::span<const Frame> frames, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot open file for writing: " + path);
  for (const auto& frame : frames) out << frame_to_json(frame).dump() << '\n';
}

// --- trajectory file: "timestamp tx ty tz qx qy qz qw" --------------------

inline std::string format_trajectory_line(const TrajectoryEntry& entry) {
  std::string line;
  detail::append_number(line, entry.timestamp, std::chars_format::fixed, 6);
  const auto& q = entry.orientation;
  for (const double v : {entry.translation.x(), entry.translation.y(),
                         entry.translation.z(), q.x(), q.y(), q.z(), q.w()}) {
    line.push_back(' ');
    detail::append_number(line, v, std::chars_format::general, 9);
  }
  line.push_back('\n');
  return line;
}

inline void write_trajectory_tum(std::span<const TrajectoryEntry> trajectory,
                                 const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot open file for writing: " + path);
  for (const auto& entry : trajectory) out << format_trajectory_line(entry);
}

inline std::vector<TrajectoryEntry> read_trajectory_tum(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open file: " + path);
  std::vector<TrajectoryEntry> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = line.substr(0, line.find_first_of("\r"));
    if (trimmed.empty() || trimmed[0] == '#') continue;
    double vals[8];
    const char* ptr = trimmed.data();
    const char* end = trimmed.data() + trimmed.size();
    for (int i = 0; i < 8; ++i) {
      while (ptr < end && (*ptr == ' ' || *ptr == '\t')) ++ptr;
      const auto res = std::from_chars(ptr, end, vals[i]);
      if (res.ec != std::errc{})
        detail::load_fail(path, line_no, "expected 8 numeric fields");
      ptr = res.ptr;
    }
    TrajectoryEntry entry;
    entry.timestamp = vals[0];
    entry.translation = {vals[1], vals[2], vals[3]};
    entry.orientation = Eigen::Quaterniond(vals[7], vals[4], vals[5], vals[6]);
    out.push_back(entry);
  }
  return out;
}

// --- labels file: one JSON object per keypoint per frame ------------------

struct KeypointLabel {
  std::int64_t frame = 0;
  std::int64_t keypoint = 0;
  bool dynamic = false;
};

inline void write_labels(std::span<const KeypointLabel> labels,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot open file for writing: " + path);
  for (const auto& label : labels) {
    nlohmann::json j;
    j["frame"] = label.frame;
    j["keypoint"] = label.keypoint;
    j["label"] = label.dynamic ? "dynamic" : "static";
    out << j.dump() << '\n';
  }
}

inline std::vector<KeypointLabel> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open file: " + path);
  std::vector<KeypointLabel> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) detail::load_fail(path, line_no, "invalid JSON");
    KeypointLabel label;
    try {
      label.frame = j.at("frame").get<std::int64_t>();
      label.keypoint = j.at("keypoint").get<std::int64_t>();
      const auto text = j.at("label").get<std::string>();
      if (text != "static" && text != "dynamic")
        detail::load_fail(path, line_no, "label must be static or dynamic");
      label.dynamic = text == "dynamic";
    } catch (const nlohmann::json::exception& e) {
      detail::load_fail(path, line_no, e.what());
    }
    out.push_back(label);
  }
  return out;
}

}  // namespace statvo
