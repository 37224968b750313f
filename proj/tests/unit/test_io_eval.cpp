#include <catch2/catch_amalgamated.hpp>

#include <statvo/errors.hpp>
#include <statvo/eval.hpp>
#include <statvo/io.hpp>
#include <statvo/random.hpp>

#include "support/testenv.hpp"

#include <cmath>
#include <string>
#include <vector>

using Catch::Matchers::ContainsSubstring;
using statvo::Frame;
using statvo::TrajectoryEntry;
using statvo::testing::TempDir;
using statvo::testing::write_file;

namespace {

TrajectoryEntry entry_at(double t, double x, double y = 0.0, double z = 0.0) {
  TrajectoryEntry e;
  e.timestamp = t;
  e.translation = Eigen::Vector3d(x, y, z);
  return e;
}

Frame sample_frame(std::int64_t id, double timestamp) {
  Frame f;
  f.id = id;
  f.timestamp = timestamp;
  f.intrinsics = {525.0, 525.0, 319.5, 239.5};
  statvo::FrameKeypoint a;
  a.id = 10 * id;
  a.pixel = statvo::PixelPoint{101.25, 202.5, 3.5};
  statvo::FrameKeypoint b;
  b.id = 10 * id + 1;
  b.pixel = statvo::PixelPoint{300.0, 150.0, std::nullopt};
  if (id > 0) b.prev = 10 * (id - 1) + 1;
  f.keypoints = {a, b};
  statvo::DetectionBox det;
  det.class_label = "person";
  det.box = {50.0, 60.0, 150.0, 260.0};
  det.score = 0.875;
  f.detections = {det};
  statvo::FlowPair flow;
  flow.uv_prev = {1.5, 2.5};
  flow.uv_cur = {3.5, 4.5};
  f.flow_pairs = {flow};
  TrajectoryEntry gt;
  gt.timestamp = timestamp;
  gt.translation = Eigen::Vector3d(0.1 * static_cast<double>(id), 0.0, 0.0);
  f.gt = gt;
  return f;
}

}  // namespace

TEST_CASE("trajectory line format", "[io_eval]") {
  TrajectoryEntry e;
  e.timestamp = 1.0;
  REQUIRE(statvo::format_trajectory_line(e) == "1.000000 0 0 0 0 0 0 1\n");

  e.timestamp = 0.033333;
  e.translation = Eigen::Vector3d(1.25, -0.5, 3.0);
  REQUIRE(statvo::format_trajectory_line(e) ==
          "0.033333 1.25 -0.5 3 0 0 0 1\n");
}

TEST_CASE("trajectory round trip", "[io_eval]") {
  TempDir dir;
  statvo::Rng rng(77);
  std::vector<TrajectoryEntry> out;
  for (int i = 0; i < 25; ++i) {
    TrajectoryEntry e;
    e.timestamp = 0.1 * i;
    e.translation =
        Eigen::Vector3d(rng.gaussian(), rng.gaussian(), rng.gaussian());
    Eigen::Quaterniond q(rng.gaussian(), rng.gaussian(), rng.gaussian(),
                         rng.gaussian());
    q.normalize();
    if (q.w() < 0.0) q.coeffs() *= -1.0;
    e.orientation = q;
    out.push_back(e);
  }

  const std::string path = dir.file("traj.txt");
  statvo::write_trajectory_tum(out, path);
  const auto back = statvo::read_trajectory_tum(path);
  REQUIRE(back.size() == out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    REQUIRE(back[i].timestamp == Catch::Approx(out[i].timestamp).margin(1e-6));
    REQUIRE((back[i].translation - out[i].translation).norm() < 1e-7);
    REQUIRE(back[i].orientation.coeffs().isApprox(out[i].orientation.coeffs(), 1e-6));
  }

  // Comments and blank lines are ignored; short lines are rejected.
  write_file(dir.file("commented.txt"),
             "# header\n\n1.000000 0 0 0 0 0 0 1\n");
  REQUIRE(statvo::read_trajectory_tum(dir.file("commented.txt")).size() == 1);
  write_file(dir.file("short.txt"), "1.0 0 0 0\n");
  REQUIRE_THROWS_AS(statvo::read_trajectory_tum(dir.file("short.txt")),
                    statvo::LoadError);
  REQUIRE_THROWS_AS(statvo::read_trajectory_tum(dir.file("absent.txt")),
                    statvo::LoadError);
}

TEST_CASE("frame sequence round trip", "[io_eval]") {
  TempDir dir;
  std::vector<Frame> frames;
  for (int i = 0; i < 4; ++i)
    frames.push_back(sample_frame(i, 0.25 * i));

  const std::string path = dir.file("seq.jsonl");
  statvo::save_sequence(frames, path);
  const auto back = statvo::load_sequence(path);
  REQUIRE(back.size() == frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& a = frames[i];
    const auto& b = back[i];
    REQUIRE(b.id == a.id);
    REQUIRE(b.timestamp == a.timestamp);
    REQUIRE(b.intrinsics.fx == a.intrinsics.fx);
    REQUIRE(b.keypoints.size() == a.keypoints.size());
    for (std::size_t kp = 0; kp < a.keypoints.size(); ++kp) {
      REQUIRE(b.keypoints[kp].id == a.keypoints[kp].id);
      REQUIRE(b.keypoints[kp].pixel.u == a.keypoints[kp].pixel.u);
      REQUIRE(b.keypoints[kp].pixel.z == a.keypoints[kp].pixel.z);
      REQUIRE(b.keypoints[kp].prev == a.keypoints[kp].prev);
    }
    REQUIRE(b.detections.size() == 1);
    REQUIRE(b.detections[0].class_label == "person");
    REQUIRE(b.detections[0].score == 0.875);
    REQUIRE(b.flow_pairs.size() == 1);
    REQUIRE(b.flow_pairs[0].uv_cur.x() == 3.5);
    REQUIRE(b.gt.has_value());
    REQUIRE(b.gt->translation.x() ==
            Catch::Approx(0.1 * static_cast<double>(i)).margin(1e-15));
  }

  // A second save of the loaded frames reproduces the file byte for byte.
  const std::string again = dir.file("seq2.jsonl");
  statvo::save_sequence(back, again);
  REQUIRE(statvo::testing::read_file(again) == statvo::testing::read_file(path));
}

TEST_CASE("frame sequence validation", "[io_eval]") {
  TempDir dir;
  const std::string head =
      R"({"id":0,"timestamp":0.0,"intrinsics":[525.0,525.0,319.5,239.5],)"
      R"("keypoints":[{"id":1,"uv":[10.0,20.0],"z":2.0,"prev":null}],"detections":[]})";

  SECTION("invalid JSON names the line") {
    write_file(dir.file("bad.jsonl"), head + "\nnot json\n");
    REQUIRE_THROWS_WITH(statvo::load_sequence(dir.file("bad.jsonl")),
                        ContainsSubstring(":2:") && ContainsSubstring("invalid JSON"));
  }

  SECTION("timestamps must strictly increase") {
    write_file(dir.file("stale.jsonl"), head + "\n" + head + "\n");
    REQUIRE_THROWS_WITH(statvo::load_sequence(dir.file("stale.jsonl")),
                        ContainsSubstring("strictly increasing"));
  }

  SECTION("match links must name a keypoint of the previous frame") {
    const std::string second =
        R"({"id":1,"timestamp":0.5,"intrinsics":[525.0,525.0,319.5,239.5],)"
        R"("keypoints":[{"id":2,"uv":[11.0,21.0],"prev":99}],"detections":[]})";
    write_file(dir.file("links.jsonl"), head + "\n" + second + "\n");
    REQUIRE_THROWS_WITH(statvo::load_sequence(dir.file("links.jsonl")),
                        ContainsSubstring("unknown previous keypoint 99"));
  }

  SECTION("duplicate keypoint ids are rejected") {
    const std::string dup =
        R"({"id":0,"timestamp":0.0,"intrinsics":[525.0,525.0,319.5,239.5],)"
        R"("keypoints":[{"id":1,"uv":[1.0,2.0]},{"id":1,"uv":[3.0,4.0]}],"detections":[]})";
    write_file(dir.file("dup.jsonl"), dup + "\n");
    REQUIRE_THROWS_WITH(statvo::load_sequence(dir.file("dup.jsonl")),
                        ContainsSubstring("duplicate keypoint id 1"));
  }

  SECTION("non-positive depth is rejected") {
    const std::string bad_z =
        R"({"id":0,"timestamp":0.0,"intrinsics":[525.0,525.0,319.5,239.5],)"
        R"("keypoints":[{"id":1,"uv":[1.0,2.0],"z":0.0}],"detections":[]})";
    write_file(dir.file("badz.jsonl"), bad_z + "\n");
    REQUIRE_THROWS_WITH(statvo::load_sequence(dir.file("badz.jsonl")),
                        ContainsSubstring("depth must be > 0"));
  }

  SECTION("missing file") {
    REQUIRE_THROWS_AS(statvo::load_sequence(dir.file("nope.jsonl")),
                      statvo::LoadError);
  }
}

TEST_CASE("label file round trip", "[io_eval]") {
  TempDir dir;
  std::vector<statvo::KeypointLabel> labels = {
      {0, 5, true}, {0, 6, false}, {3, 7, true}};
  const std::string path = dir.file("labels.jsonl");
  statvo::write_labels(labels, path);

  const std::string text = statvo::testing::read_file(path);
  REQUIRE_THAT(text, ContainsSubstring("\"label\":\"dynamic\""));
  REQUIRE_THAT(text, ContainsSubstring("\"label\":\"static\""));

  const auto back = statvo::read_labels(path);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(back[i].frame == labels[i].frame);
    REQUIRE(back[i].keypoint == labels[i].keypoint);
    REQUIRE(back[i].dynamic == labels[i].dynamic);
  }

  write_file(dir.file("badlabel.jsonl"),
             R"({"frame":0,"keypoint":1,"label":"maybe"})" "\n");
  REQUIRE_THROWS_WITH(statvo::read_labels(dir.file("badlabel.jsonl")),
                      ContainsSubstring("static or dynamic"));
}

TEST_CASE("absolute trajectory error", "[io_eval]") {
  SECTION("identical trajectories score zero") {
    std::vector<TrajectoryEntry> gt;
    for (int i = 0; i < 10; ++i)
      gt.push_back(entry_at(0.1 * i, 0.3 * i, 0.05 * i, 0.0));
    const auto r = statvo::ate(gt, gt);
    REQUIRE(r.matched == 10);
    REQUIRE(r.rmse < 1e-12);
    REQUIRE(r.sd < 1e-12);
  }

  SECTION("rigidly transformed estimates score zero") {
    statvo::Rng rng(83);
    std::vector<TrajectoryEntry> gt, est;
    Eigen::Quaterniond q(0.9, 0.1, -0.2, 0.3);
    q.normalize();
    const Eigen::Matrix3d rot = q.toRotationMatrix();
    const Eigen::Vector3d shift(4.0, -2.0, 1.5);
    for (int i = 0; i < 12; ++i) {
      const Eigen::Vector3d p(rng.gaussian(), rng.gaussian(), rng.gaussian());
      gt.push_back(entry_at(0.1 * i, p.x(), p.y(), p.z()));
      TrajectoryEntry e = gt.back();
      e.translation = rot * p + shift;
      est.push_back(e);
    }
    const auto r = statvo::ate(est, gt);
    REQUIRE(r.rmse < 1e-9);
  }

  SECTION("alternating lateral offsets on a line") {
    // Eleven poses 0.1 m apart with est offset +-0.01 m laterally. The mean
    // offset does not cancel over an odd count, so the aligned residuals are
    // 0.01 * (1 -+ 1/11) and the root-mean-square is 0.01 * sqrt(120) / 11.
    std::vector<TrajectoryEntry> gt, est;
    for (int i = 0; i <= 10; ++i) {
      gt.push_back(entry_at(0.1 * i, 0.1 * i));
      est.push_back(entry_at(0.1 * i, 0.1 * i, (i % 2 == 0) ? 0.01 : -0.01));
    }
    const auto r = statvo::ate(est, gt);
    REQUIRE(r.matched == 11);
    REQUIRE(r.rmse == Catch::Approx(0.009958591954639384).margin(1e-12));
    REQUIRE(r.sd == Catch::Approx(0.0009053265413308531).margin(1e-12));
  }

  SECTION("balanced lateral offsets score exactly the offset") {
    // Twelve poses with the pattern + - - + keep the offset zero-mean and
    // orthogonal to the track, so every aligned residual is exactly 0.01.
    const int pattern[4] = {1, -1, -1, 1};
    std::vector<TrajectoryEntry> gt, est;
    for (int i = 0; i < 12; ++i) {
      gt.push_back(entry_at(0.1 * i, 0.1 * i));
      est.push_back(entry_at(0.1 * i, 0.1 * i, 0.01 * pattern[i % 4]));
    }
    const auto r = statvo::ate(est, gt);
    REQUIRE(r.rmse == Catch::Approx(0.01).margin(1e-12));
    // sd is 0 in exact arithmetic; the one-pass E[e^2] - mean^2 form has a
    // cancellation floor of about mean * sqrt(eps) ~ 1e-10.
    REQUIRE(r.sd == Catch::Approx(0.0).margin(1e-9));
  }

  SECTION("timestamp association window") {
    std::vector<TrajectoryEntry> gt, est;
    for (int i = 0; i < 8; ++i) {
      gt.push_back(entry_at(0.1 * i, 0.1 * i));
      est.push_back(entry_at(0.1 * i + 0.015, 0.1 * i));
    }
    REQUIRE(statvo::ate(est, gt).matched == 8);  // within the 0.02 s window

    for (auto& e : est) e.timestamp += 0.02;     // now 0.035 s off
    REQUIRE_THROWS_AS(statvo::ate(est, gt), statvo::EvalUnderconstrained);
  }

  SECTION("fewer than two matches") {
    std::vector<TrajectoryEntry> one = {entry_at(0.0, 0.0)};
    REQUIRE_THROWS_AS(statvo::ate(one, one), statvo::EvalUnderconstrained);
  }
}

TEST_CASE("relative pose error", "[io_eval]") {
  SECTION("identical trajectories score zero") {
    std::vector<TrajectoryEntry> gt;
    for (int i = 0; i < 11; ++i) gt.push_back(entry_at(0.1 * i, 0.1 * i));
    const auto r = statvo::rpe(gt, gt, 1);
    REQUIRE(r.pairs == 10);
    REQUIRE(r.trans_rmse < 1e-12);
    REQUIRE(r.rot_rmse_deg < 1e-9);
  }

  SECTION("a persistent offset cancels in relative motion") {
    std::vector<TrajectoryEntry> gt, est;
    for (int i = 0; i < 11; ++i) {
      gt.push_back(entry_at(0.1 * i, 0.1 * i));
      est.push_back(entry_at(0.1 * i, 0.1 * i, 0.25, -0.5));
    }
    const auto r = statvo::rpe(est, gt, 1);
    REQUIRE(r.trans_rmse < 1e-12);
  }

  SECTION("a single jump charges exactly one pair") {
    std::vector<TrajectoryEntry> gt, est;
    for (int i = 0; i < 11; ++i) {
      gt.push_back(entry_at(0.1 * i, 0.1 * i));
      est.push_back(entry_at(0.1 * i, 0.1 * i, i >= 5 ? 0.05 : 0.0));
    }
    const auto r = statvo::rpe(est, gt, 1);
    REQUIRE(r.pairs == 10);
    REQUIRE(r.trans_rmse == Catch::Approx(0.05 / std::sqrt(10.0)).margin(1e-12));
    REQUIRE(r.trans_sd == Catch::Approx(0.015).margin(1e-12));
    REQUIRE(r.rot_rmse_deg < 1e-9);
  }

  SECTION("one rotated pose charges its two adjacent pairs") {
    const double theta = 0.2;  // rad
    std::vector<TrajectoryEntry> gt, est;
    for (int i = 0; i < 11; ++i) {
      gt.push_back(entry_at(0.1 * i, 0.0));
      TrajectoryEntry e = entry_at(0.1 * i, 0.0);
      if (i == 5)
        e.orientation =
            Eigen::Quaterniond(Eigen::AngleAxisd(theta, Eigen::Vector3d::UnitZ()));
      est.push_back(e);
    }
    const auto r = statvo::rpe(est, gt, 1);
    const double theta_deg = theta * 180.0 / M_PI;
    REQUIRE(r.rot_rmse_deg ==
            Catch::Approx(theta_deg * std::sqrt(2.0 / 10.0)).margin(1e-9));
    REQUIRE(r.trans_rmse < 1e-12);
  }

  SECTION("frame delta widens the pair stride") {
    std::vector<TrajectoryEntry> gt;
    for (int i = 0; i < 11; ++i) gt.push_back(entry_at(0.1 * i, 0.1 * i));
    REQUIRE(statvo::rpe(gt, gt, 5).pairs == 6);
    REQUIRE_THROWS_AS(statvo::rpe(gt, gt, 11), statvo::EvalUnderconstrained);
    REQUIRE_THROWS_AS(statvo::rpe(gt, gt, 0), statvo::EvalUnderconstrained);
  }
}
