#include <catch2/catch_amalgamated.hpp>

#include <statvo/depth_clustering.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "support/oracles.hpp"

using statvo::DbscanParams;
using statvo::DynamicAttribute;
using statvo::KeypointRecord;
using Sample = std::pair<std::int64_t, std::optional<double>>;

TEST_CASE("adaptive parameters from depth spacing", "[depth_clustering]") {
  // Fewer than 5 samples: fixed scale, min_pts capped by the sample count.
  const auto tiny = statvo::adaptive_dbscan_params(std::vector<double>{1.0, 2.0});
  REQUIRE(tiny.eps == 0.3);
  REQUIRE(tiny.min_pts == 2);

  // Uniform spacing s: the 4th neighbor of an interior point is 2s away, so
  // the median lands at 2s; spacing 0.1 over 20 points gives eps 0.2.
  std::vector<double> uniform;
  for (int i = 0; i < 20; ++i) uniform.push_back(1.0 + 0.1 * i);
  const auto p = statvo::adaptive_dbscan_params(uniform);
  REQUIRE(p.eps == Catch::Approx(0.2).margin(1e-12));
  REQUIRE(p.min_pts == 4);  // max(4, floor(0.1 * 20))

  // Tight spacing clamps at the lower bound, wide spacing at the upper.
  std::vector<double> tight, wide;
  for (int i = 0; i < 20; ++i) tight.push_back(0.001 * i);
  for (int i = 0; i < 20; ++i) wide.push_back(3.0 * i);
  REQUIRE(statvo::adaptive_dbscan_params(tight).eps == 0.05);
  REQUIRE(statvo::adaptive_dbscan_params(wide).eps == 1.0);

  // min_pts scales with the sample count.
  std::vector<double> many;
  for (int i = 0; i < 80; ++i) many.push_back(0.1 * i);
  REQUIRE(statvo::adaptive_dbscan_params(many).min_pts == 8);
}

TEST_CASE("clustering separates depth planes and flags noise", "[depth_clustering]") {
  // Two planes around 2 m and 6 m plus one isolated sample and one without
  // depth.
  std::vector<Sample> samples;
  for (int i = 0; i < 6; ++i) samples.push_back({i, 2.0 + 0.01 * i});
  for (int i = 0; i < 6; ++i) samples.push_back({10 + i, 6.0 + 0.01 * i});
  samples.push_back({20, 40.0});
  samples.push_back({21, std::nullopt});

  const auto r = statvo::dbscan(samples, DbscanParams{0.1, 4});
  REQUIRE(r.clusters.size() == 2);
  REQUIRE(r.clusters[0] == std::vector<std::int64_t>{0, 1, 2, 3, 4, 5});
  REQUIRE(r.clusters[1] == std::vector<std::int64_t>{10, 11, 12, 13, 14, 15});
  REQUIRE(r.noise == std::vector<std::int64_t>{20, 21});
  REQUIRE(r.foreground.has_value());
  REQUIRE(*r.foreground == 0);  // smaller mean depth
}

TEST_CASE("single cluster is the foreground; all-noise has none",
          "[depth_clustering]") {
  std::vector<Sample> one;
  for (int i = 0; i < 8; ++i) one.push_back({i, 3.0 + 0.02 * i});
  const auto r1 = statvo::dbscan(one, DbscanParams{0.1, 4});
  REQUIRE(r1.clusters.size() == 1);
  REQUIRE(r1.foreground.has_value());

  std::vector<Sample> sparse;
  for (int i = 0; i < 8; ++i) sparse.push_back({i, 10.0 * i});
  const auto r2 = statvo::dbscan(sparse, DbscanParams{0.1, 4});
  REQUIRE(r2.clusters.empty());
  REQUIRE_FALSE(r2.foreground.has_value());
  REQUIRE(r2.noise.size() == 8);
}

TEST_CASE("clustering matches the naive reference on random instances",
          "[depth_clustering]") {
  statvo::Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 5 + static_cast<int>(rng.uniform_index(120));
    std::vector<Sample> samples;
    std::vector<double> depths;
    for (int i = 0; i < n; ++i) {
      // Sparse ids to exercise the id-indexed bookkeeping.
      const std::int64_t id = 3 * i + 7;
      if (rng.uniform() < 0.05) {
        samples.push_back({id, std::nullopt});
        continue;
      }
      double d;
      if (rng.uniform() < 0.85) {
        const double center = 1.0 + 2.0 * rng.uniform_index(4);
        d = center + 0.15 * rng.gaussian();
      } else {
        d = rng.uniform(0.5, 9.5);
      }
      samples.push_back({id, std::abs(d) + 0.01});
      depths.push_back(std::abs(d) + 0.01);
    }
    DbscanParams params;
    if (trial % 2 == 0) {
      params = statvo::adaptive_dbscan_params(depths);
    } else {
      params.eps = rng.uniform(0.05, 1.0);
      params.min_pts = 2 + static_cast<int>(rng.uniform_index(8));
    }
    const auto lib = statvo::testing::canonical(statvo::dbscan(samples, params));
    const auto ref = statvo::testing::canonical(statvo::testing::naive_dbscan(samples, params));
    REQUIRE(lib == ref);
  }
}

TEST_CASE("background multiplier branches meet at the threshold",
          "[depth_clustering]") {
  const double o_th = 0.9;
  // Below or at the threshold: cubic lift. K = 0.5 under a dynamic object.
  const double kd = statvo::background_probability(0.5, 0.5, o_th);
  REQUIRE(kd == Catch::Approx(1.0 + 0.1 / std::pow(0.9, 4) * 0.125).margin(1e-12));
  REQUIRE(0.5 * kd == Catch::Approx(0.509525986892242).margin(1e-12));

  // Above the threshold: exact reciprocal.
  REQUIRE(statvo::background_probability(0.8, 0.95, o_th) ==
          Catch::Approx(1.25).margin(1e-12));

  // Both branches drive K * K^D to exactly 1 at K = O_Th.
  for (const double th : {0.9, 0.7, 0.5}) {
    const double below = th * statvo::background_probability(th, th, th);
    const double above = th * statvo::background_probability(th, th + 0.01, th);
    REQUIRE(below == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(above == Catch::Approx(1.0).margin(1e-12));
  }

  // K = 0 above the threshold: the reciprocal diverges; the stage-1 update
  // resolves the product to 1 instead.
  REQUIRE(std::isinf(statvo::background_probability(0.0, 0.95, o_th)));
}

TEST_CASE("stage-1 update routes foreground, background, and noise",
          "[depth_clustering]") {
  // Records 0-3 foreground, 4-7 background, 8 noise (no depth).
  std::vector<KeypointRecord> records(9);
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].id = static_cast<std::int64_t>(i);
    records[i].k = 0.5;
  }
  statvo::DepthClusterResult clusters;
  clusters.clusters = {{0, 1, 2, 3}, {4, 5, 6, 7}};
  clusters.noise = {8};
  clusters.foreground = 0;
  auto index_of = [](std::int64_t id) { return static_cast<std::size_t>(id); };

  SECTION("high dynamic zeroes the foreground and lifts the rest") {
    statvo::stage1_update(records, index_of, clusters, 0.5,
                          DynamicAttribute::high_dynamic, 0.9);
    for (int i = 0; i < 4; ++i) {
      REQUIRE(records[i].k == 0.0);
      REQUIRE(records[i].in_foreground);
    }
    const double lifted = 0.5 * statvo::background_probability(0.5, 0.5, 0.9);
    for (int i = 4; i < 9; ++i) {
      REQUIRE(records[i].k == Catch::Approx(lifted).margin(1e-12));
      REQUIRE_FALSE(records[i].in_foreground);
    }
  }

  SECTION("low dynamic leaves the foreground untouched") {
    statvo::stage1_update(records, index_of, clusters, 0.95,
                          DynamicAttribute::low_dynamic, 0.9);
    for (int i = 0; i < 4; ++i) REQUIRE(records[i].k == 0.5);
    // Background under a low-dynamic object: reciprocal, so K returns to 1.
    for (int i = 4; i < 9; ++i) REQUIRE(records[i].k == Catch::Approx(1.0).margin(1e-12));
  }

  SECTION("zero K above the threshold resolves to 1") {
    for (auto& rec : records) rec.k = 0.0;
    statvo::stage1_update(records, index_of, clusters, 0.95,
                          DynamicAttribute::low_dynamic, 0.9);
    for (int i = 4; i < 9; ++i) REQUIRE(records[i].k == 1.0);
  }

  SECTION("updated values stay in [0, 1]") {
    for (auto& rec : records) rec.k = 0.9;
    statvo::stage1_update(records, index_of, clusters, 0.2,
                          DynamicAttribute::high_dynamic, 0.9);
    for (const auto& rec : records) {
      REQUIRE(rec.k >= 0.0);
      REQUIRE(rec.k <= 1.0);
    }
  }
}
