#include <catch2/catch_amalgamated.hpp>

#include <statvo/config.hpp>
#include <statvo/kvfile.hpp>

#include "support/testenv.hpp"

#include <string>
#include <vector>

using Catch::Matchers::ContainsSubstring;
using statvo::EngineConfig;
using statvo::EngineMode;
using statvo::testing::TempDir;
using statvo::testing::write_file;

TEST_CASE("engine defaults", "[config]") {
  const EngineConfig cfg;
  REQUIRE(cfg.o_th == 0.9);
  REQUIRE(cfg.t_th == 0.02);
  REQUIRE(cfg.quantile == 0.8);
  REQUIRE(cfg.sigmoid_slope == 5.0);
  REQUIRE(cfg.map_delete_threshold == 0.3);
  REQUIRE(cfg.th_ba == 20.0);
  REQUIRE(cfg.km_gap == 0.4);
  REQUIRE(cfg.map_alpha == 0.3);
  REQUIRE(cfg.mode == EngineMode::full);
  REQUIRE(cfg.seed == 0);
  REQUIRE(cfg.tracker.mover_classes == std::vector<std::string>{"person"});
  REQUIRE(cfg.tracker.gate_iou == 0.3);
  REQUIRE(cfg.tracker.max_compensation == 10);
  REQUIRE(cfg.tracker.process_noise_pos == 1.0);
  REQUIRE(cfg.tracker.process_noise_vel == 0.25);
  REQUIRE(cfg.tracker.measurement_noise == 4.0);
  REQUIRE(cfg.tracker.init_pos_var == 4.0);
  REQUIRE(cfg.tracker.init_vel_var == 100.0);
  REQUIRE(cfg.ransac.iterations == 200);
  REQUIRE(cfg.ransac.inlier_px == 1.0);
  REQUIRE(cfg.ransac.seed == 0);
  REQUIRE(cfg.optimizer.max_iters == 10);
  REQUIRE(cfg.optimizer.chi2_inlier == 5.991);
  REQUIRE(cfg.optimizer.huber_delta == 2.45);
  REQUIRE_NOTHROW(cfg.validate());
}

TEST_CASE("engine mode names", "[config]") {
  REQUIRE(statvo::parse_engine_mode("full") == EngineMode::full);
  REQUIRE(statvo::parse_engine_mode("minus") == EngineMode::minus);
  REQUIRE(statvo::parse_engine_mode("unweighted") == EngineMode::unweighted);
  REQUIRE_THROWS_AS(statvo::parse_engine_mode("Full"), statvo::ConfigError);
  REQUIRE(statvo::to_string(EngineMode::full) == "full");
  REQUIRE(statvo::to_string(EngineMode::minus) == "minus");
  REQUIRE(statvo::to_string(EngineMode::unweighted) == "unweighted");
}

TEST_CASE("config file loading", "[config]") {
  TempDir dir;

  SECTION("every key is consumed") {
    write_file(dir.file("full.cfg"),
               "# engine tuning\n"
               "o_th = 0.85\n"
               "t_th = 0.01\n"
               "quantile = 0.75\n"
               "sigmoid_slope = 4\n"
               "map_delete_threshold = 0.25\n"
               "th_ba = 15\n"
               "km_gap = 0.5\n"
               "map_alpha = 0.2\n"
               "mode = minus\n"
               "seed = 42\n"
               "mover_classes = person,animal\n"
               "gate_iou = 0.25\n"
               "max_compensation = 6\n"
               "process_noise_pos = 2\n"
               "process_noise_vel = 0.5\n"
               "measurement_noise = 3\n"
               "init_pos_var = 5\n"
               "init_vel_var = 50\n"
               "ransac_iters = 100\n"
               "ransac_px = 1.5\n"
               "max_opt_iters = 20\n"
               "chi2_inlier = 9.21\n"
               "huber_delta = 3\n");
    const auto cfg = statvo::load_engine_config(dir.file("full.cfg"));
    REQUIRE(cfg.o_th == 0.85);
    REQUIRE(cfg.t_th == 0.01);
    REQUIRE(cfg.quantile == 0.75);
    REQUIRE(cfg.sigmoid_slope == 4.0);
    REQUIRE(cfg.map_delete_threshold == 0.25);
    REQUIRE(cfg.th_ba == 15.0);
    REQUIRE(cfg.km_gap == 0.5);
    REQUIRE(cfg.map_alpha == 0.2);
    REQUIRE(cfg.mode == EngineMode::minus);
    REQUIRE(cfg.seed == 42);
    REQUIRE(cfg.tracker.mover_classes ==
            std::vector<std::string>{"person", "animal"});
    REQUIRE(cfg.tracker.gate_iou == 0.25);
    REQUIRE(cfg.tracker.max_compensation == 6);
    REQUIRE(cfg.tracker.process_noise_pos == 2.0);
    REQUIRE(cfg.tracker.process_noise_vel == 0.5);
    REQUIRE(cfg.tracker.measurement_noise == 3.0);
    REQUIRE(cfg.tracker.init_pos_var == 5.0);
    REQUIRE(cfg.tracker.init_vel_var == 50.0);
    REQUIRE(cfg.ransac.iterations == 100);
    REQUIRE(cfg.ransac.inlier_px == 1.5);
    REQUIRE(cfg.optimizer.max_iters == 20);
    REQUIRE(cfg.optimizer.chi2_inlier == 9.21);
    REQUIRE(cfg.optimizer.huber_delta == 3.0);
  }

  SECTION("unknown keys fail with the file position") {
    write_file(dir.file("typo.cfg"), "o_th = 0.9\nsigmoidslope = 5\n");
    REQUIRE_THROWS_WITH(statvo::load_engine_config(dir.file("typo.cfg")),
                        ContainsSubstring(":2:") &&
                            ContainsSubstring("sigmoidslope"));
  }

  SECTION("malformed numbers are rejected") {
    write_file(dir.file("nan.cfg"), "o_th = friday\n");
    REQUIRE_THROWS_AS(statvo::load_engine_config(dir.file("nan.cfg")),
                      statvo::ConfigError);
    write_file(dir.file("trail.cfg"), "th_ba = 20x\n");
    REQUIRE_THROWS_AS(statvo::load_engine_config(dir.file("trail.cfg")),
                      statvo::ConfigError);
  }

  SECTION("out-of-range values are rejected") {
    write_file(dir.file("oth.cfg"), "o_th = 1.5\n");
    REQUIRE_THROWS_WITH(statvo::load_engine_config(dir.file("oth.cfg")),
                        ContainsSubstring("o_th"));
    write_file(dir.file("quant.cfg"), "quantile = 1\n");
    REQUIRE_THROWS_AS(statvo::load_engine_config(dir.file("quant.cfg")),
                      statvo::ConfigError);
    write_file(dir.file("iters.cfg"), "ransac_iters = 0\n");
    REQUIRE_THROWS_AS(statvo::load_engine_config(dir.file("iters.cfg")),
                      statvo::ConfigError);
  }

  SECTION("missing files are reported") {
    REQUIRE_THROWS_AS(statvo::load_engine_config(dir.file("absent.cfg")),
                      statvo::ConfigError);
  }
}

TEST_CASE("flat key=value parsing", "[config]") {
  TempDir dir;

  SECTION("comments, blanks, and whitespace") {
    write_file(dir.file("kv.txt"),
               "# leading comment\n"
               "\n"
               "  alpha = 1  \n"
               "beta=two words\n"
               "# trailing comment\n");
    const auto entries = statvo::parse_flat_kv(dir.file("kv.txt"));
    REQUIRE(entries.size() == 2);
    REQUIRE(entries[0].key == "alpha");
    REQUIRE(entries[0].value == "1");
    REQUIRE(entries[0].line == 3);
    REQUIRE(entries[1].key == "beta");
    REQUIRE(entries[1].value == "two words");
    REQUIRE(entries[1].line == 4);
  }

  SECTION("missing separator") {
    write_file(dir.file("nosep.txt"), "alpha 1\n");
    REQUIRE_THROWS_AS(statvo::parse_flat_kv(dir.file("nosep.txt")),
                      statvo::ConfigError);
  }

  SECTION("empty key") {
    write_file(dir.file("nokey.txt"), "= 5\n");
    REQUIRE_THROWS_AS(statvo::parse_flat_kv(dir.file("nokey.txt")),
                      statvo::ConfigError);
  }

  SECTION("numeric helpers consume the whole token") {
    statvo::KeyValue kv{"x", "1.5", 1};
    REQUIRE(statvo::parse_double(kv) == 1.5);
    kv.value = "7";
    REQUIRE(statvo::parse_int(kv) == 7);
    kv.value = "18446744073709551615";
    REQUIRE(statvo::parse_u64(kv) == 18446744073709551615ULL);
    kv.value = "1.5.2";
    REQUIRE_THROWS_AS(statvo::parse_double(kv), statvo::ConfigError);
    kv.value = "1,2.5,3";
    const auto vals = statvo::parse_double_list(kv);
    REQUIRE(vals == std::vector<double>{1.0, 2.5, 3.0});
  }
}
