// Command-line front end: run the engine over a frames file, evaluate
// trajectories, or synthesize test scenes.

#include <charconv>
#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <statvo/statvo.hpp>

namespace {

std::string num(double v) {
  std::string s;
  statvo::detail::append_number(s, v, std::chars_format::general, 9);
  return s;
}

int cmd_run(const std::string& input, const std::string& config_path,
            const std::string& mode, const std::string& out_traj,
            const std::string& out_diag, std::uint64_t seed, bool seed_set) {
  statvo::EngineConfig cfg;
  if (!config_path.empty()) cfg = statvo::load_engine_config(config_path);
  if (!mode.empty()) cfg.mode = statvo::parse_engine_mode(mode);
  if (seed_set) cfg.seed = seed;
  cfg.validate();

  const auto frames = statvo::load_sequence(input);
  const auto result = statvo::run_sequence(frames, cfg);
  if (!out_traj.empty()) statvo::write_trajectory_tum(result.trajectory, out_traj);
  if (!out_diag.empty()) statvo::write_diagnostics(result.frames, out_diag);

  std::cout << "frames " << result.frames.size() << "\n"
            << "lost " << result.lost_frames << "\n";
  if (!result.frames.empty() &&
      2 * result.lost_frames > static_cast<int>(result.frames.size()))
    return 2;
  return 0;
}

int cmd_eval(const std::string& est_path, const std::string& gt_path,
             const std::string& metric, int delta) {
  const auto est = statvo::read_trajectory_tum(est_path);
  const auto gt = statvo::read_trajectory_tum(gt_path);
  if (metric == "ate") {
    const auto r = statvo::ate(est, gt);
    std::cout << "rmse " << num(r.rmse) << "\n"
              << "sd " << num(r.sd) << "\n"
              << "pairs " << r.matched << "\n";
  } else if (metric == "rpe") {
    const auto r = statvo::rpe(est, gt, delta);
    std::cout << "trans_rmse " << num(r.trans_rmse) << "\n"
              << "trans_sd " << num(r.trans_sd) << "\n"
              << "rot_rmse_deg " << num(r.rot_rmse_deg) << "\n"
              << "rot_sd_deg " << num(r.rot_sd_deg) << "\n"
              << "pairs " << r.pairs << "\n";
  } else {
    throw statvo::ConfigError("metric must be ate or rpe");
  }
  return 0;
}

int cmd_synth(const std::string& spec_path, std::uint64_t seed,
              const std::string& out, const std::string& out_gt,
              const std::string& out_labels) {
  const auto spec = statvo::load_scene_spec(spec_path);
  const auto scene = statvo::generate_scene(spec, seed);
  for (const auto& w : scene.warnings) std::cerr << "warning: " << w.message << "\n";
  statvo::save_sequence(scene.frames, out);
  if (!out_gt.empty()) statvo::write_trajectory_tum(scene.trajectory, out_gt);
  if (!out_labels.empty()) statvo::write_labels(scene.labels, out_labels);
  std::cout << "frames " << scene.frames.size() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamic-scene feature weighting and pose estimation"};
  app.require_subcommand(1);

  std::string run_input, run_config, run_mode, run_traj, run_diag;
  std::uint64_t run_seed = 0;
  auto* run = app.add_subcommand("run", "process a frames file");
  run->add_option("--input", run_input, "frames file (JSON lines)")->required();
  run->add_option("--config", run_config, "engine config (key = value)");
  run->add_option("--mode", run_mode, "full | minus | unweighted");
  run->add_option("--out-traj", run_traj, "output trajectory (TUM format)");
  run->add_option("--out-diag", run_diag, "output diagnostics (JSON lines)");
  auto* seed_opt = run->add_option("--seed", run_seed, "engine seed override");

  std::string eval_est, eval_gt, eval_metric = "ate";
  int eval_delta = 1;
  auto* eval = app.add_subcommand("eval", "compare trajectories");
  eval->add_option("--est", eval_est, "estimated trajectory")->required();
  eval->add_option("--gt", eval_gt, "ground-truth trajectory")->required();
  eval->add_option("--metric", eval_metric, "ate | rpe");
  eval->add_option("--delta", eval_delta, "rpe frame gap (default 1)");

  std::string synth_spec, synth_out, synth_gt, synth_labels;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene");
  synth->add_option("--spec", synth_spec, "scene spec (key = value)")->required();
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--out", synth_out, "output frames file")->required();
  synth->add_option("--out-gt", synth_gt, "output ground-truth trajectory");
  synth->add_option("--out-labels", synth_labels, "output labels file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(run_input, run_config, run_mode, run_traj, run_diag,
                     run_seed, seed_opt->count() > 0);
    if (eval->parsed()) return cmd_eval(eval_est, eval_gt, eval_metric, eval_delta);
    if (synth->parsed())
      return cmd_synth(synth_spec, synth_seed, synth_out, synth_gt, synth_labels);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
