// Command-line entry point: train, eval, sweep, baseline, gradcheck, replay.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <CLI11.hpp>

#include "tdrive/checkpoint.hpp"
#include "tdrive/config.hpp"
#include "tdrive/gradcheck.hpp"
#include "tdrive/harness.hpp"
#include "tdrive/replay.hpp"

namespace {

using namespace tdrive;

void print_report(const EvalReport& r) {
  std::printf("%-10s delay %.3f s (+-%.3f)  collisions %.3f (+-%.3f)  goal rate %.3f  [%d episodes x %d repeats]\n",
              r.scenario.c_str(), r.mean_delay, r.ci95_delay, r.mean_collisions, r.ci95_collisions,
              r.mean_goal_rate, r.episodes, r.repeats);
}

void emit_csv(const std::string& csv, const std::string& out_path) {
  if (out_path.empty())
    std::cout << csv;
  else
    write_file_atomic(out_path, csv);
}

int run_gradcheck(int seeds) {
  // Architectures range from tiny to the default actor shape.
  const std::vector<std::vector<int>> shapes = {
      {3, 4, 2}, {5, 8, 3}, {10, 16, 16, 3}, {48, 32, 32, 1}, {45, 256, 256, 3}};
  double worst = 0.0;
  bool empty = false;
  const auto start = std::chrono::steady_clock::now();
  for (int s = 0; s < seeds; ++s) {
    const auto& shape = shapes[static_cast<std::size_t>(s) % shapes.size()];
    const auto output = shape.back() == 1 ? nn::Activation::Identity : nn::Activation::Tanh;
    const auto rep = nn::random_gradient_check(shape, output, static_cast<std::uint64_t>(s) + 1);
    std::string name;
    for (std::size_t i = 0; i < shape.size(); ++i) name += (i ? "-" : "") + std::to_string(shape[i]);
    std::printf("seed %d  %-14s  compared %zu  kink-skipped %zu  max rel err %.3e\n", s + 1, name.c_str(),
                rep.compared, rep.skipped_kink, rep.max_relative_error);
    worst = std::max(worst, rep.max_relative_error);
    empty = empty || rep.compared == 0;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("max relative error %.3e (threshold 1e-4) in %.1f s\n", worst, secs);
  if (empty) std::printf("a network had no comparable entries\n");
  return worst < 1e-4 && !empty ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Per-step network temporaries stay on the heap instead of fresh mmaps.
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
  CLI::App app{"T-junction TD3 driving simulator"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a TD3 agent");
  std::string config_path, out_dir, resume_path;
  std::optional<std::uint64_t> train_seed;
  train_cmd->add_option("--config", config_path, "Flat JSON config file");
  train_cmd->add_option("--seed", train_seed, "Run seed (overrides config)");
  train_cmd->add_option("--out", out_dir, "Output directory (overrides config)");
  train_cmd->add_option("--resume", resume_path, "Checkpoint to resume from");
  bool quiet = false;
  train_cmd->add_flag("--quiet", quiet, "No per-episode progress lines");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on one scenario");
  std::string ckpt_path, scenario_name = "density1", csv_out, traj_out;
  int episodes = 10, repeats = 10;
  std::uint64_t seed = 0;
  double scale = kDefaultDensityScale;
  eval_cmd->add_option("--checkpoint", ckpt_path)->required();
  eval_cmd->add_option("--scenario", scenario_name);
  eval_cmd->add_option("--episodes", episodes);
  eval_cmd->add_option("--repeats", repeats);
  eval_cmd->add_option("--seed", seed);
  eval_cmd->add_option("--scale", scale, "Density scale for density1..density5");
  eval_cmd->add_option("--csv", csv_out, "Write the eval CSV here instead of stdout");
  eval_cmd->add_option("--trajectory", traj_out, "Dump the first episode as a trajectory CSV");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate over the five density scenarios");
  bool sweep_random = false;
  auto* sweep_ckpt = sweep_cmd->add_option("--checkpoint", ckpt_path);
  sweep_cmd->add_flag("--random", sweep_random, "Use the uniform-random policy instead of a checkpoint")
      ->excludes(sweep_ckpt);
  sweep_cmd->add_option("--scale", scale);
  sweep_cmd->add_option("--episodes", episodes);
  sweep_cmd->add_option("--repeats", repeats);
  sweep_cmd->add_option("--seed", seed);
  sweep_cmd->add_option("--config", config_path, "Config for --random runs");
  sweep_cmd->add_option("--csv", csv_out);

  // baseline
  auto* base_cmd = app.add_subcommand("baseline", "Uniform-random policy on one scenario");
  base_cmd->add_option("--scenario", scenario_name);
  base_cmd->add_option("--episodes", episodes);
  base_cmd->add_option("--repeats", repeats);
  base_cmd->add_option("--seed", seed);
  base_cmd->add_option("--scale", scale);
  base_cmd->add_option("--config", config_path);
  base_cmd->add_option("--csv", csv_out);
  base_cmd->add_option("--trajectory", traj_out);

  // gradcheck
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of backpropagation");
  int grad_seeds = 5;
  grad_cmd->add_option("--seeds", grad_seeds)->check(CLI::PositiveNumber);

  // replay
  auto* replay_cmd = app.add_subcommand("replay", "Print a trajectory as text frames");
  std::string replay_path;
  int every = 1;
  replay_cmd->add_option("--trajectory", replay_path)->required();
  replay_cmd->add_option("--every", every, "Print every n-th tick")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train_cmd) {
      RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
      if (train_seed) cfg.seed = *train_seed;
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      TrainOptions opt;
      opt.out_dir = std::filesystem::path(cfg.out_dir);
      if (!resume_path.empty()) opt.resume = load_checkpoint(resume_path);
      if (!quiet)
        opt.on_episode = [](const CurveRow& r) {
          std::printf("episode %d  steps %d  return %.2f  %s  ma50 %.2f\n", r.episode, r.steps, r.ret,
                      std::string(to_string(r.outcome)).c_str(), r.ma50_return);
          std::fflush(stdout);
        };
      const TrainResult res = train(cfg, cfg.seed, opt);
      std::printf("trained %zu episodes; outputs in %s\n", res.curve.size(), cfg.out_dir.c_str());
      return 0;
    }
    if (*eval_cmd) {
      const Checkpoint ck = load_checkpoint(ckpt_path);
      const Scenario sc = find_scenario(scenario_name, scale);
      std::vector<TrajectoryRecord> traj;
      const EvalReport r = evaluate(ck.config.env_config(), sc, actor_policy(ck.agent.actor()), episodes, repeats,
                                    seed, traj_out.empty() ? nullptr : &traj);
      if (!traj_out.empty()) write_file_atomic(traj_out, trajectory_csv(traj, ck.config.scenario.map.route));
      emit_csv(eval_csv({r}), csv_out);
      if (!csv_out.empty()) print_report(r);
      return 0;
    }
    if (*sweep_cmd) {
      if (!sweep_random && ckpt_path.empty()) throw Error("sweep: pass --checkpoint F or --random");
      EnvConfig env;
      Policy policy;
      if (sweep_random) {
        env = (config_path.empty() ? RunConfig{} : load_config(config_path)).env_config();
        policy = random_policy();
      } else {
        const Checkpoint ck = load_checkpoint(ckpt_path);
        env = ck.config.env_config();
        policy = actor_policy(ck.agent.actor());
      }
      const auto reports = sweep(env, density_table(scale), policy, episodes, repeats, seed);
      emit_csv(eval_csv(reports), csv_out);
      if (!csv_out.empty())
        for (const auto& r : reports) print_report(r);
      return 0;
    }
    if (*base_cmd) {
      const RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
      const Scenario sc = find_scenario(scenario_name, scale);
      std::vector<TrajectoryRecord> traj;
      const EvalReport r = evaluate(cfg.env_config(), sc, random_policy(), episodes, repeats, seed,
                                    traj_out.empty() ? nullptr : &traj);
      if (!traj_out.empty()) write_file_atomic(traj_out, trajectory_csv(traj, cfg.scenario.map.route));
      emit_csv(eval_csv({r}), csv_out);
      if (!csv_out.empty()) print_report(r);
      return 0;
    }
    if (*grad_cmd) return run_gradcheck(grad_seeds);
    if (*replay_cmd) {
      const auto frames = parse_trajectory(read_file(replay_path));
      std::optional<MapSpec> map;
      for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto& fr = frames[i];
        if (!map || map->route != fr.route) {
          MapOptions mo;
          mo.route = fr.route;
          map = make_map(mo);
        }
        if (i % static_cast<std::size_t>(every) == 0 || i + 1 == frames.size()) std::cout << render_frame(fr, *map) << '\n';
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
