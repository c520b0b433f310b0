#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "tdrive/checkpoint.hpp"
#include "tdrive/config.hpp"
#include "tdrive/env.hpp"
#include "tdrive/io.hpp"
#include "tdrive/td3_agent.hpp"

namespace tdrive {

// ---------------------------------------------------------------------------
// Policies

/// Maps an observation to a raw action in [-1,1]^3. The Rng is per episode.
using Policy = std::function<td3::RawAction(const Observation&, Rng&)>;

inline Policy actor_policy(td3::Net actor) {
  return [net = std::move(actor)](const Observation& obs, Rng&) {
    const nn::FlushDenormals ftz;
    const auto out = net.forward(obs);
    return td3::RawAction{std::clamp(out[0], -1.0, 1.0), std::clamp(out[1], -1.0, 1.0),
                          std::clamp(out[2], -1.0, 1.0)};
  };
}

inline Policy random_policy() {
  return [](const Observation&, Rng& rng) {
    return td3::RawAction{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  };
}

/// Zero throttle, straight wheel, full brake.
inline Policy braking_policy() {
  return [](const Observation&, Rng&) { return td3::RawAction{-1.0, 0.0, 1.0}; };
}

// ---------------------------------------------------------------------------
// Scenarios

struct Scenario {
  std::string name;
  int ped = 0;
  int veh = 0;
};

inline constexpr double kDefaultDensityScale = 1.0 / 25.0;

/// Five (ped, veh) density pairs scaled by k and rounded up.
inline std::vector<Scenario> density_table(double k = kDefaultDensityScale) {
  if (!(k > 0.0)) throw Error("density scale must be positive");
  static constexpr int base[5] = {100, 200, 300, 400, 450};
  std::vector<Scenario> out;
  for (int i = 0; i < 5; ++i) {
    // The tolerance keeps products such as 100 * (1/25) from rounding up past 4.
    const int n = static_cast<int>(std::ceil(base[i] * k - 1e-9));
    out.push_back({"density" + std::to_string(i + 1), n, n});
  }
  return out;
}

/// Named scenarios: density1..density5 (scaled by k), empty, desk, or
/// "pedP_vehV" for explicit counts.
inline Scenario find_scenario(const std::string& name, double k = kDefaultDensityScale) {
  for (const auto& s : density_table(k))
    if (s.name == name) return s;
  if (name == "empty") return {name, 0, 0};
  if (name == "desk") return {name, 2, 4};
  static const std::regex custom(R"(ped(\d+)_veh(\d+))");
  std::smatch m;
  if (std::regex_match(name, m, custom)) return {name, std::stoi(m[1]), std::stoi(m[2])};
  throw Error("unknown scenario '" + name + "' (expected density1..density5, empty, desk or pedP_vehV)");
}

inline EnvConfig with_scenario(EnvConfig env, const Scenario& s) {
  env.scenario.ped = s.ped;
  env.scenario.veh = s.veh;
  return env;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EpisodeResult {
  int steps = 0;
  DoneKind outcome = DoneKind::Running;
  double ret = 0.0;
  int collisions = 0;
  double travel_delay = 0.0;  // s; capped at max_steps * dt unless the goal was reached
};

struct EvalReport {
  std::string scenario;
  int episodes = 0;
  int repeats = 0;
  std::vector<double> repeat_delay;       // mean travel delay per repeat, s
  std::vector<double> repeat_collisions;  // mean collisions per episode per repeat
  std::vector<double> repeat_goal_rate;
  double mean_delay = 0.0;
  double ci95_delay = 0.0;
  double mean_collisions = 0.0;
  double ci95_collisions = 0.0;
  double mean_goal_rate = 0.0;
  double ci95_goal_rate = 0.0;
  std::vector<EpisodeResult> results;  // repeat-major
};

struct MeanCi {
  double mean = 0.0;
  double half_width = 0.0;
};

/// Mean and 1.96 * sample sd / sqrt(n).
inline MeanCi mean_ci95(const std::vector<double>& xs) {
  if (xs.size() < 2) throw Error("confidence interval needs at least 2 repeats");
  const double n = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return {mean, 1.96 * sd / std::sqrt(n)};
}

inline std::uint64_t episode_env_seed(std::uint64_t seed, std::uint64_t index) {
  return mix_seed(seed ^ 0xE7A1ULL, 2 * index);
}
inline std::uint64_t episode_policy_seed(std::uint64_t seed, std::uint64_t index) {
  return mix_seed(seed ^ 0xE7A1ULL, 2 * index + 1);
}

inline EpisodeResult run_episode(Environment& env, const Policy& policy, std::uint64_t env_seed, Rng& policy_rng) {
  Observation obs = env.reset(env_seed);
  EpisodeResult r;
  while (true) {
    const auto raw = policy(obs, policy_rng);
    const StepOutcome out = env.step(Action::from_raw(raw));
    r.ret += out.reward.total;
    ++r.steps;
    obs = out.observation;
    if (is_terminal(out.done_kind)) {
      r.outcome = out.done_kind;
      break;
    }
  }
  const double dt = env.config().scenario.dt;
  r.collisions = r.outcome == DoneKind::Collision ? 1 : 0;
  r.travel_delay = r.outcome == DoneKind::Goal ? r.steps * dt : env.config().max_steps * dt;
  return r;
}

/// Runs `repeats` blocks of `episodes` greedy episodes and aggregates per
/// repeat means with 95% confidence half-widths.
inline EvalReport evaluate(const EnvConfig& base, const Scenario& scenario, const Policy& policy, int episodes,
                           int repeats, std::uint64_t seed,
                           std::vector<TrajectoryRecord>* first_trajectory = nullptr) {
  if (episodes < 1) throw Error("evaluate: episodes must be at least 1");
  if (repeats < 2) throw Error("evaluate: repeats must be at least 2 for a confidence interval");
  EnvConfig cfg = with_scenario(base, scenario);
  EvalReport report;
  report.scenario = scenario.name;
  report.episodes = episodes;
  report.repeats = repeats;
  for (int rep = 0; rep < repeats; ++rep) {
    double delay = 0.0;
    double collisions = 0.0;
    double goals = 0.0;
    for (int ep = 0; ep < episodes; ++ep) {
      const auto index = static_cast<std::uint64_t>(rep) * static_cast<std::uint64_t>(episodes) +
                         static_cast<std::uint64_t>(ep);
      cfg.record_trajectory = first_trajectory != nullptr && index == 0;
      Environment env(cfg);
      Rng policy_rng(episode_policy_seed(seed, index));
      const EpisodeResult r = run_episode(env, policy, episode_env_seed(seed, index), policy_rng);
      if (cfg.record_trajectory) *first_trajectory = env.trajectory();
      delay += r.travel_delay;
      collisions += r.collisions;
      goals += r.outcome == DoneKind::Goal ? 1.0 : 0.0;
      report.results.push_back(r);
    }
    report.repeat_delay.push_back(delay / episodes);
    report.repeat_collisions.push_back(collisions / episodes);
    report.repeat_goal_rate.push_back(goals / episodes);
  }
  const MeanCi d = mean_ci95(report.repeat_delay);
  const MeanCi c = mean_ci95(report.repeat_collisions);
  const MeanCi g = mean_ci95(report.repeat_goal_rate);
  report.mean_delay = d.mean;
  report.ci95_delay = d.half_width;
  report.mean_collisions = c.mean;
  report.ci95_collisions = c.half_width;
  report.mean_goal_rate = g.mean;
  report.ci95_goal_rate = g.half_width;
  return report;
}

inline std::vector<EvalReport> sweep(const EnvConfig& base, const std::vector<Scenario>& table, const Policy& policy,
                                     int episodes, int repeats, std::uint64_t seed) {
  std::vector<EvalReport> out;
  out.reserve(table.size());
  for (const auto& s : table) out.push_back(evaluate(base, s, policy, episodes, repeats, seed));
  return out;
}

inline EvalReport random_baseline(const EnvConfig& base, const Scenario& scenario, int episodes, int repeats,
                                  std::uint64_t seed) {
  return evaluate(base, scenario, random_policy(), episodes, repeats, seed);
}

// ---------------------------------------------------------------------------
// CSV output

inline std::string eval_csv_header() {
  return "scenario,repeat,mean_delay_s,mean_collisions,ci95_delay_s,ci95_collisions\n";
}

/// One row per repeat, then a summary row (repeat = "all") carrying the
/// overall means and 95% half-widths.
inline std::string eval_csv_rows(const EvalReport& r) {
  std::ostringstream out;
  for (int i = 0; i < r.repeats; ++i)
    out << r.scenario << ',' << i << ',' << format_double(r.repeat_delay[static_cast<std::size_t>(i)]) << ','
        << format_double(r.repeat_collisions[static_cast<std::size_t>(i)]) << ",,\n";
  out << r.scenario << ",all," << format_double(r.mean_delay) << ',' << format_double(r.mean_collisions) << ','
      << format_double(r.ci95_delay) << ',' << format_double(r.ci95_collisions) << '\n';
  return out.str();
}

inline std::string eval_csv(const std::vector<EvalReport>& reports) {
  std::string out = eval_csv_header();
  for (const auto& r : reports) out += eval_csv_rows(r);
  return out;
}

struct CurveRow {
  int episode = 0;
  int steps = 0;
  double ret = 0.0;
  DoneKind outcome = DoneKind::Running;
  double ma50_return = 0.0;
};

inline constexpr int kMovingAverageWindow = 50;

inline std::string curve_csv(const std::vector<CurveRow>& rows) {
  std::ostringstream out;
  out << "episode,steps,return,outcome,ma50_return\n";
  for (const auto& r : rows)
    out << r.episode << ',' << r.steps << ',' << format_double(r.ret) << ',' << to_string(r.outcome) << ','
        << format_double(r.ma50_return) << '\n';
  return out.str();
}

inline std::string trajectory_csv(const std::vector<TrajectoryRecord>& rows, Route route) {
  std::ostringstream out;
  out << "tick,x,y,heading,speed,throttle,steer,brake,r1,r2,r3,r4,r5,total,done_kind,route,others\n";
  for (const auto& r : rows) {
    out << r.tick << ',' << format_double(r.ego.position.x) << ',' << format_double(r.ego.position.y) << ','
        << format_double(r.ego.heading) << ',' << format_double(r.speed) << ',' << format_double(r.action.throttle)
        << ',' << format_double(r.action.steer) << ',' << format_double(r.action.brake) << ','
        << format_double(r.reward.r1) << ',' << format_double(r.reward.r2) << ',' << format_double(r.reward.r3)
        << ',' << format_double(r.reward.r4) << ',' << format_double(r.reward.r5) << ','
        << format_double(r.reward.total) << ',' << to_string(r.done_kind) << ',' << to_string(route) << ',';
    for (std::size_t i = 0; i < r.others.size(); ++i) {
      if (i) out << ';';
      out << r.others[i].first << ':' << format_double(r.others[i].second.x) << ':'
          << format_double(r.others[i].second.y);
    }
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Training

struct TrainResult {
  std::vector<CurveRow> curve;
  Checkpoint checkpoint;
  std::vector<std::filesystem::path> written;
};

struct TrainOptions {
  std::optional<std::filesystem::path> out_dir;  // no files when empty
  std::optional<Checkpoint> resume;
  std::function<void(const CurveRow&)> on_episode;
};

inline std::uint64_t training_env_seed(std::uint64_t seed, int episode) {
  return mix_seed(seed ^ 0x7A11ULL, static_cast<std::uint64_t>(episode));
}

/// Episode loop: warm-up with uniform actions for the first
/// exploration_steps environment steps, then noisy actor actions; one
/// train_step per environment step once the warm-up is over and the buffer
/// holds a batch.
inline TrainResult train(const RunConfig& cfg, std::uint64_t seed, const TrainOptions& opt = {}) {
  cfg.validate();
  const EnvConfig env_cfg = cfg.env_config();
  Environment env(env_cfg);
  const int obs_size = env.observation_size();

  TrainResult result;
  Checkpoint& ck = result.checkpoint;
  std::vector<double> returns;
  if (opt.resume) {
    ck = *opt.resume;
    if (ck.agent.state_size() != obs_size) throw Error("train: checkpoint observation size does not match config");
    ck.config = cfg;
  } else {
    ck.config = cfg;
    ck.agent = td3::Td3Agent(obs_size, cfg.td3, mix_seed(seed, 0xA6E7ULL));
  }
  td3::Td3Agent& agent = ck.agent;
  td3::ReplayBuffer buffer(static_cast<std::size_t>(cfg.td3.replay_capacity), obs_size);

  auto write_outputs = [&](const std::string& ckpt_name) {
    if (!opt.out_dir) return;
    const auto ck_path = *opt.out_dir / ckpt_name;
    save_checkpoint(ck, ck_path);
    write_file_atomic(*opt.out_dir / "curve.csv", curve_csv(result.curve));
    result.written.push_back(ck_path);
  };
  if (opt.out_dir) {
    std::filesystem::create_directories(*opt.out_dir);
    save_config(cfg, *opt.out_dir / "config.json");
  }

  for (int ep = ck.episodes_done; ep < cfg.td3.episodes; ++ep) {
    Observation obs = env.reset(training_env_seed(seed, ep));
    CurveRow row;
    row.episode = ep;
    while (true) {
      const td3::RawAction raw = agent.behaviour_action(obs, ck.env_steps);
      StepOutcome out = env.step(Action::from_raw(raw));
      ++ck.env_steps;
      row.ret += out.reward.total;
      ++row.steps;
      buffer.push({obs, raw, out.reward.total, out.observation, out.done_kind});
      if (td3::learning_enabled(cfg.td3, ck.env_steps, buffer.size())) agent.train_step(buffer);
      obs = std::move(out.observation);
      if (is_terminal(out.done_kind)) {
        row.outcome = out.done_kind;
        break;
      }
    }
    returns.push_back(row.ret);
    const std::size_t window = std::min<std::size_t>(kMovingAverageWindow, returns.size());
    double sum = 0.0;
    for (std::size_t i = returns.size() - window; i < returns.size(); ++i) sum += returns[i];
    row.ma50_return = sum / static_cast<double>(window);
    result.curve.push_back(row);
    ck.episodes_done = ep + 1;
    if (opt.on_episode) opt.on_episode(row);
    if (ck.episodes_done % cfg.checkpoint_every == 0)
      write_outputs("checkpoint_ep" + std::to_string(ck.episodes_done) + ".json");
  }
  write_outputs("checkpoint.json");
  return result;
}

}  // namespace tdrive
