#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tdrive/env.hpp"
#include "tdrive/error.hpp"
#include "tdrive/io.hpp"
#include "tdrive/td3_agent.hpp"

namespace tdrive {

/// Everything a training or evaluation run needs. Defaults follow the
/// training table values where one exists, otherwise the documented
/// desk-scale choices.
struct RunConfig {
  td3::Td3Config td3;
  RewardConfig reward;
  ScenarioConfig scenario;
  ObservationMode observation_mode = ObservationMode::Vector;
  double v_limit = 8.33;
  double goal_radius = 2.0;
  std::string out_dir = "runs";
  std::uint64_t seed = 0;
  int checkpoint_every = 100;

  EnvConfig env_config() const {
    EnvConfig env;
    env.scenario = scenario;
    env.reward = reward;
    env.mode = observation_mode;
    env.max_steps = td3.max_steps;
    env.goal_radius = goal_radius;
    env.v_limit = v_limit;
    return env;
  }

  void validate() const {
    td3.validate();
    if (scenario.veh < 0) throw Error("config: veh must be >= 0");
    if (scenario.ped < 0) throw Error("config: ped must be >= 0");
    if (!(scenario.dt > 0.0)) throw Error("config: dt must be positive");
    if (!(v_limit > 0.0)) throw Error("config: v_limit must be positive");
    if (!(goal_radius > 0.0)) throw Error("config: goal_radius must be positive");
    if (!(reward.c_collision > 0.0)) throw Error("config: c_collision must be positive");
    if (!(scenario.crosswalk_fraction >= 0.0 && scenario.crosswalk_fraction <= 1.0))
      throw Error("config: crosswalk_fraction must lie in [0, 1]");
    if (checkpoint_every <= 0) throw Error("config: checkpoint_every must be positive");
    if (td3.hidden_sizes.empty()) throw Error("config: hidden_layers must be at least 1");
    if (std::adjacent_find(td3.hidden_sizes.begin(), td3.hidden_sizes.end(), std::not_equal_to<>()) !=
        td3.hidden_sizes.end())
      throw Error("config: hidden layers must share one width (hidden_size)");
  }
};

namespace detail {

using nlohmann::json;

struct ConfigField {
  const char* key;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

inline double as_number(const json& v, const char* key) {
  if (!v.is_number()) throw Error(std::string("config key '") + key + "': expected a number");
  return v.get<double>();
}

inline std::int64_t as_integer(const json& v, const char* key) {
  if (!v.is_number_integer()) throw Error(std::string("config key '") + key + "': expected an integer");
  return v.get<std::int64_t>();
}

inline int as_int(const json& v, const char* key) {
  const auto x = as_integer(v, key);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    throw Error(std::string("config key '") + key + "': out of range");
  return static_cast<int>(x);
}

inline bool as_bool(const json& v, const char* key) {
  if (!v.is_boolean()) throw Error(std::string("config key '") + key + "': expected true or false");
  return v.get<bool>();
}

inline std::string as_string(const json& v, const char* key) {
  if (!v.is_string()) throw Error(std::string("config key '") + key + "': expected a string");
  return v.get<std::string>();
}

#define TDRIVE_NUM(name, member) \
  {name, [](const RunConfig& c) { return json(c.member); }, [](RunConfig& c, const json& v) { c.member = as_number(v, name); }}
#define TDRIVE_INT(name, member) \
  {name, [](const RunConfig& c) { return json(c.member); }, [](RunConfig& c, const json& v) { c.member = as_int(v, name); }}
#define TDRIVE_BOOL(name, member) \
  {name, [](const RunConfig& c) { return json(c.member); }, [](RunConfig& c, const json& v) { c.member = as_bool(v, name); }}

inline const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = {
      TDRIVE_NUM("gamma", td3.gamma),
      TDRIVE_NUM("lr", td3.lr),
      TDRIVE_INT("batch", td3.batch),
      TDRIVE_NUM("exploration_noise_sigma", td3.exploration_noise_sigma),
      TDRIVE_INT("exploration_steps", td3.exploration_steps),
      TDRIVE_INT("policy_delay", td3.policy_delay),
      TDRIVE_NUM("tau", td3.tau),
      TDRIVE_NUM("target_noise_sigma", td3.target_noise_sigma),
      TDRIVE_NUM("target_noise_clip", td3.target_noise_clip),
      TDRIVE_INT("episodes", td3.episodes),
      TDRIVE_INT("max_steps", td3.max_steps),
      TDRIVE_INT("replay_capacity", td3.replay_capacity),
      TDRIVE_NUM("actor_final_scale", td3.actor_final_scale),
      {"hidden_size",
       [](const RunConfig& c) { return json(c.td3.hidden_sizes.empty() ? 0 : c.td3.hidden_sizes.front()); },
       [](RunConfig& c, const json& v) {
         const int h = as_int(v, "hidden_size");
         for (int& s : c.td3.hidden_sizes) s = h;
       }},
      {"hidden_layers", [](const RunConfig& c) { return json(c.td3.hidden_sizes.size()); },
       [](RunConfig& c, const json& v) {
         const int n = as_int(v, "hidden_layers");
         if (n < 1) throw Error("config key 'hidden_layers': must be at least 1");
         const int h = c.td3.hidden_sizes.empty() ? 256 : c.td3.hidden_sizes.front();
         c.td3.hidden_sizes.assign(static_cast<std::size_t>(n), h);
       }},
      TDRIVE_NUM("c_collision", reward.c_collision),
      TDRIVE_NUM("goal_bonus", reward.goal_bonus),
      TDRIVE_BOOL("include_speed_term", reward.include_speed_term),
      TDRIVE_NUM("speed_weight", reward.speed_weight),
      TDRIVE_NUM("v_limit", v_limit),
      TDRIVE_NUM("goal_radius", goal_radius),
      TDRIVE_INT("veh", scenario.veh),
      TDRIVE_INT("ped", scenario.ped),
      {"route", [](const RunConfig& c) { return json(std::string(to_string(c.scenario.map.route))); },
       [](RunConfig& c, const json& v) { c.scenario.map.route = parse_route(as_string(v, "route")); }},
      TDRIVE_NUM("dt", scenario.dt),
      TDRIVE_NUM("lane_width", scenario.map.lane_width),
      TDRIVE_NUM("arm_length_west", scenario.map.arm_lengths[0]),
      TDRIVE_NUM("arm_length_east", scenario.map.arm_lengths[1]),
      TDRIVE_NUM("arm_length_south", scenario.map.arm_lengths[2]),
      TDRIVE_NUM("approach_length", scenario.map.approach_length),
      TDRIVE_NUM("exit_length", scenario.map.exit_length),
      TDRIVE_NUM("traffic_speed_limit", scenario.traffic_speed_limit),
      TDRIVE_NUM("ego_initial_speed", scenario.ego_initial_speed),
      TDRIVE_NUM("crosswalk_fraction", scenario.crosswalk_fraction),
      TDRIVE_NUM("a_max", scenario.vehicle.a_max),
      TDRIVE_NUM("b_max", scenario.vehicle.b_max),
      TDRIVE_NUM("c_drag", scenario.vehicle.c_drag),
      TDRIVE_NUM("wheelbase", scenario.vehicle.wheelbase),
      TDRIVE_NUM("max_steer_deg", scenario.vehicle.max_steer_deg),
      TDRIVE_NUM("v_cap", scenario.vehicle.v_cap),
      {"observation_mode", [](const RunConfig& c) { return json(std::string(to_string(c.observation_mode))); },
       [](RunConfig& c, const json& v) {
         c.observation_mode = parse_observation_mode(as_string(v, "observation_mode"));
       }},
      {"out_dir", [](const RunConfig& c) { return json(c.out_dir); },
       [](RunConfig& c, const json& v) { c.out_dir = as_string(v, "out_dir"); }},
      {"seed", [](const RunConfig& c) { return json(c.seed); },
       [](RunConfig& c, const json& v) {
         const auto s = as_integer(v, "seed");
         if (s < 0) throw Error("config key 'seed': must be >= 0");
         c.seed = static_cast<std::uint64_t>(s);
       }},
      TDRIVE_INT("checkpoint_every", checkpoint_every),
  };
  return fields;
}

#undef TDRIVE_NUM
#undef TDRIVE_INT
#undef TDRIVE_BOOL

}  // namespace detail

/// Flat JSON object with every key, sorted; the canonical form.
inline nlohmann::json config_to_json(const RunConfig& cfg) {
  cfg.validate();
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : detail::config_fields()) j[f.key] = f.get(cfg);
  return j;
}

/// Applies a flat JSON object on top of the defaults. Unknown keys and
/// type mismatches are errors naming the key.
inline RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error("config: top level must be a JSON object");
  RunConfig cfg;
  const auto& fields = detail::config_fields();
  for (const auto& [key, value] : j.items()) {
    const auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return key == f.key; });
    if (it == fields.end()) throw Error("config: unknown key '" + key + "'");
    it->set(cfg, value);
  }
  cfg.validate();
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config file '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("config file '" + path.string() + "': " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const Error& e) {
    throw Error("config file '" + path.string() + "': " + e.what());
  }
}

inline std::string config_to_string(const RunConfig& cfg) { return config_to_json(cfg).dump(2) + "\n"; }

inline void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
  write_file_atomic(path, config_to_string(cfg));
}

}  // namespace tdrive
