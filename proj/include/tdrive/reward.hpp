#pragma once

#include <algorithm>
#include <cmath>

#include "tdrive/error.hpp"

namespace tdrive {

struct RewardInputs {
  bool collided = false;
  bool reached_goal = false;
  double d_pre = 0.0;  // distance to goal at the previous tick, m
  double d_cu = 0.0;   // current distance to goal, m
  double v_speed = 0.0;
  double v_limit = 8.33;
  double m_offroad = 0.0;
  double m_otherlane = 0.0;
  double c_collision = 100.0;
};

struct RewardConfig {
  double c_collision = 100.0;  // copied into RewardInputs by the environment
  double goal_bonus = 100.0;
  bool include_speed_term = true;
  double speed_weight = 0.05;
};

struct RewardBreakdown {
  double r1 = 0.0;  // collision penalty
  double r2 = 0.0;  // progress towards the goal
  double r3 = 0.0;  // clamped speed
  double r4 = 0.0;  // lane keeping penalty
  double r5 = 0.0;  // goal bonus
  double total = 0.0;

  friend bool operator==(const RewardBreakdown&, const RewardBreakdown&) = default;
};

inline RewardBreakdown compute_reward(const RewardInputs& in, const RewardConfig& cfg = {}) {
  auto finite = [](double x) { return std::isfinite(x); };
  if (!finite(in.d_pre) || !finite(in.d_cu) || !finite(in.v_speed) || !finite(in.v_limit) ||
      !finite(in.m_offroad) || !finite(in.m_otherlane) || !finite(in.c_collision))
    throw Error("compute_reward: non-finite input");
  if (in.d_pre < 0.0 || in.d_cu < 0.0) throw Error("compute_reward: negative distance");
  if (in.v_speed < 0.0) throw Error("compute_reward: negative speed");
  if (!(in.v_limit > 0.0)) throw Error("compute_reward: v_limit must be positive");
  if (in.m_offroad < 0.0 || in.m_offroad > 1.0 || in.m_otherlane < 0.0 || in.m_otherlane > 1.0)
    throw Error("compute_reward: lane measures must lie in [0, 1]");
  if (!(in.c_collision > 0.0)) throw Error("compute_reward: c_collision must be positive");

  RewardBreakdown out;
  out.r1 = in.collided ? -in.c_collision : 0.0;
  out.r2 = in.d_pre - in.d_cu;
  out.r3 = std::max(0.0, std::min(in.v_speed, in.v_limit));
  out.r4 = -in.m_offroad - in.m_otherlane;
  out.r5 = in.reached_goal ? cfg.goal_bonus : 0.0;
  out.total = out.r1 + out.r2 + out.r4 + out.r5;
  if (cfg.include_speed_term) out.total += cfg.speed_weight * out.r3;
  return out;
}

}  // namespace tdrive
