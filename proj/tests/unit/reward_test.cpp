#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "tdrive/random.hpp"
#include "tdrive/reward.hpp"

using namespace tdrive;

namespace {

RewardInputs neutral() {
  RewardInputs in;
  in.d_pre = 10.0;
  in.d_cu = 10.0;
  in.v_speed = 0.0;
  in.v_limit = 8.33;
  return in;
}

}  // namespace

TEST(Reward, GoalBonusIsHundred) {
  auto in = neutral();
  in.reached_goal = true;
  const auto r = compute_reward(in);
  EXPECT_EQ(r.r5, 100.0);
  EXPECT_EQ(r.total, 100.0);
}

TEST(Reward, CollisionPenalty) {
  auto in = neutral();
  in.collided = true;
  in.c_collision = 100.0;
  EXPECT_EQ(compute_reward(in).total, -100.0);
  in.v_speed = 4.0;
  const auto r = compute_reward(in);
  EXPECT_EQ(r.r1, -100.0);
  EXPECT_DOUBLE_EQ(r.total, -100.0 + 0.05 * 4.0);
}

TEST(Reward, ProgressTerm) {
  auto in = neutral();
  in.d_pre = 50.0;
  in.d_cu = 48.5;
  EXPECT_EQ(compute_reward(in).r2, 1.5);
}

TEST(Reward, SpeedTermClamps) {
  auto in = neutral();
  in.v_speed = 12.0;
  EXPECT_EQ(compute_reward(in).r3, 8.33);
  in.v_speed = 3.0;
  EXPECT_EQ(compute_reward(in).r3, 3.0);
}

TEST(Reward, LaneTerm) {
  auto in = neutral();
  in.m_offroad = 0.5;
  in.m_otherlane = 0.25;
  EXPECT_EQ(compute_reward(in).r4, -0.75);
}

TEST(Reward, WithoutSpeedTermTotalIsTheFourTermSum) {
  RewardConfig cfg;
  cfg.include_speed_term = false;
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    RewardInputs in;
    in.collided = rng.bernoulli(0.3);
    in.reached_goal = rng.bernoulli(0.3);
    in.d_pre = rng.uniform(0, 60);
    in.d_cu = rng.uniform(0, 60);
    in.v_speed = rng.uniform(0, 20);
    in.m_offroad = rng.index(5) / 4.0;
    in.m_otherlane = rng.index(5) / 4.0;
    const auto r = compute_reward(in, cfg);
    EXPECT_EQ(r.total, r.r1 + r.r2 + r.r4 + r.r5);
    EXPECT_GE(r.r3, 0.0);
    EXPECT_LE(r.r3, in.v_limit);
  }
}

TEST(Reward, TotalMonotoneInDistanceAndLaneMeasures) {
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    RewardInputs in = neutral();
    in.d_pre = rng.uniform(0, 60);
    in.d_cu = rng.uniform(0, 59);
    in.v_speed = rng.uniform(0, 20);
    in.m_offroad = rng.index(4) / 4.0;
    in.m_otherlane = rng.index(4) / 4.0;
    const double base = compute_reward(in).total;
    auto further = in;
    further.d_cu += 1.0;
    EXPECT_LE(compute_reward(further).total, base);
    auto off = in;
    off.m_offroad += 0.25;
    EXPECT_LE(compute_reward(off).total, base);
    auto other = in;
    other.m_otherlane += 0.25;
    EXPECT_LE(compute_reward(other).total, base);
  }
}

TEST(Reward, RejectsInvalidInputs) {
  auto in = neutral();
  in.d_cu = -1.0;
  EXPECT_THROW(compute_reward(in), Error);
  in = neutral();
  in.d_pre = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(compute_reward(in), Error);
  in = neutral();
  in.v_limit = 0.0;
  EXPECT_THROW(compute_reward(in), Error);
}
