#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "tdrive/env.hpp"
#include "tdrive/random.hpp"

using namespace tdrive;

namespace {

EnvConfig desk(ObservationMode mode = ObservationMode::Vector, int veh = 4, int ped = 2) {
  EnvConfig cfg;
  cfg.mode = mode;
  cfg.scenario.veh = veh;
  cfg.scenario.ped = ped;
  return cfg;
}

bool all_finite(const Observation& o) {
  for (double x : o)
    if (!std::isfinite(x)) return false;
  return true;
}

// Parks the ego 1 m short of the goal, facing along the exit lane.
void park_near_goal(Environment& env) {
  auto& w = env.mutable_world();
  const MapSpec& m = *w.map;
  const auto proj = m.waypoints.project(m.goal_point);
  w.ego.heading = proj.tangent_heading;
  w.ego.position = m.goal_point - unit_from_heading(proj.tangent_heading);
  w.ego.speed = 0.0;
}

}  // namespace

TEST(Action, ClampsOnConstruction) {
  const Action a(1.4, -2.0, 0.3);
  EXPECT_EQ(a.throttle, 1.0);
  EXPECT_EQ(a.steer, -1.0);
  EXPECT_EQ(a.brake, 0.3);
  const Action b(-0.5, 3.0, 7.0);
  EXPECT_EQ(b.throttle, 0.0);
  EXPECT_EQ(b.steer, 1.0);
  EXPECT_EQ(b.brake, 1.0);
}

TEST(Env, ResetIsDeterministic) {
  Environment a(desk()), b(desk());
  EXPECT_EQ(a.reset(17), b.reset(17));
  EXPECT_EQ(a.reset(17), a.reset(17));
  EXPECT_NE(a.reset(17), a.reset(18));
}

TEST(Env, VectorObservationZeroFillsEmptySlots) {
  Environment env(desk(ObservationMode::Vector, 0, 0));
  const Observation o = env.reset(1);
  ASSERT_EQ(o.size(), 45u);
  for (std::size_t i = 5; i < 45; ++i) EXPECT_EQ(o[i], 0.0) << i;
  EXPECT_DOUBLE_EQ(o[0], 1.0);  // starts at the speed limit
  EXPECT_DOUBLE_EQ(o[1], 1.0);  // aligned with the route
  EXPECT_DOUBLE_EQ(o[4], 1.0);  // full route ahead
}

TEST(Env, VectorObservationKindCodes) {
  Environment env(desk(ObservationMode::Vector, 3, 3));
  const Observation o = env.reset(5);
  int cars = 0, twos = 0, peds = 0;
  for (int k = 0; k < 8; ++k) {
    const double code = o[5 + 5 * k + 4];
    cars += code == 1.0;
    twos += code == 0.5;
    peds += code == -1.0;
  }
  EXPECT_EQ(cars + twos, 3);
  EXPECT_EQ(peds, 3);
}

TEST(Env, GridObservationShapeAndRange) {
  Environment env(desk(ObservationMode::Grid));
  const Observation o = env.reset(2);
  ASSERT_EQ(o.size(), 1764u);
  for (double x : o) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
  // Reset replicates the first frame.
  for (int f = 1; f < 4; ++f)
    for (int i = 0; i < 441; ++i) ASSERT_EQ(o[f * 441 + i], o[i]);
}

TEST(Env, GridStackShiftsByOneFrame) {
  Environment env(desk(ObservationMode::Grid, 8, 4));
  Observation prev = env.reset(3);
  for (int t = 0; t < 30 && !env.done(); ++t) {
    const StepOutcome out = env.step(Action(0.5, 0.0, 0.0));
    for (int i = 0; i < 3 * 441; ++i) ASSERT_EQ(out.observation[i], prev[441 + i]) << "t " << t;
    ASSERT_EQ(out.observation.size(), 1764u);
    prev = out.observation;
  }
}

TEST(Env, GridMarksOccupiedCells) {
  Environment env(desk(ObservationMode::Grid, 0, 0));
  env.reset(1);
  PedestrianState ped;
  ped.position = env.world().ego.position + 10.0 * unit_from_heading(env.world().ego.heading);
  ped.path = Polyline({ped.position, ped.position + Vec2{1.0, 0.0}});
  ped.paused = true;
  env.mutable_world().pedestrians.push_back(ped);
  const auto frame = occupancy_frame(env.world());
  double sum = 0.0;
  for (double x : frame) sum += x;
  EXPECT_GT(sum, 0.0);
}

TEST(Env, TimeoutAtStepCap) {
  Environment env(desk(ObservationMode::Vector, 0, 0));
  env.reset(1);
  StepOutcome out;
  int steps = 0;
  while (!env.done()) {
    out = env.step(Action(0.0, 0.0, 1.0));
    ++steps;
    if (steps < 500) {
      ASSERT_EQ(out.done_kind, DoneKind::Running);
    }
  }
  EXPECT_EQ(steps, 500);
  EXPECT_EQ(out.done_kind, DoneKind::Timeout);
  EXPECT_EQ(out.info.tick, 500);
  EXPECT_THROW(env.step(Action{}), Error);
}

TEST(Env, GoalWithinRadius) {
  Environment env(desk(ObservationMode::Vector, 0, 0));
  env.reset(1);
  park_near_goal(env);
  const StepOutcome out = env.step(Action{});
  EXPECT_EQ(out.done_kind, DoneKind::Goal);
  EXPECT_EQ(out.reward.r5, 100.0);
  EXPECT_GE(out.reward.total, 99.0);
}

TEST(Env, CollisionBeatsGoalOnTheSameTick) {
  Environment env(desk(ObservationMode::Vector, 0, 0));
  env.reset(1);
  park_near_goal(env);
  PedestrianState ped;
  ped.position = env.world().ego.position;
  ped.path = Polyline({ped.position, ped.position + Vec2{0.0, 1.0}});
  ped.paused = true;
  env.mutable_world().pedestrians.push_back(ped);
  const StepOutcome out = env.step(Action{});
  EXPECT_EQ(out.done_kind, DoneKind::Collision);
  EXPECT_EQ(out.reward.r5, 0.0);
  EXPECT_EQ(out.reward.r1, -100.0);
}

TEST(Env, StepBeforeResetIsAnError) {
  Environment env(desk());
  EXPECT_THROW(env.step(Action{}), Error);
}

TEST(RouteDistance, EndpointsAndMidVertex) {
  const MapSpec m = make_map(MapOptions{});
  EXPECT_EQ(route_distance(m.goal_point, m), 0.0);
  EXPECT_DOUBLE_EQ(route_distance(m.spawn_point.position, m), m.waypoints.length());
  const auto& pts = m.waypoints.points();
  const std::size_t mid = pts.size() / 2;
  double tail = 0.0;
  for (std::size_t i = mid; i + 1 < pts.size(); ++i) tail += distance(pts[i], pts[i + 1]);
  EXPECT_NEAR(route_distance(pts[mid], m), tail, 1e-9);
}

TEST(RouteDistance, DecreasesAlongTheRoute) {
  const MapSpec m = make_map(MapOptions{});
  double prev = route_distance(m.spawn_point.position, m);
  for (double s = 0.25; s <= m.waypoints.length(); s += 0.25) {
    const double d = route_distance(m.waypoints.point_at(s), m);
    EXPECT_LT(d, prev);
    prev = d;
  }
}

TEST(Env, RandomActionFuzzStaysFinite) {
  EnvConfig cfg = desk(ObservationMode::Vector, 10, 4);
  Environment env(cfg);
  Rng rng(77);
  std::uint64_t seed = 0;
  env.reset(seed);
  const double d0 = env.initial_distance();
  int episode_steps = 0, terminals = 0;
  for (int i = 0; i < 100000; ++i) {
    const StepOutcome out = env.step(Action(rng.uniform(), rng.uniform(-1, 1), rng.uniform()));
    ++episode_steps;
    ASSERT_TRUE(all_finite(out.observation)) << "step " << i;
    ASSERT_TRUE(std::isfinite(out.reward.total));
    ASSERT_LE(out.info.d_cu, d0 + 10.0);
    ASSERT_LE(episode_steps, 500);
    if (env.done()) {
      ASSERT_TRUE(is_terminal(out.done_kind));
      ++terminals;
      episode_steps = 0;
      env.reset(++seed);
    } else {
      ASSERT_EQ(out.done_kind, DoneKind::Running);
    }
  }
  EXPECT_GT(terminals, 0);
}

TEST(Env, RecordsTrajectoryWhenAsked) {
  EnvConfig cfg = desk();
  cfg.record_trajectory = true;
  Environment env(cfg);
  env.reset(4);
  for (int i = 0; i < 5 && !env.done(); ++i) env.step(Action(0.3, 0.0, 0.0));
  ASSERT_FALSE(env.trajectory().empty());
  EXPECT_EQ(env.trajectory().front().tick, 1);
  EXPECT_EQ(env.trajectory().front().others.size(), 6u);
}
