#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tdrive/action.hpp"
#include "tdrive/done_kind.hpp"
#include "tdrive/error.hpp"
#include "tdrive/reward.hpp"
#include "tdrive/world.hpp"

namespace tdrive {

using Observation = std::vector<double>;

enum class ObservationMode { Vector, Grid };

inline std::string_view to_string(ObservationMode mode) {
  return mode == ObservationMode::Vector ? "vector" : "grid";
}

inline ObservationMode parse_observation_mode(std::string_view text) {
  if (text == "vector") return ObservationMode::Vector;
  if (text == "grid") return ObservationMode::Grid;
  throw Error("unknown observation mode '" + std::string(text) + "' (expected vector or grid)");
}

inline constexpr int kObservedUsers = 8;
inline constexpr int kUserFeatures = 5;
inline constexpr int kEgoFeatures = 5;
inline constexpr int kVectorObservationSize = kEgoFeatures + kObservedUsers * kUserFeatures;  // 45

inline constexpr int kGridCells = 84;
inline constexpr int kPool = 4;
inline constexpr int kPooledCells = kGridCells / kPool;  // 21
inline constexpr int kFrameStack = 4;
inline constexpr int kPooledFrameSize = kPooledCells * kPooledCells;
inline constexpr int kGridObservationSize = kFrameStack * kPooledFrameSize;  // 1764
inline constexpr double kGridResolution = 0.5;    // m per raw cell
inline constexpr double kGridBehind = 10.0;       // m of view behind the ego centre
inline constexpr double kRelativeScale = 30.0;    // m

inline int observation_size(ObservationMode mode) {
  return mode == ObservationMode::Vector ? kVectorObservationSize : kGridObservationSize;
}

struct EnvConfig {
  ScenarioConfig scenario;
  RewardConfig reward;
  ObservationMode mode = ObservationMode::Vector;
  int max_steps = 500;
  double goal_radius = 2.0;
  double v_limit = 8.33;
  bool record_trajectory = false;
};

struct StepInfo {
  std::int64_t tick = 0;
  double d_cu = 0.0;
  double ego_speed = 0.0;
};

struct StepOutcome {
  Observation observation;
  RewardBreakdown reward;
  DoneKind done_kind = DoneKind::Running;
  StepInfo info;
  std::optional<CollisionEvent> collision;
};

/// One row of the trajectory dump consumed by the replay command.
struct TrajectoryRecord {
  std::int64_t tick = 0;
  Pose ego;
  double speed = 0.0;
  Action action;
  RewardBreakdown reward;
  DoneKind done_kind = DoneKind::Running;
  std::vector<std::pair<char, Vec2>> others;  // 'C' car, 'M' two-wheeler, 'P' pedestrian
};

/// Arc length from the ego's projection on the route to the goal.
inline double route_distance(Vec2 ego_position, const MapSpec& map) {
  return std::max(0.0, map.waypoints.length() - map.waypoints.project(ego_position).arc_length);
}

inline double kind_code(VehicleKind kind) { return kind == VehicleKind::Car ? 1.0 : 0.5; }
inline constexpr double kPedestrianCode = -1.0;

/// 45-entry egocentric feature vector.
inline Observation vector_observation(const WorldState& world, double v_limit, double d0) {
  const VehicleState& ego = world.ego;
  const MapSpec& map = *world.map;
  const auto proj = map.waypoints.project(ego.position);
  const double heading_err = normalize_angle(ego.heading - proj.tangent_heading);
  Observation obs(kVectorObservationSize, 0.0);
  obs[0] = ego.speed / v_limit;
  obs[1] = std::cos(heading_err);
  obs[2] = std::sin(heading_err);
  obs[3] = proj.lateral / map.lane_width;
  obs[4] = route_distance(ego.position, map) / d0;

  struct Candidate {
    double dist;
    std::size_t order;  // vehicles first, then pedestrians
    Vec2 position;
    Vec2 velocity;
    double code;
  };
  std::vector<Candidate> users;
  users.reserve(world.traffic.size() + world.pedestrians.size());
  for (std::size_t i = 0; i < world.traffic.size(); ++i) {
    const auto& v = world.traffic[i];
    users.push_back({distance(v.position, ego.position), i, v.position, v.velocity(), kind_code(v.kind)});
  }
  for (std::size_t i = 0; i < world.pedestrians.size(); ++i) {
    const auto& p = world.pedestrians[i];
    users.push_back({distance(p.position, ego.position), world.traffic.size() + i, p.position,
                     p.velocity(), kPedestrianCode});
  }
  const std::size_t n = std::min<std::size_t>(kObservedUsers, users.size());
  std::partial_sort(users.begin(), users.begin() + static_cast<std::ptrdiff_t>(n), users.end(),
                    [](const Candidate& a, const Candidate& b) {
                      return a.dist != b.dist ? a.dist < b.dist : a.order < b.order;
                    });
  const Vec2 ego_velocity = ego.velocity();
  for (std::size_t k = 0; k < n; ++k) {
    const Vec2 rel = to_local(users[k].position - ego.position, ego.heading);
    const Vec2 rel_v = to_local(users[k].velocity - ego_velocity, ego.heading);
    double* slot = &obs[kEgoFeatures + k * kUserFeatures];
    slot[0] = rel.x / kRelativeScale;
    slot[1] = rel.y / kRelativeScale;
    slot[2] = rel_v.x / v_limit;
    slot[3] = rel_v.y / v_limit;
    slot[4] = users[k].code;
  }
  return obs;
}

/// Binary 84x84 egocentric occupancy of every road user except the ego,
/// average-pooled 4x4 to 21x21. Row 0 is the far edge ahead, column 0 the
/// far left.
inline std::vector<double> occupancy_frame(const WorldState& world) {
  const double ahead = kGridCells * kGridResolution - kGridBehind;
  const double half_span = kGridCells * kGridResolution / 2.0;
  std::vector<unsigned char> raw(kGridCells * kGridCells, 0);
  const VehicleState& ego = world.ego;

  // A cell is occupied when its square overlaps the shape.
  auto cell = [&](int row, int col) {
    return OrientedBox{{ahead - (row + 0.5) * kGridResolution, half_span - (col + 0.5) * kGridResolution},
                       0.0, kGridResolution / 2.0, kGridResolution / 2.0};
  };
  auto rasterize = [&](Vec2 local_center, double reach, auto&& overlaps) {
    const int row_lo = std::max(0, static_cast<int>(std::floor((ahead - local_center.x - reach) / kGridResolution)));
    const int row_hi = std::min(kGridCells - 1, static_cast<int>(std::ceil((ahead - local_center.x + reach) / kGridResolution)));
    const int col_lo = std::max(0, static_cast<int>(std::floor((half_span - local_center.y - reach) / kGridResolution)));
    const int col_hi = std::min(kGridCells - 1, static_cast<int>(std::ceil((half_span - local_center.y + reach) / kGridResolution)));
    for (int r = row_lo; r <= row_hi; ++r)
      for (int c = col_lo; c <= col_hi; ++c)
        if (overlaps(cell(r, c))) raw[static_cast<std::size_t>(r * kGridCells + c)] = 1;
  };

  for (const auto& v : world.traffic) {
    OrientedBox box = v.footprint();
    box.center = to_local(v.position - ego.position, ego.heading);
    box.heading = v.heading - ego.heading;
    rasterize(box.center, std::hypot(box.half_length, box.half_width),
              [&](const OrientedBox& cb) { return detect_collision(cb, box); });
  }
  for (const auto& p : world.pedestrians) {
    const Vec2 c = to_local(p.position - ego.position, ego.heading);
    rasterize(c, PedestrianState::kRadius,
              [&](const OrientedBox& cb) { return detect_collision(cb, Disc{c, PedestrianState::kRadius}); });
  }

  std::vector<double> pooled(kPooledFrameSize, 0.0);
  for (int r = 0; r < kGridCells; ++r)
    for (int c = 0; c < kGridCells; ++c)
      pooled[static_cast<std::size_t>((r / kPool) * kPooledCells + c / kPool)] +=
          raw[static_cast<std::size_t>(r * kGridCells + c)];
  for (double& x : pooled) x /= kPool * kPool;
  return pooled;
}

/// Reset/step episode driver around the world simulator.
class Environment {
 public:
  explicit Environment(EnvConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.max_steps <= 0) throw Error("env: max_steps must be positive");
    if (!(cfg_.goal_radius > 0.0)) throw Error("env: goal_radius must be positive");
    if (!(cfg_.v_limit > 0.0)) throw Error("env: v_limit must be positive");
  }

  Observation reset(std::uint64_t seed) {
    world_ = spawn_scenario(cfg_.scenario, seed);
    d0_ = world_.map->waypoints.length();
    d_pre_ = route_distance(world_.ego.position, *world_.map);
    started_ = true;
    done_ = false;
    trajectory_.clear();
    frames_.clear();
    if (cfg_.mode == ObservationMode::Grid) {
      const auto frame = occupancy_frame(world_);
      for (int i = 0; i < kFrameStack; ++i) frames_.push_back(frame);
    }
    return observe();
  }

  StepOutcome step(const Action& requested) {
    if (!started_) throw Error("env: step called before reset");
    if (done_) throw Error("env: step called on a finished episode");
    const Action action(requested.throttle, requested.steer, requested.brake);

    StepOutcome out;
    out.collision = advance_world(world_, action);
    const MapSpec& map = *world_.map;
    const double d_cu = route_distance(world_.ego.position, map);
    const bool collided = out.collision.has_value();
    const bool at_goal = distance(world_.ego.position, map.goal_point) <= cfg_.goal_radius;
    const LaneMeasures lane = classify_lane(world_.ego, map);

    RewardInputs in;
    in.collided = collided;
    in.reached_goal = at_goal && !collided;
    in.d_pre = d_pre_;
    in.d_cu = d_cu;
    in.v_speed = world_.ego.speed;
    in.v_limit = cfg_.v_limit;
    in.m_offroad = lane.offroad;
    in.m_otherlane = lane.other_lane;
    in.c_collision = cfg_.reward.c_collision;
    out.reward = compute_reward(in, cfg_.reward);
    d_pre_ = d_cu;

    if (collided)
      out.done_kind = DoneKind::Collision;
    else if (at_goal)
      out.done_kind = DoneKind::Goal;
    else if (world_.tick >= cfg_.max_steps)
      out.done_kind = DoneKind::Timeout;
    done_ = is_terminal(out.done_kind);

    if (cfg_.mode == ObservationMode::Grid) {
      frames_.pop_front();
      frames_.push_back(occupancy_frame(world_));
    }
    out.observation = observe();
    out.info = {world_.tick, d_cu, world_.ego.speed};
    if (cfg_.record_trajectory) record(action, out);
    return out;
  }

  const WorldState& world() const { return world_; }
  WorldState& mutable_world() { return world_; }
  const EnvConfig& config() const { return cfg_; }
  bool done() const { return done_; }
  double initial_distance() const { return d0_; }
  int observation_size() const { return tdrive::observation_size(cfg_.mode); }
  const std::vector<TrajectoryRecord>& trajectory() const { return trajectory_; }

 private:
  Observation observe() const {
    if (cfg_.mode == ObservationMode::Vector) return vector_observation(world_, cfg_.v_limit, d0_);
    Observation obs;
    obs.reserve(kGridObservationSize);
    for (const auto& f : frames_) obs.insert(obs.end(), f.begin(), f.end());
    return obs;
  }

  void record(const Action& action, const StepOutcome& out) {
    TrajectoryRecord rec;
    rec.tick = world_.tick;
    rec.ego = {world_.ego.position, world_.ego.heading};
    rec.speed = world_.ego.speed;
    rec.action = action;
    rec.reward = out.reward;
    rec.done_kind = out.done_kind;
    for (const auto& v : world_.traffic)
      rec.others.emplace_back(v.kind == VehicleKind::Car ? 'C' : 'M', v.position);
    for (const auto& p : world_.pedestrians) rec.others.emplace_back('P', p.position);
    trajectory_.push_back(std::move(rec));
  }

  EnvConfig cfg_;
  WorldState world_;
  double d0_ = 0.0;
  double d_pre_ = 0.0;
  bool started_ = false;
  bool done_ = false;
  std::deque<std::vector<double>> frames_;
  std::vector<TrajectoryRecord> trajectory_;
};

}  // namespace tdrive
