#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "tdrive/action.hpp"
#include "tdrive/error.hpp"
#include "tdrive/geometry.hpp"
#include "tdrive/random.hpp"

namespace tdrive {

enum class Route { Left, Right, Straight };

inline std::string_view to_string(Route route) {
  switch (route) {
    case Route::Left: return "left";
    case Route::Right: return "right";
    case Route::Straight: return "straight";
  }
  return "left";
}

inline Route parse_route(std::string_view name) {
  if (name == "left") return Route::Left;
  if (name == "right") return Route::Right;
  if (name == "straight") return Route::Straight;
  throw Error("unknown route '" + std::string(name) + "' (expected left, right or straight)");
}

struct Pose {
  Vec2 position;
  double heading = 0.0;
};

// ---------------------------------------------------------------------------
// Map

/// Geometry of the T-junction. The junction centre is the origin, the main
/// road runs along x and the stem runs towards -y. Traffic keeps right.
struct MapOptions {
  double lane_width = 3.5;
  std::array<double, 3> arm_lengths{60.0, 60.0, 60.0};  // west, east, south
  Route route = Route::Left;
  double approach_length = 15.0;  // ego spawn distance from the junction centre
  double exit_length = 30.0;      // goal distance from the junction centre
  double waypoint_spacing = 1.0;
  double crosswalk_offset = 4.5;  // from the junction box edge to the crosswalk line
};

enum class LaneDirection { East, West, North, South };

inline Vec2 direction_vector(LaneDirection d) {
  switch (d) {
    case LaneDirection::East: return {1.0, 0.0};
    case LaneDirection::West: return {-1.0, 0.0};
    case LaneDirection::North: return {0.0, 1.0};
    case LaneDirection::South: return {0.0, -1.0};
  }
  return {};
}

struct MapSpec {
  double lane_width = 3.5;
  std::array<double, 3> arm_lengths{60.0, 60.0, 60.0};
  Route route = Route::Left;
  std::vector<Segment> crosswalk_segments;
  Vec2 goal_point;
  Pose spawn_point;
  Polyline waypoints;
  std::vector<Polyline> traffic_lanes;  // ring lanes: vehicles wrap from end to start

  double west_end() const { return -arm_lengths[0]; }
  double east_end() const { return arm_lengths[1]; }
  double south_end() const { return -arm_lengths[2]; }

  bool in_junction(Vec2 p) const {
    return std::abs(p.x) <= lane_width && std::abs(p.y) <= lane_width;
  }

  bool is_paved(Vec2 p) const {
    const bool main_road = p.x >= west_end() && p.x <= east_end() && std::abs(p.y) <= lane_width;
    const bool stem = p.y >= south_end() && p.y <= lane_width && std::abs(p.x) <= lane_width;
    return main_road || stem;
  }

  /// Travel direction of the lane containing p. Empty off the pavement and
  /// inside the junction box, which belongs to no lane.
  std::optional<LaneDirection> lane_direction(Vec2 p) const {
    if (!is_paved(p) || in_junction(p)) return std::nullopt;
    if (std::abs(p.y) <= lane_width && std::abs(p.x) > lane_width)
      return p.y < 0.0 ? LaneDirection::East : LaneDirection::West;
    return p.x > 0.0 ? LaneDirection::North : LaneDirection::South;
  }
};

namespace detail {

inline void append_line(std::vector<Vec2>& pts, Vec2 to, double spacing) {
  const Vec2 from = pts.back();
  const double len = distance(from, to);
  const int n = std::max(1, static_cast<int>(std::ceil(len / spacing)));
  for (int i = 1; i <= n; ++i) pts.push_back(from + (static_cast<double>(i) / n) * (to - from));
}

inline void append_arc(std::vector<Vec2>& pts, Vec2 center, double radius, double from_angle,
                       double to_angle, double spacing) {
  const double sweep = to_angle - from_angle;
  const int n = std::max(2, static_cast<int>(std::ceil(std::abs(sweep) * radius / spacing)));
  for (int i = 1; i <= n; ++i) {
    const double a = from_angle + sweep * i / n;
    pts.push_back(center + radius * unit_from_heading(a));
  }
}

}  // namespace detail

inline MapSpec make_map(const MapOptions& opt) {
  const double w = opt.lane_width;
  const double c = w / 2.0;
  if (w <= 0) throw Error("map: lane_width must be positive");
  const double cw = w + opt.crosswalk_offset;
  for (double arm : opt.arm_lengths) {
    if (arm < cw + 5.0) throw Error("map: arm length too short for the crosswalks");
  }
  if (opt.approach_length <= w || opt.exit_length <= w)
    throw Error("map: approach_length and exit_length must clear the junction box");
  if (opt.waypoint_spacing <= 0 || opt.waypoint_spacing >= 5.0)
    throw Error("map: waypoint_spacing must be in (0, 5)");

  MapSpec map;
  map.lane_width = w;
  map.arm_lengths = opt.arm_lengths;
  map.route = opt.route;
  const double west = -opt.arm_lengths[0];
  const double east = opt.arm_lengths[1];
  const double south = -opt.arm_lengths[2];

  map.crosswalk_segments = {
      {{-cw, -w}, {-cw, w}},
      {{cw, -w}, {cw, w}},
      {{-w, -cw}, {w, -cw}},
  };

  std::vector<Vec2> pts;
  const double pi = std::numbers::pi;
  switch (opt.route) {
    case Route::Left:
      if (opt.approach_length > -south || opt.exit_length > -west)
        throw Error("map: route leaves the map");
      pts.push_back({c, -opt.approach_length});
      detail::append_line(pts, {c, -w}, opt.waypoint_spacing);
      detail::append_arc(pts, {-w, -w}, w + c, 0.0, pi / 2.0, opt.waypoint_spacing);
      detail::append_line(pts, {-opt.exit_length, c}, opt.waypoint_spacing);
      map.spawn_point = {{c, -opt.approach_length}, pi / 2.0};
      break;
    case Route::Right:
      if (opt.approach_length > -south || opt.exit_length > east)
        throw Error("map: route leaves the map");
      pts.push_back({c, -opt.approach_length});
      detail::append_line(pts, {c, -w}, opt.waypoint_spacing);
      detail::append_arc(pts, {w, -w}, c, pi, pi / 2.0, opt.waypoint_spacing);
      detail::append_line(pts, {opt.exit_length, -c}, opt.waypoint_spacing);
      map.spawn_point = {{c, -opt.approach_length}, pi / 2.0};
      break;
    case Route::Straight:
      if (opt.approach_length > -west || opt.exit_length > east)
        throw Error("map: route leaves the map");
      pts.push_back({-opt.approach_length, -c});
      detail::append_line(pts, {opt.exit_length, -c}, opt.waypoint_spacing);
      map.spawn_point = {{-opt.approach_length, -c}, 0.0};
      break;
  }
  map.goal_point = pts.back();
  map.waypoints = Polyline(std::move(pts));

  map.traffic_lanes = {
      Polyline({{west, -c}, {east, -c}}),  // eastbound
      Polyline({{east, c}, {west, c}}),    // westbound
  };
  return map;
}

// ---------------------------------------------------------------------------
// Entities

enum class VehicleKind { Car, Motorcycle, Cycle };

struct VehicleState {
  Vec2 position;
  double heading = 0.0;
  double speed = 0.0;
  double length = 4.5;
  double width = 2.0;
  VehicleKind kind = VehicleKind::Car;
  int lane_ref = -1;  // index into MapSpec::traffic_lanes; -1 for the ego

  OrientedBox footprint() const { return {position, heading, length / 2.0, width / 2.0}; }
  Vec2 velocity() const { return speed * unit_from_heading(heading); }

  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

inline VehicleState make_vehicle(VehicleKind kind) {
  VehicleState v;
  v.kind = kind;
  if (kind != VehicleKind::Car) {
    v.length = 2.0;
    v.width = 0.8;
  }
  return v;
}

struct PedestrianState {
  static constexpr double kRadius = 0.3;

  Vec2 position;
  double speed = 1.4;
  Polyline path;
  double progress = 0.0;
  bool uses_crosswalk = false;
  int direction = 1;  // +1 towards the path end, -1 back towards its start
  bool paused = false;

  Disc footprint() const { return {position, kRadius}; }
  Vec2 velocity() const {
    if (paused) return {};
    return (speed * direction) * unit_from_heading(path.heading_at(progress));
  }

  friend bool operator==(const PedestrianState&, const PedestrianState&) = default;
};

/// Longitudinal and steering limits shared by every vehicle.
struct VehicleParams {
  double a_max = 3.0;      // m/s^2 at full throttle
  double b_max = 8.0;      // m/s^2 at full brake
  double c_drag = 0.05;    // 1/s
  double wheelbase = 2.7;  // m
  double max_steer_deg = 35.0;
  double v_cap = 2.0 * 8.33;  // hard simulator cap
};

struct WorldState {
  VehicleState ego;
  bool ego_active = true;  // false simulates traffic alone
  std::vector<VehicleState> traffic;
  std::vector<PedestrianState> pedestrians;
  std::shared_ptr<const MapSpec> map;  // immutable, shared between snapshots
  std::int64_t tick = 0;
  double dt = 0.1;
  double traffic_speed_limit = 8.33;
  VehicleParams vehicle;
};

enum class CollisionKind { Vehicle, Pedestrian };

struct CollisionEvent {
  CollisionKind other_kind = CollisionKind::Vehicle;
  int other_index = 0;
  std::int64_t tick = 0;

  friend bool operator==(const CollisionEvent&, const CollisionEvent&) = default;
};

// ---------------------------------------------------------------------------
// Dynamics

/// Kinematic bicycle update. Inputs are expected pre-clamped.
inline VehicleState step_ego(const VehicleState& state, double throttle, double steer, double brake,
                             double dt, const VehicleParams& p = {}) {
  if (!(dt > 0.0)) throw Error("step_ego: dt must be positive");
  VehicleState next = state;
  const double accel = throttle * p.a_max - brake * p.b_max - p.c_drag * state.speed;
  next.speed = std::clamp(state.speed + accel * dt, 0.0, p.v_cap);
  const double delta = steer * p.max_steer_deg * std::numbers::pi / 180.0;
  next.heading = normalize_angle(state.heading + next.speed / p.wheelbase * std::tan(delta) * dt);
  next.position = state.position + (next.speed * dt) * unit_from_heading(next.heading);
  return next;
}

namespace detail {

/// Arc coordinate along a lane, extrapolated past either end.
inline double lane_coordinate(const Polyline& lane, Vec2 p) {
  const auto proj = lane.project(p);
  const auto& pts = lane.points();
  if (proj.segment == 0) {
    const Vec2 u = unit_from_heading(lane.segment_heading(0));
    const double along = dot(p - pts.front(), u);
    if (along < 0.0) return along;
  }
  if (proj.segment + 2 == pts.size()) {
    const Vec2 u = unit_from_heading(lane.segment_heading(pts.size() - 2));
    const double beyond = dot(p - pts.back(), u);
    if (beyond > 0.0) return lane.length() + beyond;
  }
  return proj.arc_length;
}

struct Leader {
  double gap = std::numeric_limits<double>::infinity();  // bumper to bumper
  double speed = 0.0;  // along the follower's heading
};

}  // namespace detail

inline constexpr double kSafeGap = 2.5;          // m, bumper to bumper
inline constexpr double kCorridorLength = 20.0;  // m ahead of the front bumper
inline constexpr double kCorridorMargin = 0.5;   // m beyond the vehicle half width
inline constexpr double kHeadway = 1.5;          // s
inline constexpr double kComfortDecel = 2.0;     // m/s^2
inline constexpr double kLookahead = 5.0;        // m, pure pursuit

/// Nearest obstacle in the forward corridor of traffic vehicle `index`.
inline detail::Leader find_leader(const WorldState& world, std::size_t index) {
  const VehicleState& self = world.traffic[index];
  const Polyline& lane = world.map->traffic_lanes.at(static_cast<std::size_t>(self.lane_ref));
  const double ring = lane.length();
  const double s_self = detail::lane_coordinate(lane, self.position);
  const Vec2 forward = unit_from_heading(self.heading);
  detail::Leader best;

  auto consider = [&](double gap, Vec2 velocity) {
    if (gap > kCorridorLength) return;
    if (gap < best.gap) {
      best.gap = gap;
      best.speed = dot(velocity, forward);
    }
  };

  // Same-lane vehicles: ring distance so followers see leaders across the wrap.
  for (std::size_t j = 0; j < world.traffic.size(); ++j) {
    const VehicleState& other = world.traffic[j];
    if (j == index || other.lane_ref != self.lane_ref) continue;
    double ds = std::fmod(detail::lane_coordinate(lane, other.position) - s_self, ring);
    if (ds < 0.0) ds += ring;
    if (ds == 0.0 && j < index) continue;  // coincident: the lower index follows
    consider(ds - (self.length + other.length) / 2.0, other.velocity());
  }

  // Everything else: geometric corridor in the follower's frame.
  const double corridor_half = self.width / 2.0 + kCorridorMargin;
  auto geometric = [&](Vec2 center, double lateral_extent, double longitudinal_extent, Vec2 velocity) {
    const Vec2 local = to_local(center - self.position, self.heading);
    if (local.x <= 0.0) return;
    if (std::abs(local.y) - lateral_extent >= corridor_half) return;
    consider(local.x - self.length / 2.0 - longitudinal_extent, velocity);
  };
  const Vec2 left{-forward.y, forward.x};
  for (std::size_t j = 0; j < world.traffic.size(); ++j) {
    const VehicleState& other = world.traffic[j];
    if (j == index || other.lane_ref == self.lane_ref) continue;
    const OrientedBox box = other.footprint();
    geometric(other.position, box.projected_radius(left), box.projected_radius(forward), other.velocity());
  }
  if (world.ego_active) {
    const OrientedBox box = world.ego.footprint();
    geometric(world.ego.position, box.projected_radius(left), box.projected_radius(forward),
              world.ego.velocity());
  }
  for (const auto& ped : world.pedestrians)
    geometric(ped.position, PedestrianState::kRadius, PedestrianState::kRadius, ped.velocity());
  return best;
}

/// Lane-keeping and car-following controls for a traffic vehicle.
/// Pure function of the world snapshot.
inline Action autopilot(const WorldState& world, int vehicle_index) {
  if (vehicle_index < 0 || static_cast<std::size_t>(vehicle_index) >= world.traffic.size())
    throw Error("autopilot: vehicle index " + std::to_string(vehicle_index) +
                " does not address a traffic vehicle");
  const auto index = static_cast<std::size_t>(vehicle_index);
  const VehicleState& self = world.traffic[index];
  if (self.lane_ref < 0 || static_cast<std::size_t>(self.lane_ref) >= world.map->traffic_lanes.size())
    throw Error("autopilot: vehicle " + std::to_string(vehicle_index) + " has no lane");
  const Polyline& lane = world.map->traffic_lanes[static_cast<std::size_t>(self.lane_ref)];
  const VehicleParams& p = world.vehicle;

  // Pure pursuit on a point kLookahead metres further along the lane.
  const double s = detail::lane_coordinate(lane, self.position);
  const Vec2 target = lane.point_at(s + kLookahead);
  const Vec2 local = to_local(target - self.position, self.heading);
  const double alpha = std::atan2(local.y, local.x);
  const double ld = std::max(norm(local), 1e-6);
  const double delta = std::atan2(2.0 * p.wheelbase * std::sin(alpha), ld);
  const double steer = std::clamp(delta / (p.max_steer_deg * std::numbers::pi / 180.0), -1.0, 1.0);

  const detail::Leader leader = find_leader(world, index);
  if (leader.gap < kSafeGap) return {0.0, steer, 1.0};

  const double v = self.speed;
  const double v0 = world.traffic_speed_limit;
  double accel = p.a_max * (1.0 - std::pow(v / v0, 4));
  if (std::isfinite(leader.gap)) {
    const double closing = v - leader.speed;
    const double desired =
        kSafeGap + std::max(0.0, v * kHeadway + v * closing / (2.0 * std::sqrt(p.a_max * kComfortDecel)));
    accel -= p.a_max * (desired / leader.gap) * (desired / leader.gap);
  }
  if (accel >= 0.0) return {accel / p.a_max, steer, 0.0};
  return {0.0, steer, -accel / p.b_max};
}

namespace detail {

/// Distance from p to the stretch of `path` between arc lengths s0 and s1.
inline double distance_to_subpath(const Polyline& path, double s0, double s1, Vec2 p) {
  if (s1 < s0) std::swap(s0, s1);
  s0 = std::clamp(s0, 0.0, path.length());
  s1 = std::clamp(s1, 0.0, path.length());
  std::vector<Vec2> pts{path.point_at(s0)};
  for (std::size_t i = 1; i + 1 < path.points().size(); ++i) {
    const double si = path.arc_length_at_vertex(i);
    if (si > s0 && si < s1) pts.push_back(path.points()[i]);
  }
  pts.push_back(path.point_at(s1));
  double best = distance(p, pts.front());
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    best = std::min(best, point_segment_distance(p, pts[i], pts[i + 1]));
  return best;
}

}  // namespace detail

inline constexpr double kPedestrianYieldRadius = 3.0;  // m
inline constexpr double kPedestrianLookahead = 2.0;    // m of path
inline constexpr double kPedestrianStandingSpeed = 0.5;  // m/s

/// Moves a pedestrian along its path unless a moving vehicle is close to the
/// next stretch of it. A standing vehicle on the path turns the pedestrian
/// back, as do the ends of the path.
inline void step_pedestrian(PedestrianState& ped, const WorldState& world) {
  const double ahead = ped.progress + ped.direction * kPedestrianLookahead;
  const double len = ped.path.length();
  const Disc next_spot{ped.path.point_at(std::clamp(ped.progress + ped.direction * 1.0, 0.0, len)),
                       PedestrianState::kRadius + 0.05};
  bool blocked = false;
  bool obstructed = false;
  auto check = [&](const VehicleState& v) {
    if (v.speed > kPedestrianStandingSpeed)
      blocked = blocked || detail::distance_to_subpath(ped.path, ped.progress, ahead, v.position) < kPedestrianYieldRadius;
    else
      obstructed = obstructed || detect_collision(v.footprint(), next_spot);
  };
  if (world.ego_active) check(world.ego);
  for (const auto& v : world.traffic) check(v);
  ped.paused = blocked || obstructed;
  if (obstructed && !blocked) ped.direction = -ped.direction;
  if (ped.paused) return;

  ped.progress += ped.direction * ped.speed * world.dt;
  if (ped.progress >= len) {
    ped.progress = len;
    ped.direction = -1;
  } else if (ped.progress <= 0.0) {
    ped.progress = 0.0;
    ped.direction = 1;
  }
  ped.position = ped.path.point_at(ped.progress);
}

/// Wraps a ring-lane vehicle that ran past the lane end back to its start.
inline void wrap_on_lane(VehicleState& v, const MapSpec& map) {
  if (v.lane_ref < 0) return;
  const Polyline& lane = map.traffic_lanes[static_cast<std::size_t>(v.lane_ref)];
  const double s = detail::lane_coordinate(lane, v.position);
  if (s < lane.length()) return;
  const auto proj = lane.project(v.position);
  const double h = lane.heading_at(s - lane.length());
  const Vec2 left{-std::sin(h), std::cos(h)};
  v.position = lane.point_at(s - lane.length()) + proj.lateral * left;
}

/// Ego overlap test against every other road user. The first event is the
/// nearest (centre distance), vehicles before pedestrians, then lowest index.
inline std::optional<CollisionEvent> detect_ego_collision(const WorldState& world) {
  if (!world.ego_active) return std::nullopt;
  const OrientedBox ego = world.ego.footprint();
  std::optional<std::tuple<double, int, int>> best;
  auto offer = [&](double d, CollisionKind kind, std::size_t i) {
    const std::tuple<double, int, int> key{d, static_cast<int>(kind), static_cast<int>(i)};
    if (!best || key < *best) best = key;
  };
  for (std::size_t i = 0; i < world.traffic.size(); ++i) {
    if (detect_collision(ego, world.traffic[i].footprint()))
      offer(distance(ego.center, world.traffic[i].position), CollisionKind::Vehicle, i);
  }
  for (std::size_t i = 0; i < world.pedestrians.size(); ++i) {
    if (detect_collision(ego, world.pedestrians[i].footprint()))
      offer(distance(ego.center, world.pedestrians[i].position), CollisionKind::Pedestrian, i);
  }
  if (!best) return std::nullopt;
  return CollisionEvent{static_cast<CollisionKind>(std::get<1>(*best)), std::get<2>(*best), world.tick};
}

/// Number of overlapping traffic-vehicle pairs.
inline int count_traffic_collisions(const WorldState& world) {
  int count = 0;
  for (std::size_t i = 0; i < world.traffic.size(); ++i)
    for (std::size_t j = i + 1; j < world.traffic.size(); ++j)
      if (detect_collision(world.traffic[i].footprint(), world.traffic[j].footprint())) ++count;
  return count;
}

/// Advances every entity by one tick in place. All controls are decided from
/// the pre-step snapshot, so update order does not matter.
inline std::optional<CollisionEvent> advance_world(WorldState& world, const Action& ego_action) {
  std::vector<Action> controls;
  controls.reserve(world.traffic.size());
  for (std::size_t i = 0; i < world.traffic.size(); ++i)
    controls.push_back(autopilot(world, static_cast<int>(i)));

  std::vector<PedestrianState> peds = world.pedestrians;
  for (auto& ped : peds) step_pedestrian(ped, world);

  if (world.ego_active)
    world.ego = step_ego(world.ego, ego_action.throttle, ego_action.steer, ego_action.brake, world.dt,
                         world.vehicle);
  for (std::size_t i = 0; i < world.traffic.size(); ++i) {
    const Action& c = controls[i];
    world.traffic[i] = step_ego(world.traffic[i], c.throttle, c.steer, c.brake, world.dt, world.vehicle);
    wrap_on_lane(world.traffic[i], *world.map);
  }
  world.pedestrians = std::move(peds);
  ++world.tick;
  return detect_ego_collision(world);
}

/// Value-returning form of advance_world.
inline std::pair<WorldState, std::optional<CollisionEvent>> step_world(const WorldState& world,
                                                                       const Action& ego_action) {
  WorldState next = world;
  auto event = advance_world(next, ego_action);
  return {std::move(next), event};
}

// ---------------------------------------------------------------------------
// Lane classification

struct LaneMeasures {
  double offroad = 0.0;
  double other_lane = 0.0;
};

/// Corner-count fractions of the ego footprint that are off the pavement or
/// in a lane running against the route direction.
inline LaneMeasures classify_lane(const VehicleState& ego, const MapSpec& map) {
  const Vec2 route_dir = unit_from_heading(map.waypoints.project(ego.position).tangent_heading);
  int off = 0;
  int other = 0;
  for (const Vec2& corner : ego.footprint().corners()) {
    if (!map.is_paved(corner)) {
      ++off;
      continue;
    }
    const auto dir = map.lane_direction(corner);
    if (dir && dot(direction_vector(*dir), route_dir) < 0.0) ++other;
  }
  return {off / 4.0, other / 4.0};
}

// ---------------------------------------------------------------------------
// Scenario spawning

struct ScenarioConfig {
  int veh = 12;
  int ped = 4;
  double dt = 0.1;
  MapOptions map;
  double traffic_speed_limit = 8.33;
  double ego_initial_speed = 8.33;
  double crosswalk_fraction = 0.8;
  VehicleParams vehicle;
};

inline constexpr int kSpawnAttempts = 1000;

namespace detail {

inline OrientedBox inflate(OrientedBox b, double margin) {
  b.half_length += margin;
  b.half_width += margin;
  return b;
}

inline Polyline crossing_path(Vec2 a, Vec2 b, double curb) {
  const Vec2 u = (1.0 / distance(a, b)) * (b - a);
  return Polyline({a - curb * u, a, b, b + curb * u});
}

}  // namespace detail

/// Seeded placement of traffic and pedestrians around the ego spawn pose.
inline WorldState spawn_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
  if (cfg.veh < 0 || cfg.ped < 0) throw Error("spawn_scenario: counts must be non-negative");
  if (!(cfg.dt > 0.0)) throw Error("spawn_scenario: dt must be positive");
  if (!(cfg.traffic_speed_limit > 0.0)) throw Error("spawn_scenario: traffic_speed_limit must be positive");

  WorldState world;
  auto map = std::make_shared<const MapSpec>(make_map(cfg.map));
  world.map = map;
  world.dt = cfg.dt;
  world.traffic_speed_limit = cfg.traffic_speed_limit;
  world.vehicle = cfg.vehicle;
  world.ego = make_vehicle(VehicleKind::Car);
  world.ego.position = map->spawn_point.position;
  world.ego.heading = map->spawn_point.heading;
  world.ego.speed = std::clamp(cfg.ego_initial_speed, 0.0, cfg.vehicle.v_cap);

  Rng rng(mix_seed(seed, 0x51u));
  const OrientedBox ego_zone = detail::inflate(world.ego.footprint(), kSafeGap / 2.0);

  for (int i = 0; i < cfg.veh; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kSpawnAttempts && !placed; ++attempt) {
      const double r = rng.uniform();
      VehicleState v = make_vehicle(r < 0.7 ? VehicleKind::Car
                                    : r < 0.85 ? VehicleKind::Motorcycle
                                               : VehicleKind::Cycle);
      v.lane_ref = static_cast<int>(rng.index(map->traffic_lanes.size()));
      const Polyline& lane = map->traffic_lanes[static_cast<std::size_t>(v.lane_ref)];
      const double s = rng.uniform(0.0, lane.length());
      v.position = lane.point_at(s);
      v.heading = lane.heading_at(s);
      v.speed = cfg.traffic_speed_limit * rng.uniform(0.5, 1.0);

      bool ok = !detect_collision(detail::inflate(v.footprint(), kSafeGap / 2.0), ego_zone);
      for (const auto& other : world.traffic) {
        if (!ok) break;
        if (other.lane_ref == v.lane_ref) {
          double ds = std::abs(s - detail::lane_coordinate(lane, other.position));
          ds = std::min(ds, lane.length() - ds);
          ok = ds >= kSafeGap + (v.length + other.length) / 2.0;
        } else {
          ok = !detect_collision(v.footprint(), other.footprint());
        }
      }
      if (ok) {
        world.traffic.push_back(v);
        placed = true;
      }
    }
    if (!placed)
      throw Error("spawn_scenario: could not place vehicle " + std::to_string(i) + " of " +
                  std::to_string(cfg.veh) + " within " + std::to_string(kSpawnAttempts) + " attempts");
  }

  const int crosswalk_users = static_cast<int>(std::lround(cfg.crosswalk_fraction * cfg.ped));
  const double w = map->lane_width;
  constexpr double curb = 2.0;
  for (int i = 0; i < cfg.ped; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kSpawnAttempts && !placed; ++attempt) {
      PedestrianState ped;
      ped.uses_crosswalk = i < crosswalk_users;
      Vec2 a;
      Vec2 b;
      if (ped.uses_crosswalk) {
        const Segment& cw = map->crosswalk_segments[rng.index(map->crosswalk_segments.size())];
        a = cw.a;
        b = cw.b;
      } else {
        const auto arm = rng.index(3);
        const double lo = w + 6.0;
        const double d = rng.uniform(lo, map->arm_lengths[arm] - 5.0);
        if (arm == 0) {
          a = {-d, -w};
          b = {-d, w};
        } else if (arm == 1) {
          a = {d, -w};
          b = {d, w};
        } else {
          a = {-w, -d};
          b = {w, -d};
        }
      }
      if (rng.bernoulli(0.5)) std::swap(a, b);
      ped.path = detail::crossing_path(a, b, curb);
      ped.progress = rng.uniform(0.0, ped.path.length());
      ped.direction = rng.bernoulli(0.5) ? 1 : -1;
      ped.position = ped.path.point_at(ped.progress);

      const Disc zone{ped.position, PedestrianState::kRadius + 1.0};
      bool ok = !detect_collision(world.ego.footprint(), zone);
      for (const auto& v : world.traffic) {
        if (!ok) break;
        ok = !detect_collision(v.footprint(), zone);
      }
      if (ok) {
        world.pedestrians.push_back(std::move(ped));
        placed = true;
      }
    }
    if (!placed)
      throw Error("spawn_scenario: could not place pedestrian " + std::to_string(i) + " of " +
                  std::to_string(cfg.ped) + " within " + std::to_string(kSpawnAttempts) + " attempts");
  }
  return world;
}

}  // namespace tdrive
