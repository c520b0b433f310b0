#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "tdrive/done_kind.hpp"
#include "tdrive/io.hpp"
#include "tdrive/reward.hpp"
#include "tdrive/world.hpp"

namespace tdrive {

struct ReplayFrame {
  std::int64_t tick = 0;
  Pose ego;
  double speed = 0.0;
  double throttle = 0.0, steer = 0.0, brake = 0.0;
  RewardBreakdown reward;
  DoneKind done_kind = DoneKind::Running;
  Route route = Route::Left;
  std::vector<std::pair<char, Vec2>> others;
};

/// Parses the trajectory CSV written by eval/baseline --trajectory.
inline std::vector<ReplayFrame> parse_trajectory(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("tick,x,y,", 0) != 0)
    throw Error("trajectory: missing or unexpected header");
  std::vector<ReplayFrame> frames;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 17) throw Error("trajectory line " + std::to_string(line_no) + ": expected 17 fields");
    try {
      ReplayFrame fr;
      fr.tick = std::stoll(f[0]);
      fr.ego = {{parse_double(f[1]), parse_double(f[2])}, parse_double(f[3])};
      fr.speed = parse_double(f[4]);
      fr.throttle = parse_double(f[5]);
      fr.steer = parse_double(f[6]);
      fr.brake = parse_double(f[7]);
      fr.reward = {parse_double(f[8]),  parse_double(f[9]),  parse_double(f[10]),
                   parse_double(f[11]), parse_double(f[12]), parse_double(f[13])};
      fr.done_kind = parse_done_kind(f[14]);
      fr.route = parse_route(f[15]);
      if (!f[16].empty()) {
        for (const auto& item : split(f[16], ';')) {
          const auto parts = split(item, ':');
          if (parts.size() != 3 || parts[0].size() != 1) throw Error("malformed entity '" + item + "'");
          fr.others.emplace_back(parts[0][0], Vec2{parse_double(parts[1]), parse_double(parts[2])});
        }
      }
      frames.push_back(std::move(fr));
    } catch (const std::exception& e) {
      throw Error("trajectory line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return frames;
}

/// Top-down text frame: ' ' off road, '.' pavement, '=' crosswalk, '*' goal,
/// 'E' ego, 'C' car, 'M' two-wheeler, 'P' pedestrian. One glyph covers
/// `cell` metres; north is up.
inline std::string render_frame(const ReplayFrame& fr, const MapSpec& map, double cell = 2.0) {
  const double x0 = -36.0, x1 = 36.0, y0 = -30.0, y1 = 10.0;
  const int cols = static_cast<int>((x1 - x0) / cell);
  const int rows = static_cast<int>((y1 - y0) / cell);
  std::vector<std::string> grid(static_cast<std::size_t>(rows), std::string(static_cast<std::size_t>(cols), ' '));
  auto cell_of = [&](Vec2 p, int& r, int& c) {
    c = static_cast<int>(std::floor((p.x - x0) / cell));
    r = static_cast<int>(std::floor((y1 - p.y) / cell));
    return r >= 0 && r < rows && c >= 0 && c < cols;
  };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const Vec2 p{x0 + (c + 0.5) * cell, y1 - (r + 0.5) * cell};
      if (map.is_paved(p)) grid[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = '.';
    }
  for (const auto& cw : map.crosswalk_segments) {
    for (int k = 0; k <= 8; ++k) {
      int r, c;
      if (cell_of(cw.a + (k / 8.0) * (cw.b - cw.a), r, c)) grid[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = '=';
    }
  }
  auto put = [&](Vec2 p, char ch) {
    int r, c;
    if (cell_of(p, r, c)) grid[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = ch;
  };
  put(map.goal_point, '*');
  for (const auto& [kind, pos] : fr.others) put(pos, kind);
  put(fr.ego.position, 'E');

  std::ostringstream out;
  out << "tick " << fr.tick << "  speed " << format_double(std::round(fr.speed * 100) / 100) << " m/s  action ("
      << format_double(std::round(fr.throttle * 100) / 100) << ", " << format_double(std::round(fr.steer * 100) / 100)
      << ", " << format_double(std::round(fr.brake * 100) / 100) << ")  " << to_string(fr.done_kind) << '\n';
  for (const auto& row : grid) out << '|' << row << "|\n";
  auto r2 = [](double x) { return format_double(std::round(x * 1000) / 1000); };
  out << "reward r1=" << r2(fr.reward.r1) << " r2=" << r2(fr.reward.r2) << " r3=" << r2(fr.reward.r3)
      << " r4=" << r2(fr.reward.r4) << " r5=" << r2(fr.reward.r5) << " total=" << r2(fr.reward.total) << '\n';
  return out.str();
}

}  // namespace tdrive
