#pragma once

#include <algorithm>
#include <array>

namespace tdrive {

/// Control triple: throttle in [0,1], steer in [-1,1], brake in [0,1].
/// Values are clamped on construction.
struct Action {
  double throttle = 0.0;
  double steer = 0.0;
  double brake = 0.0;

  Action() = default;
  Action(double throttle_in, double steer_in, double brake_in)
      : throttle(std::clamp(throttle_in, 0.0, 1.0)),
        steer(std::clamp(steer_in, -1.0, 1.0)),
        brake(std::clamp(brake_in, 0.0, 1.0)) {}

  /// Maps a policy output in [-1,1]^3 onto the control ranges.
  static Action from_raw(const std::array<double, 3>& raw) {
    return {(raw[0] + 1.0) / 2.0, raw[1], (raw[2] + 1.0) / 2.0};
  }

  friend bool operator==(const Action&, const Action&) = default;
};

}  // namespace tdrive
