#pragma once

#include <string>
#include <string_view>

#include "tdrive/error.hpp"

namespace tdrive {

/// Episode status after a step. Collision, Goal and Timeout are terminal.
enum class DoneKind { Running, Collision, Goal, Timeout };

inline std::string_view to_string(DoneKind kind) {
  switch (kind) {
    case DoneKind::Running: return "running";
    case DoneKind::Collision: return "collision";
    case DoneKind::Goal: return "goal";
    case DoneKind::Timeout: return "timeout";
  }
  return "running";
}

inline DoneKind parse_done_kind(std::string_view text) {
  if (text == "running") return DoneKind::Running;
  if (text == "collision") return DoneKind::Collision;
  if (text == "goal") return DoneKind::Goal;
  if (text == "timeout") return DoneKind::Timeout;
  throw Error("unknown done kind '" + std::string(text) + "'");
}

inline bool is_terminal(DoneKind kind) { return kind != DoneKind::Running; }

}  // namespace tdrive
