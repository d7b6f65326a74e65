#pragma once

#include <cmath>

namespace isrm {

inline constexpr double kPi = 3.14159265358979323846;

// Metric defaults shared across the pipeline.
inline constexpr double kCellSize = 0.05;     // meters per grid cell
inline constexpr double kForwardStep = 0.25;  // meters per Forward action
inline constexpr double kTurnStep = 10.0 * kPi / 180.0;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::sqrt(x * x + y * y); }
  bool operator==(const Vec2& o) const = default;
};

// Normalizes an angle into [-pi, pi).
inline double wrap_angle(double a) {
  double w = a - 2.0 * kPi * std::floor((a + kPi) / (2.0 * kPi));
  // floor rounding can land exactly on pi for inputs just below a wrap point
  if (w >= kPi) w -= 2.0 * kPi;
  return w;
}

enum class Action { Forward, TurnLeft, TurnRight };

inline const char* action_name(Action a) {
  switch (a) {
    case Action::Forward: return "forward";
    case Action::TurnLeft: return "turn_left";
    case Action::TurnRight: return "turn_right";
  }
  return "?";
}

// 2-D position plus heading. theta is kept in [-pi, pi).
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Vec2 position() const { return {x, y}; }
  Vec2 heading_dir() const { return {std::cos(theta), std::sin(theta)}; }

  // Agent frame: x right of heading, y along heading.
  Vec2 local_to_world(const Vec2& local) const {
    const double s = std::sin(theta), c = std::cos(theta);
    return {x + local.x * s + local.y * c, y - local.x * c + local.y * s};
  }
  Vec2 world_to_local(const Vec2& world) const {
    const double s = std::sin(theta), c = std::cos(theta);
    const double dx = world.x - x, dy = world.y - y;
    return {dx * s - dy * c, dx * c + dy * s};
  }
};

inline Pose compose_pose(const Pose& p, Action a) {
  switch (a) {
    case Action::Forward:
      return {p.x + kForwardStep * std::cos(p.theta),
              p.y + kForwardStep * std::sin(p.theta), p.theta};
    case Action::TurnLeft:
      return {p.x, p.y, wrap_angle(p.theta + kTurnStep)};
    case Action::TurnRight:
      return {p.x, p.y, wrap_angle(p.theta - kTurnStep)};
  }
  return p;
}

}  // namespace isrm
