#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "isrm/geometry.hpp"
#include "isrm/grid.hpp"

namespace isrm {

struct CellRC {
  int row = 0;
  int col = 0;
  bool operator==(const CellRC&) const = default;
  auto operator<=>(const CellRC&) const = default;
};

struct NavConfig {
  int eta = 25;                     // global-goal refresh period in steps
  double agent_radius = 0.1;        // meters, inflates obstacles for planning
  double local_goal_distance = 0.25;
  double reach_distance = 0.1;      // local goal considered reached
  double heading_tolerance = 5.0 * kPi / 180.0;
  double occupied_threshold = 0.5;
};

// Frontier cell: explored free cell with an unobserved 8-neighbor.
bool is_frontier_cell(const RegionGrid& map, int row, int col,
                      double occupied_threshold = 0.5);

// 8-connected frontier components in deterministic scan order.
std::vector<std::vector<CellRC>> frontier_components(
    const RegionGrid& map, double occupied_threshold = 0.5);

// Centroid-nearest cell of the largest frontier component; components listed
// in excluded are skipped (identified by their first cell in scan order).
// Empty result means exploration is complete.
std::optional<CellRC> select_global_goal(
    const RegionGrid& map, const Pose& pose,
    const std::vector<CellRC>& excluded_components = {});

// Planner obstacle mask: occupied cells inflated by the agent radius, except
// within one radius of the start cell (so a wall-adjacent agent can leave).
// Unobserved cells count as traversable.
std::vector<std::uint8_t> planner_obstacles(const RegionGrid& map,
                                            CellRC start,
                                            const NavConfig& config);

struct PlanResult {
  std::vector<CellRC> path;  // start..goal inclusive
  double cost = 0.0;
};

// Shortest 8-connected path (diagonal cost sqrt(2), no corner cutting) over
// the obstacle mask. A* with an octile heuristic and deterministic
// tie-breaking. Empty optional when the goal is unreachable.
std::optional<PlanResult> plan_path(const std::vector<std::uint8_t>& blocked,
                                    int side, CellRC start, CellRC goal);

// Farthest path cell within local_goal_distance of the agent; falls back to
// the first path cell.
CellRC sample_local_goal(const std::vector<CellRC>& path, const Pose& pose,
                         const RegionGrid& geom,
                         double local_goal_distance = 0.25);

// Turns toward the goal when the heading error exceeds the tolerance,
// otherwise steps forward.
Action local_step(const Pose& pose, const Vec2& goal_world,
                  const NavConfig& config);

enum class RefreshReason : std::uint8_t {
  None,
  EtaGlobal,       // periodic global-goal refresh (also refreshes the local)
  LocalOccupied,   // local goal fused as occupied
  LocalReached,    // agent within reach_distance of the local goal
};

const char* refresh_reason_name(RefreshReason r);

struct NavState {
  bool initialized = false;
  bool complete = false;
  CellRC global_goal;
  CellRC local_goal;
  int steps_since_global = 0;
  std::vector<CellRC> path;
};

struct GoalUpdate {
  NavState state;
  RefreshReason reason = RefreshReason::None;
};

// Advances the goal bookkeeping for one step: refreshes the global goal
// every eta steps and the local goal when the global changed, the local goal
// became occupied, or it was reached. Any refresh replans; unreachable
// global goals trigger reselection against the remaining frontier
// components. state.complete is set when no reachable frontier remains.
GoalUpdate update_goals(const NavState& state, const RegionGrid& map,
                        const Pose& pose, const NavConfig& config);

}  // namespace isrm
