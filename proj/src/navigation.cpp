#include "isrm/navigation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace isrm {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

bool is_free_explored(const RegionGrid& map, int i, double occ_threshold) {
  return map.obs_count(i) > 0 && map.occupancy(i) < occ_threshold;
}

CellRC component_key(const std::vector<CellRC>& component) {
  return component.front();  // first cell in scan order identifies it
}

}  // namespace

bool is_frontier_cell(const RegionGrid& map, int row, int col,
                      double occupied_threshold) {
  if (!is_free_explored(map, map.flat(row, col), occupied_threshold)) {
    return false;
  }
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) {
      if (dr == 0 && dc == 0) continue;
      const int r = row + dr, c = col + dc;
      if (!map.in_bounds(r, c)) continue;
      if (map.obs_count(map.flat(r, c)) == 0) return true;
    }
  }
  return false;
}

std::vector<std::vector<CellRC>> frontier_components(
    const RegionGrid& map, double occupied_threshold) {
  const int side = map.side();
  std::vector<std::uint8_t> frontier(map.num_cells(), 0);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      frontier[map.flat(r, c)] =
          is_frontier_cell(map, r, c, occupied_threshold) ? 1 : 0;
    }
  }
  std::vector<std::vector<CellRC>> components;
  std::vector<std::uint8_t> seen(map.num_cells(), 0);
  std::vector<CellRC> stack;
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const int i = map.flat(r, c);
      if (!frontier[i] || seen[i]) continue;
      std::vector<CellRC> component;
      stack.assign(1, {r, c});
      seen[i] = 1;
      while (!stack.empty()) {
        const CellRC cur = stack.back();
        stack.pop_back();
        component.push_back(cur);
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const int nr = cur.row + dr, nc = cur.col + dc;
            if (!map.in_bounds(nr, nc)) continue;
            const int ni = map.flat(nr, nc);
            if (frontier[ni] && !seen[ni]) {
              seen[ni] = 1;
              stack.push_back({nr, nc});
            }
          }
        }
      }
      std::sort(component.begin(), component.end());
      components.push_back(std::move(component));
    }
  }
  return components;
}

std::optional<CellRC> select_global_goal(
    const RegionGrid& map, const Pose& /*pose*/,
    const std::vector<CellRC>& excluded_components) {
  const auto components = frontier_components(map);
  const std::vector<CellRC>* best = nullptr;
  for (const auto& comp : components) {
    if (std::find(excluded_components.begin(), excluded_components.end(),
                  component_key(comp)) != excluded_components.end()) {
      continue;
    }
    if (best == nullptr || comp.size() > best->size() ||
        (comp.size() == best->size() &&
         component_key(comp) < component_key(*best))) {
      best = &comp;
    }
  }
  if (best == nullptr) return std::nullopt;
  double mean_row = 0.0, mean_col = 0.0;
  for (const CellRC& cell : *best) {
    mean_row += cell.row;
    mean_col += cell.col;
  }
  mean_row /= best->size();
  mean_col /= best->size();
  CellRC goal = best->front();
  double best_d = std::numeric_limits<double>::infinity();
  for (const CellRC& cell : *best) {
    const double dr = cell.row - mean_row, dc = cell.col - mean_col;
    const double d = dr * dr + dc * dc;
    if (d < best_d || (d == best_d && cell < goal)) {
      best_d = d;
      goal = cell;
    }
  }
  return goal;
}

std::vector<std::uint8_t> planner_obstacles(const RegionGrid& map,
                                            CellRC start,
                                            const NavConfig& config) {
  const int side = map.side();
  const int radius =
      static_cast<int>(std::ceil(config.agent_radius / map.cell_size()));
  std::vector<std::uint8_t> occupied(map.num_cells(), 0);
  for (int i = 0; i < map.num_cells(); ++i) {
    occupied[i] = map.occupancy(i) >= config.occupied_threshold ? 1 : 0;
  }
  std::vector<std::uint8_t> blocked = occupied;
  const int r2 = radius * radius;
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      if (!occupied[map.flat(r, c)]) continue;
      for (int dr = -radius; dr <= radius; ++dr) {
        for (int dc = -radius; dc <= radius; ++dc) {
          if (dr * dr + dc * dc > r2) continue;
          const int nr = r + dr, nc = c + dc;
          if (map.in_bounds(nr, nc)) blocked[map.flat(nr, nc)] = 1;
        }
      }
    }
  }
  // Keep the agent's immediate neighborhood at raw occupancy so a start
  // inside the inflation band still has a way out.
  for (int dr = -radius; dr <= radius; ++dr) {
    for (int dc = -radius; dc <= radius; ++dc) {
      if (dr * dr + dc * dc > r2) continue;
      const int nr = start.row + dr, nc = start.col + dc;
      if (map.in_bounds(nr, nc)) {
        blocked[map.flat(nr, nc)] = occupied[map.flat(nr, nc)];
      }
    }
  }
  blocked[map.flat(start.row, start.col)] = 0;
  return blocked;
}

std::optional<PlanResult> plan_path(const std::vector<std::uint8_t>& blocked,
                                    int side, CellRC start, CellRC goal) {
  if (start.row < 0 || start.row >= side || start.col < 0 ||
      start.col >= side || goal.row < 0 || goal.row >= side || goal.col < 0 ||
      goal.col >= side) {
    throw std::invalid_argument("plan endpoints out of bounds");
  }
  const int start_i = start.row * side + start.col;
  const int goal_i = goal.row * side + goal.col;
  if (blocked[goal_i]) return std::nullopt;

  const auto heuristic = [&](int i) {
    const int dr = std::abs(i / side - goal.row);
    const int dc = std::abs(i % side - goal.col);
    return (dr + dc) + (kSqrt2 - 2.0) * std::min(dr, dc);
  };

  struct Node {
    double f;
    double g;
    int index;
    bool operator>(const Node& o) const {
      if (f != o.f) return f > o.f;
      if (g != o.g) return g < o.g;  // prefer deeper nodes on equal f
      return index > o.index;
    }
  };
  std::priority_queue<Node, std::vector<Node>, std::greater<Node>> open;
  std::vector<double> dist(static_cast<std::size_t>(side) * side,
                           std::numeric_limits<double>::infinity());
  std::vector<int> parent(static_cast<std::size_t>(side) * side, -1);
  dist[start_i] = 0.0;
  open.push({heuristic(start_i), 0.0, start_i});

  static constexpr int kDr[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
  static constexpr int kDc[8] = {-1, 0, 1, -1, 1, -1, 0, 1};

  while (!open.empty()) {
    const Node node = open.top();
    open.pop();
    if (node.g > dist[node.index]) continue;
    if (node.index == goal_i) break;
    const int r = node.index / side, c = node.index % side;
    for (int k = 0; k < 8; ++k) {
      const int nr = r + kDr[k], nc = c + kDc[k];
      if (nr < 0 || nr >= side || nc < 0 || nc >= side) continue;
      const int ni = nr * side + nc;
      if (blocked[ni]) continue;
      const bool diagonal = kDr[k] != 0 && kDc[k] != 0;
      if (diagonal &&
          (blocked[r * side + nc] || blocked[nr * side + c])) {
        continue;  // no corner cutting
      }
      const double g = node.g + (diagonal ? kSqrt2 : 1.0);
      if (g < dist[ni]) {
        dist[ni] = g;
        parent[ni] = node.index;
        open.push({g + heuristic(ni), g, ni});
      }
    }
  }
  if (!std::isfinite(dist[goal_i])) return std::nullopt;

  PlanResult result;
  result.cost = dist[goal_i];
  for (int i = goal_i; i != -1; i = parent[i]) {
    result.path.push_back({i / side, i % side});
  }
  std::reverse(result.path.begin(), result.path.end());
  return result;
}

CellRC sample_local_goal(const std::vector<CellRC>& path, const Pose& pose,
                         const RegionGrid& geom, double local_goal_distance) {
  if (path.empty()) throw std::invalid_argument("empty path");
  CellRC chosen = path.front();
  for (const CellRC& cell : path) {
    const Vec2 center = geom.cell_center(cell.row, cell.col);
    if ((center - pose.position()).norm() <= local_goal_distance) {
      chosen = cell;
    }
  }
  return chosen;
}

Action local_step(const Pose& pose, const Vec2& goal_world,
                  const NavConfig& config) {
  const double bearing =
      std::atan2(goal_world.y - pose.y, goal_world.x - pose.x);
  const double error = wrap_angle(bearing - pose.theta);
  if (std::abs(error) > config.heading_tolerance) {
    return error > 0.0 ? Action::TurnLeft : Action::TurnRight;
  }
  return Action::Forward;
}

const char* refresh_reason_name(RefreshReason r) {
  switch (r) {
    case RefreshReason::None: return "none";
    case RefreshReason::EtaGlobal: return "eta_global";
    case RefreshReason::LocalOccupied: return "local_occupied";
    case RefreshReason::LocalReached: return "local_reached";
  }
  return "?";
}

namespace {

// Frontier cells can land inside the inflation band around a wall; planning
// targets the nearest unblocked cell within a small radius instead.
std::optional<CellRC> nearest_unblocked(const std::vector<std::uint8_t>& blocked,
                                        int side, CellRC goal,
                                        int max_radius) {
  std::optional<CellRC> best;
  int best_d2 = std::numeric_limits<int>::max();
  for (int dr = -max_radius; dr <= max_radius; ++dr) {
    for (int dc = -max_radius; dc <= max_radius; ++dc) {
      const int r = goal.row + dr, c = goal.col + dc;
      if (r < 0 || r >= side || c < 0 || c >= side) continue;
      if (blocked[r * side + c]) continue;
      const int d2 = dr * dr + dc * dc;
      const CellRC cell{r, c};
      if (d2 < best_d2 || (d2 == best_d2 && cell < *best)) {
        best_d2 = d2;
        best = cell;
      }
    }
  }
  return best;
}

std::optional<PlanResult> plan_to_goal_or_nearby(
    const std::vector<std::uint8_t>& blocked, int side, CellRC start,
    CellRC& goal) {
  if (!blocked[goal.row * side + goal.col]) {
    return plan_path(blocked, side, start, goal);
  }
  const auto substitute = nearest_unblocked(blocked, side, goal, 4);
  if (!substitute) return std::nullopt;
  goal = *substitute;
  return plan_path(blocked, side, start, goal);
}

}  // namespace

GoalUpdate update_goals(const NavState& state, const RegionGrid& map,
                        const Pose& pose, const NavConfig& config) {
  GoalUpdate update;
  update.state = state;
  NavState& s = update.state;
  if (s.complete) return update;

  const CellIndex agent = map.world_to_cell(pose.position());
  const CellRC start{agent.y, agent.x};

  s.steps_since_global += 1;
  const bool global_due = !s.initialized || s.steps_since_global >= config.eta;

  RefreshReason reason = RefreshReason::None;
  if (global_due) {
    reason = RefreshReason::EtaGlobal;
  } else {
    const int li = map.flat(s.local_goal.row, s.local_goal.col);
    const Vec2 lg = map.cell_center(s.local_goal.row, s.local_goal.col);
    if (map.occupancy(li) >= config.occupied_threshold) {
      reason = RefreshReason::LocalOccupied;
    } else if ((lg - pose.position()).norm() <= config.reach_distance) {
      reason = RefreshReason::LocalReached;
    }
  }
  if (reason == RefreshReason::None) return update;

  const auto blocked = planner_obstacles(map, start, config);
  std::vector<CellRC> excluded;
  std::optional<PlanResult> planned;
  CellRC goal = s.global_goal;

  if (global_due) {
    // Pick the largest reachable frontier component.
    while (true) {
      const auto candidate = select_global_goal(map, pose, excluded);
      if (!candidate) {
        s.complete = true;
        update.reason = reason;
        return update;
      }
      goal = *candidate;
      planned = plan_to_goal_or_nearby(blocked, map.side(), start, goal);
      if (planned) break;
      excluded.push_back(*candidate);
    }
    s.steps_since_global = 0;
    s.initialized = true;
  } else {
    planned = plan_to_goal_or_nearby(blocked, map.side(), start, goal);
    if (!planned) {
      // Kept global goal became unreachable; reselect as on a refresh.
      while (!planned) {
        const auto candidate = select_global_goal(map, pose, excluded);
        if (!candidate) {
          s.complete = true;
          update.reason = reason;
          return update;
        }
        goal = *candidate;
        planned = plan_to_goal_or_nearby(blocked, map.side(), start, goal);
        if (!planned) excluded.push_back(*candidate);
      }
      s.steps_since_global = 0;
    }
  }

  s.global_goal = goal;
  s.path = planned->path;
  s.local_goal =
      sample_local_goal(s.path, pose, map, config.local_goal_distance);
  update.reason = reason;
  return update;
}

}  // namespace isrm
