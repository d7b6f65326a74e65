#include "isrm/simulator.hpp"
#include "isrm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace isrm {

namespace {

struct Rect {  // inclusive interior bounds
  int row0, col0, row1, col1;
  int rows() const { return row1 - row0 + 1; }
  int cols() const { return col1 - col0 + 1; }
};

struct WallLine {
  bool horizontal;  // wall occupies one full row (horizontal) or column
  int line;         // row or column index of the wall
  int lo, hi;       // span along the wall (inclusive)
};

struct BspState {
  Rng* rng;
  int min_cells;
  int max_cells;
  std::vector<Rect> rooms;
  std::vector<WallLine> walls;
};

void split_rect(BspState& s, const Rect& rect) {
  const bool can_rows = rect.rows() >= 2 * s.min_cells + 1;
  const bool can_cols = rect.cols() >= 2 * s.min_cells + 1;
  const bool oversize = rect.rows() > s.max_cells || rect.cols() > s.max_cells;
  if ((!can_rows && !can_cols) ||
      (!oversize && s.rng->uniform() < 0.15)) {
    s.rooms.push_back(rect);
    return;
  }
  bool split_rows;
  if (can_rows && can_cols) {
    split_rows = rect.rows() > rect.cols()
                     ? true
                     : (rect.cols() > rect.rows() ? false
                                                  : s.rng->uniform() < 0.5);
  } else {
    split_rows = can_rows;
  }
  if (split_rows) {
    const int line = static_cast<int>(
        s.rng->uniform_int(rect.row0 + s.min_cells, rect.row1 - s.min_cells));
    s.walls.push_back({true, line, rect.col0, rect.col1});
    split_rect(s, {rect.row0, rect.col0, line - 1, rect.col1});
    split_rect(s, {line + 1, rect.col0, rect.row1, rect.col1});
  } else {
    const int line = static_cast<int>(
        s.rng->uniform_int(rect.col0 + s.min_cells, rect.col1 - s.min_cells));
    s.walls.push_back({false, line, rect.row0, rect.row1});
    split_rect(s, {rect.row0, rect.col0, rect.row1, line - 1});
    split_rect(s, {rect.row0, line + 1, rect.row1, rect.col1});
  }
}

// Door positions must be free on both sides of the wall; later perpendicular
// walls can cross the shared line, so doors are carved after recursion.
bool carve_door(Floorplan& fp, const WallLine& wall, int door_cells,
                Rng& rng, std::vector<DoorSpan>& doors) {
  const auto usable = [&](int pos) {
    if (wall.horizontal) {
      return fp.is_free(wall.line - 1, pos) && fp.is_free(wall.line + 1, pos);
    }
    return fp.is_free(pos, wall.line - 1) && fp.is_free(pos, wall.line + 1);
  };
  for (int width = door_cells; width >= 6; --width) {
    std::vector<int> starts;
    for (int start = wall.lo; start + width - 1 <= wall.hi; ++start) {
      bool ok = true;
      for (int p = start; p < start + width; ++p) {
        if (!usable(p)) {
          ok = false;
          break;
        }
      }
      if (ok) starts.push_back(start);
    }
    if (starts.empty()) continue;
    const int start =
        starts[static_cast<std::size_t>(rng.uniform_int(0, starts.size() - 1))];
    for (int p = start; p < start + width; ++p) {
      const int r = wall.horizontal ? wall.line : p;
      const int c = wall.horizontal ? p : wall.line;
      fp.occupancy[fp.flat(r, c)] = 0;
      // Door cells inherit the region on the low-index side of the wall.
      const int sr = wall.horizontal ? wall.line - 1 : p;
      const int sc = wall.horizontal ? p : wall.line - 1;
      fp.region[fp.flat(r, c)] = fp.region[fp.flat(sr, sc)];
    }
    if (wall.horizontal) {
      doors.push_back({wall.line, start, wall.line, start + width - 1});
    } else {
      doors.push_back({start, wall.line, start + width - 1, wall.line});
    }
    return true;
  }
  return false;
}

bool connected_and_labeled(const Floorplan& fp) {
  int first_free = -1;
  int free_count = 0;
  for (int i = 0; i < fp.width * fp.height; ++i) {
    if (fp.occupancy[i] == 0) {
      if (fp.region[i] < 0) return false;
      if (first_free < 0) first_free = i;
      ++free_count;
    }
  }
  if (first_free < 0) return false;
  std::vector<std::uint8_t> seen(fp.width * fp.height, 0);
  std::vector<int> stack{first_free};
  seen[first_free] = 1;
  int reached = 0;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    ++reached;
    const int r = i / fp.width, c = i % fp.width;
    const int nbr[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
    for (const auto& n : nbr) {
      if (!fp.is_free(n[0], n[1])) continue;
      const int ni = fp.flat(n[0], n[1]);
      if (!seen[ni]) {
        seen[ni] = 1;
        stack.push_back(ni);
      }
    }
  }
  return reached == free_count;
}

Floorplan try_generate(const FloorplanConfig& config, std::uint64_t seed) {
  const int w = static_cast<int>(std::lround(config.extent_m / kCellSize));
  const int h = static_cast<int>(std::lround(
      (config.extent_h_m > 0.0 ? config.extent_h_m : config.extent_m) /
      kCellSize));
  if (w < 5 || h < 5) throw std::invalid_argument("extent too small");
  Rng rng(seed);

  Floorplan fp;
  fp.width = w;
  fp.height = h;
  fp.cell_size = kCellSize;
  fp.labels = config.labels;
  fp.seed = config.seed;
  fp.occupancy.assign(static_cast<std::size_t>(w) * h, 0);
  fp.region.assign(static_cast<std::size_t>(w) * h, -1);
  for (int r = 0; r < h; ++r) {
    fp.occupancy[fp.flat(r, 0)] = 1;
    fp.occupancy[fp.flat(r, w - 1)] = 1;
  }
  for (int c = 0; c < w; ++c) {
    fp.occupancy[fp.flat(0, c)] = 1;
    fp.occupancy[fp.flat(h - 1, c)] = 1;
  }

  BspState bsp;
  bsp.rng = &rng;
  bsp.min_cells =
      std::max(3, static_cast<int>(std::lround(config.min_room_m / kCellSize)));
  bsp.max_cells =
      std::max(bsp.min_cells,
               static_cast<int>(std::lround(config.max_room_m / kCellSize)));
  split_rect(bsp, {1, 1, h - 2, w - 2});

  std::vector<double> weights = config.label_weights;
  if (weights.empty()) weights.assign(config.labels.size(), 1.0);
  if (static_cast<int>(weights.size()) != config.labels.size()) {
    throw std::invalid_argument("label weight count mismatch");
  }
  for (const Rect& rect : bsp.rooms) {
    const int label = rng.weighted_index(weights);
    fp.rooms.push_back({label, rect.row0, rect.col0, rect.row1, rect.col1});
    for (int r = rect.row0; r <= rect.row1; ++r) {
      for (int c = rect.col0; c <= rect.col1; ++c) {
        fp.region[fp.flat(r, c)] = static_cast<std::int16_t>(label);
      }
    }
  }
  for (const WallLine& wall : bsp.walls) {
    if (wall.horizontal) {
      for (int c = wall.lo; c <= wall.hi; ++c) {
        fp.occupancy[fp.flat(wall.line, c)] = 1;
        fp.region[fp.flat(wall.line, c)] = -1;
      }
    } else {
      for (int r = wall.lo; r <= wall.hi; ++r) {
        fp.occupancy[fp.flat(r, wall.line)] = 1;
        fp.region[fp.flat(r, wall.line)] = -1;
      }
    }
  }
  const int door_cells =
      std::max(6, static_cast<int>(std::lround(config.door_width_m /
                                               kCellSize)));
  for (const WallLine& wall : bsp.walls) {
    if (!carve_door(fp, wall, door_cells, rng, fp.doors)) {
      throw std::runtime_error("door placement failed");
    }
  }
  return fp;
}

bool floorplan_valid(const Floorplan& fp, const FloorplanConfig& config) {
  if (static_cast<int>(fp.rooms.size()) < config.min_rooms) return false;
  std::vector<std::uint8_t> present(config.labels.size(), 0);
  for (const Room& room : fp.rooms) present[room.label] = 1;
  int distinct = 0;
  for (std::uint8_t p : present) distinct += p;
  if (distinct < config.min_distinct_labels) return false;
  return connected_and_labeled(fp);
}

// Raycast one bearing through the floorplan; returns (depth, region label).
struct RayHit {
  float depth;
  int label;
};

RayHit cast_floorplan_ray(const Floorplan& fp, const Pose& pose,
                          double world_angle, double max_range) {
  const double cs = fp.cell_size;
  const double dx = std::cos(world_angle), dy = std::sin(world_angle);
  int col = static_cast<int>(std::floor(pose.x / cs));
  int row = static_cast<int>(std::floor(pose.y / cs));
  const double inf = std::numeric_limits<double>::infinity();
  const int step_x = dx > 0.0 ? 1 : -1;
  const int step_y = dy > 0.0 ? 1 : -1;
  double t_max_x = inf, t_max_y = inf;
  if (dx > 0.0) t_max_x = ((col + 1) * cs - pose.x) / dx;
  if (dx < 0.0) t_max_x = (pose.x - col * cs) / -dx;
  if (dy > 0.0) t_max_y = ((row + 1) * cs - pose.y) / dy;
  if (dy < 0.0) t_max_y = (pose.y - row * cs) / -dy;
  const double t_delta_x = dx == 0.0 ? inf : cs / std::abs(dx);
  const double t_delta_y = dy == 0.0 ? inf : cs / std::abs(dy);

  int last_free = fp.flat(row, col);
  while (true) {
    const double t = std::min(t_max_x, t_max_y);
    if (t >= max_range) {
      return {static_cast<float>(max_range), fp.region[last_free]};
    }
    if (t_max_x <= t_max_y) {
      col += step_x;
      t_max_x += t_delta_x;
    } else {
      row += step_y;
      t_max_y += t_delta_y;
    }
    if (!fp.in_bounds(row, col)) {
      return {static_cast<float>(max_range), fp.region[last_free]};
    }
    if (fp.occupancy[fp.flat(row, col)]) {
      return {static_cast<float>(t), fp.region[last_free]};
    }
    last_free = fp.flat(row, col);
  }
}

SenseResult sense_impl(const Floorplan& fp, const Pose& pose, int width,
                       double hfov, double max_range, const NoiseModel* noise,
                       Rng* rng, bool parallel) {
  const int col = static_cast<int>(std::floor(pose.x / fp.cell_size));
  const int row = static_cast<int>(std::floor(pose.y / fp.cell_size));
  if (!fp.is_free(row, col)) {
    throw std::invalid_argument("sensor pose inside an obstacle");
  }
  if (noise != nullptr && rng == nullptr) {
    throw std::invalid_argument("noise model requires an rng");
  }
  SenseResult result;
  result.scan.hfov = hfov;
  result.scan.max_range = max_range;
  result.scan.min_range = 0.0;
  result.scan.depths.resize(width);
  result.ray_labels.resize(width);
  result.reported_pose = pose;

  if (parallel) {
#pragma omp parallel for schedule(static) if (parallel_kernels_enabled())
    for (int k = 0; k < width; ++k) {
      const RayHit hit = cast_floorplan_ray(
          fp, pose, pose.theta - ray_bearing(k, width, hfov), max_range);
      result.scan.depths[k] = hit.depth;
      result.ray_labels[k] = hit.label;
    }
  } else {
    for (int k = 0; k < width; ++k) {
      const RayHit hit = cast_floorplan_ray(
          fp, pose, pose.theta - ray_bearing(k, width, hfov), max_range);
      result.scan.depths[k] = hit.depth;
      result.ray_labels[k] = hit.label;
    }
  }

  if (noise != nullptr) {
    for (int k = 0; k < width; ++k) {
      const double d = result.scan.depths[k];
      const double g = rng->normal();
      // relative range noise: absolute error grows linearly with depth
      double noisy = d * (1.0 + g * noise->depth_sigma_rel);
      if (rng->uniform() < noise->depth_dropout_p) noisy = max_range;
      result.scan.depths[k] =
          static_cast<float>(std::clamp(noisy, 0.0, max_range));
    }
    result.reported_pose.x += rng->normal(0.0, noise->pose_sigma_trans);
    result.reported_pose.y += rng->normal(0.0, noise->pose_sigma_trans);
    result.reported_pose.theta =
        wrap_angle(result.reported_pose.theta +
                   rng->normal(0.0, noise->pose_sigma_rot));
  }
  return result;
}

// Forward motion clamped at ground-truth obstacles: the segment is sampled
// at quarter-cell resolution and the pose stops at the last free sample.
Pose move_forward_with_collision(const Floorplan& fp, const Pose& pose) {
  const double step = fp.cell_size * 0.25;
  const Vec2 dir = pose.heading_dir();
  double reached = 0.0;
  for (double s = step; s <= kForwardStep + 1e-12; s += step) {
    const double d = std::min(s, kForwardStep);
    const Vec2 p{pose.x + dir.x * d, pose.y + dir.y * d};
    const int c = static_cast<int>(std::floor(p.x / fp.cell_size));
    const int r = static_cast<int>(std::floor(p.y / fp.cell_size));
    if (!fp.is_free(r, c)) break;
    reached = d;
  }
  return {pose.x + dir.x * reached, pose.y + dir.y * reached, pose.theta};
}

}  // namespace

int Floorplan::num_free_cells() const {
  int n = 0;
  for (std::uint8_t o : occupancy) n += o == 0;
  return n;
}

CellIndex Floorplan::world_to_cell(const Vec2& p) const {
  const int ix = static_cast<int>(std::floor(p.x / cell_size));
  const int iy = static_cast<int>(std::floor(p.y / cell_size));
  if (!in_bounds(iy, ix)) throw std::out_of_range("point outside floorplan");
  return {ix, iy};
}

Floorplan generate_floorplan(const FloorplanConfig& config) {
  if (config.extent_m < 2.0 * config.min_room_m) {
    throw std::invalid_argument("extent below twice the minimum room size");
  }
  for (int attempt = 0; attempt < config.max_retries; ++attempt) {
    Floorplan fp;
    try {
      fp = try_generate(config, derive_seed(config.seed, attempt));
    } catch (const std::runtime_error&) {
      continue;  // door placement failed, retry with the next derived seed
    }
    if (floorplan_valid(fp, config)) return fp;
  }
  throw std::runtime_error("floorplan generation failed after retries");
}

SenseResult sense(const Floorplan& fp, const Pose& pose, int width,
                  double hfov, double max_range, const NoiseModel* noise,
                  Rng* rng) {
  return sense_impl(fp, pose, width, hfov, max_range, noise, rng, true);
}

SenseResult sense_serial(const Floorplan& fp, const Pose& pose, int width,
                         double hfov, double max_range,
                         const NoiseModel* noise, Rng* rng) {
  return sense_impl(fp, pose, width, hfov, max_range, noise, rng, false);
}

Pose random_start_pose(const Floorplan& fp, Rng& rng, int clearance_cells) {
  std::vector<CellRC> candidates;
  for (int r = clearance_cells; r < fp.height - clearance_cells; ++r) {
    for (int c = clearance_cells; c < fp.width - clearance_cells; ++c) {
      bool clear = true;
      for (int dr = -clearance_cells; dr <= clearance_cells && clear; ++dr) {
        for (int dc = -clearance_cells; dc <= clearance_cells; ++dc) {
          if (!fp.is_free(r + dr, c + dc)) {
            clear = false;
            break;
          }
        }
      }
      if (clear) candidates.push_back({r, c});
    }
  }
  if (candidates.empty()) {
    throw std::runtime_error("no start position with required clearance");
  }
  const CellRC cell = candidates[static_cast<std::size_t>(
      rng.uniform_int(0, candidates.size() - 1))];
  const Vec2 center = fp.cell_center(cell.row, cell.col);
  return {center.x, center.y, wrap_angle(rng.uniform(-kPi, kPi))};
}

EpisodeResult run_episode(const Floorplan& fp, const Pose& start,
                          const EpisodeConfig& config,
                          const StepObserver& observer) {
  const int c_labels = fp.labels.size();
  const ConfusionMatrix confusion =
      ConfusionMatrix::diagonal(c_labels, config.confusion_diagonal);
  const int global_side =
      std::max({fp.width, fp.height, config.local_side + 1});
  EpisodeResult result{
      RegionGrid::global(global_side, c_labels, {0.0, 0.0}, fp.cell_size),
      {},
      {}};
  RegionGrid& global = result.global_map;

  Rng rng(derive_seed(config.seed, 0xE9150DE));
  const NoiseModel* noise = config.noise_enabled ? &config.noise : nullptr;
  Pose pose = start;
  NavState nav;

  for (int t = 0; t < config.max_steps; ++t) {
    const SenseResult obs = sense(fp, pose, config.scan_width, config.hfov,
                                  config.max_range, noise, &rng);

    const ObservationDistribution dist =
        synth_classify(obs.ray_labels, confusion, config.mode);
    const TopDownProjection proj =
        collapse_to_topdown(obs.scan, config.local_side, fp.cell_size);
    const RegionGrid ego = paint_egocentric(proj, dist);
    const RegisteredCells registered =
        register_local(ego, obs.reported_pose, global);
    result.stats.dropped_cells += registered.dropped_out_of_bounds;
    const FuseStats fused = fuse(global, registered, config.fusion);
    result.stats.degenerate_fusions += fused.degenerate_fallbacks;

    const GoalUpdate update =
        update_goals(nav, global, obs.reported_pose, config.nav);
    nav = update.state;
    if (nav.complete) {
      result.stats.exploration_complete = true;
      result.stats.steps = t;
      break;
    }
    // observer calls line up one-to-one with trajectory log rows
    if (observer) observer(t, pose, obs);

    const Vec2 local_world =
        global.cell_center(nav.local_goal.row, nav.local_goal.col);
    Action action = local_step(obs.reported_pose, local_world, config.nav);
    const auto landing_occupied = [&]() {
      const Pose landing = compose_pose(obs.reported_pose, Action::Forward);
      const int lc = static_cast<int>(std::floor(
          (landing.x - global.origin().x) / global.cell_size()));
      const int lr = static_cast<int>(std::floor(
          (landing.y - global.origin().y) / global.cell_size()));
      return global.in_bounds(lr, lc) &&
             global.occupancy(global.flat(lr, lc)) >=
                 config.nav.occupied_threshold;
    };
    if (action == Action::Forward && landing_occupied()) {
      // Never step into a cell the fused map marks occupied; turn and let
      // the next goal refresh replan around it.
      action = Action::TurnLeft;
      ++result.stats.blocked_forward_overrides;
    }

    result.log.push_back({t, pose, obs.reported_pose, action, nav.global_goal,
                          nav.local_goal, update.reason});

    if (action == Action::Forward) {
      if (landing_occupied()) ++result.stats.forward_violations;
      pose = move_forward_with_collision(fp, pose);
    } else {
      pose = compose_pose(pose, action);
    }
    result.stats.steps = t + 1;
  }

  int explored_free = 0, free_cells = 0;
  for (int r = 0; r < fp.height; ++r) {
    for (int c = 0; c < fp.width; ++c) {
      if (!fp.is_free(r, c)) continue;
      ++free_cells;
      if (global.in_bounds(r, c) && global.obs_count(global.flat(r, c)) > 0) {
        ++explored_free;
      }
    }
  }
  result.stats.explored_free_fraction =
      free_cells > 0 ? static_cast<double>(explored_free) / free_cells : 0.0;
  return result;
}

void write_trajectory_csv(const std::vector<TrajectoryRow>& log,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "t,x,y,theta,reported_x,reported_y,reported_theta,action,"
         "g_row,g_col,l_row,l_col,refresh_reason\n";
  char buf[320];
  for (const TrajectoryRow& row : log) {
    std::snprintf(buf, sizeof(buf),
                  "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%s,%d,%d,%d,%d,%s\n",
                  row.t, row.pose.x, row.pose.y, row.pose.theta,
                  row.reported_pose.x, row.reported_pose.y,
                  row.reported_pose.theta, action_name(row.action),
                  row.global_goal.row, row.global_goal.col, row.local_goal.row,
                  row.local_goal.col, refresh_reason_name(row.refresh));
    out << buf;
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

// RLE helpers for the floorplan container: "countxvalue" tokens, row-major.
template <typename T>
std::string rle_encode(const std::vector<T>& values) {
  std::ostringstream out;
  std::size_t i = 0;
  bool first = true;
  while (i < values.size()) {
    std::size_t j = i;
    while (j < values.size() && values[j] == values[i]) ++j;
    if (!first) out << ' ';
    out << (j - i) << 'x' << static_cast<long>(values[i]);
    first = false;
    i = j;
  }
  return out.str();
}

template <typename T>
std::vector<T> rle_decode(const std::string& text, std::size_t expected) {
  std::vector<T> values;
  values.reserve(expected);
  std::istringstream in(text);
  std::string token;
  while (in >> token) {
    const auto x = token.find('x');
    if (x == std::string::npos) throw std::runtime_error("bad RLE token");
    const long count = std::stol(token.substr(0, x));
    const long value = std::stol(token.substr(x + 1));
    values.insert(values.end(), count, static_cast<T>(value));
  }
  if (values.size() != expected) {
    throw std::runtime_error("RLE length mismatch");
  }
  return values;
}

std::string join_labels(const RegionLabelSet& labels) {
  std::string out;
  for (int i = 0; i < labels.size(); ++i) {
    if (i) out += '|';
    out += labels.name(i);
  }
  return out;
}

}  // namespace

void Floorplan::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "ISRM-FP v1\n";
  out << "width=" << width << " height=" << height << '\n';
  char cs[64];
  std::snprintf(cs, sizeof(cs), "cell_size=%.17g\n", cell_size);
  out << cs;
  out << "seed=" << seed << '\n';
  out << "labels=" << join_labels(labels) << '\n';
  out << "occupancy=" << rle_encode(occupancy) << '\n';
  out << "region=" << rle_encode(region) << '\n';
  for (const Room& room : rooms) {
    out << "room " << room.label << ' ' << room.row0 << ' ' << room.col0 << ' '
        << room.row1 << ' ' << room.col1 << '\n';
  }
  for (const DoorSpan& door : doors) {
    out << "door " << door.row0 << ' ' << door.col0 << ' ' << door.row1 << ' '
        << door.col1 << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Floorplan Floorplan::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  std::getline(in, line);
  if (line != "ISRM-FP v1") throw std::runtime_error("not a floorplan file");
  Floorplan fp;
  std::getline(in, line);
  if (std::sscanf(line.c_str(), "width=%d height=%d", &fp.width,
                  &fp.height) != 2) {
    throw std::runtime_error("bad floorplan dimensions");
  }
  std::getline(in, line);
  if (std::sscanf(line.c_str(), "cell_size=%lg", &fp.cell_size) != 1) {
    throw std::runtime_error("bad floorplan cell size");
  }
  std::getline(in, line);
  unsigned long long seed = 0;
  if (std::sscanf(line.c_str(), "seed=%llu", &seed) != 1) {
    throw std::runtime_error("bad floorplan seed");
  }
  fp.seed = seed;
  std::getline(in, line);
  if (line.rfind("labels=", 0) != 0) {
    throw std::runtime_error("missing floorplan labels");
  }
  std::vector<std::string> names;
  std::istringstream ls(line.substr(7));
  std::string name;
  while (std::getline(ls, name, '|')) names.push_back(name);
  fp.labels = RegionLabelSet(names);

  const std::size_t cells = static_cast<std::size_t>(fp.width) * fp.height;
  std::getline(in, line);
  if (line.rfind("occupancy=", 0) != 0) {
    throw std::runtime_error("missing occupancy grid");
  }
  fp.occupancy = rle_decode<std::uint8_t>(line.substr(10), cells);
  std::getline(in, line);
  if (line.rfind("region=", 0) != 0) {
    throw std::runtime_error("missing region grid");
  }
  fp.region = rle_decode<std::int16_t>(line.substr(7), cells);

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Room room;
    DoorSpan door;
    if (std::sscanf(line.c_str(), "room %d %d %d %d %d", &room.label,
                    &room.row0, &room.col0, &room.row1, &room.col1) == 5) {
      fp.rooms.push_back(room);
    } else if (std::sscanf(line.c_str(), "door %d %d %d %d", &door.row0,
                           &door.col0, &door.row1, &door.col1) == 4) {
      fp.doors.push_back(door);
    } else {
      throw std::runtime_error("bad floorplan record: " + line);
    }
  }
  return fp;
}

ExtractedDataset extract_dataset(const std::vector<Floorplan>& envs,
                                 const ExtractConfig& config) {
  ExtractedDataset dataset;
  const int num_envs = static_cast<int>(envs.size());
  const int num_val = num_envs > 1
                          ? std::max(1, static_cast<int>(std::lround(
                                            num_envs *
                                            config.val_env_fraction)))
                          : 0;

  for (int env = 0; env < num_envs; ++env) {
    const Floorplan& fp = envs[env];
    // Spatial hash over stored poses of this environment; dedup needs both
    // position and orientation to match, so buckets are position-only.
    std::map<std::pair<int, int>, std::vector<std::size_t>> buckets;
    const double bucket_size = config.dedup_position;
    const auto is_duplicate = [&](const Pose& pose) {
      const int bx = static_cast<int>(std::floor(pose.x / bucket_size));
      const int by = static_cast<int>(std::floor(pose.y / bucket_size));
      for (int dx = -1; dx <= 1; ++dx) {
        for (int dy = -1; dy <= 1; ++dy) {
          const auto it = buckets.find({bx + dx, by + dy});
          if (it == buckets.end()) continue;
          for (std::size_t idx : it->second) {
            const Pose& stored = dataset.samples[idx].pose;
            const double dpos = std::hypot(stored.x - pose.x,
                                           stored.y - pose.y);
            const double drot =
                std::abs(wrap_angle(stored.theta - pose.theta));
            if (dpos <= config.dedup_position &&
                drot <= config.dedup_rotation) {
              return true;
            }
          }
        }
      }
      return false;
    };

    for (int ep = 0; ep < config.episodes_per_env; ++ep) {
      const std::uint64_t ep_seed =
          derive_seed(config.seed, static_cast<std::uint64_t>(env) * 8191 + ep);
      Rng start_rng(derive_seed(ep_seed, 0x57A27));
      const Pose start = random_start_pose(fp, start_rng);

      EpisodeConfig ep_config;
      ep_config.max_steps = config.max_steps;
      ep_config.mode = ObservationMode::Spatial;
      ep_config.fusion = FusionRule::MovingAverage;
      ep_config.seed = ep_seed;
      ep_config.scan_width = config.scan_width;
      ep_config.hfov = config.hfov;
      ep_config.max_range = config.max_range;
      ep_config.local_side = config.local_side;

      const auto observer = [&](int /*t*/, const Pose& pose,
                                const SenseResult& obs) {
        if (is_duplicate(pose)) {
          ++dataset.rejected_duplicates;
          return;
        }
        DatasetSample sample;
        sample.env_id = env;
        sample.pose = pose;
        sample.scan = obs.scan;
        sample.ray_labels = obs.ray_labels;
        sample.ego_side = config.local_side;
        const TopDownProjection proj =
            collapse_to_topdown(obs.scan, config.local_side, fp.cell_size);
        const RegionGrid geom =
            RegionGrid::egocentric(config.local_side, fp.labels.size(),
                                   fp.cell_size);
        sample.ego_labels.assign(
            static_cast<std::size_t>(config.local_side) * config.local_side,
            -1);
        for (int i = 0; i < geom.num_cells(); ++i) {
          if (!proj.observed(i)) continue;
          const Vec2 world = pose.local_to_world(
              geom.cell_center(i / config.local_side, i % config.local_side));
          const int fc = static_cast<int>(std::floor(world.x / fp.cell_size));
          const int fr = static_cast<int>(std::floor(world.y / fp.cell_size));
          if (!fp.in_bounds(fr, fc) || fp.occupancy[fp.flat(fr, fc)]) {
            sample.ego_labels[i] = -2;
          } else {
            sample.ego_labels[i] = fp.region[fp.flat(fr, fc)];
          }
        }
        const std::size_t idx = dataset.samples.size();
        dataset.samples.push_back(std::move(sample));
        dataset.sample_split.push_back(env >= num_envs - num_val ? 1 : 0);
        const int bx = static_cast<int>(std::floor(pose.x / bucket_size));
        const int by = static_cast<int>(std::floor(pose.y / bucket_size));
        buckets[{bx, by}].push_back(idx);
      };
      run_episode(fp, start, ep_config, observer);
    }
  }
  return dataset;
}

void ExtractedDataset::save(const std::string& directory) const {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  const fs::path dir(directory);

  std::ofstream index(dir / "index.csv");
  if (!index) throw std::runtime_error("cannot write dataset index");
  index << "sample,env,split,x,y,theta\n";
  char buf[160];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%d,%s,%.17g,%.17g,%.17g\n", i,
                  samples[i].env_id, sample_split[i] == 1 ? "val" : "train",
                  samples[i].pose.x, samples[i].pose.y, samples[i].pose.theta);
    index << buf;
  }

  std::ofstream out(dir / "samples.bin", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset samples");
  const char magic[4] = {'I', 'S', 'R', 'E'};
  out.write(magic, 4);
  const std::uint64_t count = samples.size();
  out.write(reinterpret_cast<const char*>(&count), 8);
  for (const DatasetSample& s : samples) {
    const std::uint32_t env = s.env_id, width = s.scan.width(),
                        side = s.ego_side;
    out.write(reinterpret_cast<const char*>(&env), 4);
    out.write(reinterpret_cast<const char*>(&s.pose.x), 8);
    out.write(reinterpret_cast<const char*>(&s.pose.y), 8);
    out.write(reinterpret_cast<const char*>(&s.pose.theta), 8);
    out.write(reinterpret_cast<const char*>(&width), 4);
    out.write(reinterpret_cast<const char*>(s.scan.depths.data()), 4u * width);
    for (int label : s.ray_labels) {
      const std::uint16_t v = static_cast<std::uint16_t>(label);
      out.write(reinterpret_cast<const char*>(&v), 2);
    }
    out.write(reinterpret_cast<const char*>(&side), 4);
    out.write(reinterpret_cast<const char*>(s.ego_labels.data()),
              2u * s.ego_labels.size());
  }
  if (!out) throw std::runtime_error("write failed: dataset samples");
}

}  // namespace isrm
