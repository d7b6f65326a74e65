#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "isrm/classifier.hpp"
#include "isrm/fusion.hpp"
#include "isrm/geometry.hpp"
#include "isrm/grid.hpp"
#include "isrm/labels.hpp"
#include "isrm/navigation.hpp"
#include "isrm/projection.hpp"
#include "isrm/rng.hpp"

namespace isrm {

struct Room {
  int label = 0;
  int row0 = 0, col0 = 0;  // inclusive interior bounds
  int row1 = 0, col1 = 0;
};

struct DoorSpan {
  int row0 = 0, col0 = 0;
  int row1 = 0, col1 = 0;
};

// Ground-truth environment: static obstacle grid plus a region label for
// every free cell. Cell (0,0) spans world [0,cs) x [0,cs).
struct Floorplan {
  int width = 0;   // columns
  int height = 0;  // rows
  double cell_size = kCellSize;
  RegionLabelSet labels;
  std::vector<std::uint8_t> occupancy;  // row-major
  std::vector<std::int16_t> region;     // -1 on occupied cells
  std::vector<Room> rooms;
  std::vector<DoorSpan> doors;
  std::uint64_t seed = 0;

  int flat(int row, int col) const { return row * width + col; }
  bool in_bounds(int row, int col) const {
    return row >= 0 && row < height && col >= 0 && col < width;
  }
  bool is_free(int row, int col) const {
    return in_bounds(row, col) && occupancy[flat(row, col)] == 0;
  }
  int num_free_cells() const;
  CellIndex world_to_cell(const Vec2& p) const;
  Vec2 cell_center(int row, int col) const {
    return {(col + 0.5) * cell_size, (row + 0.5) * cell_size};
  }

  // Plain-text container: header lines plus run-length-encoded occupancy and
  // region grids, followed by room and door records.
  void save(const std::string& path) const;
  static Floorplan load(const std::string& path);
};

struct FloorplanConfig {
  double extent_m = 15.0;
  double extent_h_m = 0.0;  // 0 = square (extent_m on both axes)
  double min_room_m = 2.5;
  double max_room_m = 6.0;
  double door_width_m = 0.9;
  std::vector<double> label_weights;  // empty = uniform
  int min_rooms = 1;
  int min_distinct_labels = 1;
  int max_retries = 64;
  std::uint64_t seed = 0;
  RegionLabelSet labels = RegionLabelSet::default_indoor();
};

// Recursive BSP splitting into rooms with one door per shared wall. The
// result is validated (connected free space, full labeling, room/label
// minima) and regenerated with a derived seed on violation, up to
// max_retries. Deterministic per seed.
Floorplan generate_floorplan(const FloorplanConfig& config);

struct NoiseModel {
  double pose_sigma_trans = 0.01;  // meters, per axis
  double pose_sigma_rot = 0.005;   // radians
  double depth_sigma_rel = 0.02;   // depth noise grows with range
  double depth_dropout_p = 0.01;   // ray replaced by max_range
};

struct SenseResult {
  DepthScan scan;
  std::vector<int> ray_labels;  // region of the last free cell per ray
  Pose reported_pose;           // pose handed to the mapper
};

// Raycast depth sensor: per-ray distance to the first occupied cell boundary
// (DDA), truncated at max_range. With a noise model, depths get
// multiplicative Gaussian noise and dropout and the reported pose gets
// additive Gaussian noise; kinematics always use the true pose.
SenseResult sense(const Floorplan& fp, const Pose& pose, int width,
                  double hfov, double max_range,
                  const NoiseModel* noise = nullptr, Rng* rng = nullptr);
SenseResult sense_serial(const Floorplan& fp, const Pose& pose, int width,
                         double hfov, double max_range,
                         const NoiseModel* noise = nullptr,
                         Rng* rng = nullptr);

struct EpisodeConfig {
  int max_steps = 1500;
  FusionRule fusion = FusionRule::MovingAverage;
  ObservationMode mode = ObservationMode::Spatial;
  bool noise_enabled = false;
  NoiseModel noise;
  double confusion_diagonal = 1.0;
  std::uint64_t seed = 0;
  int scan_width = kDefaultScanWidth;
  double hfov = kDefaultHfov;
  double max_range = kDefaultMaxRange;
  int local_side = kDefaultLocalSide;
  NavConfig nav;
};

struct TrajectoryRow {
  int t = 0;
  Pose pose;           // true pose
  Pose reported_pose;  // equals pose when noise is off
  Action action = Action::Forward;
  CellRC global_goal;
  CellRC local_goal;
  RefreshReason refresh = RefreshReason::None;
};

struct EpisodeStats {
  int steps = 0;
  bool exploration_complete = false;
  double explored_free_fraction = 0.0;
  std::uint32_t forward_violations = 0;  // forward into fused-occupied cell
  std::uint32_t blocked_forward_overrides = 0;
  std::uint32_t degenerate_fusions = 0;
  std::uint32_t dropped_cells = 0;
};

struct EpisodeResult {
  RegionGrid global_map;
  std::vector<TrajectoryRow> log;
  EpisodeStats stats;
};

using StepObserver =
    std::function<void(int t, const Pose& pose, const SenseResult& obs)>;

// Full mapping loop: sense, classify (synthetic, confusion-driven), project,
// paint, register at the reported pose, fuse, update goals, act. Runs until
// the step budget or exploration completes. Deterministic per seed.
EpisodeResult run_episode(const Floorplan& fp, const Pose& start,
                          const EpisodeConfig& config,
                          const StepObserver& observer = nullptr);

// Seeded start placement on a free cell with wall clearance.
Pose random_start_pose(const Floorplan& fp, Rng& rng, int clearance_cells = 3);

void write_trajectory_csv(const std::vector<TrajectoryRow>& log,
                          const std::string& path);

struct DatasetSample {
  int env_id = 0;
  Pose pose;
  DepthScan scan;
  std::vector<int> ray_labels;
  // Ground-truth egocentric view: visibility mask from the projection plus
  // the floorplan label of every observed cell (-1 outside the footprint,
  // -2 observed obstacle).
  int ego_side = 0;
  std::vector<std::int16_t> ego_labels;
};

struct ExtractConfig {
  int episodes_per_env = 1;
  int max_steps = 500;
  double dedup_position = 0.1;   // meters
  double dedup_rotation = 0.1;   // radians
  double val_env_fraction = 0.2;
  int scan_width = kDefaultScanWidth;
  double hfov = kDefaultHfov;
  double max_range = kDefaultMaxRange;
  int local_side = kDefaultLocalSide;
  std::uint64_t seed = 0;
};

struct ExtractedDataset {
  std::vector<DatasetSample> samples;
  std::vector<int> sample_split;  // 0 train, 1 val (by environment)
  std::uint64_t rejected_duplicates = 0;

  void save(const std::string& directory) const;
};

// Replays exploration episodes and stores an observation/ground-truth pair
// for every pose that is not a duplicate of an already stored sample: a pose
// is rejected only when some stored sample of the same environment is within
// dedup_position AND dedup_rotation. Environments are split train/val
// wholesale.
ExtractedDataset extract_dataset(const std::vector<Floorplan>& envs,
                                 const ExtractConfig& config);

}  // namespace isrm
