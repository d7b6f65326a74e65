#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "isrm/geometry.hpp"

namespace isrm {

inline constexpr int kDefaultLocalSide = 101;    // L
inline constexpr int kDefaultGlobalSide = 2001;  // G

// Value snapshot of one grid cell: occupancy and explored probabilities plus
// a categorical region distribution. An all-zero region vector means the cell
// was never observed; obs_count and explored are coupled to that state.
struct CategoricalCell {
  float occupancy = 0.0f;
  float explored = 0.0f;
  std::vector<float> region;
  std::uint32_t obs_count = 0;
};

// Index of a cell, per axis: x selects the column, y the row.
struct CellIndex {
  int x = 0;
  int y = 0;
  bool operator==(const CellIndex&) const = default;
};

// Square probabilistic map over (occupancy, explored, C region channels).
// Storage is channel-flat; cells are addressed by (row, col) with row-major
// layout. Used both for egocentric maps (agent frame) and the global map.
class RegionGrid {
 public:
  RegionGrid(int side, int num_labels, double cell_size, Vec2 origin);

  // Egocentric map: L x L, agent anchored at the center of the bottom row
  // (row 0, col (L-1)/2) and facing +row. The origin is chosen so that the
  // anchor cell center is the agent-frame point (0, 0), which lets the same
  // world_to_cell/cell_center math serve agent-frame coordinates.
  static RegionGrid egocentric(int side, int num_labels,
                               double cell_size = kCellSize);

  // Global map: G x G in the world frame with an explicit origin.
  static RegionGrid global(int side, int num_labels, Vec2 origin = {0.0, 0.0},
                           double cell_size = kCellSize);

  int side() const { return side_; }
  int num_labels() const { return num_labels_; }
  double cell_size() const { return cell_size_; }
  Vec2 origin() const { return origin_; }
  int num_cells() const { return side_ * side_; }

  int flat(int row, int col) const { return row * side_ + col; }
  bool in_bounds(int row, int col) const {
    return row >= 0 && row < side_ && col >= 0 && col < side_;
  }

  float& occupancy(int i) { return occ_[i]; }
  float occupancy(int i) const { return occ_[i]; }
  float& explored(int i) { return exp_[i]; }
  float explored(int i) const { return exp_[i]; }
  std::uint32_t& obs_count(int i) { return cnt_[i]; }
  std::uint32_t obs_count(int i) const { return cnt_[i]; }
  std::span<float> region(int i) {
    return {reg_.data() + static_cast<std::size_t>(i) * num_labels_,
            static_cast<std::size_t>(num_labels_)};
  }
  std::span<const float> region(int i) const {
    return {reg_.data() + static_cast<std::size_t>(i) * num_labels_,
            static_cast<std::size_t>(num_labels_)};
  }

  CategoricalCell cell(int row, int col) const;
  void set_cell(int row, int col, const CategoricalCell& cell);

  // True when the cell carries no information on any channel.
  bool is_blank(int i) const;

  // floor((p - origin) / cell_size) per axis. Throws on out-of-bounds points.
  CellIndex world_to_cell(const Vec2& p) const;
  Vec2 cell_center(int row, int col) const;

  // Returns human-readable descriptions of every cell-invariant violation
  // (empty when the grid is consistent). Used as a sweep in tests.
  std::vector<std::string> validate() const;

  // Binary container: magic "ISRM", version, side, C, cell size, origin,
  // then row-major cells (occupancy, explored, C region values, obs_count),
  // every value as little-endian f32. Round-trips bit-exactly.
  void save_binary(const std::string& path) const;
  static RegionGrid load_binary(const std::string& path);

  // Text variant for debugging: same header as key=value lines followed by
  // one line per non-blank cell. Also round-trips exactly.
  void save_text(const std::string& path) const;
  static RegionGrid load_text(const std::string& path);

  bool operator==(const RegionGrid& o) const;

 private:
  int side_;
  int num_labels_;
  double cell_size_;
  Vec2 origin_;
  std::vector<float> occ_;
  std::vector<float> exp_;
  std::vector<float> reg_;  // side*side*num_labels
  std::vector<std::uint32_t> cnt_;
};

// Index of the most probable region; ties resolve to the lowest index.
// Returns kUnobserved for an all-zero vector.
inline constexpr int kUnobserved = -1;
int argmax_region(std::span<const float> region);

}  // namespace isrm
