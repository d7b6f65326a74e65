#include "isrm/fusion.hpp"
#include "isrm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace isrm {

namespace {

struct FootprintBounds {
  int row_begin, row_end, col_begin, col_end;  // half-open
  bool clipped = false;  // footprint extends past the global map
};

// Global-cell range covered by the transformed local map, clamped.
FootprintBounds footprint(const RegionGrid& local, const Pose& pose,
                          const RegionGrid& global_geom) {
  const double cs = local.cell_size();
  const int side = local.side();
  const double x_min = local.origin().x;
  const double x_max = x_min + side * cs;
  const double y_min = local.origin().y;
  const double y_max = y_min + side * cs;
  const Vec2 corners[4] = {{x_min, y_min}, {x_min, y_max},
                           {x_max, y_min}, {x_max, y_max}};
  double wx_min = 1e300, wx_max = -1e300, wy_min = 1e300, wy_max = -1e300;
  for (const Vec2& c : corners) {
    const Vec2 w = pose.local_to_world(c);
    wx_min = std::min(wx_min, w.x);
    wx_max = std::max(wx_max, w.x);
    wy_min = std::min(wy_min, w.y);
    wy_max = std::max(wy_max, w.y);
  }
  const double gcs = global_geom.cell_size();
  const Vec2 go = global_geom.origin();
  const int raw_col_begin = static_cast<int>(std::floor((wx_min - go.x) / gcs));
  const int raw_col_end = static_cast<int>(std::floor((wx_max - go.x) / gcs)) + 1;
  const int raw_row_begin = static_cast<int>(std::floor((wy_min - go.y) / gcs));
  const int raw_row_end = static_cast<int>(std::floor((wy_max - go.y) / gcs)) + 1;
  FootprintBounds b;
  b.col_begin = std::max(0, raw_col_begin);
  b.col_end = std::min(global_geom.side(), raw_col_end);
  b.row_begin = std::max(0, raw_row_begin);
  b.row_end = std::min(global_geom.side(), raw_row_end);
  b.clipped = raw_col_begin < 0 || raw_col_end > global_geom.side() ||
              raw_row_begin < 0 || raw_row_end > global_geom.side();
  return b;
}

// Cells of one footprint row that sample a non-blank local cell.
struct RowCells {
  std::vector<std::uint32_t> indices;
  std::vector<float> occupancy;
  std::vector<float> explored;
  std::vector<float> region;
};

RowCells register_row(const RegionGrid& local, const Pose& pose,
                      const RegionGrid& global_geom,
                      const FootprintBounds& b, int row) {
  RowCells out;
  const double cs = local.cell_size();
  const int anchor_col = (local.side() - 1) / 2;
  for (int col = b.col_begin; col < b.col_end; ++col) {
    const Vec2 center = global_geom.cell_center(row, col);
    const Vec2 lp = pose.world_to_local(center);
    const int lc = static_cast<int>(std::lround(lp.x / cs)) + anchor_col;
    const int lr = static_cast<int>(std::lround(lp.y / cs));
    if (!local.in_bounds(lr, lc)) continue;
    const int li = local.flat(lr, lc);
    if (local.is_blank(li)) continue;
    out.indices.push_back(
        static_cast<std::uint32_t>(global_geom.flat(row, col)));
    out.occupancy.push_back(local.occupancy(li));
    out.explored.push_back(local.explored(li));
    const auto r = local.region(li);
    out.region.insert(out.region.end(), r.begin(), r.end());
  }
  return out;
}

RegisteredCells merge_rows(const RegionGrid& local,
                           std::vector<RowCells>&& rows,
                           std::uint32_t dropped) {
  RegisteredCells out;
  out.num_labels = local.num_labels();
  out.dropped_out_of_bounds = dropped;
  std::size_t total = 0;
  for (const auto& r : rows) total += r.indices.size();
  out.indices.reserve(total);
  out.occupancy.reserve(total);
  out.explored.reserve(total);
  out.region.reserve(total * out.num_labels);
  for (auto& r : rows) {
    out.indices.insert(out.indices.end(), r.indices.begin(), r.indices.end());
    out.occupancy.insert(out.occupancy.end(), r.occupancy.begin(),
                         r.occupancy.end());
    out.explored.insert(out.explored.end(), r.explored.begin(),
                        r.explored.end());
    out.region.insert(out.region.end(), r.region.begin(), r.region.end());
  }
  return out;
}

// Cells of the local footprint whose world position falls outside the global
// map. Computed for the drop counter.
std::uint32_t count_dropped(const RegionGrid& local, const Pose& pose,
                            const RegionGrid& global_geom) {
  std::uint32_t dropped = 0;
  for (int lr = 0; lr < local.side(); ++lr) {
    for (int lc = 0; lc < local.side(); ++lc) {
      const int li = local.flat(lr, lc);
      if (local.is_blank(li)) continue;
      const Vec2 world = pose.local_to_world(local.cell_center(lr, lc));
      const double gx = (world.x - global_geom.origin().x) /
                        global_geom.cell_size();
      const double gy = (world.y - global_geom.origin().y) /
                        global_geom.cell_size();
      const int col = static_cast<int>(std::floor(gx));
      const int row = static_cast<int>(std::floor(gy));
      if (!global_geom.in_bounds(row, col)) ++dropped;
    }
  }
  return dropped;
}

void check_fuse_args(const RegionGrid& global, const RegisteredCells& cells) {
  if (cells.num_labels != global.num_labels()) {
    throw std::invalid_argument("label count mismatch in fuse");
  }
}

double logit(double p) { return std::log(p / (1.0 - p)); }

// One registered cell folded into the map; returns true on a degenerate
// Bayesian posterior that fell back to the incoming distribution.
bool fuse_cell(RegionGrid& global, const RegisteredCells& cells, int k,
               FusionRule rule) {
  const int c_labels = cells.num_labels;
  const int gi = static_cast<int>(cells.indices[k]);
  const float* in_region = cells.region.data() +
                           static_cast<std::size_t>(k) * c_labels;
  auto region = global.region(gi);
  const std::uint32_t n = global.obs_count(gi);

  if (n == 0) {
    global.occupancy(gi) = cells.occupancy[k];
    global.explored(gi) = cells.explored[k];
    for (int c = 0; c < c_labels; ++c) region[c] = in_region[c];
    global.obs_count(gi) = 1;
    return false;
  }

  if (rule == FusionRule::MovingAverage) {
    const double inv = 1.0 / (n + 1.0);
    global.occupancy(gi) = static_cast<float>(
        (static_cast<double>(n) * global.occupancy(gi) + cells.occupancy[k]) *
        inv);
    global.explored(gi) = static_cast<float>(
        (static_cast<double>(n) * global.explored(gi) + cells.explored[k]) *
        inv);
    for (int c = 0; c < c_labels; ++c) {
      region[c] = static_cast<float>(
          (static_cast<double>(n) * region[c] + in_region[c]) * inv);
    }
    global.obs_count(gi) = n + 1;
    return false;
  }

  // Bayesian: region posterior = normalize(prior * floored likelihood).
  bool degenerate = false;
  double sum = 0.0;
  for (int c = 0; c < c_labels; ++c) {
    const double lik = std::max(static_cast<double>(in_region[c]),
                                kBayesLikelihoodFloor);
    const double post = static_cast<double>(region[c]) * lik;
    region[c] = static_cast<float>(post);
    sum += post;
  }
  if (sum <= 0.0) {
    degenerate = true;
    sum = 0.0;
    for (int c = 0; c < c_labels; ++c) {
      region[c] = in_region[c];
      sum += in_region[c];
    }
  }
  if (sum > 0.0) {
    const double inv = 1.0 / sum;
    for (int c = 0; c < c_labels; ++c) {
      region[c] = static_cast<float>(region[c] * inv);
    }
  }
  const double prior = std::clamp(static_cast<double>(global.occupancy(gi)),
                                  kBayesLikelihoodFloor,
                                  1.0 - kBayesLikelihoodFloor);
  const double update =
      cells.occupancy[k] >= 0.5f ? kOccupancyHitProb : kOccupancyFreeProb;
  const double odds = logit(prior) + logit(update);
  global.occupancy(gi) = static_cast<float>(1.0 / (1.0 + std::exp(-odds)));
  global.explored(gi) = std::max(global.explored(gi), cells.explored[k]);
  global.obs_count(gi) = n + 1;
  return degenerate;
}

}  // namespace

RegisteredCells register_local_serial(const RegionGrid& local,
                                      const Pose& pose,
                                      const RegionGrid& global_geom) {
  const FootprintBounds b = footprint(local, pose, global_geom);
  std::vector<RowCells> rows;
  rows.reserve(std::max(0, b.row_end - b.row_begin));
  for (int row = b.row_begin; row < b.row_end; ++row) {
    rows.push_back(register_row(local, pose, global_geom, b, row));
  }
  const std::uint32_t dropped =
      b.clipped ? count_dropped(local, pose, global_geom) : 0;
  return merge_rows(local, std::move(rows), dropped);
}

RegisteredCells register_local(const RegionGrid& local, const Pose& pose,
                               const RegionGrid& global_geom) {
  const FootprintBounds b = footprint(local, pose, global_geom);
  const int num_rows = std::max(0, b.row_end - b.row_begin);
  std::vector<RowCells> rows(num_rows);
#pragma omp parallel for schedule(static) if (parallel_kernels_enabled())
  for (int r = 0; r < num_rows; ++r) {
    rows[r] = register_row(local, pose, global_geom, b, b.row_begin + r);
  }
  const std::uint32_t dropped =
      b.clipped ? count_dropped(local, pose, global_geom) : 0;
  return merge_rows(local, std::move(rows), dropped);
}

FuseStats fuse_serial(RegionGrid& global, const RegisteredCells& cells,
                      FusionRule rule) {
  check_fuse_args(global, cells);
  FuseStats stats;
  for (int k = 0; k < cells.size(); ++k) {
    if (fuse_cell(global, cells, k, rule)) ++stats.degenerate_fallbacks;
  }
  return stats;
}

FuseStats fuse(RegionGrid& global, const RegisteredCells& cells,
               FusionRule rule) {
  check_fuse_args(global, cells);
  const int n = cells.size();
  std::vector<std::uint8_t> degenerate(n, 0);
  // Registered indices are unique, so cells never share grid slots.
#pragma omp parallel for schedule(static) if (parallel_kernels_enabled())
  for (int k = 0; k < n; ++k) {
    degenerate[k] = fuse_cell(global, cells, k, rule) ? 1 : 0;
  }
  FuseStats stats;
  for (std::uint8_t d : degenerate) stats.degenerate_fallbacks += d;
  return stats;
}

}  // namespace isrm
