#include "isrm/projection.hpp"
#include "isrm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace isrm {

namespace {

struct RayTrace {
  std::vector<std::uint32_t> cells;  // visited flat indices, anchor first
  bool hit = false;                  // last visited cell is an obstacle hit
};

// Amanatides-Woo traversal from the anchor cell center along one ray.
RayTrace trace_ray(double bearing, double depth, const DepthScan& scan,
                   int side, double cell_size) {
  RayTrace trace;
  const int anchor_col = (side - 1) / 2;
  const double dist = std::clamp(static_cast<double>(depth), 0.0,
                                 scan.max_range);
  const double dx = std::sin(bearing);
  const double dy = std::cos(bearing);

  int row = 0, col = anchor_col;
  trace.cells.push_back(static_cast<std::uint32_t>(row * side + col));

  const int step_x = dx > 0.0 ? 1 : -1;
  const int step_y = dy > 0.0 ? 1 : -1;
  const double inf = std::numeric_limits<double>::infinity();
  double t_max_x = dx == 0.0 ? inf : 0.5 * cell_size / std::abs(dx);
  double t_max_y = dy == 0.0 ? inf : 0.5 * cell_size / std::abs(dy);
  const double t_delta_x = dx == 0.0 ? inf : cell_size / std::abs(dx);
  const double t_delta_y = dy == 0.0 ? inf : cell_size / std::abs(dy);

  bool clipped = false;
  while (std::min(t_max_x, t_max_y) < dist) {
    if (t_max_x <= t_max_y) {
      col += step_x;
      t_max_x += t_delta_x;
    } else {
      row += step_y;
      t_max_y += t_delta_y;
    }
    if (row < 0 || row >= side || col < 0 || col >= side) {
      clipped = true;
      break;
    }
    trace.cells.push_back(static_cast<std::uint32_t>(row * side + col));
  }
  trace.hit = !clipped && dist < scan.max_range && trace.cells.size() > 1;
  return trace;
}

TopDownProjection assemble(const DepthScan& scan, int side,
                           std::vector<RayTrace>&& traces) {
  TopDownProjection proj;
  proj.side = side;
  proj.num_rays = scan.width();
  proj.visibility.assign(static_cast<std::size_t>(side) * side, 0);
  proj.obstacle_hits.assign(static_cast<std::size_t>(side) * side, 0);

  std::size_t total = 0;
  for (const auto& t : traces) total += t.cells.size();
  std::vector<std::uint32_t> pair_cell;
  std::vector<std::uint16_t> pair_ray;
  pair_cell.reserve(total);
  pair_ray.reserve(total);

  for (int k = 0; k < static_cast<int>(traces.size()); ++k) {
    const auto& t = traces[k];
    for (std::uint32_t cell : t.cells) {
      pair_cell.push_back(cell);
      pair_ray.push_back(static_cast<std::uint16_t>(k));
      proj.visibility[cell] = 1;
    }
    if (t.hit) proj.obstacle_hits[t.cells.back()] = 1;
  }
  for (std::size_t i = 0; i < proj.visibility.size(); ++i) {
    if (proj.obstacle_hits[i]) proj.visibility[i] = 0;
  }

  // Counting sort of (cell, ray) pairs into CSR; stable, so each cell's rays
  // stay in ascending ray order.
  proj.cell_ray_begin.assign(static_cast<std::size_t>(side) * side + 1, 0);
  for (std::uint32_t cell : pair_cell) proj.cell_ray_begin[cell + 1]++;
  for (std::size_t i = 1; i < proj.cell_ray_begin.size(); ++i) {
    proj.cell_ray_begin[i] += proj.cell_ray_begin[i - 1];
  }
  proj.cell_rays.resize(pair_cell.size());
  std::vector<std::uint32_t> cursor(proj.cell_ray_begin.begin(),
                                    proj.cell_ray_begin.end() - 1);
  for (std::size_t i = 0; i < pair_cell.size(); ++i) {
    proj.cell_rays[cursor[pair_cell[i]]++] = pair_ray[i];
  }
  return proj;
}

void check_paint_args(const TopDownProjection& proj,
                      const ObservationDistribution& dist) {
  if (dist.mode == ObservationMode::Spatial) {
    if (static_cast<int>(dist.per_ray.size()) != proj.num_rays) {
      throw std::invalid_argument("spatial distribution width mismatch");
    }
  } else if (dist.repeated.empty()) {
    throw std::invalid_argument("repeated distribution is empty");
  }
}

void paint_cell(const TopDownProjection& proj,
                const ObservationDistribution& dist, RegionGrid& map, int i) {
  if (!proj.observed(i)) return;
  map.explored(i) = 1.0f;
  map.obs_count(i) = 1;
  map.occupancy(i) = proj.obstacle_hits[i] ? 1.0f : 0.0f;
  auto region = map.region(i);
  if (dist.mode == ObservationMode::Repeated) {
    for (int c = 0; c < map.num_labels(); ++c) {
      region[c] = static_cast<float>(dist.repeated[c]);
    }
    return;
  }
  const std::uint32_t begin = proj.cell_ray_begin[i];
  const std::uint32_t end = proj.cell_ray_begin[i + 1];
  const double inv = 1.0 / (end - begin);
  for (int c = 0; c < map.num_labels(); ++c) {
    double sum = 0.0;
    for (std::uint32_t r = begin; r < end; ++r) {
      sum += dist.per_ray[proj.cell_rays[r]][c];
    }
    region[c] = static_cast<float>(sum * inv);
  }
}

}  // namespace

double ray_bearing(int k, int width, double hfov) {
  if (width == 1) return 0.0;
  return hfov * (static_cast<double>(k) / (width - 1) - 0.5);
}

std::vector<RayPoint> rays_to_points(const DepthScan& scan) {
  if (scan.hfov <= 0.0 || scan.hfov >= kPi) {
    throw std::invalid_argument("hfov must be in (0, pi)");
  }
  std::vector<RayPoint> points(scan.width());
  for (int k = 0; k < scan.width(); ++k) {
    const double b = ray_bearing(k, scan.width(), scan.hfov);
    const double d = scan.depths[k];
    points[k].p = {d * std::sin(b), d * std::cos(b)};
    points[k].hit = d < scan.max_range;
  }
  return points;
}

TopDownProjection collapse_to_topdown_serial(const DepthScan& scan, int side,
                                             double cell_size) {
  std::vector<RayTrace> traces(scan.width());
  for (int k = 0; k < scan.width(); ++k) {
    traces[k] = trace_ray(ray_bearing(k, scan.width(), scan.hfov),
                          scan.depths[k], scan, side, cell_size);
  }
  return assemble(scan, side, std::move(traces));
}

TopDownProjection collapse_to_topdown(const DepthScan& scan, int side,
                                      double cell_size) {
  std::vector<RayTrace> traces(scan.width());
#pragma omp parallel for schedule(static) if (parallel_kernels_enabled())
  for (int k = 0; k < scan.width(); ++k) {
    traces[k] = trace_ray(ray_bearing(k, scan.width(), scan.hfov),
                          scan.depths[k], scan, side, cell_size);
  }
  return assemble(scan, side, std::move(traces));
}

RegionGrid paint_egocentric_serial(const TopDownProjection& proj,
                                   const ObservationDistribution& dist) {
  check_paint_args(proj, dist);
  RegionGrid map = RegionGrid::egocentric(proj.side, dist.num_labels());
  for (int i = 0; i < map.num_cells(); ++i) paint_cell(proj, dist, map, i);
  return map;
}

RegionGrid paint_egocentric(const TopDownProjection& proj,
                            const ObservationDistribution& dist) {
  check_paint_args(proj, dist);
  RegionGrid map = RegionGrid::egocentric(proj.side, dist.num_labels());
  const int n = map.num_cells();
#pragma omp parallel for schedule(static) if (parallel_kernels_enabled())
  for (int i = 0; i < n; ++i) paint_cell(proj, dist, map, i);
  return map;
}

void DepthScan::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  const char magic[4] = {'I', 'S', 'R', 'S'};
  out.write(magic, 4);
  const std::uint32_t width = depths.size();
  out.write(reinterpret_cast<const char*>(&width), 4);
  out.write(reinterpret_cast<const char*>(&hfov), 8);
  out.write(reinterpret_cast<const char*>(&max_range), 8);
  out.write(reinterpret_cast<const char*>(&min_range), 8);
  out.write(reinterpret_cast<const char*>(depths.data()), 4u * width);
  if (!out) throw std::runtime_error("write failed: " + path);
}

DepthScan DepthScan::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "ISRS", 4) != 0) {
    throw std::runtime_error("not a scan file: " + path);
  }
  std::uint32_t width;
  DepthScan scan;
  in.read(reinterpret_cast<char*>(&width), 4);
  in.read(reinterpret_cast<char*>(&scan.hfov), 8);
  in.read(reinterpret_cast<char*>(&scan.max_range), 8);
  in.read(reinterpret_cast<char*>(&scan.min_range), 8);
  scan.depths.resize(width);
  in.read(reinterpret_cast<char*>(scan.depths.data()), 4u * width);
  if (!in) throw std::runtime_error("truncated scan file: " + path);
  return scan;
}

}  // namespace isrm
