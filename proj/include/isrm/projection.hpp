#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "isrm/geometry.hpp"
#include "isrm/grid.hpp"

namespace isrm {

inline constexpr int kDefaultScanWidth = 224;
inline constexpr double kDefaultHfov = 79.0 * kPi / 180.0;
inline constexpr double kDefaultMaxRange = 10.0;

// Planar depth scan: one depth per ray/column, fanned over hfov.
struct DepthScan {
  std::vector<float> depths;
  double hfov = kDefaultHfov;
  double max_range = kDefaultMaxRange;
  double min_range = 0.0;

  int width() const { return static_cast<int>(depths.size()); }

  // f32 payload with a small header (W, hfov, max/min range).
  void save(const std::string& path) const;
  static DepthScan load(const std::string& path);
};

// Bearing of ray k relative to the heading: hfov*(k/(W-1) - 1/2).
// Positive bearings point right of the heading.
double ray_bearing(int k, int width, double hfov);

struct RayPoint {
  Vec2 p;
  bool hit = false;  // false when the ray was truncated at max_range
};

// Projects each ray to its endpoint in the agent frame (x right, y forward).
std::vector<RayPoint> rays_to_points(const DepthScan& scan);

// Top-down footprint of one scan on the egocentric grid. visibility marks
// free cells swept by rays, obstacle_hits marks in-range ray endpoints; the
// two masks are disjoint. cell_rays lists, per cell (CSR layout), the rays
// that deposited region evidence there: sweep cells and endpoint cells both.
struct TopDownProjection {
  int side = 0;
  int num_rays = 0;
  std::vector<std::uint8_t> visibility;
  std::vector<std::uint8_t> obstacle_hits;
  std::vector<std::uint32_t> cell_ray_begin;  // side*side + 1
  std::vector<std::uint16_t> cell_rays;

  bool observed(int i) const { return visibility[i] || obstacle_hits[i]; }
};

// Sweeps every ray through the egocentric grid with a DDA traversal from the
// agent anchor, clipping at the map extent. The anchor cell itself is always
// visible, never a hit.
TopDownProjection collapse_to_topdown(const DepthScan& scan, int side,
                                      double cell_size);
TopDownProjection collapse_to_topdown_serial(const DepthScan& scan, int side,
                                             double cell_size);

enum class ObservationMode { Repeated, Spatial };

inline const char* observation_mode_name(ObservationMode m) {
  return m == ObservationMode::Repeated ? "repeated" : "spatial";
}

// Classifier output for one observation: a single distribution painted over
// the whole footprint (Repeated) or one distribution per ray (Spatial).
struct ObservationDistribution {
  ObservationMode mode = ObservationMode::Repeated;
  std::vector<double> repeated;
  std::vector<std::vector<double>> per_ray;

  int num_labels() const {
    return static_cast<int>(mode == ObservationMode::Repeated
                                ? repeated.size()
                                : (per_ray.empty() ? 0 : per_ray[0].size()));
  }
};

// Builds the egocentric map for one observation: observed cells get
// explored=1 and obs_count=1, endpoint cells get occupancy=1, and the region
// vector of every observed cell is the (uniform) average of its contributing
// rays' distributions. Cells outside the footprint stay blank, so no region
// mass is ever placed beyond a ray endpoint.
RegionGrid paint_egocentric(const TopDownProjection& proj,
                            const ObservationDistribution& dist);
RegionGrid paint_egocentric_serial(const TopDownProjection& proj,
                                   const ObservationDistribution& dist);

}  // namespace isrm
