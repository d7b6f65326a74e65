#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "isrm/grid.hpp"
#include "isrm/simulator.hpp"

namespace isrm {

struct MapMetrics {
  double mask_acc = 0.0;       // argmax accuracy over explored navigable cells
  double ovr_acc = 0.0;        // over all navigable cells, unexplored = wrong
  double mean_iou = 0.0;       // over classes present in GT or prediction
  double explored_fraction = 0.0;
  bool mask_acc_defined = false;  // false when nothing was explored
  std::vector<double> per_class_iou;
  std::vector<std::uint8_t> class_present;  // class enters the IoU mean
};

// Compares the fused map's argmax labels with the ground-truth floorplan over
// its navigable (free) cells. The map must share the floorplan's cell size,
// sit at the world origin, and cover the floorplan.
MapMetrics compute_metrics(const RegionGrid& pred, const Floorplan& gt);
MapMetrics compute_metrics_serial(const RegionGrid& pred, const Floorplan& gt);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

// Fixed palette: one color per region label, white for unobserved cells,
// black for the obstacle overlay. Colors are pairwise distinct so rendered
// images decode back to labels.
Rgb palette_color(int label);
inline constexpr Rgb kUnobservedColor{255, 255, 255};
inline constexpr Rgb kObstacleColor{0, 0, 0};
int palette_label(Rgb color);  // inverse lookup, kUnobserved for white

// Binary PPM (P6), one pixel per cell, row 0 at the bottom of the image.
// Cells with occupancy >= 0.5 render as obstacles regardless of region.
void render_map(const RegionGrid& map, const std::string& path);
void render_floorplan(const Floorplan& fp, const std::string& path);

void write_metrics_csv_header(std::ostream& out);
void write_metrics_csv_row(std::ostream& out, const std::string& run,
                           const MapMetrics& metrics);

}  // namespace isrm
