#include "isrm/metrics.hpp"
#include "isrm/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace isrm {

namespace {

// Per-class tallies over navigable ground-truth cells.
struct Tallies {
  std::int64_t navigable = 0;
  std::int64_t observed = 0;
  std::int64_t correct = 0;
  std::vector<std::int64_t> gt_count;          // per class
  std::vector<std::int64_t> pred_count;        // per class, observed only
  std::vector<std::int64_t> intersect_count;   // per class

  explicit Tallies(int c)
      : gt_count(c, 0), pred_count(c, 0), intersect_count(c, 0) {}

  void merge(const Tallies& o) {
    navigable += o.navigable;
    observed += o.observed;
    correct += o.correct;
    for (std::size_t i = 0; i < gt_count.size(); ++i) {
      gt_count[i] += o.gt_count[i];
      pred_count[i] += o.pred_count[i];
      intersect_count[i] += o.intersect_count[i];
    }
  }
};

void tally_row(const RegionGrid& pred, const Floorplan& gt, int row,
               Tallies& t) {
  for (int col = 0; col < gt.width; ++col) {
    if (!gt.is_free(row, col)) continue;
    ++t.navigable;
    const int label = gt.region[gt.flat(row, col)];
    ++t.gt_count[label];
    const int i = pred.flat(row, col);
    if (pred.obs_count(i) == 0) continue;
    ++t.observed;
    const int predicted = argmax_region(pred.region(i));
    if (predicted == kUnobserved) continue;
    ++t.pred_count[predicted];
    if (predicted == label) {
      ++t.correct;
      ++t.intersect_count[label];
    }
  }
}

void check_alignment(const RegionGrid& pred, const Floorplan& gt) {
  if (std::abs(pred.cell_size() - gt.cell_size) > 1e-12 ||
      pred.origin() != Vec2{0.0, 0.0} || pred.side() < gt.height ||
      pred.side() < gt.width) {
    throw std::invalid_argument("map and floorplan geometry mismatch");
  }
  if (pred.num_labels() != gt.labels.size()) {
    throw std::invalid_argument("map and floorplan label count mismatch");
  }
}

MapMetrics finalize(const Tallies& t, int c) {
  MapMetrics m;
  m.mask_acc_defined = t.observed > 0;
  m.mask_acc = m.mask_acc_defined
                   ? static_cast<double>(t.correct) / t.observed
                   : 0.0;
  m.ovr_acc = t.navigable > 0
                  ? static_cast<double>(t.correct) / t.navigable
                  : 0.0;
  m.explored_fraction =
      t.navigable > 0 ? static_cast<double>(t.observed) / t.navigable : 0.0;
  m.per_class_iou.assign(c, 0.0);
  m.class_present.assign(c, 0);
  double iou_sum = 0.0;
  int iou_classes = 0;
  for (int k = 0; k < c; ++k) {
    const std::int64_t uni =
        t.gt_count[k] + t.pred_count[k] - t.intersect_count[k];
    if (uni == 0) continue;  // absent from both GT and prediction
    m.class_present[k] = 1;
    m.per_class_iou[k] = static_cast<double>(t.intersect_count[k]) / uni;
    iou_sum += m.per_class_iou[k];
    ++iou_classes;
  }
  m.mean_iou = iou_classes > 0 ? iou_sum / iou_classes : 0.0;
  if (m.mask_acc + 1e-12 < m.ovr_acc) {
    throw std::logic_error("mask accuracy fell below overall accuracy");
  }
  return m;
}

}  // namespace

MapMetrics compute_metrics_serial(const RegionGrid& pred,
                                  const Floorplan& gt) {
  check_alignment(pred, gt);
  Tallies t(gt.labels.size());
  for (int row = 0; row < gt.height; ++row) tally_row(pred, gt, row, t);
  return finalize(t, gt.labels.size());
}

MapMetrics compute_metrics(const RegionGrid& pred, const Floorplan& gt) {
  check_alignment(pred, gt);
  const int c = gt.labels.size();
  Tallies total(c);
#pragma omp parallel if (parallel_kernels_enabled())
  {
    Tallies local(c);
#pragma omp for schedule(static) nowait
    for (int row = 0; row < gt.height; ++row) {
      tally_row(pred, gt, row, local);
    }
#pragma omp critical
    total.merge(local);
  }
  return finalize(total, c);
}

Rgb palette_color(int label) {
  // 14 visually-distinct colors, index-aligned with the default label set.
  static constexpr std::array<Rgb, 14> kPalette = {{
      {0, 119, 187},    // bathroom
      {204, 51, 17},    // bedroom
      {0, 153, 136},    // closet
      {238, 119, 51},   // dining room
      {51, 34, 136},    // garage
      {136, 204, 238},  // gym
      {221, 204, 119},  // hallway
      {17, 119, 51},    // kitchen
      {170, 68, 153},   // library
      {102, 17, 0},     // living room
      {136, 34, 85},    // office
      {153, 153, 51},   // other room
      {68, 170, 153},   // outdoor
      {170, 170, 170},  // stairs
  }};
  return kPalette[static_cast<std::size_t>(label) % kPalette.size()];
}

int palette_label(Rgb color) {
  if (color == kUnobservedColor) return kUnobserved;
  for (int i = 0; i < 14; ++i) {
    if (palette_color(i) == color) return i;
  }
  return kUnobserved;
}

namespace {

void write_ppm(const std::vector<Rgb>& pixels, int width, int height,
               const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P6\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size() * 3));
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

void render_map(const RegionGrid& map, const std::string& path) {
  const int side = map.side();
  std::vector<Rgb> pixels(static_cast<std::size_t>(side) * side);
  for (int row = 0; row < side; ++row) {
    for (int col = 0; col < side; ++col) {
      const int i = map.flat(row, col);
      Rgb color = kUnobservedColor;
      if (map.occupancy(i) >= 0.5f) {
        color = kObstacleColor;
      } else {
        const int label = argmax_region(map.region(i));
        if (label != kUnobserved) color = palette_color(label);
      }
      // Row 0 is the bottom of the map; PPM rows go top to bottom.
      pixels[static_cast<std::size_t>(side - 1 - row) * side + col] = color;
    }
  }
  write_ppm(pixels, side, side, path);
}

void render_floorplan(const Floorplan& fp, const std::string& path) {
  std::vector<Rgb> pixels(static_cast<std::size_t>(fp.width) * fp.height);
  for (int row = 0; row < fp.height; ++row) {
    for (int col = 0; col < fp.width; ++col) {
      const int i = fp.flat(row, col);
      const Rgb color = fp.occupancy[i]
                            ? kObstacleColor
                            : palette_color(fp.region[i]);
      pixels[static_cast<std::size_t>(fp.height - 1 - row) * fp.width + col] =
          color;
    }
  }
  write_ppm(pixels, fp.width, fp.height, path);
}

void write_metrics_csv_header(std::ostream& out) {
  out << "run,mask_acc,ovr_acc,mean_iou,explored_fraction,mask_acc_defined\n";
}

void write_metrics_csv_row(std::ostream& out, const std::string& run,
                           const MapMetrics& metrics) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g,%.9g,%d\n", run.c_str(),
                metrics.mask_acc, metrics.ovr_acc, metrics.mean_iou,
                metrics.explored_fraction, metrics.mask_acc_defined ? 1 : 0);
  out << buf;
}

}  // namespace isrm
