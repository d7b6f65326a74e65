// Wall-time comparison of the OpenMP kernels against their serial reference
// implementations. Prints one CSV row per kernel to stdout.
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <string>

#include "isrm/classifier.hpp"
#include "isrm/fusion.hpp"
#include "isrm/metrics.hpp"
#include "isrm/projection.hpp"
#include "isrm/simulator.hpp"

using namespace isrm;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto begin = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto end = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(end - begin).count() / reps;
}

void report(const std::string& kernel, const std::string& size,
            double serial_ms, double parallel_ms) {
  std::printf("%s,%s,%.3f,%.3f,%.2f\n", kernel.c_str(), size.c_str(),
              serial_ms, parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main(int argc, char** argv) {
  const int reps = argc > 1 ? std::atoi(argv[1]) : 20;
  Rng rng(7);

  DepthScan scan;
  scan.depths.resize(kDefaultScanWidth);
  for (auto& d : scan.depths) d = static_cast<float>(rng.uniform(0.3, 9.5));

  std::printf("kernel,size,serial_ms,parallel_ms,speedup\n");

  report("collapse_to_topdown", "224 rays x 101^2",
         time_ms([&] { collapse_to_topdown_serial(scan, 101, 0.05); }, reps),
         time_ms([&] { collapse_to_topdown(scan, 101, 0.05); }, reps));

  const TopDownProjection proj = collapse_to_topdown(scan, 101, 0.05);
  ObservationDistribution dist;
  dist.mode = ObservationMode::Spatial;
  for (int k = 0; k < kDefaultScanWidth; ++k) {
    std::vector<double> row(14, 1.0 / 14.0);
    dist.per_ray.push_back(std::move(row));
  }
  report("paint_egocentric", "101^2 x 14",
         time_ms([&] { paint_egocentric_serial(proj, dist); }, reps),
         time_ms([&] { paint_egocentric(proj, dist); }, reps));

  const RegionGrid local = paint_egocentric(proj, dist);
  const RegionGrid global_geom = RegionGrid::global(601, 14, {0.0, 0.0});
  const Pose pose{15.0, 15.0, 0.8};
  report("register_local", "101^2 -> 601^2",
         time_ms([&] { register_local_serial(local, pose, global_geom); },
                 reps),
         time_ms([&] { register_local(local, pose, global_geom); }, reps));

  const RegisteredCells cells = register_local(local, pose, global_geom);
  RegionGrid fused = RegionGrid::global(601, 14, {0.0, 0.0});
  report("fuse_moving_average", std::to_string(cells.size()) + " cells",
         time_ms([&] { fuse_serial(fused, cells, FusionRule::MovingAverage); },
                 reps),
         time_ms([&] { fuse(fused, cells, FusionRule::MovingAverage); },
                 reps));
  report("fuse_bayesian", std::to_string(cells.size()) + " cells",
         time_ms([&] { fuse_serial(fused, cells, FusionRule::Bayesian); },
                 reps),
         time_ms([&] { fuse(fused, cells, FusionRule::Bayesian); }, reps));

  FloorplanConfig fp_config;
  fp_config.seed = 11;
  const Floorplan fp = generate_floorplan(fp_config);
  Rng start_rng(3);
  const Pose sensor_pose = random_start_pose(fp, start_rng);
  report("sense", "224 rays",
         time_ms([&] { sense_serial(fp, sensor_pose, 224, kDefaultHfov,
                                    10.0); },
                 reps),
         time_ms([&] { sense(fp, sensor_pose, 224, kDefaultHfov, 10.0); },
                 reps));

  EpisodeConfig ep;
  ep.max_steps = 250;
  ep.seed = 3;
  ep.confusion_diagonal = 0.7;
  const EpisodeResult episode = run_episode(fp, sensor_pose, ep);
  report("compute_metrics", "300^2 x 14",
         time_ms([&] { compute_metrics_serial(episode.global_map, fp); },
                 reps),
         time_ms([&] { compute_metrics(episode.global_map, fp); }, reps));

  const PrototypeSet protos = random_prototypes(14, 64, rng);
  std::vector<Embedding> images(64, Embedding(64));
  std::vector<int> labels(64);
  for (int i = 0; i < 64; ++i) {
    for (double& v : images[i]) v = rng.normal();
    labels[i] = static_cast<int>(rng.uniform_int(0, 13));
  }
  const ContrastiveBatch batch = build_batch(images, labels, protos, 0.07);
  report("mscl_loss", "N=64 D=64",
         time_ms([&] { mscl_loss_serial(batch); }, reps),
         time_ms([&] { mscl_loss(batch); }, reps));
  report("infonce_loss", "N=64 D=64",
         time_ms([&] { infonce_loss_serial(batch); }, reps),
         time_ms([&] { infonce_loss(batch); }, reps));
  return 0;
}
