// Command-line surface: environment generation, dataset extraction,
// classifier finetuning, episode runs, evaluation, rendering, and the
// ablation benchmark. Numeric results go to stdout as CSV, human-readable
// notes to stderr; every subcommand is deterministic for a fixed --seed.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "isrm/classifier.hpp"
#include "isrm/fusion.hpp"
#include "isrm/metrics.hpp"
#include "isrm/simulator.hpp"

namespace fs = std::filesystem;
using namespace isrm;

namespace {

ObservationMode parse_mode(const std::string& mode) {
  if (mode == "repeated") return ObservationMode::Repeated;
  if (mode == "spatial") return ObservationMode::Spatial;
  throw std::invalid_argument("mode must be repeated|spatial");
}

FusionRule parse_fusion(const std::string& fusion) {
  if (fusion == "avg") return FusionRule::MovingAverage;
  if (fusion == "bayes") return FusionRule::Bayesian;
  throw std::invalid_argument("fusion must be avg|bayes");
}

bool parse_switch(const std::string& value) {
  if (value == "on") return true;
  if (value == "off") return false;
  throw std::invalid_argument("expected on|off");
}

// Flat key=value episode configuration file; unknown keys are rejected.
std::map<std::string, std::string> load_kv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("bad config line: " + line);
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

struct EpisodeArgs {
  std::string env_path;
  std::string out_dir;
  int steps = 1500;
  std::string mode = "spatial";
  std::string fusion = "avg";
  std::string noise = "off";
  double confusion_diag = 1.0;
  std::uint64_t seed = 0;
  int eta = 25;
  int scan_width = kDefaultScanWidth;
  double hfov_deg = 79.0;
  double max_range = kDefaultMaxRange;
};

void apply_kv(EpisodeArgs& args, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "env") args.env_path = value;
    else if (key == "steps") args.steps = std::stoi(value);
    else if (key == "mode") args.mode = value;
    else if (key == "fusion") args.fusion = value;
    else if (key == "noise") args.noise = value;
    else if (key == "confusion_diag") args.confusion_diag = std::stod(value);
    else if (key == "seed") args.seed = std::stoull(value);
    else if (key == "eta") args.eta = std::stoi(value);
    else if (key == "scan_width") args.scan_width = std::stoi(value);
    else if (key == "hfov_deg") args.hfov_deg = std::stod(value);
    else if (key == "max_range") args.max_range = std::stod(value);
    else throw std::runtime_error("unknown config key: " + key);
  }
}

EpisodeConfig to_episode_config(const EpisodeArgs& args) {
  EpisodeConfig config;
  config.max_steps = args.steps;
  config.mode = parse_mode(args.mode);
  config.fusion = parse_fusion(args.fusion);
  config.noise_enabled = parse_switch(args.noise);
  config.confusion_diagonal = args.confusion_diag;
  config.seed = args.seed;
  config.nav.eta = args.eta;
  config.scan_width = args.scan_width;
  config.hfov = args.hfov_deg * kPi / 180.0;
  config.max_range = args.max_range;
  return config;
}

struct BenchRun {
  int env = 0;
  std::string mode;
  std::string fusion;
  std::string noise;
  EpisodeStats stats;
  MapMetrics metrics;
};

void print_episode_csv_header(std::ostream& out) {
  out << "env,seed,mode,fusion,noise,steps,complete,coverage,mask_acc,"
         "ovr_acc,mean_iou,forward_violations\n";
}

void print_episode_csv_row(std::ostream& out, const std::string& env,
                           std::uint64_t seed, const std::string& mode,
                           const std::string& fusion, const std::string& noise,
                           const EpisodeStats& stats,
                           const MapMetrics& metrics) {
  char buf[400];
  std::snprintf(buf, sizeof(buf),
                "%s,%llu,%s,%s,%s,%d,%d,%.9g,%.9g,%.9g,%.9g,%u\n", env.c_str(),
                static_cast<unsigned long long>(seed), mode.c_str(),
                fusion.c_str(), noise.c_str(), stats.steps,
                stats.exploration_complete ? 1 : 0,
                stats.explored_free_fraction, metrics.mask_acc,
                metrics.ovr_acc, metrics.mean_iou, stats.forward_violations);
  out << buf;
}

int cmd_gen_env(const std::string& out, std::uint64_t seed, double extent,
                double extent_h, double min_room, double max_room,
                double door, int min_rooms, int min_labels) {
  FloorplanConfig config;
  config.extent_m = extent;
  config.extent_h_m = extent_h;
  config.min_room_m = min_room;
  config.max_room_m = max_room;
  config.door_width_m = door;
  config.min_rooms = min_rooms;
  config.min_distinct_labels = min_labels;
  config.seed = seed;
  const Floorplan fp = generate_floorplan(config);
  fp.save(out);
  std::cout << "width,height,rooms,doors,free_cells\n"
            << fp.width << ',' << fp.height << ',' << fp.rooms.size() << ','
            << fp.doors.size() << ',' << fp.num_free_cells() << '\n';
  std::cerr << "wrote " << out << '\n';
  return 0;
}

int cmd_extract(const std::vector<std::string>& env_paths, int gen_envs,
                std::uint64_t seed, int episodes, int steps,
                const std::string& out_dir) {
  std::vector<Floorplan> envs;
  for (const auto& path : env_paths) envs.push_back(Floorplan::load(path));
  for (int i = 0; i < gen_envs; ++i) {
    FloorplanConfig config;
    config.seed = derive_seed(seed, 0xF00 + i);
    config.min_rooms = 4;
    config.min_distinct_labels = 3;
    envs.push_back(generate_floorplan(config));
  }
  if (envs.empty()) throw std::runtime_error("no environments given");

  ExtractConfig config;
  config.episodes_per_env = episodes;
  config.max_steps = steps;
  config.seed = seed;
  const ExtractedDataset dataset = extract_dataset(envs, config);
  dataset.save(out_dir);

  int train = 0, val = 0;
  for (int split : dataset.sample_split) (split == 1 ? val : train) += 1;
  std::cout << "environments,samples,rejected,train,val\n"
            << envs.size() << ',' << dataset.samples.size() << ','
            << dataset.rejected_duplicates << ',' << train << ',' << val
            << '\n';
  std::cerr << "wrote dataset to " << out_dir << '\n';
  return 0;
}

int cmd_train(const std::string& loss_name, std::uint64_t seed,
              const std::string& data_path, int train_size, int val_size,
              int dim, double mix, double noise_sigma, bool no_misalign,
              int epochs, double lr, int batch, double tau,
              const std::string& out_projection) {
  Rng rng(derive_seed(seed, 0xDA7A));
  const int c_labels = RegionLabelSet::default_indoor().size();
  const PrototypeSet protos = random_prototypes(c_labels, dim, rng);

  EmbeddingDataset train, val;
  if (!data_path.empty()) {
    const EmbeddingDataset all = EmbeddingDataset::load(data_path);
    const int val_count = all.size() / 6;
    train.dim = val.dim = all.dim;
    train.num_labels = val.num_labels = all.num_labels;
    for (int i = 0; i < all.size(); ++i) {
      auto& part = i < all.size() - val_count ? train : val;
      part.features.push_back(all.features[i]);
      part.labels.push_back(all.labels[i]);
    }
  } else {
    SyntheticDatasetConfig dc;
    dc.count = train_size + val_size;
    dc.prototype_mix = mix;
    dc.noise_sigma = noise_sigma;
    dc.misaligned = !no_misalign;
    const EmbeddingDataset all =
        make_synthetic_embedding_dataset(protos, dc, rng);
    train.dim = val.dim = dim;
    train.num_labels = val.num_labels = c_labels;
    for (int i = 0; i < all.size(); ++i) {
      auto& part = i < train_size ? train : val;
      part.features.push_back(all.features[i]);
      part.labels.push_back(all.labels[i]);
    }
  }

  const double frozen = eval_accuracy(
      val, Projection::identity(train.dim, dim), protos, tau);
  std::cerr << "frozen-projection val accuracy: " << frozen << '\n';

  FinetuneConfig config;
  config.loss = loss_name == "infonce" ? ContrastiveLossKind::InfoNCE
                                       : ContrastiveLossKind::MSCL;
  if (loss_name != "mscl" && loss_name != "infonce") {
    throw std::invalid_argument("loss must be mscl|infonce");
  }
  config.epochs = epochs;
  config.lr = lr;
  config.batch_size = batch;
  config.tau = tau;
  config.seed = seed;
  const FinetuneResult result = finetune_projection(train, val, protos,
                                                    config);
  std::cout << "epoch,train_loss,val_acc\n";
  char buf[128];
  for (const EpochStats& row : result.history) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g\n", row.epoch,
                  row.train_loss, row.val_acc);
    std::cout << buf;
  }
  std::cerr << "final val accuracy: " << result.history.back().val_acc
            << '\n';

  if (!out_projection.empty()) {
    std::ofstream out(out_projection);
    if (!out) throw std::runtime_error("cannot write " + out_projection);
    out << result.projection.d_in << ' ' << result.projection.d_out << '\n';
    for (int i = 0; i < result.projection.d_in; ++i) {
      for (int j = 0; j < result.projection.d_out; ++j) {
        out << (j ? " " : "") << result.projection.at(i, j);
      }
      out << '\n';
    }
    std::cerr << "wrote projection to " << out_projection << '\n';
  }
  return 0;
}

int cmd_run_episode(const EpisodeArgs& args) {
  const Floorplan fp = Floorplan::load(args.env_path);
  const EpisodeConfig config = to_episode_config(args);
  Rng start_rng(derive_seed(args.seed, 0x5EED));
  const Pose start = random_start_pose(fp, start_rng);
  const EpisodeResult result = run_episode(fp, start, config);
  const MapMetrics metrics = compute_metrics(result.global_map, fp);

  if (!args.out_dir.empty()) {
    fs::create_directories(args.out_dir);
    const fs::path dir(args.out_dir);
    result.global_map.save_binary((dir / "map.isrm").string());
    write_trajectory_csv(result.log, (dir / "trajectory.csv").string());
    std::ofstream metrics_csv(dir / "metrics.csv");
    print_episode_csv_header(metrics_csv);
    print_episode_csv_row(metrics_csv, args.env_path, args.seed, args.mode,
                          args.fusion, args.noise, result.stats, metrics);
    std::cerr << "wrote outputs to " << args.out_dir << '\n';
  }
  print_episode_csv_header(std::cout);
  print_episode_csv_row(std::cout, args.env_path, args.seed, args.mode,
                        args.fusion, args.noise, result.stats, metrics);
  return 0;
}

int cmd_evaluate(const std::string& map_path, const std::string& env_path) {
  const RegionGrid map = RegionGrid::load_binary(map_path);
  const Floorplan fp = Floorplan::load(env_path);
  const MapMetrics metrics = compute_metrics(map, fp);
  write_metrics_csv_header(std::cout);
  write_metrics_csv_row(std::cout, map_path, metrics);
  return 0;
}

int cmd_render(const std::string& map_path, const std::string& env_path,
               const std::string& out) {
  if (!map_path.empty()) {
    render_map(RegionGrid::load_binary(map_path), out);
  } else if (!env_path.empty()) {
    render_floorplan(Floorplan::load(env_path), out);
  } else {
    throw std::invalid_argument("render needs --map or --env");
  }
  std::cerr << "wrote " << out << '\n';
  return 0;
}

int cmd_bench(int num_envs, int steps, std::uint64_t seed,
              double confusion_diag, const std::string& out_dir) {
  struct GridPoint {
    const char* mode;
    const char* fusion;
    const char* noise;
  };
  const std::vector<GridPoint> grid = {
      {"repeated", "avg", "off"}, {"repeated", "avg", "on"},
      {"repeated", "bayes", "off"}, {"repeated", "bayes", "on"},
      {"spatial", "avg", "off"},  {"spatial", "avg", "on"},
      {"spatial", "bayes", "off"}, {"spatial", "bayes", "on"},
  };

  std::vector<Floorplan> envs;
  for (int i = 0; i < num_envs; ++i) {
    FloorplanConfig config;
    config.seed = derive_seed(seed, 0xB000 + i);
    config.min_rooms = 6;
    config.min_distinct_labels = 4;
    envs.push_back(generate_floorplan(config));
  }

  const int total = num_envs * static_cast<int>(grid.size());
  std::vector<BenchRun> runs(total);
  std::cerr << "running " << total << " episodes on " << num_envs
            << " environments\n";
#pragma omp parallel for schedule(dynamic)
  for (int run = 0; run < total; ++run) {
    const int env = run / static_cast<int>(grid.size());
    const GridPoint& point = grid[run % grid.size()];
    EpisodeArgs args;
    args.steps = steps;
    args.mode = point.mode;
    args.fusion = point.fusion;
    args.noise = point.noise;
    args.confusion_diag = confusion_diag;
    args.seed = derive_seed(seed, 0xE0 + env);  // same start across configs
    const EpisodeConfig config = to_episode_config(args);
    Rng start_rng(derive_seed(args.seed, 0x5EED));
    const Pose start = random_start_pose(envs[env], start_rng);
    const EpisodeResult result = run_episode(envs[env], start, config);
    runs[run] = {env, point.mode, point.fusion, point.noise, result.stats,
                 compute_metrics(result.global_map, envs[env])};
  }

  print_episode_csv_header(std::cout);
  for (const BenchRun& run : runs) {
    print_episode_csv_row(std::cout, "env" + std::to_string(run.env), seed,
                          run.mode, run.fusion, run.noise, run.stats,
                          run.metrics);
  }
  // aggregate block, one row per grid point
  std::cout << "aggregate,mode,fusion,noise,mean_mask_acc,mean_ovr_acc,"
               "mean_iou,mean_coverage\n";
  for (const GridPoint& point : grid) {
    double mask = 0.0, ovr = 0.0, iou = 0.0, cov = 0.0;
    int count = 0;
    for (const BenchRun& run : runs) {
      if (run.mode != point.mode || run.fusion != point.fusion ||
          run.noise != point.noise) {
        continue;
      }
      mask += run.metrics.mask_acc;
      ovr += run.metrics.ovr_acc;
      iou += run.metrics.mean_iou;
      cov += run.stats.explored_free_fraction;
      ++count;
    }
    char buf[256];
    std::snprintf(buf, sizeof(buf), "aggregate,%s,%s,%s,%.9g,%.9g,%.9g,%.9g\n",
                  point.mode, point.fusion, point.noise, mask / count,
                  ovr / count, iou / count, cov / count);
    std::cout << buf;
  }

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream table(fs::path(out_dir) / "bench.csv");
    print_episode_csv_header(table);
    for (const BenchRun& run : runs) {
      print_episode_csv_row(table, "env" + std::to_string(run.env), seed,
                            run.mode, run.fusion, run.noise, run.stats,
                            run.metrics);
    }
    std::cerr << "wrote " << out_dir << "/bench.csv\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"indoor semantic region mapping"};
  app.require_subcommand(1);

  // gen-env
  auto* gen = app.add_subcommand("gen-env", "generate a floorplan");
  std::string gen_out = "floorplan.txt";
  std::uint64_t gen_seed = 0;
  double gen_extent = 15.0, gen_extent_h = 0.0, gen_min_room = 2.5,
         gen_max_room = 6.0, gen_door = 0.9;
  int gen_min_rooms = 1, gen_min_labels = 1;
  gen->add_option("--out", gen_out, "output floorplan path");
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("--extent", gen_extent, "side length in meters");
  gen->add_option("--extent-h", gen_extent_h, "height in meters (0=square)");
  gen->add_option("--min-room", gen_min_room, "minimum room side (m)");
  gen->add_option("--max-room", gen_max_room, "maximum room side (m)");
  gen->add_option("--door", gen_door, "door width (m)");
  gen->add_option("--min-rooms", gen_min_rooms, "minimum room count");
  gen->add_option("--min-labels", gen_min_labels, "minimum distinct labels");

  // extract-dataset
  auto* extract = app.add_subcommand("extract-dataset",
                                     "extract deduplicated samples");
  std::vector<std::string> extract_envs;
  int extract_gen = 0, extract_episodes = 1, extract_steps = 500;
  std::uint64_t extract_seed = 0;
  std::string extract_out = "dataset";
  extract->add_option("--env", extract_envs, "floorplan file (repeatable)");
  extract->add_option("--gen-envs", extract_gen,
                      "generate this many environments");
  extract->add_option("--episodes", extract_episodes, "episodes per env");
  extract->add_option("--steps", extract_steps, "steps per episode");
  extract->add_option("--seed", extract_seed, "seed");
  extract->add_option("--out", extract_out, "output directory");

  // train-classifier
  auto* train = app.add_subcommand("train-classifier",
                                   "finetune the visual projection");
  std::string train_loss = "mscl", train_data, train_out_proj;
  std::uint64_t train_seed = 0;
  int train_size = 5000, val_size = 1000, train_dim = kDefaultEmbeddingDim,
      train_epochs = 40, train_batch = 32;
  double train_mix = 0.25, train_noise = 0.15, train_lr = 1e-2,
         train_tau = kDefaultTau;
  bool train_no_misalign = false;
  train->add_option("--loss", train_loss, "mscl|infonce");
  train->add_option("--seed", train_seed, "seed");
  train->add_option("--data", train_data, "dataset file (else synthetic)");
  train->add_option("--train-size", train_size, "synthetic train samples");
  train->add_option("--val-size", val_size, "synthetic val samples");
  train->add_option("--dim", train_dim, "embedding dimension");
  train->add_option("--mix", train_mix, "wrong-prototype mixing weight");
  train->add_option("--noise-sigma", train_noise, "feature noise sigma");
  train->add_flag("--no-misalign", train_no_misalign,
                  "skip the hidden rotation");
  train->add_option("--epochs", train_epochs, "training epochs");
  train->add_option("--lr", train_lr, "learning rate");
  train->add_option("--batch", train_batch, "batch size");
  train->add_option("--tau", train_tau, "temperature");
  train->add_option("--out-projection", train_out_proj,
                    "write the learned projection");

  // run-episode
  auto* episode = app.add_subcommand("run-episode", "explore and map");
  EpisodeArgs ep_args;
  std::string ep_config_path;
  episode->add_option("--config", ep_config_path, "key=value config file");
  episode->add_option("--env", ep_args.env_path, "floorplan file");
  episode->add_option("--steps", ep_args.steps, "step budget");
  episode->add_option("--mode", ep_args.mode, "repeated|spatial");
  episode->add_option("--fusion", ep_args.fusion, "avg|bayes");
  episode->add_option("--noise", ep_args.noise, "on|off");
  episode->add_option("--confusion-diag", ep_args.confusion_diag,
                      "classifier confusion diagonal");
  episode->add_option("--seed", ep_args.seed, "seed");
  episode->add_option("--eta", ep_args.eta, "global goal period");
  episode->add_option("--scan-width", ep_args.scan_width, "rays per scan");
  episode->add_option("--hfov-deg", ep_args.hfov_deg, "field of view");
  episode->add_option("--max-range", ep_args.max_range, "sensor range (m)");
  episode->add_option("--out-dir", ep_args.out_dir, "output directory");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score a map against GT");
  std::string eval_map, eval_env;
  evaluate->add_option("--map", eval_map, "map file")->required();
  evaluate->add_option("--env", eval_env, "floorplan file")->required();

  // render
  auto* render = app.add_subcommand("render", "write a PPM image");
  std::string render_map_path, render_env_path, render_out = "map.ppm";
  render->add_option("--map", render_map_path, "map file");
  render->add_option("--env", render_env_path, "floorplan file");
  render->add_option("--out", render_out, "output image path");

  // bench
  auto* bench = app.add_subcommand("bench", "run the ablation grid");
  int bench_envs = 20, bench_steps = 1500;
  std::uint64_t bench_seed = 0;
  double bench_diag = 0.7;
  std::string bench_out;
  bench->add_option("--envs", bench_envs, "number of environments");
  bench->add_option("--steps", bench_steps, "steps per episode");
  bench->add_option("--seed", bench_seed, "seed");
  bench->add_option("--confusion-diag", bench_diag, "confusion diagonal");
  bench->add_option("--out-dir", bench_out, "also write bench.csv here");

  try {
    // config file values act as defaults that explicit flags then override
    for (int i = 1; i + 1 < argc; ++i) {
      if (std::string(argv[i]) == "--config") {
        apply_kv(ep_args, load_kv(argv[i + 1]));
      }
    }
    app.parse(argc, argv);

    if (gen->parsed()) {
      return cmd_gen_env(gen_out, gen_seed, gen_extent, gen_extent_h,
                         gen_min_room, gen_max_room, gen_door, gen_min_rooms,
                         gen_min_labels);
    }
    if (extract->parsed()) {
      return cmd_extract(extract_envs, extract_gen, extract_seed,
                         extract_episodes, extract_steps, extract_out);
    }
    if (train->parsed()) {
      return cmd_train(train_loss, train_seed, train_data, train_size,
                       val_size, train_dim, train_mix, train_noise,
                       train_no_misalign, train_epochs, train_lr, train_batch,
                       train_tau, train_out_proj);
    }
    if (episode->parsed()) {
      if (ep_args.env_path.empty()) {
        throw std::invalid_argument("run-episode needs --env");
      }
      return cmd_run_episode(ep_args);
    }
    if (evaluate->parsed()) return cmd_evaluate(eval_map, eval_env);
    if (render->parsed()) {
      return cmd_render(render_map_path, render_env_path, render_out);
    }
    if (bench->parsed()) {
      return cmd_bench(bench_envs, bench_steps, bench_seed, bench_diag,
                       bench_out);
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
