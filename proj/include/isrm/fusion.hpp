#pragma once

#include <cstdint>
#include <vector>

#include "isrm/geometry.hpp"
#include "isrm/grid.hpp"

namespace isrm {

enum class FusionRule { MovingAverage, Bayesian };

inline const char* fusion_rule_name(FusionRule r) {
  return r == FusionRule::MovingAverage ? "avg" : "bayes";
}

inline constexpr double kBayesLikelihoodFloor = 1e-4;
inline constexpr double kOccupancyHitProb = 0.7;
inline constexpr double kOccupancyFreeProb = 0.3;

// Egocentric cells transformed into global-frame cells, batched channel-flat.
// Each global cell index appears at most once.
struct RegisteredCells {
  int num_labels = 0;
  std::vector<std::uint32_t> indices;  // flat global cell indices
  std::vector<float> occupancy;
  std::vector<float> explored;
  std::vector<float> region;  // size() * num_labels
  std::uint32_t dropped_out_of_bounds = 0;

  int size() const { return static_cast<int>(indices.size()); }
};

// Inverse-transform sampling: every global cell under the rotated local
// footprint reads the nearest local cell of the back-rotated center. Blank
// local cells are skipped; out-of-bounds global cells are dropped (counted).
RegisteredCells register_local(const RegionGrid& local, const Pose& pose,
                               const RegionGrid& global_geom);
RegisteredCells register_local_serial(const RegionGrid& local,
                                      const Pose& pose,
                                      const RegionGrid& global_geom);

struct FuseStats {
  std::uint32_t degenerate_fallbacks = 0;
};

// Folds registered cells into the global map. The first observation of a
// cell is copied verbatim under both rules. MovingAverage keeps the
// obs_count-weighted running mean of every channel. Bayesian multiplies the
// region prior by the incoming distribution (floored at
// kBayesLikelihoodFloor) and renormalizes, accumulates occupancy in log-odds
// with the standard hit/free inverse-sensor values, and keeps explored at
// its maximum.
FuseStats fuse(RegionGrid& global, const RegisteredCells& cells,
               FusionRule rule);
FuseStats fuse_serial(RegionGrid& global, const RegisteredCells& cells,
                      FusionRule rule);

}  // namespace isrm
