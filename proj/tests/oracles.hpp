// Independent reference implementations used to pin expected values in
// tests. Everything here is written as plain scalar code, separate from the
// library's implementations.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "isrm/classifier.hpp"
#include "isrm/geometry.hpp"
#include "isrm/navigation.hpp"
#include "isrm/projection.hpp"

namespace oracles {

// Literal transcription of the supervised contrastive loss: for each anchor
// i, -log((1/|B|) sum_b exp(zi.zb/tau) / sum_a exp(zi.za/tau)), summed.
inline double mscl(const std::vector<isrm::Embedding>& feats,
                   const std::vector<int>& labels, double tau) {
  const int m = static_cast<int>(feats.size());
  auto dotp = [&](int i, int j) {
    double s = 0.0;
    for (std::size_t k = 0; k < feats[i].size(); ++k) {
      s += feats[i][k] * feats[j][k];
    }
    return s;
  };
  double loss = 0.0;
  for (int i = 0; i < m; ++i) {
    double denom = 0.0;
    for (int a = 0; a < m; ++a) {
      if (a != i) denom += std::exp(dotp(i, a) / tau);
    }
    double pos = 0.0;
    int num_pos = 0;
    for (int b = 0; b < m; ++b) {
      if (b != i && labels[b] == labels[i]) {
        pos += std::exp(dotp(i, b) / tau);
        ++num_pos;
      }
    }
    if (num_pos == 0) continue;
    loss += -std::log(pos / num_pos / denom);
  }
  return loss;
}

// Symmetric InfoNCE with per-image text features (duplicates kept).
inline double infonce(const std::vector<isrm::Embedding>& images,
                      const std::vector<isrm::Embedding>& texts, double tau) {
  const int n = static_cast<int>(images.size());
  auto dotp = [](const isrm::Embedding& a, const isrm::Embedding& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
  };
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    double denom = 0.0;
    for (int j = 0; j < n; ++j) {
      denom += std::exp(dotp(images[i], texts[j]) / tau);
    }
    loss += -std::log(std::exp(dotp(images[i], texts[i]) / tau) / denom) / n;
  }
  for (int j = 0; j < n; ++j) {
    double denom = 0.0;
    for (int i = 0; i < n; ++i) {
      denom += std::exp(dotp(images[i], texts[j]) / tau);
    }
    loss += -std::log(std::exp(dotp(images[j], texts[j]) / tau) / denom) / n;
  }
  return loss;
}

// Central finite differences of a scalar function of the batch features.
inline std::vector<isrm::Embedding> fd_feature_gradient(
    const std::function<double(const std::vector<isrm::Embedding>&)>& f,
    std::vector<isrm::Embedding> feats, double h = 1e-5) {
  std::vector<isrm::Embedding> grad(feats.size());
  for (std::size_t i = 0; i < feats.size(); ++i) {
    grad[i].assign(feats[i].size(), 0.0);
    for (std::size_t k = 0; k < feats[i].size(); ++k) {
      const double saved = feats[i][k];
      feats[i][k] = saved + h;
      const double up = f(feats);
      feats[i][k] = saved - h;
      const double down = f(feats);
      feats[i][k] = saved;
      grad[i][k] = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

// O(V^2) Dijkstra over the same movement rules as the planner: 8-connected,
// diagonal cost sqrt(2), diagonals blocked when either orthogonal neighbor
// is blocked.
inline double dijkstra_cost(const std::vector<std::uint8_t>& blocked, int side,
                            isrm::CellRC start, isrm::CellRC goal) {
  const int n = side * side;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, inf);
  std::vector<std::uint8_t> done(n, 0);
  dist[start.row * side + start.col] = 0.0;
  for (int iter = 0; iter < n; ++iter) {
    int u = -1;
    double best = inf;
    for (int i = 0; i < n; ++i) {
      if (!done[i] && dist[i] < best) {
        best = dist[i];
        u = i;
      }
    }
    if (u < 0) break;
    done[u] = 1;
    const int r = u / side, c = u % side;
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) continue;
        const int nr = r + dr, nc = c + dc;
        if (nr < 0 || nr >= side || nc < 0 || nc >= side) continue;
        if (blocked[nr * side + nc]) continue;
        if (dr != 0 && dc != 0 &&
            (blocked[r * side + nc] || blocked[nr * side + c])) {
          continue;
        }
        const double w = (dr != 0 && dc != 0) ? std::sqrt(2.0) : 1.0;
        dist[nr * side + nc] = std::min(dist[nr * side + nc], dist[u] + w);
      }
    }
  }
  return dist[goal.row * side + goal.col];
}

// Angular occlusion model of one scan: an agent-frame point is visible when
// it lies inside the field of view and closer than the (linearly
// interpolated) scan depth at its bearing.
inline bool angular_visible_point(const isrm::DepthScan& scan, double x,
                                  double y) {
  const double rho = std::hypot(x, y);
  if (rho == 0.0) return true;  // the agent's own position
  const double bearing = std::atan2(x, y);
  if (std::abs(bearing) > scan.hfov / 2.0) return false;
  const int w = scan.width();
  double depth;
  if (w == 1) {
    depth = scan.depths[0];
  } else {
    const double pos = (bearing / scan.hfov + 0.5) * (w - 1);
    const int k = std::clamp(static_cast<int>(std::floor(pos)), 0, w - 2);
    const double frac = pos - k;
    depth = (1.0 - frac) * scan.depths[k] + frac * scan.depths[k + 1];
  }
  return rho <= depth;
}

// Samples the continuous model over the cell and a half-cell margin around
// it: 1 = uniformly visible, 0 = uniformly hidden, -1 = a visibility
// boundary crosses the neighborhood (excluded from exact comparison).
inline int angular_neighborhood_verdict(const isrm::DepthScan& scan, int side,
                                        double cell_size, int r, int c) {
  const int anchor = (side - 1) / 2;
  const double cx = (c - anchor) * cell_size;
  const double cy = r * cell_size;
  int verdict = -2;
  for (int dy = -3; dy <= 3; ++dy) {
    for (int dx = -3; dx <= 3; ++dx) {
      const int v = angular_visible_point(scan, cx + dx * cell_size / 4.0,
                                          cy + dy * cell_size / 4.0)
                        ? 1
                        : 0;
      if (verdict == -2) {
        verdict = v;
      } else if (verdict != v) {
        return -1;
      }
    }
  }
  return verdict;
}

inline std::vector<double> normalized_product(
    const std::vector<std::vector<double>>& seq, double floor) {
  std::vector<double> post(seq.front().size());
  for (std::size_t c = 0; c < post.size(); ++c) {
    post[c] = std::max(seq.front()[c], 0.0);
  }
  for (std::size_t t = 1; t < seq.size(); ++t) {
    for (std::size_t c = 0; c < post.size(); ++c) {
      post[c] *= std::max(seq[t][c], floor);
    }
    double sum = 0.0;
    for (double v : post) sum += v;
    for (double& v : post) v /= sum;
  }
  double sum = 0.0;
  for (double v : post) sum += v;
  for (double& v : post) v /= sum;
  return post;
}

inline std::vector<double> arithmetic_mean(
    const std::vector<std::vector<double>>& seq) {
  std::vector<double> mean(seq.front().size(), 0.0);
  for (const auto& v : seq) {
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += v[c];
  }
  for (double& v : mean) v /= seq.size();
  return mean;
}

}  // namespace oracles
