#include "cogtree/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cogtree/error.hpp"

namespace cogtree {

std::vector<std::vector<std::size_t>> average_linkage(std::span<const std::vector<double>> points,
                                                      std::size_t num_clusters) {
  const std::size_t n = points.size();
  if (num_clusters == 0 || num_clusters > n) {
    throw Error(ErrorCode::invalid_argument, "cluster count must be in [1, number of points]");
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (points[i].size() != points[0].size()) {
      throw Error(ErrorCode::dimension_mismatch, "point dimensions differ", i);
    }
  }

  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < points[i].size(); ++k) {
        const double d = points[i][k] - points[j][k];
        s += d * d;
      }
      dist[i * n + j] = dist[j * n + i] = std::sqrt(s);
    }
  }

  // Cluster slots are identified by their smallest member; merging keeps the
  // lower slot, so slot order equals smallest-member order.
  std::vector<std::vector<std::size_t>> members(n);
  std::vector<bool> alive(n, true);
  for (std::size_t i = 0; i < n; ++i) members[i] = {i};

  for (std::size_t remaining = n; remaining > num_clusters; --remaining) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!alive[j]) continue;
        if (dist[i * n + j] < best) {
          best = dist[i * n + j];
          bi = i;
          bj = j;
        }
      }
    }
    // Lance-Williams update for average linkage.
    const double wi = static_cast<double>(members[bi].size());
    const double wj = static_cast<double>(members[bj].size());
    for (std::size_t k = 0; k < n; ++k) {
      if (!alive[k] || k == bi || k == bj) continue;
      const double d = (wi * dist[bi * n + k] + wj * dist[bj * n + k]) / (wi + wj);
      dist[bi * n + k] = dist[k * n + bi] = d;
    }
    members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
    std::sort(members[bi].begin(), members[bi].end());
    members[bj].clear();
    alive[bj] = false;
  }

  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (alive[i]) out.push_back(std::move(members[i]));
  }
  return out;
}

}  // namespace cogtree
