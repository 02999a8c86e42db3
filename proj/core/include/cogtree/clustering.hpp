#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cogtree {

/// Average-linkage (UPGMA) agglomerative clustering under Euclidean
/// distance, stopped when `num_clusters` clusters remain.
///
/// Returns clusters as sorted member lists, ordered by smallest member.
/// Ties between equally close pairs merge the pair whose smallest members
/// are lexicographically first, so the result is a pure function of input.
std::vector<std::vector<std::size_t>> average_linkage(std::span<const std::vector<double>> points,
                                                      std::size_t num_clusters);

}  // namespace cogtree
