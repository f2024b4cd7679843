#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "upgnn/matrix.hpp"

namespace upgnn {

// A fitted clustering: per-point assignment, the centroids, and each point's
// Euclidean distance to its centroid (the diversity signal M).
struct ClusterModel {
  std::size_t k = 0;
  std::vector<std::size_t> assignment;
  Matrix<double> centroids;
  std::vector<double> m;
  std::vector<double> distortion_trace;  // after each assignment sweep
  std::size_t iterations = 0;
};

// Lloyd iterations from a distance-weighted (k-means++-style) seeded start,
// until the assignment reaches a fixpoint or the iteration cap. Distortion is
// non-increasing across the trace; a cluster that empties is re-seeded from
// the point farthest from its current centroid. Requires 1 <= k <= points.
ClusterModel kmeans(const Matrix<double>& x, std::size_t k,
                    std::uint64_t seed, std::size_t max_iterations = 100);

// Per-cluster budget floors ⌊(|C_j| / n) · b⌋ over the full population; the
// remainder b − Σ floors is a shared pool the selector hands out by rank.
std::vector<std::size_t> cluster_floors(
    const std::vector<std::size_t>& assignment, std::size_t k, std::size_t b);

}  // namespace upgnn
