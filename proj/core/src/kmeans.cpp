#include "upgnn/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "upgnn/errors.hpp"
#include "upgnn/rng.hpp"

namespace upgnn {

namespace {

double sq_dist_to_row(const Matrix<double>& x, std::size_t i,
                      const Matrix<double>& c, std::size_t j) {
  double acc = 0.0;
  for (std::size_t f = 0; f < x.cols(); ++f) {
    const double d = x(i, f) - c(j, f);
    acc += d * d;
  }
  return acc;
}

}  // namespace

ClusterModel kmeans(const Matrix<double>& x, std::size_t k,
                    std::uint64_t seed, std::size_t max_iterations) {
  const std::size_t n = x.rows();
  if (k == 0) throw ParameterError("kmeans: k must be positive");
  if (k > n) throw ParameterError("kmeans: k exceeds the number of points");

  Rng rng = Rng(seed).sub("kmeans");

  // Distance-weighted seeding: each next center is drawn with probability
  // proportional to squared distance from the centers chosen so far.
  Matrix<double> centroids(k, x.cols());
  std::vector<char> is_center(n, 0);
  std::vector<double> best_sq(n, std::numeric_limits<double>::infinity());
  {
    const std::size_t first = rng.uniform_index(n);
    is_center[first] = 1;
    for (std::size_t f = 0; f < x.cols(); ++f) centroids(0, f) = x(first, f);
    for (std::size_t j = 1; j < k; ++j) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        best_sq[i] = std::min(best_sq[i], sq_dist_to_row(x, i, centroids, j - 1));
        total += best_sq[i];
      }
      std::size_t pick = n;
      if (total > 0.0) {
        const double target = rng.uniform() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          acc += best_sq[i];
          if (acc >= target) {
            pick = i;
            break;
          }
        }
        if (pick == n) pick = n - 1;  // numeric slack at the right edge
      }
      if (pick == n || is_center[pick]) {
        // Degenerate mass (duplicates): first point not already a center.
        for (std::size_t i = 0; i < n; ++i) {
          if (!is_center[i]) {
            pick = i;
            break;
          }
        }
      }
      is_center[pick] = 1;
      for (std::size_t f = 0; f < x.cols(); ++f) centroids(j, f) = x(pick, f);
    }
  }

  ClusterModel out;
  out.k = k;
  out.assignment.assign(n, 0);
  std::vector<std::size_t> previous(n, k);  // k = "unassigned" sentinel
  std::vector<double> assigned_sq(n, 0.0);

  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    // Assign each point to its nearest centroid; ties to the lower index.
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = sq_dist_to_row(x, i, centroids, 0);
      for (std::size_t j = 1; j < k; ++j) {
        const double d = sq_dist_to_row(x, i, centroids, j);
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      out.assignment[i] = best;
      assigned_sq[i] = best_d;
    }

    // Re-seed any empty cluster from the point farthest from its centroid.
    std::vector<std::size_t> counts(k, 0);
    for (const std::size_t a : out.assignment) ++counts[a];
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] != 0) continue;
      // Only clusters with two or more members may donate, so the steal
      // cannot create a new empty cluster (one always exists by pigeonhole).
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[out.assignment[i]] < 2) continue;
        if (far == n || assigned_sq[i] > assigned_sq[far]) far = i;
      }
      --counts[out.assignment[far]];
      out.assignment[far] = j;
      counts[j] = 1;
      for (std::size_t f = 0; f < x.cols(); ++f) centroids(j, f) = x(far, f);
      assigned_sq[far] = 0.0;
    }

    double distortion = 0.0;
    for (const double d : assigned_sq) distortion += d;
    out.distortion_trace.push_back(distortion);
    out.iterations = iter + 1;

    if (out.assignment == previous) break;
    previous = out.assignment;

    // Move each centroid to the mean of its members.
    Matrix<double> sums(k, x.cols());
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = out.assignment[i];
      ++sizes[j];
      for (std::size_t f = 0; f < x.cols(); ++f) sums(j, f) += x(i, f);
    }
    for (std::size_t j = 0; j < k; ++j) {
      const double inv = 1.0 / static_cast<double>(sizes[j]);
      for (std::size_t f = 0; f < x.cols(); ++f) {
        centroids(j, f) = sums(j, f) * inv;
      }
    }
  }

  out.centroids = std::move(centroids);
  out.m.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.m[i] = std::sqrt(sq_dist_to_row(x, i, out.centroids, out.assignment[i]));
  }
  return out;
}

std::vector<std::size_t> cluster_floors(
    const std::vector<std::size_t>& assignment, std::size_t k,
    std::size_t b) {
  const std::size_t n = assignment.size();
  if (n == 0) throw ParameterError("cluster floors: empty assignment");
  std::vector<std::size_t> sizes(k, 0);
  for (const std::size_t a : assignment) {
    if (a >= k) throw ParameterError("cluster floors: assignment out of range");
    ++sizes[a];
  }
  std::vector<std::size_t> floors(k, 0);
  for (std::size_t j = 0; j < k; ++j) floors[j] = sizes[j] * b / n;
  return floors;
}

}  // namespace upgnn
