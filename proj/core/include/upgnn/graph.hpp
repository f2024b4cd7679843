#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "upgnn/sparse.hpp"

namespace upgnn {

// Undirected bipartite user-product graph. Edges are held as canonical
// (user, product) pairs, sorted and unique; the block adjacency places users
// on rows [0, n) and products on rows [n, n + m).
class BipartiteGraph {
 public:
  BipartiteGraph() = default;

  // Validates ranges, sorts edges, and rejects duplicates.
  BipartiteGraph(std::size_t n, std::size_t m,
                 std::vector<std::pair<std::size_t, std::size_t>> edges);

  std::size_t n() const { return n_; }
  std::size_t m() const { return m_; }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const {
    return edges_;
  }

  // Per-user count of adjacent products.
  std::vector<double> user_degrees() const;

 private:
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
};

// The (n+m)-dimensional block adjacency: entry (u, n+p) = (n+p, u) = 1 for
// each edge (u, p), zero elsewhere.
SparseAdjacency build_adjacency(const BipartiteGraph& graph,
                                NormMode mode = NormMode::kSum);

// Per-user degree vector (alias over BipartiteGraph::user_degrees).
std::vector<double> degrees(const BipartiteGraph& graph);

}  // namespace upgnn
