#include "upgnn/graph.hpp"

#include <algorithm>
#include <string>

#include "upgnn/errors.hpp"

namespace upgnn {

BipartiteGraph::BipartiteGraph(
    std::size_t n, std::size_t m,
    std::vector<std::pair<std::size_t, std::size_t>> edges)
    : n_(n), m_(m), edges_(std::move(edges)) {
  for (const auto& [u, p] : edges_) {
    if (u >= n_) {
      throw ShapeError("BipartiteGraph: user index " + std::to_string(u) +
                       " out of range for n=" + std::to_string(n_));
    }
    if (p >= m_) {
      throw ShapeError("BipartiteGraph: product index " + std::to_string(p) +
                       " out of range for m=" + std::to_string(m_));
    }
  }
  std::sort(edges_.begin(), edges_.end());
  if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
    throw ParameterError("BipartiteGraph: duplicate edges in input");
  }
}

std::vector<double> BipartiteGraph::user_degrees() const {
  std::vector<double> d(n_, 0.0);
  for (const auto& [u, p] : edges_) {
    (void)p;
    d[u] += 1.0;
  }
  return d;
}

SparseAdjacency build_adjacency(const BipartiteGraph& graph, NormMode mode) {
  return SparseAdjacency::FromBipartiteEdges(graph.n(), graph.m(),
                                             graph.edges(), mode);
}

std::vector<double> degrees(const BipartiteGraph& graph) {
  return graph.user_degrees();
}

}  // namespace upgnn
