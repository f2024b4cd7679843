#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "upgnn/matrix.hpp"

namespace upgnn {

// How sparse-dense products aggregate a node's neighborhood.
enum class NormMode {
  kSum,   // plain adjacency product
  kMean,  // rows divided by degree (empty neighborhoods stay zero)
  kSym,   // symmetric normalization D^{-1/2} A D^{-1/2}
};

// Symmetric sparse adjacency in compressed-sparse-row form. For a bipartite
// graph the dimension is n + m with users first, and nonzeros appear only in
// the two off-diagonal blocks. Because the matrix is symmetric, the row view
// and the column view coincide, so one buffer serves both message-passing
// directions contiguously.
class SparseAdjacency {
 public:
  SparseAdjacency() = default;

  // Build the block adjacency of a bipartite graph from (user, product)
  // pairs with user in [0, n) and product in [0, m). Edges must be unique.
  static SparseAdjacency FromBipartiteEdges(
      std::size_t n, std::size_t m,
      const std::vector<std::pair<std::size_t, std::size_t>>& edges,
      NormMode mode = NormMode::kSum);

  std::size_t dimension() const { return dimension_; }
  std::size_t nnz() const { return col_idx_.size(); }

  const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<std::size_t>& col_idx() const { return col_idx_; }
  const std::vector<double>& edge_values() const { return values_; }

  NormMode norm_mode() const { return mode_; }
  // Copy with a different aggregation mode; the structure is shared state-free.
  SparseAdjacency with_norm_mode(NormMode mode) const;

  // Per-node degree (sum of incident edge values).
  const std::vector<double>& degrees() const { return degrees_; }

  // Multiply this adjacency with a dense matrix under the configured mode:
  // out[i] = agg_{j in N(i)} value(i, j) * x[j].
  template <typename T>
  Matrix<T> spmm(const Matrix<T>& x) const;

  // Gradient of spmm with respect to x given upstream gradient g. Sum and
  // symmetric modes are self-adjoint; mean mode rescales rows by degree first.
  template <typename T>
  Matrix<T> spmm_backward(const Matrix<T>& g) const;

 private:
  std::size_t dimension_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
  std::vector<double> degrees_;
  NormMode mode_ = NormMode::kSum;
};

}  // namespace upgnn
