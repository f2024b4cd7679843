#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "upgnn/graph.hpp"
#include "upgnn/matrix.hpp"

namespace upgnn {

// A bipartite uplift dataset: the graph, node features, and per-user
// treatment/outcome labels. Unlabeled users carry mask 0 and placeholder
// outcome 0, which no loss or metric ever reads.
struct Dataset {
  BipartiteGraph graph;
  Matrix<double> x_u;            // n x d user features
  Matrix<double> x_p;            // m x d_p product features
  std::vector<int> treatment;    // n entries in {0, 1}
  std::vector<double> outcome;   // n entries, finite
  std::vector<char> label_mask;  // n entries in {0, 1}

  // Original identifiers in index order (kept for report output).
  std::vector<std::string> user_ids;
  std::vector<std::string> product_ids;

  std::size_t n() const { return graph.n(); }
  std::size_t m() const { return graph.m(); }

  // Indices of users with label mask 1.
  std::vector<std::size_t> labeled_users() const;
};

// Ingestion outcome: the dataset plus counters for recoverable anomalies.
struct LoadResult {
  Dataset dataset;
  std::size_t duplicate_edge_count = 0;
};

// Load a dataset from the three documented comma-separated tables:
//   edges:    header "user_id,item_id"
//   features: header "user_id,f0,...,f{d-1}"
//   labels:   header "user_id,treatment,outcome", treatment in {0, 1}
// The feature table defines the user universe; products come from the edge
// table and receive one-hot features. IDs are sorted lexicographically and
// re-indexed contiguously, so ingestion is independent of row order.
// Duplicate edges are dropped and counted; labels for unknown users, users
// in edges without features, or non-numeric fields raise IngestError.
LoadResult load_dataset(const std::string& edges_path,
                        const std::string& features_path,
                        const std::string& labels_path);

// Per-column standardization to mean 0 and standard deviation 1; constant
// columns map to all zeros. Idempotent up to float tolerance.
Matrix<double> normalize_features(const Matrix<double>& x);

}  // namespace upgnn
