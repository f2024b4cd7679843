#include "upgnn/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "upgnn/errors.hpp"

namespace upgnn {

SparseAdjacency SparseAdjacency::FromBipartiteEdges(
    std::size_t n, std::size_t m,
    const std::vector<std::pair<std::size_t, std::size_t>>& edges,
    NormMode mode) {
  const std::size_t dim = n + m;
  std::vector<std::size_t> counts(dim, 0);
  for (const auto& [u, p] : edges) {
    if (u >= n) {
      throw ShapeError("SparseAdjacency: user index " + std::to_string(u) +
                       " out of range for n=" + std::to_string(n));
    }
    if (p >= m) {
      throw ShapeError("SparseAdjacency: product index " + std::to_string(p) +
                       " out of range for m=" + std::to_string(m));
    }
    ++counts[u];
    ++counts[n + p];
  }

  SparseAdjacency adj;
  adj.dimension_ = dim;
  adj.mode_ = mode;
  adj.row_ptr_.assign(dim + 1, 0);
  for (std::size_t i = 0; i < dim; ++i) {
    adj.row_ptr_[i + 1] = adj.row_ptr_[i] + counts[i];
  }
  adj.col_idx_.assign(adj.row_ptr_[dim], 0);
  adj.values_.assign(adj.row_ptr_[dim], 1.0);

  std::vector<std::size_t> cursor(adj.row_ptr_.begin(),
                                  adj.row_ptr_.end() - 1);
  for (const auto& [u, p] : edges) {
    adj.col_idx_[cursor[u]++] = n + p;
    adj.col_idx_[cursor[n + p]++] = u;
  }
  // Keep each row's columns sorted so the layout is canonical.
  for (std::size_t i = 0; i < dim; ++i) {
    std::sort(adj.col_idx_.begin() + static_cast<std::ptrdiff_t>(adj.row_ptr_[i]),
              adj.col_idx_.begin() + static_cast<std::ptrdiff_t>(adj.row_ptr_[i + 1]));
    for (std::size_t k = adj.row_ptr_[i] + 1; k < adj.row_ptr_[i + 1]; ++k) {
      if (adj.col_idx_[k] == adj.col_idx_[k - 1]) {
        throw ShapeError("SparseAdjacency: duplicate edge in input");
      }
    }
  }

  adj.degrees_.assign(dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) {
    double d = 0.0;
    for (std::size_t k = adj.row_ptr_[i]; k < adj.row_ptr_[i + 1]; ++k) {
      d += adj.values_[k];
    }
    adj.degrees_[i] = d;
  }
  return adj;
}

SparseAdjacency SparseAdjacency::with_norm_mode(NormMode mode) const {
  SparseAdjacency out = *this;
  out.mode_ = mode;
  return out;
}

namespace {

// out[i] += coeff * x[j] over the row's nonzeros.
template <typename T>
void accumulate_row(const std::vector<std::size_t>& col_idx,
                    const std::vector<double>& values, std::size_t begin,
                    std::size_t end, double row_scale,
                    const std::vector<double>* col_scale, const Matrix<T>& x,
                    T* out_row, std::size_t cols) {
  for (std::size_t k = begin; k < end; ++k) {
    const std::size_t j = col_idx[k];
    double coeff = values[k] * row_scale;
    if (col_scale != nullptr) coeff *= (*col_scale)[j];
    const T* src = x.data() + j * cols;
    const T c = static_cast<T>(coeff);
    for (std::size_t q = 0; q < cols; ++q) out_row[q] += c * src[q];
  }
}

}  // namespace

template <typename T>
Matrix<T> SparseAdjacency::spmm(const Matrix<T>& x) const {
  if (x.rows() != dimension_) {
    throw ShapeError("spmm: adjacency dimension " + std::to_string(dimension_) +
                     " does not match matrix rows " + std::to_string(x.rows()));
  }
  const std::size_t cols = x.cols();
  Matrix<T> out(dimension_, cols);

  std::vector<double> inv_sqrt;
  if (mode_ == NormMode::kSym) {
    inv_sqrt.resize(dimension_);
    for (std::size_t i = 0; i < dimension_; ++i) {
      inv_sqrt[i] = degrees_[i] > 0.0 ? 1.0 / std::sqrt(degrees_[i]) : 0.0;
    }
  }

  for (std::size_t i = 0; i < dimension_; ++i) {
    double row_scale = 1.0;
    const std::vector<double>* col_scale = nullptr;
    switch (mode_) {
      case NormMode::kSum:
        break;
      case NormMode::kMean:
        if (degrees_[i] <= 0.0) continue;
        row_scale = 1.0 / degrees_[i];
        break;
      case NormMode::kSym:
        row_scale = inv_sqrt[i];
        col_scale = &inv_sqrt;
        break;
    }
    accumulate_row(col_idx_, values_, row_ptr_[i], row_ptr_[i + 1], row_scale,
                   col_scale, x, out.data() + i * cols, cols);
  }
  return out;
}

template <typename T>
Matrix<T> SparseAdjacency::spmm_backward(const Matrix<T>& g) const {
  if (g.rows() != dimension_) {
    throw ShapeError("spmm_backward: adjacency dimension " +
                     std::to_string(dimension_) +
                     " does not match matrix rows " + std::to_string(g.rows()));
  }
  if (mode_ != NormMode::kMean) {
    // Sum and symmetric modes are symmetric operators: the adjoint is the
    // same product.
    return spmm(g);
  }
  // Mean mode: forward is D^{-1} A x, so the adjoint is A^T D^{-1} g, and A
  // is symmetric. Scale rows of g by inverse degree, then apply the plain sum.
  Matrix<T> scaled = g;
  const std::size_t cols = g.cols();
  for (std::size_t i = 0; i < dimension_; ++i) {
    const double d = degrees_[i];
    const T s = d > 0.0 ? static_cast<T>(1.0 / d) : T{0};
    T* row = scaled.data() + i * cols;
    for (std::size_t q = 0; q < cols; ++q) row[q] *= s;
  }
  return with_norm_mode(NormMode::kSum).spmm(scaled);
}

template Matrix<float> SparseAdjacency::spmm(const Matrix<float>&) const;
template Matrix<double> SparseAdjacency::spmm(const Matrix<double>&) const;
template Matrix<float> SparseAdjacency::spmm_backward(const Matrix<float>&) const;
template Matrix<double> SparseAdjacency::spmm_backward(const Matrix<double>&) const;

}  // namespace upgnn
