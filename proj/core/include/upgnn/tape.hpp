#pragma once

#include <cstddef>
#include <vector>

#include "upgnn/matrix.hpp"
#include "upgnn/rng.hpp"
#include "upgnn/sparse.hpp"

namespace upgnn {

// Reverse-mode differentiation over dense/sparse matrix primitives.
//
// Usage: record a forward computation through the op methods, call
// backward() on a scalar result, then read per-leaf gradients. A tape is
// single-use per training step; parameters live outside the tape and are
// copied in as leaves each step. Instantiated for float (training) and
// double (gradient checking).
template <typename T>
class Tape {
 public:
  // Handle to a recorded value.
  struct Ref {
    std::size_t id = static_cast<std::size_t>(-1);
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable input (a parameter).
  Ref leaf(const Matrix<T>& value);
  // Non-differentiable input (data).
  Ref constant(const Matrix<T>& value);

  // out = a * b.
  Ref matmul(Ref a, Ref b);
  // out = adj * x under the adjacency's aggregation mode. The adjacency must
  // outlive the tape.
  Ref spmm(const SparseAdjacency& adj, Ref x);
  // out = max(0, x); gradient is zero where x <= 0.
  Ref relu(Ref x);
  // Inverted dropout: elements zeroed with probability p, survivors scaled
  // by 1/(1-p). The mask is drawn once at record time. Requires 0 <= p < 1.
  Ref dropout(Ref x, double p, Rng& rng);
  // Elementwise ops; shapes must match.
  Ref add(Ref a, Ref b);
  Ref sub(Ref a, Ref b);
  Ref hadamard(Ref a, Ref b);
  // out = factor * x.
  Ref scale(Ref x, T factor);
  // Horizontal / vertical concatenation.
  Ref concat_cols(Ref a, Ref b);
  Ref concat_rows(Ref a, Ref b);
  // Rows [begin, end) of x.
  Ref slice_rows(Ref x, std::size_t begin, std::size_t end);
  // Rows of x selected by index, in order.
  Ref gather_rows(Ref x, std::vector<std::size_t> rows);
  // 1x1 sum of all entries.
  Ref sum(Ref x);
  // Mean binary cross-entropy of sigmoid(logits) against targets, evaluated
  // in the numerically stable logits form. Returns 1x1.
  Ref bce_with_logits_mean(Ref logits, const Matrix<T>& targets);

  // Value of a recorded node.
  const Matrix<T>& value(Ref r) const;

  // Gradient of the last backward() target with respect to node r; zero
  // matrix when r is off the loss path.
  Matrix<T> grad(Ref r) const;

  // Run reverse accumulation from a scalar loss node.
  void backward(Ref loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    kLeaf,
    kConstant,
    kMatmul,
    kSpmm,
    kRelu,
    kDropout,
    kAdd,
    kSub,
    kHadamard,
    kScale,
    kConcatCols,
    kConcatRows,
    kSliceRows,
    kGatherRows,
    kSum,
    kBceLogitsMean,
  };

  struct Node {
    Op op;
    std::size_t in0 = static_cast<std::size_t>(-1);
    std::size_t in1 = static_cast<std::size_t>(-1);
    bool requires_grad = false;
    T scalar = T{0};
    std::size_t meta = 0;
    std::vector<std::size_t> indices;
    Matrix<T> aux;
    const SparseAdjacency* adj = nullptr;
  };

  Ref push(Node node, Matrix<T> value);
  void check_valid(Ref r) const;
  Matrix<T>& grad_buffer(std::size_t id);
  void accumulate(std::size_t id, const Matrix<T>& g);

  std::vector<Node> nodes_;
  std::vector<Matrix<T>> values_;
  std::vector<Matrix<T>> grads_;
};

using TapeF = Tape<float>;
using TapeD = Tape<double>;

}  // namespace upgnn
