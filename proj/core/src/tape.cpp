#include "upgnn/tape.hpp"

#include <cmath>
#include <string>

#include "upgnn/errors.hpp"

namespace upgnn {

namespace {

// out = a * b with i-k-j loop order so both inner accesses are contiguous.
template <typename T>
Matrix<T> matmul_values(const Matrix<T>& a, const Matrix<T>& b) {
  const std::size_t rows = a.rows();
  const std::size_t inner = a.cols();
  const std::size_t cols = b.cols();
  Matrix<T> out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    T* out_row = out.data() + i * cols;
    const T* a_row = a.data() + i * inner;
    for (std::size_t k = 0; k < inner; ++k) {
      const T aik = a_row[k];
      const T* b_row = b.data() + k * cols;
      for (std::size_t j = 0; j < cols; ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

// out = g * b^T, i.e. out[i, k] = dot(g[i, :], b[k, :]).
template <typename T>
Matrix<T> matmul_bt(const Matrix<T>& g, const Matrix<T>& b) {
  const std::size_t rows = g.rows();
  const std::size_t cols = g.cols();
  const std::size_t out_cols = b.rows();
  Matrix<T> out(rows, out_cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const T* g_row = g.data() + i * cols;
    T* out_row = out.data() + i * out_cols;
    for (std::size_t k = 0; k < out_cols; ++k) {
      const T* b_row = b.data() + k * cols;
      T acc = T{0};
      for (std::size_t j = 0; j < cols; ++j) acc += g_row[j] * b_row[j];
      out_row[k] = acc;
    }
  }
  return out;
}

// out = a^T * g, i.e. out[k, j] = sum_i a[i, k] * g[i, j].
template <typename T>
Matrix<T> matmul_at(const Matrix<T>& a, const Matrix<T>& g) {
  const std::size_t rows = a.rows();
  const std::size_t inner = a.cols();
  const std::size_t cols = g.cols();
  Matrix<T> out(inner, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const T* a_row = a.data() + i * inner;
    const T* g_row = g.data() + i * cols;
    for (std::size_t k = 0; k < inner; ++k) {
      const T aik = a_row[k];
      T* out_row = out.data() + k * cols;
      for (std::size_t j = 0; j < cols; ++j) out_row[j] += aik * g_row[j];
    }
  }
  return out;
}

template <typename T>
void add_into(Matrix<T>& dst, const Matrix<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.values()[i] += src.values()[i];
}

}  // namespace

template <typename T>
typename Tape<T>::Ref Tape<T>::push(Node node, Matrix<T> value) {
  nodes_.push_back(std::move(node));
  values_.push_back(std::move(value));
  return Ref{nodes_.size() - 1};
}

template <typename T>
void Tape<T>::check_valid(Ref r) const {
  if (r.id >= nodes_.size()) {
    throw ParameterError("Tape: reference to a node not on this tape");
  }
}

template <typename T>
typename Tape<T>::Ref Tape<T>::leaf(const Matrix<T>& value) {
  Node node;
  node.op = Op::kLeaf;
  node.requires_grad = true;
  return push(std::move(node), value);
}

template <typename T>
typename Tape<T>::Ref Tape<T>::constant(const Matrix<T>& value) {
  Node node;
  node.op = Op::kConstant;
  node.requires_grad = false;
  return push(std::move(node), value);
}

template <typename T>
typename Tape<T>::Ref Tape<T>::matmul(Ref a, Ref b) {
  check_valid(a);
  check_valid(b);
  const Matrix<T>& va = values_[a.id];
  const Matrix<T>& vb = values_[b.id];
  if (va.cols() != vb.rows()) {
    throw ShapeError("matmul: inner dimensions " + std::to_string(va.cols()) +
                     " and " + std::to_string(vb.rows()) + " do not match");
  }
  Node node;
  node.op = Op::kMatmul;
  node.in0 = a.id;
  node.in1 = b.id;
  node.requires_grad =
      nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
  return push(std::move(node), matmul_values(va, vb));
}

template <typename T>
typename Tape<T>::Ref Tape<T>::spmm(const SparseAdjacency& adj, Ref x) {
  check_valid(x);
  const Matrix<T>& vx = values_[x.id];
  if (vx.rows() != adj.dimension()) {
    throw ShapeError("spmm: adjacency dimension " +
                     std::to_string(adj.dimension()) +
                     " does not match matrix rows " + std::to_string(vx.rows()));
  }
  Node node;
  node.op = Op::kSpmm;
  node.in0 = x.id;
  node.requires_grad = nodes_[x.id].requires_grad;
  node.adj = &adj;
  return push(std::move(node), adj.spmm(vx));
}

template <typename T>
typename Tape<T>::Ref Tape<T>::relu(Ref x) {
  check_valid(x);
  const Matrix<T>& vx = values_[x.id];
  Matrix<T> out = vx;
  for (T& v : out.values()) {
    if (v < T{0}) v = T{0};
  }
  Node node;
  node.op = Op::kRelu;
  node.in0 = x.id;
  node.requires_grad = nodes_[x.id].requires_grad;
  return push(std::move(node), std::move(out));
}

template <typename T>
typename Tape<T>::Ref Tape<T>::dropout(Ref x, double p, Rng& rng) {
  check_valid(x);
  if (p < 0.0 || p >= 1.0) {
    throw ParameterError("dropout: rate must lie in [0, 1), got " +
                         std::to_string(p));
  }
  const Matrix<T>& vx = values_[x.id];
  Matrix<T> mask(vx.rows(), vx.cols());
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  for (T& v : mask.values()) {
    v = rng.uniform() < p ? T{0} : keep_scale;
  }
  Matrix<T> out = vx;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.values()[i] *= mask.values()[i];
  }
  Node node;
  node.op = Op::kDropout;
  node.in0 = x.id;
  node.requires_grad = nodes_[x.id].requires_grad;
  node.aux = std::move(mask);
  return push(std::move(node), std::move(out));
}

template <typename T>
typename Tape<T>::Ref Tape<T>::add(Ref a, Ref b) {
  check_valid(a);
  check_valid(b);
  const Matrix<T>& va = values_[a.id];
  const Matrix<T>& vb = values_[b.id];
  if (!va.same_shape(vb)) throw ShapeError("add: operand shapes differ");
  Matrix<T> out = va;
  add_into(out, vb);
  Node node;
  node.op = Op::kAdd;
  node.in0 = a.id;
  node.in1 = b.id;
  node.requires_grad =
      nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
  return push(std::move(node), std::move(out));
}

template <typename T>
typename Tape<T>::Ref Tape<T>::sub(Ref a, Ref b) {
  check_valid(a);
  check_valid(b);
  const Matrix<T>& va = values_[a.id];
  const Matrix<T>& vb = values_[b.id];
  if (!va.same_shape(vb)) throw ShapeError("sub: operand shapes differ");
  Matrix<T> out = va;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.values()[i] -= vb.values()[i];
  }
  Node node;
  node.op = Op::kSub;
  node.in0 = a.id;
  node.in1 = b.id;
  node.requires_grad =
      nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
  return push(std::move(node), std::move(out));
}

template <typename T>
typename Tape<T>::Ref Tape<T>::hadamard(Ref a, Ref b) {
  check_valid(a);
  check_valid(b);
  const Matrix<T>& va = values_[a.id];
  const Matrix<T>& vb = values_[b.id];
  if (!va.same_shape(vb)) throw ShapeError("hadamard: operand shapes differ");
  Matrix<T> out = va;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.values()[i] *= vb.values()[i];
  }
  Node node;
  node.op = Op::kHadamard;
  node.in0 = a.id;
  node.in1 = b.id;
  node.requires_grad =
      nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
  return push(std::move(node), std::move(out));
}

template <typename T>
typename Tape<T>::Ref Tape<T>::scale(Ref x, T factor) {
  check_valid(x);
  Matrix<T> out = values_[x.id];
  for (T& v : out.values()) v *= factor;
  Node node;
  node.op = Op::kScale;
  node.in0 = x.id;
  node.requires_grad = nodes_[x.id].requires_grad;
  node.scalar = factor;
  return push(std::move(node), std::move(out));
}

template <typename T>
typename Tape<T>::Ref Tape<T>::concat_cols(Ref a, Ref b) {
  check_valid(a);
  check_valid(b);
  const Matrix<T>& va = values_[a.id];
  const Matrix<T>& vb = values_[b.id];
  if (va.rows() != vb.rows()) {
    throw ShapeError("concat_cols: row counts differ");
  }
  Matrix<T> out(va.rows(), va.cols() + vb.cols());
  for (std::size_t i = 0; i < va.rows(); ++i) {
    T* row = out.data() + i * out.cols();
    const T* ra = va.data() + i * va.cols();
    const T* rb = vb.data() + i * vb.cols();
    for (std::size_t j = 0; j < va.cols(); ++j) row[j] = ra[j];
    for (std::size_t j = 0; j < vb.cols(); ++j) row[va.cols() + j] = rb[j];
  }
  Node node;
  node.op = Op::kConcatCols;
  node.in0 = a.id;
  node.in1 = b.id;
  node.requires_grad =
      nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
  return push(std::move(node), std::move(out));
}

template <typename T>
typename Tape<T>::Ref Tape<T>::concat_rows(Ref a, Ref b) {
  check_valid(a);
  check_valid(b);
  const Matrix<T>& va = values_[a.id];
  const Matrix<T>& vb = values_[b.id];
  if (va.cols() != vb.cols()) {
    throw ShapeError("concat_rows: column counts differ");
  }
  Matrix<T> out(va.rows() + vb.rows(), va.cols());
  std::copy(va.values().begin(), va.values().end(), out.values().begin());
  std::copy(vb.values().begin(), vb.values().end(),
            out.values().begin() + static_cast<std::ptrdiff_t>(va.size()));
  Node node;
  node.op = Op::kConcatRows;
  node.in0 = a.id;
  node.in1 = b.id;
  node.requires_grad =
      nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
  return push(std::move(node), std::move(out));
}

template <typename T>
typename Tape<T>::Ref Tape<T>::slice_rows(Ref x, std::size_t begin,
                                          std::size_t end) {
  check_valid(x);
  const Matrix<T>& vx = values_[x.id];
  if (begin > end || end > vx.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") invalid for " +
                     std::to_string(vx.rows()) + " rows");
  }
  Matrix<T> out(end - begin, vx.cols());
  std::copy(vx.data() + begin * vx.cols(), vx.data() + end * vx.cols(),
            out.data());
  Node node;
  node.op = Op::kSliceRows;
  node.in0 = x.id;
  node.requires_grad = nodes_[x.id].requires_grad;
  node.meta = begin;
  return push(std::move(node), std::move(out));
}

template <typename T>
typename Tape<T>::Ref Tape<T>::gather_rows(Ref x,
                                           std::vector<std::size_t> rows) {
  check_valid(x);
  const Matrix<T>& vx = values_[x.id];
  Matrix<T> out(rows.size(), vx.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= vx.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(rows[i]) +
                       " out of range for " + std::to_string(vx.rows()) +
                       " rows");
    }
    std::copy(vx.data() + rows[i] * vx.cols(),
              vx.data() + (rows[i] + 1) * vx.cols(),
              out.data() + i * vx.cols());
  }
  Node node;
  node.op = Op::kGatherRows;
  node.in0 = x.id;
  node.requires_grad = nodes_[x.id].requires_grad;
  node.indices = std::move(rows);
  return push(std::move(node), std::move(out));
}

template <typename T>
typename Tape<T>::Ref Tape<T>::sum(Ref x) {
  check_valid(x);
  const Matrix<T>& vx = values_[x.id];
  T acc = T{0};
  for (const T& v : vx.values()) acc += v;
  Matrix<T> out(1, 1);
  out(0, 0) = acc;
  Node node;
  node.op = Op::kSum;
  node.in0 = x.id;
  node.requires_grad = nodes_[x.id].requires_grad;
  return push(std::move(node), std::move(out));
}

template <typename T>
typename Tape<T>::Ref Tape<T>::bce_with_logits_mean(Ref logits,
                                                    const Matrix<T>& targets) {
  check_valid(logits);
  const Matrix<T>& vz = values_[logits.id];
  if (!vz.same_shape(targets)) {
    throw ShapeError("bce_with_logits_mean: logits and targets shapes differ");
  }
  if (vz.size() == 0) {
    throw ParameterError("bce_with_logits_mean: empty input");
  }
  T acc = T{0};
  for (std::size_t i = 0; i < vz.size(); ++i) {
    const T z = vz.values()[i];
    const T t = targets.values()[i];
    // max(z, 0) - z*t + log(1 + exp(-|z|)): stable in both tails.
    const T zpos = z > T{0} ? z : T{0};
    acc += zpos - z * t + std::log1p(std::exp(-std::abs(z)));
  }
  Matrix<T> out(1, 1);
  out(0, 0) = acc / static_cast<T>(vz.size());
  Node node;
  node.op = Op::kBceLogitsMean;
  node.in0 = logits.id;
  node.requires_grad = nodes_[logits.id].requires_grad;
  node.aux = targets;
  return push(std::move(node), std::move(out));
}

template <typename T>
const Matrix<T>& Tape<T>::value(Ref r) const {
  check_valid(r);
  return values_[r.id];
}

template <typename T>
Matrix<T> Tape<T>::grad(Ref r) const {
  check_valid(r);
  if (r.id < grads_.size() && !grads_[r.id].empty()) return grads_[r.id];
  const Matrix<T>& v = values_[r.id];
  return Matrix<T>(v.rows(), v.cols());
}

template <typename T>
Matrix<T>& Tape<T>::grad_buffer(std::size_t id) {
  if (grads_[id].empty()) {
    grads_[id] = Matrix<T>(values_[id].rows(), values_[id].cols());
  }
  return grads_[id];
}

template <typename T>
void Tape<T>::accumulate(std::size_t id, const Matrix<T>& g) {
  add_into(grad_buffer(id), g);
}

template <typename T>
void Tape<T>::backward(Ref loss) {
  check_valid(loss);
  const Matrix<T>& lv = values_[loss.id];
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError("backward: loss must be a 1x1 scalar, got " +
                     std::to_string(lv.rows()) + "x" +
                     std::to_string(lv.cols()));
  }
  grads_.clear();
  grads_.resize(nodes_.size());
  grad_buffer(loss.id)(0, 0) = T{1};

  for (std::size_t id = loss.id + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!node.requires_grad || grads_[id].empty()) continue;
    const Matrix<T>& g = grads_[id];
    switch (node.op) {
      case Op::kLeaf:
      case Op::kConstant:
        break;
      case Op::kMatmul: {
        if (nodes_[node.in0].requires_grad) {
          accumulate(node.in0, matmul_bt(g, values_[node.in1]));
        }
        if (nodes_[node.in1].requires_grad) {
          accumulate(node.in1, matmul_at(values_[node.in0], g));
        }
        break;
      }
      case Op::kSpmm: {
        if (nodes_[node.in0].requires_grad) {
          accumulate(node.in0, node.adj->spmm_backward(g));
        }
        break;
      }
      case Op::kRelu: {
        if (nodes_[node.in0].requires_grad) {
          const Matrix<T>& x = values_[node.in0];
          Matrix<T>& gx = grad_buffer(node.in0);
          for (std::size_t i = 0; i < x.size(); ++i) {
            if (x.values()[i] > T{0}) gx.values()[i] += g.values()[i];
          }
        }
        break;
      }
      case Op::kDropout: {
        if (nodes_[node.in0].requires_grad) {
          Matrix<T>& gx = grad_buffer(node.in0);
          for (std::size_t i = 0; i < g.size(); ++i) {
            gx.values()[i] += g.values()[i] * node.aux.values()[i];
          }
        }
        break;
      }
      case Op::kAdd: {
        if (nodes_[node.in0].requires_grad) accumulate(node.in0, g);
        if (nodes_[node.in1].requires_grad) accumulate(node.in1, g);
        break;
      }
      case Op::kSub: {
        if (nodes_[node.in0].requires_grad) accumulate(node.in0, g);
        if (nodes_[node.in1].requires_grad) {
          Matrix<T>& gb = grad_buffer(node.in1);
          for (std::size_t i = 0; i < g.size(); ++i) {
            gb.values()[i] -= g.values()[i];
          }
        }
        break;
      }
      case Op::kHadamard: {
        if (nodes_[node.in0].requires_grad) {
          Matrix<T>& ga = grad_buffer(node.in0);
          const Matrix<T>& vb = values_[node.in1];
          for (std::size_t i = 0; i < g.size(); ++i) {
            ga.values()[i] += g.values()[i] * vb.values()[i];
          }
        }
        if (nodes_[node.in1].requires_grad) {
          Matrix<T>& gb = grad_buffer(node.in1);
          const Matrix<T>& va = values_[node.in0];
          for (std::size_t i = 0; i < g.size(); ++i) {
            gb.values()[i] += g.values()[i] * va.values()[i];
          }
        }
        break;
      }
      case Op::kScale: {
        if (nodes_[node.in0].requires_grad) {
          Matrix<T>& gx = grad_buffer(node.in0);
          for (std::size_t i = 0; i < g.size(); ++i) {
            gx.values()[i] += node.scalar * g.values()[i];
          }
        }
        break;
      }
      case Op::kConcatCols: {
        const Matrix<T>& va = values_[node.in0];
        const Matrix<T>& vb = values_[node.in1];
        if (nodes_[node.in0].requires_grad) {
          Matrix<T>& ga = grad_buffer(node.in0);
          for (std::size_t i = 0; i < va.rows(); ++i) {
            const T* grow = g.data() + i * g.cols();
            T* arow = ga.data() + i * va.cols();
            for (std::size_t j = 0; j < va.cols(); ++j) arow[j] += grow[j];
          }
        }
        if (nodes_[node.in1].requires_grad) {
          Matrix<T>& gb = grad_buffer(node.in1);
          for (std::size_t i = 0; i < vb.rows(); ++i) {
            const T* grow = g.data() + i * g.cols() + va.cols();
            T* brow = gb.data() + i * vb.cols();
            for (std::size_t j = 0; j < vb.cols(); ++j) brow[j] += grow[j];
          }
        }
        break;
      }
      case Op::kConcatRows: {
        const Matrix<T>& va = values_[node.in0];
        if (nodes_[node.in0].requires_grad) {
          Matrix<T>& ga = grad_buffer(node.in0);
          for (std::size_t i = 0; i < va.size(); ++i) {
            ga.values()[i] += g.values()[i];
          }
        }
        if (nodes_[node.in1].requires_grad) {
          Matrix<T>& gb = grad_buffer(node.in1);
          for (std::size_t i = 0; i < gb.size(); ++i) {
            gb.values()[i] += g.values()[va.size() + i];
          }
        }
        break;
      }
      case Op::kSliceRows: {
        if (nodes_[node.in0].requires_grad) {
          Matrix<T>& gx = grad_buffer(node.in0);
          const std::size_t cols = gx.cols();
          for (std::size_t i = 0; i < g.rows(); ++i) {
            const T* grow = g.data() + i * cols;
            T* xrow = gx.data() + (node.meta + i) * cols;
            for (std::size_t j = 0; j < cols; ++j) xrow[j] += grow[j];
          }
        }
        break;
      }
      case Op::kGatherRows: {
        if (nodes_[node.in0].requires_grad) {
          Matrix<T>& gx = grad_buffer(node.in0);
          const std::size_t cols = gx.cols();
          for (std::size_t i = 0; i < node.indices.size(); ++i) {
            const T* grow = g.data() + i * cols;
            T* xrow = gx.data() + node.indices[i] * cols;
            for (std::size_t j = 0; j < cols; ++j) xrow[j] += grow[j];
          }
        }
        break;
      }
      case Op::kSum: {
        if (nodes_[node.in0].requires_grad) {
          const T gs = g(0, 0);
          Matrix<T>& gx = grad_buffer(node.in0);
          for (T& v : gx.values()) v += gs;
        }
        break;
      }
      case Op::kBceLogitsMean: {
        if (nodes_[node.in0].requires_grad) {
          const T gs = g(0, 0);
          const Matrix<T>& z = values_[node.in0];
          Matrix<T>& gz = grad_buffer(node.in0);
          const T inv_count = T{1} / static_cast<T>(z.size());
          for (std::size_t i = 0; i < z.size(); ++i) {
            const T zi = z.values()[i];
            // Stable sigmoid.
            const T s = zi >= T{0}
                            ? T{1} / (T{1} + std::exp(-zi))
                            : std::exp(zi) / (T{1} + std::exp(zi));
            gz.values()[i] += gs * (s - node.aux.values()[i]) * inv_count;
          }
        }
        break;
      }
    }
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace upgnn
