#pragma once

#include <cstdint>

#include "upgnn/matrix.hpp"

namespace upgnn {

// Per-parameter accumulator state for AdamW.
struct AdamState {
  Matrix<float> m;  // first moment
  Matrix<float> v;  // second moment
  std::int64_t step = 0;

  // Lazily shape the moment buffers against their parameter.
  void ensure_shape(const Matrix<float>& param);
};

// Adaptive moment estimation with decoupled weight decay. The decay is
// applied directly to the parameter, not through the gradient, so it
// regularizes independently of the adaptive scaling.
class AdamW {
 public:
  AdamW(double learning_rate, double weight_decay, double beta1 = 0.9,
        double beta2 = 0.999, double epsilon = 1e-8);

  // One update: param <- param - lr * (m_hat / (sqrt(v_hat) + eps) + wd * param).
  void step(Matrix<float>& param, const Matrix<float>& grad,
            AdamState& state) const;

  double learning_rate() const { return lr_; }
  double weight_decay() const { return wd_; }

 private:
  double lr_;
  double wd_;
  double beta1_;
  double beta2_;
  double eps_;
};

}  // namespace upgnn
