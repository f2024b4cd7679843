#include "upgnn/optimizer.hpp"

#include <cmath>

#include "upgnn/errors.hpp"

namespace upgnn {

void AdamState::ensure_shape(const Matrix<float>& param) {
  if (m.rows() != param.rows() || m.cols() != param.cols()) {
    if (!m.empty() || step != 0) {
      throw ShapeError("AdamState: moment shape does not match parameter");
    }
    m = Matrix<float>(param.rows(), param.cols());
    v = Matrix<float>(param.rows(), param.cols());
  }
}

AdamW::AdamW(double learning_rate, double weight_decay, double beta1,
             double beta2, double epsilon)
    : lr_(learning_rate),
      wd_(weight_decay),
      beta1_(beta1),
      beta2_(beta2),
      eps_(epsilon) {}

void AdamW::step(Matrix<float>& param, const Matrix<float>& grad,
                 AdamState& state) const {
  if (!param.same_shape(grad)) {
    throw ShapeError("AdamW::step: gradient shape does not match parameter");
  }
  state.ensure_shape(param);
  state.step += 1;

  const double b1 = beta1_;
  const double b2 = beta2_;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = static_cast<double>(grad.values()[i]);
    double m = static_cast<double>(state.m.values()[i]);
    double v = static_cast<double>(state.v.values()[i]);
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    state.m.values()[i] = static_cast<float>(m);
    state.v.values()[i] = static_cast<float>(v);
    const double m_hat = m / bias1;
    const double v_hat = v / bias2;
    const double p = static_cast<double>(param.values()[i]);
    const double update = m_hat / (std::sqrt(v_hat) + eps_) + wd_ * p;
    param.values()[i] = static_cast<float>(p - lr_ * update);
  }
}

}  // namespace upgnn
