#pragma once

#include <cstddef>
#include <vector>

#include "upgnn/dataset.hpp"

namespace upgnn {

enum class BaselineKind { kS, kT };

// Ridge-regularized linear uplift baseline. The S kind fits one regressor
// with treatment appended as a feature; the T kind fits one regressor per
// arm. Coefficient layout: feature weights, then (S only) the treatment
// weight, then the unpenalized intercept.
struct BaselineModel {
  BaselineKind kind = BaselineKind::kS;
  std::vector<double> coef_joint;    // S kind
  std::vector<double> coef_treated;  // T kind
  std::vector<double> coef_control;  // T kind
  double lambda = 1e-2;
};

// Least squares with an L2 penalty on everything but the intercept. The T
// kind needs at least one labeled user per arm; S needs a non-empty set.
BaselineModel fit_baseline(const Dataset& ds,
                           const std::vector<std::size_t>& labeled,
                           BaselineKind kind, double lambda = 1e-2);

// τ̂ per requested user: f(x,1) − f(x,0) for S, f_t(x) − f_c(x) for T.
std::vector<double> predict_baseline(const BaselineModel& model,
                                     const Dataset& ds,
                                     const std::vector<std::size_t>& users);

}  // namespace upgnn
