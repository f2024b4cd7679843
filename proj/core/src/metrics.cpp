#include "upgnn/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "upgnn/errors.hpp"

namespace upgnn {

double ate(const std::vector<double>& y, const std::vector<int>& t,
           const std::vector<std::size_t>& subset) {
  if (y.size() != t.size()) throw ShapeError("ate: vector lengths differ");
  double sum_t = 0.0, sum_c = 0.0;
  std::size_t n_t = 0, n_c = 0;
  for (const std::size_t u : subset) {
    if (u >= y.size()) throw ParameterError("ate: subset index out of range");
    if (t[u]) {
      sum_t += y[u];
      ++n_t;
    } else {
      sum_c += y[u];
      ++n_c;
    }
  }
  if (n_t == 0 || n_c == 0) {
    throw UndefinedAteError("ate: subset lacks a treatment arm");
  }
  return sum_t / static_cast<double>(n_t) - sum_c / static_cast<double>(n_c);
}

double uplift_at_k(const std::vector<double>& tau_hat,
                   const std::vector<double>& y, const std::vector<int>& t,
                   const std::vector<std::size_t>& eval_set, double frac) {
  if (tau_hat.size() != y.size() || t.size() != y.size()) {
    throw ShapeError("uplift_at_k: vector lengths differ");
  }
  if (eval_set.empty()) {
    throw ParameterError("uplift_at_k: evaluation set is empty");
  }
  if (!(frac > 0.0) || frac > 1.0) {
    throw ParameterError("uplift_at_k: frac must lie in (0, 1]");
  }
  std::vector<std::size_t> order = eval_set;
  for (const std::size_t u : order) {
    if (u >= y.size()) {
      throw ParameterError("uplift_at_k: evaluation index out of range");
    }
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (tau_hat[a] != tau_hat[b]) return tau_hat[a] > tau_hat[b];
    return a < b;
  });
  // ⌈frac·|set|⌉, guarding against representation spillover (0.4·5 is
  // slightly above 2 in binary and must still give 2).
  const double raw = frac * static_cast<double>(order.size());
  std::size_t top = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  top = std::min(std::max<std::size_t>(top, 1), order.size());
  order.resize(top);
  // Hand the top set to ate() in index order so the result depends only on
  // which users were picked, not on how the ranking tie-broke equal scores.
  std::sort(order.begin(), order.end());
  return ate(y, t, order);
}

}  // namespace upgnn
