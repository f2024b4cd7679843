#include "upgnn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "upgnn/errors.hpp"
#include "upgnn/rng.hpp"

namespace upgnn {

namespace {

// "u000".."u499": width comes from the largest index.
std::vector<std::string> make_ids(char prefix, std::size_t count) {
  const std::size_t width =
      std::to_string(count == 0 ? 0 : count - 1).size();
  std::vector<std::string> ids(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::string digits = std::to_string(i);
    ids[i] = prefix + std::string(width - digits.size(), '0') + digits;
  }
  return ids;
}

}  // namespace

SyntheticResult generate_synthetic(const SyntheticConfig& cfg,
                                   std::size_t sim) {
  if (cfg.n == 0) throw ParameterError("synthetic: n must be positive");
  if (cfg.m == 0) throw ParameterError("synthetic: m must be positive");
  if (cfg.d == 0) throw ParameterError("synthetic: d must be positive");
  if (!(cfg.density > 0.0) || cfg.density > 1.0) {
    throw ParameterError("synthetic: density must lie in (0, 1]");
  }
  if (cfg.simulations == 0) {
    throw ParameterError("synthetic: simulations must be positive");
  }
  if (sim >= cfg.simulations) {
    throw ParameterError("synthetic: simulation index out of range");
  }

  Rng rng = Rng(cfg.seed).sub("data", sim);

  Matrix<double> x_u(cfg.n, cfg.d);
  for (double& v : x_u.values()) v = rng.normal();
  Matrix<double> x_p(cfg.m, cfg.d);
  for (double& v : x_p.values()) v = rng.normal();

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t u = 0; u < cfg.n; ++u) {
    for (std::size_t p = 0; p < cfg.m; ++p) {
      if (rng.bernoulli(cfg.density)) edges.emplace_back(u, p);
    }
  }

  std::vector<double> w_s(cfg.d);
  for (double& v : w_s) v = rng.uniform(10.0, 20.0);
  const double w_t = cfg.w_t ? *cfg.w_t : rng.uniform(10.0, 20.0);

  std::vector<double> noise(cfg.n);
  for (double& v : noise) v = rng.normal(10.0, 5.0);

  // Balanced assignment: a random half of the users is treated.
  std::vector<std::size_t> order(cfg.n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<int> treatment(cfg.n, 0);
  for (std::size_t i = 0; i < cfg.n / 2; ++i) treatment[order[i]] = 1;

  std::vector<double> outcome(cfg.n, 0.0);
  std::vector<double> true_effects(cfg.n, 0.0);
  for (std::size_t u = 0; u < cfg.n; ++u) {
    double z = cfg.outcome_shift + noise[u];
    for (std::size_t j = 0; j < cfg.d; ++j) z += w_s[j] * x_u(u, j);
    const double y0 = std::max(0.0, z);
    const double y1 = std::max(0.0, z + w_t);
    outcome[u] = treatment[u] ? y1 : y0;
    true_effects[u] = y1 - y0;
  }

  Dataset ds;
  ds.graph = BipartiteGraph(cfg.n, cfg.m, edges);
  ds.x_u = std::move(x_u);
  ds.x_p = std::move(x_p);
  ds.treatment = std::move(treatment);
  ds.outcome = std::move(outcome);
  ds.label_mask.assign(cfg.n, 1);
  ds.user_ids = make_ids('u', cfg.n);
  ds.product_ids = make_ids('p', cfg.m);

  return SyntheticResult{std::move(ds), std::move(true_effects),
                         std::move(w_s), w_t};
}

}  // namespace upgnn
