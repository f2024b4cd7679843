#pragma once

#include <cstddef>
#include <vector>

namespace upgnn {

// Average treatment effect over the subset: mean(Y | T=1) − mean(Y | T=0).
// A subset with fewer than one user per arm has no ATE → UndefinedAteError.
double ate(const std::vector<double>& y, const std::vector<int>& t,
           const std::vector<std::size_t>& subset);

// Real ATE of the top ⌈frac·|eval_set|⌉ users ranked by predicted uplift
// descending (ties to the lower index). frac must lie in (0, 1]; frac = 1
// reduces to ate(eval_set). Single-arm top sets → UndefinedAteError.
double uplift_at_k(const std::vector<double>& tau_hat,
                   const std::vector<double>& y, const std::vector<int>& t,
                   const std::vector<std::size_t>& eval_set, double frac);

}  // namespace upgnn
