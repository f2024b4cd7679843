#include "upgnn/folds.hpp"

#include <algorithm>

#include "upgnn/errors.hpp"
#include "upgnn/rng.hpp"

namespace upgnn {

std::vector<std::size_t> FoldPlan::complement(std::size_t f) const {
  if (f >= fold_members.size()) {
    throw ParameterError("fold index out of range");
  }
  std::vector<std::size_t> out;
  for (std::size_t g = 0; g < fold_members.size(); ++g) {
    if (g == f) continue;
    out.insert(out.end(), fold_members[g].begin(), fold_members[g].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

FoldPlan split_folds(const std::vector<std::size_t>& users, std::size_t k,
                     std::uint64_t seed) {
  if (k < 2) throw ParameterError("folds: k must be at least 2");
  if (k > users.size()) {
    throw ParameterError("folds: k exceeds the number of users");
  }

  std::vector<std::size_t> order = users;
  Rng rng = Rng(seed).sub("folds");
  rng.shuffle(order);

  FoldPlan plan;
  plan.k = k;
  plan.fold_members.resize(k);
  const std::size_t base = order.size() / k;
  const std::size_t extra = order.size() % k;
  std::size_t at = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t take = base + (f < extra ? 1 : 0);
    plan.fold_members[f].assign(order.begin() + at, order.begin() + at + take);
    std::sort(plan.fold_members[f].begin(), plan.fold_members[f].end());
    at += take;
  }
  return plan;
}

}  // namespace upgnn
