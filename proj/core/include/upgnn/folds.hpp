#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace upgnn {

// Inverted k-fold split: each fold's member list is a TRAINING set (about
// 1/k of the given users); the complement within `users` evaluates it.
struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::vector<std::size_t>> fold_members;

  // Users outside fold `f` (the evaluation set for that fold).
  std::vector<std::size_t> complement(std::size_t f) const;
};

// Partition `users` into k near-equal folds at random. Requires
// 2 <= k <= users.size(). Members within a fold come back sorted.
FoldPlan split_folds(const std::vector<std::size_t>& users, std::size_t k,
                     std::uint64_t seed);

}  // namespace upgnn
