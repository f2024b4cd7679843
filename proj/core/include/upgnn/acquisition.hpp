#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "upgnn/dataset.hpp"
#include "upgnn/kmeans.hpp"
#include "upgnn/model.hpp"

namespace upgnn {

// Relative weights of the three acquisition signals.
struct AcquisitionWeights {
  double q = 0.2;  // uncertainty
  double d = 0.1;  // degree
  double m = 0.7;  // centroid distance
};

// Min-max normalized signals and their weighted combination.
struct AcquisitionScores {
  std::vector<double> q_norm;
  std::vector<double> d_norm;
  std::vector<double> m_norm;
  std::vector<double> combined;
};

// Normalize each raw vector to [0,1] (a constant vector normalizes to 0)
// and combine: s_u = w_q·Q̃_u + w_d·D̃_u + w_m·M̃_u. Lengths must agree.
AcquisitionScores compute_scores(const std::vector<double>& q,
                                 const std::vector<double>& d,
                                 const std::vector<double>& m,
                                 const AcquisitionWeights& weights);

// One selected batch plus a slack report for every constraint.
struct SelectionResult {
  std::vector<std::size_t> selected;  // ascending
  double objective = 0.0;             // Σ score over selected
  std::size_t budget = 0;
  std::vector<std::size_t> cluster_counts;
  std::vector<std::size_t> cluster_floors;
  std::size_t extra_pool = 0;  // budget − Σ floors, shared across clusters
  std::size_t extra_used = 0;
  std::size_t treated_count = 0;
  std::size_t treated_cap = 0;  // ⌈b/2⌉

  bool feasible() const;  // every constraint holds
};

// Rank candidates by score descending (ties to the lower index) and take
// each one whose addition keeps the batch feasible: |S| ≤ b, per-cluster
// count ≤ floor + what remains of the shared extra pool, treated ≤ ⌈b/2⌉.
// Users in `labeled` are not candidates.
SelectionResult greedy_select(const std::vector<double>& scores,
                              const std::vector<int>& treatment,
                              const std::vector<std::size_t>& clusters,
                              std::size_t k, std::size_t b,
                              const std::vector<char>& labeled);

enum class Policy { kGreedy, kEpsilonGreedy, kRandom };

Policy parse_policy(const std::string& name);
std::string policy_name(Policy policy);

// Settings for one active-learning run.
struct ActiveConfig {
  double initial_fraction = 0.04;
  double target_fraction = 0.2;
  std::size_t rounds = 5;
  Policy policy = Policy::kGreedy;
  double epsilon = 0.5;        // epsilon-greedy coin
  std::size_t clusters = 50;   // clamped to the user count
  std::size_t mc_passes = 30;
  AcquisitionWeights weights;
  // Reward proximity to the centroid instead of distance (the diversity
  // signal read as prototypicality). Off by default.
  bool invert_m = false;
  std::uint64_t seed = 0;
};

// What one round selected and how much slack each constraint had.
struct RoundRecord {
  std::size_t round = 0;
  std::string policy_used;  // "greedy" or "random" (after any coin flip)
  std::vector<std::size_t> batch;
  SelectionResult selection;
  std::size_t labeled_after = 0;
};

struct ActiveRunResult {
  UpliftModel model;            // trained on the final labeled set
  UpliftPrediction prediction;  // deterministic prediction with that model
  std::vector<RoundRecord> history;
  std::vector<std::size_t> labeled;  // final S, ascending
  ClusterModel clustering;
};

// The full loop: cluster the (normalized) user features once, pick a seed
// set by diversity alone (uncertainty enters as zero — no model exists yet),
// then alternate training, MC-dropout scoring of the unlabeled pool, and
// constrained selection for `rounds` batches. Only users carrying a label in
// `ds` are candidates; their outcomes count as revealed once selected.
ActiveRunResult active_learning_run(const Dataset& ds, const ModelConfig& mcfg,
                                    const ActiveConfig& acfg);

}  // namespace upgnn
