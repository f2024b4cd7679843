#include "upgnn/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "upgnn/errors.hpp"
#include "upgnn/graph.hpp"
#include "upgnn/rng.hpp"

namespace upgnn {

namespace {

std::vector<double> min_max(const std::vector<double>& v) {
  std::vector<double> out(v.size(), 0.0);
  if (v.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it;
  const double span = *hi_it - lo;
  if (span <= 0.0) return out;  // constant vector contributes nothing
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - lo) / span;
  return out;
}

// ⌈fraction · count⌉ with a guard against binary-representation spillover
// (0.2 · 500 must round to 100, not 101).
std::size_t ceil_scaled(double value) {
  const double c = std::ceil(value - 1e-9);
  return c <= 0.0 ? 0 : static_cast<std::size_t>(c);
}

}  // namespace

AcquisitionScores compute_scores(const std::vector<double>& q,
                                 const std::vector<double>& d,
                                 const std::vector<double>& m,
                                 const AcquisitionWeights& weights) {
  if (d.size() != q.size() || m.size() != q.size()) {
    throw ShapeError("scores: signal lengths differ");
  }
  if (weights.q < 0.0 || weights.d < 0.0 || weights.m < 0.0) {
    throw ParameterError("scores: weights must be non-negative");
  }
  AcquisitionScores out;
  out.q_norm = min_max(q);
  out.d_norm = min_max(d);
  out.m_norm = min_max(m);
  out.combined.resize(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    out.combined[i] = weights.q * out.q_norm[i] + weights.d * out.d_norm[i] +
                      weights.m * out.m_norm[i];
  }
  return out;
}

bool SelectionResult::feasible() const {
  if (selected.size() > budget) return false;
  if (treated_count > treated_cap) return false;
  std::size_t overflow = 0;
  for (std::size_t j = 0; j < cluster_counts.size(); ++j) {
    if (cluster_counts[j] > cluster_floors[j]) {
      overflow += cluster_counts[j] - cluster_floors[j];
    }
  }
  return overflow <= extra_pool;
}

SelectionResult greedy_select(const std::vector<double>& scores,
                              const std::vector<int>& treatment,
                              const std::vector<std::size_t>& clusters,
                              std::size_t k, std::size_t b,
                              const std::vector<char>& labeled) {
  const std::size_t n = scores.size();
  if (treatment.size() != n || clusters.size() != n || labeled.size() != n) {
    throw ShapeError("select: vector lengths differ");
  }

  SelectionResult out;
  out.budget = b;
  out.cluster_floors = cluster_floors(clusters, k, b);
  out.cluster_counts.assign(k, 0);
  out.extra_pool =
      b - std::accumulate(out.cluster_floors.begin(), out.cluster_floors.end(),
                          std::size_t{0});
  out.treated_cap = (b + 1) / 2;

  std::vector<std::size_t> order;
  order.reserve(n);
  for (std::size_t u = 0; u < n; ++u) {
    if (!labeled[u]) order.push_back(u);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
    if (scores[a] != scores[c]) return scores[a] > scores[c];
    return a < c;
  });

  for (const std::size_t u : order) {
    if (out.selected.size() == b) break;
    const std::size_t j = clusters[u];
    const bool needs_extra = out.cluster_counts[j] >= out.cluster_floors[j];
    if (needs_extra && out.extra_used >= out.extra_pool) continue;
    if (treatment[u] && out.treated_count >= out.treated_cap) continue;
    if (needs_extra) ++out.extra_used;
    ++out.cluster_counts[j];
    if (treatment[u]) ++out.treated_count;
    out.selected.push_back(u);
    out.objective += scores[u];
  }
  std::sort(out.selected.begin(), out.selected.end());
  return out;
}

Policy parse_policy(const std::string& name) {
  if (name == "greedy") return Policy::kGreedy;
  if (name == "eg") return Policy::kEpsilonGreedy;
  if (name == "random") return Policy::kRandom;
  throw ConfigError("unknown policy '" + name + "'");
}

std::string policy_name(Policy policy) {
  switch (policy) {
    case Policy::kGreedy: return "greedy";
    case Policy::kEpsilonGreedy: return "eg";
    case Policy::kRandom: return "random";
  }
  throw ConfigError("unknown policy");
}

ActiveRunResult active_learning_run(const Dataset& ds, const ModelConfig& mcfg,
                                    const ActiveConfig& acfg) {
  mcfg.validate();
  if (!(acfg.initial_fraction > 0.0)) {
    throw ParameterError("active: initial fraction must be positive");
  }
  if (acfg.target_fraction > 1.0) {
    throw ParameterError("active: target fraction exceeds 1");
  }
  if (acfg.initial_fraction > acfg.target_fraction) {
    throw ParameterError("active: initial fraction exceeds the target");
  }
  if (acfg.rounds == 0) throw ParameterError("active: rounds must be positive");
  if (acfg.clusters == 0) {
    throw ParameterError("active: clusters must be positive");
  }
  if (acfg.mc_passes == 0) {
    throw ParameterError("active: mc passes must be positive");
  }
  if (!(acfg.epsilon >= 0.0) || acfg.epsilon > 1.0) {
    throw ParameterError("active: epsilon must lie in [0, 1]");
  }

  const std::size_t n = ds.n();
  // Users carrying a label are the oracle pool; everyone else can never be
  // selected because there is nothing to reveal.
  std::vector<char> excluded(n, 1);
  std::size_t pool = 0;
  for (std::size_t u = 0; u < n; ++u) {
    if (ds.label_mask[u]) {
      excluded[u] = 0;
      ++pool;
    }
  }
  if (pool == 0) throw ParameterError("active: dataset has no labeled users");

  const std::size_t seed_budget =
      ceil_scaled(acfg.initial_fraction * static_cast<double>(pool));
  const std::size_t target_count =
      ceil_scaled(acfg.target_fraction * static_cast<double>(pool));
  const std::size_t per_round = ceil_scaled(
      (acfg.target_fraction - acfg.initial_fraction) *
      static_cast<double>(pool) / static_cast<double>(acfg.rounds));

  ActiveRunResult out;
  const std::size_t k = std::min(acfg.clusters, n);
  out.clustering = kmeans(normalize_features(ds.x_u), k, acfg.seed);

  const std::vector<double> d_raw = ds.graph.user_degrees();

  std::vector<std::size_t> labeled;

  const auto run_round = [&](std::size_t round, std::size_t b,
                             const std::vector<double>& q_raw) {
    std::vector<std::size_t> cand;
    for (std::size_t u = 0; u < n; ++u) {
      if (!excluded[u]) cand.push_back(u);
    }
    // Normalize over the candidate pool only; already-revealed users must
    // not stretch the score ranges.
    std::vector<double> qc(cand.size()), dc(cand.size()), mc(cand.size());
    for (std::size_t i = 0; i < cand.size(); ++i) {
      qc[i] = q_raw[cand[i]];
      dc[i] = d_raw[cand[i]];
      mc[i] = acfg.invert_m ? -out.clustering.m[cand[i]]
                            : out.clustering.m[cand[i]];
    }
    const AcquisitionScores sc = compute_scores(qc, dc, mc, acfg.weights);
    std::vector<double> real_scores(n, 0.0);
    for (std::size_t i = 0; i < cand.size(); ++i) {
      real_scores[cand[i]] = sc.combined[i];
    }

    Rng policy_rng = Rng(acfg.seed).sub("policy", round);
    bool random_round = acfg.policy == Policy::kRandom;
    if (acfg.policy == Policy::kEpsilonGreedy) {
      random_round = policy_rng.bernoulli(acfg.epsilon);
    }
    std::vector<double> rank_scores = real_scores;
    if (random_round) {
      for (const std::size_t u : cand) rank_scores[u] = policy_rng.uniform();
    }

    SelectionResult sel =
        greedy_select(rank_scores, ds.treatment, out.clustering.assignment, k,
                      b, excluded);
    // The reported objective always uses the acquisition scores, whatever
    // ranking the policy actually walked.
    sel.objective = 0.0;
    for (const std::size_t u : sel.selected) sel.objective += real_scores[u];

    for (const std::size_t u : sel.selected) {
      excluded[u] = 1;
      labeled.push_back(u);
    }
    std::sort(labeled.begin(), labeled.end());

    RoundRecord rec;
    rec.round = round;
    rec.policy_used = random_round ? "random" : "greedy";
    rec.batch = sel.selected;
    rec.selection = std::move(sel);
    rec.labeled_after = labeled.size();
    out.history.push_back(std::move(rec));
  };

  // Round 0: no model yet, so uncertainty is identically zero and the seed
  // set is chosen by diversity and degree alone.
  run_round(0, seed_budget, std::vector<double>(n, 0.0));

  for (std::size_t round = 1; round <= acfg.rounds; ++round) {
    if (labeled.size() >= target_count) break;
    const std::size_t b =
        std::min(per_round, target_count - labeled.size());
    if (b == 0) break;

    ModelConfig round_cfg = mcfg;
    round_cfg.seed = mcfg.seed ^ derive_seed(acfg.seed, "round-model", round);
    const TrainResult tr = train(ds, labeled, round_cfg);
    const UpliftPrediction unc = mc_dropout_predict(
        tr.model, ds, acfg.mc_passes,
        derive_seed(acfg.seed, "uncertainty", round));
    run_round(round, b, unc.q);
  }

  ModelConfig final_cfg = mcfg;
  final_cfg.seed = mcfg.seed ^ derive_seed(acfg.seed, "final-model");
  TrainResult final_tr = train(ds, labeled, final_cfg);
  out.model = std::move(final_tr.model);
  out.prediction = predict(out.model, ds);
  out.labeled = std::move(labeled);
  return out;
}

}  // namespace upgnn
