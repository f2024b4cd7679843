#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "upgnn/dataset.hpp"
#include "upgnn/model.hpp"

namespace upgnn {

enum class ModelSpecKind { kUmgnet, kUmgnetDr, kBaselineS, kBaselineT };

// Parse/format the CLI spelling ("umgnet" | "umgnet-dr" | "baseline-S" |
// "baseline-T").
ModelSpecKind parse_model_spec(const std::string& name);
std::string model_spec_name(ModelSpecKind kind);

// One (seed, fold) evaluation. A metric whose top set lost a treatment arm
// is missing rather than zero.
struct FoldRecord {
  std::uint64_t seed = 0;
  std::size_t fold = 0;
  std::optional<double> up40;
  std::optional<double> up20;
  std::optional<double> test_ate;
};

struct MetricAggregate {
  double mean = 0.0;
  double stddev = 0.0;  // population std over present values
  std::size_t count = 0;
  std::size_t missing = 0;
};

struct MetricsReport {
  std::string model_spec;
  std::size_t folds = 0;
  std::vector<std::uint64_t> seeds;
  std::string config_hash;     // canonical settings fingerprint
  std::string fold_plan_hash;  // fingerprint of every fold's member list
  std::vector<FoldRecord> records;
  MetricAggregate up40, up20, test_ate;
};

// The inverted k-fold protocol: for every seed and fold, train on the
// fold's members (about 1/k of the labeled users), predict uplift on the
// in-universe complement, and log up@40, up@20, and the complement's ATE.
// `workers` bounds the number of concurrent (seed, fold) runs; results are
// identical for any worker count.
MetricsReport run_experiment(const Dataset& ds, ModelSpecKind spec,
                             std::size_t k_folds,
                             const std::vector<std::uint64_t>& seeds,
                             const ModelConfig& mcfg, std::size_t workers = 1);

// Line-delimited records: one JSON object per (seed, fold).
std::string report_records_jsonl(const MetricsReport& report);

// The summary object: metadata plus the three aggregates.
std::string report_summary_json(const MetricsReport& report);

// Fixed-width table for terminal output.
std::string report_table(const MetricsReport& report);

}  // namespace upgnn
