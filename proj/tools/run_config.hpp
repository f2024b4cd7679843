#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "upgnn/acquisition.hpp"
#include "upgnn/experiment.hpp"
#include "upgnn/model.hpp"
#include "upgnn/synthetic.hpp"

namespace upgnn::cli {

struct DataPaths {
  std::string edges;
  std::string features;
  std::string labels;
};

// Everything a run needs, from one config file plus flag overrides.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out = "out";
  std::size_t workers = 1;
  std::optional<DataPaths> data;
  SyntheticConfig synth;
  ModelConfig model;
  bool model_seed_set = false;  // model.seed given explicitly
  ModelSpecKind model_spec = ModelSpecKind::kUmgnet;
  std::size_t folds = 5;
  std::vector<std::uint64_t> eval_seeds{0, 1, 2, 3, 4};
  ActiveConfig active;
};

// Parse and strictly validate a JSON config: unknown keys anywhere are
// rejected, as are values of the wrong type or range.
RunConfig load_run_config(const std::string& path);

// Push the top-level seed into every component that was not explicitly
// seeded, so one seed reproduces the whole run.
void finalize_seeds(RunConfig& cfg);

}  // namespace upgnn::cli
