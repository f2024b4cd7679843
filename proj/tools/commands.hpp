#pragma once

#include "run_config.hpp"

namespace upgnn::cli {

int cmd_synth(const RunConfig& cfg);
int cmd_train(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg);
int cmd_active(const RunConfig& cfg);

}  // namespace upgnn::cli
