#pragma once

// Experiment dispatch: maps an ExperimentConfig onto the module machinery,
// writes plot-ready CSV into cfg.out_dir, and returns the process exit code
// (0 pass, 1 parameter error, 2 acceptance-check failure, 3 resource abort).

#include <string>
#include <vector>

#include "curlflow/config.hpp"

namespace curlflow {

int run_config(const ExperimentConfig& cfg);
std::vector<std::string> experiment_names();

}  // namespace curlflow
