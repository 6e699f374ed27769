#pragma once

#include <vector>

#include "cli/config.hpp"
#include "cli/report.hpp"

namespace kacflow::cli {

struct RunResult {
    std::vector<ReportRow> rows;
    bool all_passed = true;
};

/// Checks every set and quantity against the flow, then runs the experiment.
/// Configuration problems throw before any sampling starts.
RunResult run_experiment(const ExperimentConfig& cfg, bool record_wall_time = false);

/// Seed for the k-th estimate of an experiment rooted at `seed`.
std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t k);

} // namespace kacflow::cli
