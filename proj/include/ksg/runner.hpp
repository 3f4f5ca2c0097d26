#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "ksg/config.hpp"
#include "ksg/energetics.hpp"

namespace ksg {

constexpr const char* kToolVersion = "1.0.0";

/// Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 a run-time check failed.
struct RunResult {
    int exit_code = 0;
    std::vector<std::pair<std::string, double>> metrics;  // headline numbers, also written to meta.txt
    std::vector<std::string> notes;                       // human-readable summary lines
};

WeightField build_weight(const ExperimentConfig& cfg, const GridPtr& grid);

/// Runs one mode pipeline into `out` (results.csv, fields/, meta.txt).
/// Errors are caught and turned into exit codes with a diagnostic in the notes.
RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out, int jobs, std::ostream& log);

}  // namespace ksg
