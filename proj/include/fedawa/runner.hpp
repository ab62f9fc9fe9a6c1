#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "fedawa/config.hpp"

namespace fedawa {

/// Command-line overrides applied on top of the config file.
struct CliOverrides {
    std::optional<std::int64_t> seed;
    std::optional<std::string> strategy;
};

/// Runs the experiment and writes manifest.json, records.jsonl, weights.jsonl,
/// summary.csv and checkpoint.bin into out_dir. Exit codes: 0 success,
/// 2 invalid config, 1 runtime failure.
int cmd_run(const std::string& config_path, const std::string& out_dir, const CliOverrides& overrides,
            std::ostream& err);

/// Writes the partition manifest (per-client sizes and histograms) only.
int cmd_partition(const std::string& config_path, const std::string& out_dir, const CliOverrides& overrides,
                  std::ostream& err);

/// Recomputes one analysis probe from a finished run directory:
/// distance_matrix, ideal_vector, or weight_trajectory.
int cmd_analyze(const std::string& run_dir, const std::string& probe, std::ostream& err);

/// Writes content to path via a temporary file and an atomic rename.
void write_file_atomic(const std::string& path, const std::string& content);

} // namespace fedawa
