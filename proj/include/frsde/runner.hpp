#pragma once

#include "frsde/config.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace frsde {

struct RunOptions {
    std::optional<std::string> out_dir;  // overrides output_dir from the config
    std::optional<std::uint64_t> seed;   // overrides master_seed
    int threads = 0;                     // 0: FRSDE_THREADS, then all cores
    bool dump_operator = false;          // eig: also write operator.csv
    std::ostream* log = nullptr;
};

struct RunResult {
    std::string out_dir;
    std::vector<std::string> files;  // relative to out_dir, MANIFEST.txt last
    nlohmann::json report;
};

enum ExitCode { kExitOk = 0, kExitRuntime = 1, kExitConfig = 2 };

/// Runs one experiment and writes report.json, the kind-specific CSVs and
/// MANIFEST.txt. On failure every file written so far is removed and the
/// exception is rethrown.
RunResult run_experiment(ExperimentConfig cfg, const RunOptions& opts = {});

/// Loads the config, runs it and reports errors on `err`; returns an ExitCode.
int run(ExperimentKind kind, const std::string& config_path, const RunOptions& opts, std::ostream& err);

/// The version block of report.json.
nlohmann::json version_info();

} // namespace frsde
