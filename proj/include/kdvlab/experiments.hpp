#pragma once

// Experiment runner: builds initial data, runs the configured experiment over a
// worker pool, and writes manifest.json plus reports into the output directory.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdvlab/config.hpp"

namespace kdvlab {

class NumericalFailure : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunOptions {
    std::filesystem::path out;  // empty: config.output
    std::size_t jobs = 1;
    bool force = false;         // overwrite a directory stamped with another digest
};

struct RunResult {
    std::filesystem::path out;
    std::string digest;
    std::vector<std::string> files;  // relative to out, sorted
    nlohmann::json summary;          // the main report
};

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigInvalid = 2;
inline constexpr int kExitNumericalFailure = 3;
inline constexpr int kExitIoError = 4;

// Throws ConfigInvalid, NumericalFailure (after writing a FAILED marker and a manifest
// with status "failed") or IoError.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

// Initial datum of ensemble member `member` (0 for single runs).
Field initial_field(const ExperimentConfig& config, std::uint64_t member = 0);

// Runs task(0..n-1) on up to `jobs` threads. Exceptions are rethrown after all tasks
// finish, lowest index first.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& task);

// SHA-256 of each file under dir (relative path -> hex), for reproducibility checks.
std::map<std::string, std::string> directory_digests(const std::filesystem::path& dir);

// Sets the spdlog level from KDVLAB_LOG (trace, debug, info, warn, error, off; default warn)
// and routes logging to stderr.
void configure_logging();

}  // namespace kdvlab
