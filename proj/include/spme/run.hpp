#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spme/config.hpp"
#include "spme/solver.hpp"

namespace spme {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_numeric = 3, exit_check = 4 };

struct RunOptions {
    std::string subcommand;
    std::filesystem::path config_path;
    std::optional<std::filesystem::path> out;
    std::optional<std::size_t> paths;
    std::optional<int> threads;
    std::optional<std::uint64_t> seed;
    bool check = false;
};

/// Runs one subcommand and writes its artifacts. Never throws; returns the exit code
/// and prints diagnostics to `err`.
int run_command(const RunOptions& options, std::ostream& out, std::ostream& err);

/// JSONL form of one observable record and its inverse.
nlohmann::json record_json(const ObservableRecord& r);
ObservableRecord record_from_json(const nlohmann::json& j);

std::vector<ObservableRecord> read_trajectory_jsonl(const std::filesystem::path& path);

/// Summary of a single path (`path` or `det`) computed from its records and the config only,
/// so that `report` reproduces it from stored output.
nlohmann::json summarize_path(const RunConfig& config, const std::vector<ObservableRecord>& records,
                              const std::string& mode, const std::string& failure = {});

}  // namespace spme
