#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "spme/domain.hpp"
#include "spme/ensemble.hpp"
#include "spme/graph.hpp"
#include "spme/noise.hpp"
#include "spme/solver.hpp"

namespace spme {

/// Smooth compactly supported bump height * exp(1 - 1/(1 - s^2)), s = |x - center| / radius,
/// plus a constant floor.
struct BumpInitial {
    std::vector<double> center;
    double radius = 0.25;
    double height = 1.0;
    double floor = 0.0;
};

/// amplitude * sin or cos(2 pi n . x / L) + offset on periodic boxes; on Dirichlet
/// boxes the product of sin(pi n_i x_i / L).
struct ModeInitial {
    std::vector<int> wavevector;
    double amplitude = 1.0;
    std::string shape = "sin";
    double offset = 0.0;
};

/// Field read from a stored snapshot (`<path>.f64` with its sidecar), relative to the config file.
struct FileInitial {
    std::string path;
};

using InitialSpec = std::variant<BumpInitial, ModeInitial, FileInitial>;

enum class CstarPolicy { c_infinity_sq, estimate, fixed };

std::string to_string(CstarPolicy p);

struct AnalysisConfig {
    double theta_ext = kDefaultExtinctionThreshold;
    CstarPolicy cstar_policy = CstarPolicy::c_infinity_sq;
    double cstar_value = 0.0;
    /// Report times for bound curves; empty means every recorded time.
    std::vector<double> report_grid;
    int gamma_starts = 8;
    std::uint64_t gamma_seed = 20240601;
    std::size_t paths = 1;
    int threads = 0;
    LadderParameter ladder = LadderParameter::lambda;
    std::vector<double> ladder_values;
    std::vector<double> rescaled_dts;
    bool independent_check = false;
    bool snapshot_terminal = true;
};

struct RunConfig {
    DomainSpec domain;
    MonotoneGraph graph = MonotoneGraph::linear(1.0);
    NoiseSpec noise;
    SolverConfig solver;
    InitialSpec initial = BumpInitial{};
    AnalysisConfig analysis;
    std::string output_dir = "spme_out";
    /// Directory of the config file, for resolving relative paths.
    std::filesystem::path base_dir = ".";
};

/// Parses and validates a configuration; throws SchemaError or ConsistencyError.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

/// Fully resolved configuration with every default materialized.
nlohmann::json to_json(const RunConfig& c);

/// FNV-1a 64-bit hash of the resolved configuration, as 16 hex digits.
std::string config_hash(const RunConfig& c);

Field make_initial(const RunConfig& c, const GridPtr& grid);

}  // namespace spme
