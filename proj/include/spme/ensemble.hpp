#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spme/observables.hpp"
#include "spme/solver.hpp"
#include "spme/stats.hpp"

namespace spme {

/// Number of worker threads: `requested` if positive, else SPME_THREADS, else hardware concurrency.
int resolve_threads(int requested);

/// Runs fn(i) for i in [0, n) on `threads` workers; work is claimed through an atomic index.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

struct EnsembleOptions {
    std::size_t n_paths = 1;
    int threads = 0;
    std::uint64_t first_path = 0;
    double theta_ext = kDefaultExtinctionThreshold;
    /// Keep full per-path trajectories (needed for C* estimation and JSONL output).
    bool keep_trajectories = true;
    double failure_budget = 0.01;
};

struct PathSummary {
    std::uint64_t path_index = 0;
    bool failed = false;
    std::string failure_kind;
    std::string failure;
    std::optional<double> tau;
    double initial_hminus1 = 0.0;
    double terminal_hminus1 = 0.0;
    double sup_l2_sq = 0.0;
    int clipped_steps = 0;
};

struct CdfPoint {
    double t = 0.0;
    double p = 0.0;
    double se = 0.0;
    ProportionInterval ci;
};

struct EnsembleResult {
    std::size_t n_paths = 0;
    std::size_t failures = 0;
    bool budget_exceeded = false;
    int threads = 1;
    double wall_seconds = 0.0;
    std::uint64_t seed_base = 0;
    int noise_substeps = 1;
    double theta_ext = kDefaultExtinctionThreshold;
    std::vector<double> times;  ///< recorded time grid shared by all paths
    std::vector<PathSummary> paths;
    std::vector<Trajectory> trajectories;  ///< in path order, empty unless kept
    std::vector<CdfPoint> cdf;

    std::size_t completed() const noexcept { return n_paths - failures; }
};

EnsembleResult run_ensemble(const Field& x0, const MonotoneGraph& graph, const SolverConfig& config,
                            const NoiseSpec& noise, const EnsembleOptions& options);

struct ProbabilityEstimate {
    double p = 0.0;
    double se = 0.0;
    ProportionInterval ci;
    std::size_t n = 0;
};

/// Fraction of completed paths with tau <= t, with its Wilson 95% interval.
ProbabilityEstimate estimate_extinction_prob(const EnsembleResult& ens, double t);

struct SupermartingaleCheck {
    bool pass = true;
    std::size_t worst_step = 0;
    double worst_excess = 0.0;  ///< max over steps of mean(D) - 2 se(D)
};

/// Whether the ensemble mean of M_{C*} is nonincreasing within two standard errors at every step.
SupermartingaleCheck supermartingale_check(const EnsembleResult& ens, double cstar, double m);

/// Smallest C* >= 0 passing supermartingale_check, by bisection on [0, cap]; ReachedCap if cap fails.
double estimate_cstar(const EnsembleResult& ens, double m, double cap, double rel_tol = 1e-6);

enum class LadderParameter { lambda, nu, dt };

std::string to_string(LadderParameter p);

struct CoupledPair {
    double a = 0.0;
    double b = 0.0;
    MeanEstimate error_sq;  ///< E sup_t ||X_a - X_b||_{-1}^2 with shared noise
    std::optional<MeanEstimate> independent_error_sq;  ///< same with independent noise on level b
};

struct ConvergenceStudy {
    LadderParameter parameter = LadderParameter::lambda;
    std::vector<double> values;
    std::vector<CoupledPair> pairs;
    /// Fitted exponent of the coupled error squared against a + b.
    double exponent = 0.0;
    double r2 = 0.0;
    /// For dt ladders: self-convergence order = exponent / 2.
    double order = 0.0;
    std::size_t n_paths = 0;
    std::size_t failures = 0;
};

struct ConvergenceOptions {
    std::size_t n_paths = 16;
    int threads = 0;
    bool independent_check = false;
    /// Path index offset for the independent-noise partner level.
    std::uint64_t independent_offset = 1u << 30;
};

/// Coupled ladder study. Levels share Brownian paths (common random numbers);
/// dt ladders must be integer multiples of the finest step and are compared at
/// the coarsest step's times.
ConvergenceStudy coupled_convergence_study(const Field& x0, const MonotoneGraph& graph, const SolverConfig& base,
                                           const NoiseSpec& noise, LadderParameter parameter,
                                           std::vector<double> values, const ConvergenceOptions& options);

struct RescaledLevel {
    double dt = 0.0;
    MeanEstimate sup_distance;  ///< E sup_t ||X_direct - X_rescaled||_{-1}
};

struct RescaledStudy {
    std::vector<RescaledLevel> levels;
    double order = 0.0;  ///< fitted slope of log E sup distance against log dt
    double r2 = 0.0;
};

/// Direct against rescaled scheme on a dt ladder with shared increments.
RescaledStudy rescaled_convergence_study(const Field& x0, const MonotoneGraph& graph, const SolverConfig& base,
                                         const NoiseSpec& scalar_noise, std::vector<double> dts,
                                         const ConvergenceOptions& options);

}  // namespace spme
