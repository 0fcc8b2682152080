#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spme/domain.hpp"
#include "spme/graph.hpp"
#include "spme/noise.hpp"

namespace spme {

/// Guard slope added to Lipschitz graphs run with lambda = 0.
inline constexpr double kLipschitzGuard = 1e-8;

/// The single-valued, strictly increasing flux map
///   gamma(r) = psi_lambda(r) + lambda r   (lambda > 0)
///   gamma(r) = psi(r) + 1e-8 r            (lambda = 0, Lipschitz psi only)
/// with its inverse and the convex primitive used by the inner solver.
class RegularizedFlux {
public:
    RegularizedFlux(MonotoneGraph graph, double lambda);

    double lambda() const noexcept { return lambda_; }
    const MonotoneGraph& graph() const noexcept { return graph_; }

    double operator()(double r) const;
    double inverse(double w) const;
    /// r = gamma^{-1}(w) and dr/dw.
    void inverse_with_slope(double w, double& r, double& slope) const;
    /// Lipschitz constant of gamma^{-1}.
    double inverse_lipschitz() const noexcept;
    /// Gamma(r) = j_lambda(r) + lambda r^2 / 2, the primitive of gamma with Gamma(0) = 0.
    double primitive(double r) const;
    /// Convex conjugate Gamma*(w) = w r - Gamma(r), r = gamma^{-1}(w).
    double conjugate(double w) const;

private:
    MonotoneGraph graph_;
    double lambda_;
    double slope_guard_;  // lambda, or the guard for lambda = 0
    double inner_mu_;     // resolvent parameter of the inverse
};

enum class InnerMethod { newton, fixed_point };

struct SolverConfig {
    double dt = 1e-4;
    double T = 0.1;
    double lambda = 1e-3;
    double nu = 0.0;
    double inner_tol = 1e-10;
    int inner_budget = 10000;
    /// Stride of recorded observables and (optional) field snapshots.
    int save_every = 1;
    bool snapshots = false;
    bool positivity_clip = false;
    /// Relative positivity tolerance theta_clip: min X >= -theta_clip max(1, |x0|_inf).
    double positivity_tol = 1e-8;
    /// Keyed Brownian draws aggregated per step (for coupling time-step ladders).
    int noise_substeps = 1;
    InnerMethod inner_method = InnerMethod::newton;

    std::int64_t step_count() const;
};

/// Checks the cross-field rules on a solver configuration; throws ConsistencyError.
void validate(const SolverConfig& config, const MonotoneGraph& graph, const Grid& grid);

struct InnerSolveInfo {
    int iterations = 0;
    int linear_iterations = 0;
    double residual = 0.0;
    double target = 0.0;
};

/// Backward-Euler drift solve u + dt (nu - Delta) gamma(u) = b on one grid.
///
/// The default method is Newton on the flux w = gamma(u): it solves
/// gamma^{-1}(w) + dt (nu - Delta) w = b, whose Jacobian diag(d gamma^{-1}/dw)
/// + dt (nu - Delta) is symmetric positive definite, with Jacobi-preconditioned
/// CG for the linear systems and an Armijo backtracking on the convex
/// functional whose gradient is that equation. The fixed-point method is the
/// relaxed flux iteration with c = Lip(gamma^{-1}).
///
/// Convergence is declared when |u + dt (nu - Delta) gamma(u) - b|_{-1,max(nu,1)}
/// <= tol max(|b|_{-1,max(nu,1)}, 1e-30); otherwise NonConvergence.
class DriftSolver {
public:
    DriftSolver(GridPtr grid, RegularizedFlux flux, double dt, double nu, double tol, int budget,
                InnerMethod method = InnerMethod::newton);

    /// `u` receives the solution.
    InnerSolveInfo solve(std::span<const double> b, std::vector<double>& u) const;

    const RegularizedFlux& flux() const noexcept { return flux_; }
    double dt() const noexcept { return dt_; }
    double nu() const noexcept { return nu_; }
    const GridPtr& grid() const noexcept { return grid_; }

    /// |u + dt (nu - Delta) gamma(u) - b|_{-1,max(nu,1)}.
    double residual_norm(std::span<const double> u, std::span<const double> b) const;

private:
    InnerSolveInfo solve_newton(std::span<const double> b, std::vector<double>& u) const;
    InnerSolveInfo solve_fixed_point(std::span<const double> b, std::vector<double>& u) const;

    GridPtr grid_;
    RegularizedFlux flux_;
    double dt_;
    double nu_;
    double tol_;
    int budget_;
    InnerMethod method_;
    std::vector<double> symbol_a_;         // nu + |xi|^2
    std::vector<double> symbol_residual_;  // 1 / (max(nu, 1) + |xi|^2)
    double mean_symbol_a_ = 0.0;
};

/// One backward-Euler drift step as a free function.
Field implicit_drift_solve(const Field& b, double dt, double lambda, double nu, const MonotoneGraph& graph,
                           double tol, InnerSolveInfo* info = nullptr, InnerMethod method = InnerMethod::newton);

struct ObservableRecord {
    std::int64_t step = 0;
    double t = 0.0;
    double hminus1 = 0.0;     ///< ||X||_{-1} (mean-free part on periodic boxes without zero-mode shift)
    double hminus1_nu = 0.0;  ///< |X|_{-1,nu}; equals hminus1 when nu = 0
    double l2 = 0.0;
    double lmp1 = 0.0;        ///< |X|_{m+1}
    double mass = 0.0;
    double min = 0.0;
    double max = 0.0;
    int inner_iters = 0;

    bool operator==(const ObservableRecord&) const = default;
};

struct PathKeys {
    std::uint64_t seed_base = 0;
    std::uint64_t path_index = 0;
    int noise_substeps = 1;
};

struct Trajectory {
    std::vector<ObservableRecord> records;
    std::vector<std::pair<double, Field>> snapshots;
    Field terminal;
    PathKeys keys;
    double lp_exponent = 2.0;  ///< the p of the lmp1 column
    bool failed = false;
    std::string failure_kind;
    std::string failure;
    int clipped_steps = 0;
    /// Running max of |X|_2^2 over every step (not only recorded ones).
    double sup_l2_sq = 0.0;

    std::vector<double> times() const;
    std::vector<double> hminus1_series() const;
};

/// ||x||_{-1}; on periodic boxes without zero-mode shift the mean is removed first.
double observed_hminus1(const Grid& grid, std::span<const double> x);

/// Observables of one state.
ObservableRecord observe(const Field& x, double nu, double p, std::int64_t step, double t, int inner_iters);

/// Called with every record as soon as it is produced.
using RecordSink = std::function<void(const ObservableRecord&)>;

/// Path integrator for the regularized equation
///   dX + (nu - Delta)(psi_lambda(X) + lambda X) dt = X dW
/// with drift-implicit Euler-Maruyama steps.
class SpdeSolver {
public:
    SpdeSolver(GridPtr grid, MonotoneGraph graph, SolverConfig config, NoiseSpec noise);

    const SolverConfig& config() const noexcept { return config_; }
    const NoiseSpec& noise() const noexcept { return noise_; }
    const MonotoneGraph& graph() const noexcept { return graph_; }
    const GridPtr& grid() const noexcept { return grid_; }
    double lp_exponent() const noexcept { return lp_exponent_; }

    /// X_{n+1} from X_n with the increments keyed by (path, n).
    Field step(const Field& x, std::uint64_t path_index, std::int64_t n, InnerSolveInfo* info = nullptr) const;
    /// Raw-buffer variant used by the path loops.
    InnerSolveInfo step_in_place(std::vector<double>& x, std::uint64_t path_index, std::int64_t n) const;

    Trajectory run_path(const Field& x0, std::uint64_t path_index, const RecordSink& sink = {}) const;

    /// The rescaled path X = e^W Y for spatially constant noise: the random PDE for Y
    /// is stepped as Z + dt' (nu - Delta) gamma(Z) = e^{dW} X_n / (1 + dt kappa),
    /// dt' = dt / (1 + dt kappa), kappa = 1/2 sum (mu_j c_j)^2, Z = X_{n+1}.
    Trajectory run_rescaled(const Field& x0, std::uint64_t path_index, const RecordSink& sink = {}) const;
    InnerSolveInfo rescaled_step_in_place(std::vector<double>& x, std::uint64_t path_index, std::int64_t n) const;

private:
    template <class Stepper>
    Trajectory integrate(const Field& x0, std::uint64_t path_index, const RecordSink& sink, Stepper&& stepper) const;

    GridPtr grid_;
    MonotoneGraph graph_;
    SolverConfig config_;
    NoiseSpec noise_;
    NoiseOperator noise_op_;
    DriftSolver drift_;
    std::optional<DriftSolver> rescaled_drift_;
    double kappa_ = 0.0;
    double lp_exponent_ = 2.0;
};

Trajectory run_path(const Field& x0, const MonotoneGraph& graph, const SolverConfig& config, const NoiseSpec& noise,
                    std::uint64_t path_index);
Trajectory run_deterministic(const Field& x0, const MonotoneGraph& graph, const SolverConfig& config);
/// Throws RescalingInapplicable if any active mode is not spatially constant.
Trajectory run_rescaled(const Field& x0, const MonotoneGraph& graph, const SolverConfig& config,
                        const NoiseSpec& scalar_noise, std::uint64_t path_index);

struct DistanceSample {
    double t;
    double distance;  ///< ||X_direct - X_rescaled||_{-1}
};

/// Runs the direct and rescaled schemes in lockstep on shared increments and
/// returns the H^{-1} distance after every step.
std::vector<DistanceSample> rescaled_distance_series(const Field& x0, const MonotoneGraph& graph,
                                                     const SolverConfig& config, const NoiseSpec& scalar_noise,
                                                     std::uint64_t path_index);

}  // namespace spme
