#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "spme/solver.hpp"

namespace spme {

inline constexpr double kDefaultExtinctionThreshold = 1e-6;

/// First recorded time with ||X(t)||_{-1} <= theta ||X(0)||_{-1}.
std::optional<double> extinction_time(const Trajectory& traj, double theta = kDefaultExtinctionThreshold);

struct BoundParams {
    double rho = 1.0;
    double gamma = 1.0;
    double m = 0.5;
    double cstar = 0.0;
};

struct ExtinctionReport {
    std::optional<double> tau;
    double threshold = kDefaultExtinctionThreshold;
    double initial_norm = 0.0;
    double post_tau_max = 0.0;  ///< max ||X||_{-1} at and after tau, relative to the initial norm
    /// Set when the graph is not fast diffusion: tau is then only a threshold crossing.
    bool threshold_crossing_only = false;
    BoundParams params;
    std::vector<std::pair<double, double>> bound_curve;  ///< (t, lower bound of P[tau <= t])
    std::vector<std::pair<double, std::optional<double>>> sensitivity;  ///< (theta, tau)
};

ExtinctionReport extinction_report(const Trajectory& traj, double theta, const BoundParams& params,
                                   bool fast_diffusion, std::span<const double> report_times = {});

/// ||x||^{1-m} / (rho (1-m) gamma^{m+1}).
double deterministic_extinction_bound(double x0_norm, double rho, double gamma, double m);

/// 1 - ||x||^{1-m} C* / (rho gamma^{m+1} (1 - e^{-C*(1-m)t})); the C* -> 0 limit is used for C* = 0.
double extinction_prob_bound(double x0_norm, double t, double rho, double gamma, double m, double cstar);
/// Same quantity evaluated from the proof's last display
/// P(tau > t)(1 - e^{-C*(1-m)t}) / (C*(1-m)) <= ||x||^{1-m} / (rho (1-m) gamma^{m+1}).
double extinction_prob_bound_from_proof(double x0_norm, double t, double rho, double gamma, double m, double cstar);
/// t -> infinity limit 1 - ||x||^{1-m} C* / (rho gamma^{m+1}).
double extinction_prob_limit(double x0_norm, double rho, double gamma, double m, double cstar);

struct SmallnessConditions {
    double threshold = 0.0;        ///< rho gamma^{m+1} / C* (infinite for C* = 0)
    bool norm_condition = false;   ///< ||x|| < threshold
    bool power_condition = false;  ///< ||x||^{1-m} < threshold, positivity of the limit
};

SmallnessConditions smallness_conditions(double x0_norm, double rho, double gamma, double m, double cstar);

/// M(t_n) = e^{-C*(1-m)t_n} ||X(t_n)||_{-1}^{1-m}.
std::vector<double> supermartingale_statistic(const Trajectory& traj, double cstar, double m);

struct MomentBoundReport {
    std::size_t n = 0;
    double estimate = 0.0;  ///< mean over paths of sup_t |X(t)|_2^2
    double se = 0.0;
    double ucl = 0.0;  ///< one-sided 95% upper confidence limit
    double bound = 0.0;  ///< 2 |x|_2^2 e^{3 C_inf^2 T}
    double ratio = 0.0;  ///< estimate / bound
    bool pass = false;
};

MomentBoundReport moment_bound_check(std::span<const double> sup_l2_sq, double x0_l2_sq, double c_inf_sq, double T);

std::vector<double> mass_series(const Trajectory& traj);
/// |X|_p per record; p must be 2 or the trajectory's recorded exponent.
std::vector<double> lp_series(const Trajectory& traj, double p);

}  // namespace spme
