#include "spme/observables.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spme/errors.hpp"
#include "spme/stats.hpp"

namespace spme {

namespace {

void require_fast_diffusion(double m, const char* who) {
    if (!(m > 0.0 && m < 1.0)) throw DomainError(std::string(who) + ": requires 0 < m < 1");
}

}  // namespace

std::optional<double> extinction_time(const Trajectory& traj, double theta) {
    if (traj.records.empty()) return std::nullopt;
    const double level = theta * traj.records.front().hminus1;
    for (const auto& r : traj.records)
        if (r.hminus1 <= level) return r.t;
    return std::nullopt;
}

ExtinctionReport extinction_report(const Trajectory& traj, double theta, const BoundParams& params,
                                   bool fast_diffusion, std::span<const double> report_times) {
    ExtinctionReport rep;
    rep.threshold = theta;
    rep.params = params;
    rep.threshold_crossing_only = !fast_diffusion;
    rep.tau = extinction_time(traj, theta);
    if (!traj.records.empty()) rep.initial_norm = traj.records.front().hminus1;
    if (rep.tau) {
        double mx = 0.0;
        for (const auto& r : traj.records)
            if (r.t >= *rep.tau) mx = std::max(mx, r.hminus1);
        rep.post_tau_max = rep.initial_norm > 0.0 ? mx / rep.initial_norm : 0.0;
    }
    if (fast_diffusion && params.m > 0.0 && params.m < 1.0) {
        for (double t : report_times)
            if (t > 0.0)
                rep.bound_curve.emplace_back(
                    t, extinction_prob_bound(rep.initial_norm, t, params.rho, params.gamma, params.m, params.cstar));
    }
    for (double th : {1e-4, 1e-5, 1e-6, 1e-7, 1e-8}) rep.sensitivity.emplace_back(th, extinction_time(traj, th));
    return rep;
}

double deterministic_extinction_bound(double x0_norm, double rho, double gamma, double m) {
    require_fast_diffusion(m, "deterministic_extinction_bound");
    return std::pow(x0_norm, 1.0 - m) / (rho * (1.0 - m) * std::pow(gamma, m + 1.0));
}

double extinction_prob_bound(double x0_norm, double t, double rho, double gamma, double m, double cstar) {
    require_fast_diffusion(m, "extinction_prob_bound");
    if (!(t > 0.0)) throw DomainError("extinction_prob_bound: t must be > 0");
    if (cstar < 0.0) throw DomainError("extinction_prob_bound: C* must be >= 0");
    const double xp = std::pow(x0_norm, 1.0 - m);
    const double rg = rho * std::pow(gamma, m + 1.0);
    if (cstar == 0.0) return 1.0 - xp / (rg * (1.0 - m) * t);
    return 1.0 - xp * cstar / (rg * -std::expm1(-cstar * (1.0 - m) * t));
}

double extinction_prob_bound_from_proof(double x0_norm, double t, double rho, double gamma, double m, double cstar) {
    require_fast_diffusion(m, "extinction_prob_bound_from_proof");
    if (!(t > 0.0)) throw DomainError("extinction_prob_bound_from_proof: t must be > 0");
    const double rhs = std::pow(x0_norm, 1.0 - m) / (rho * (1.0 - m) * std::pow(gamma, m + 1.0));
    const double a = cstar * (1.0 - m);
    const double weight = a == 0.0 ? t : -std::expm1(-a * t) / a;
    return 1.0 - rhs / weight;
}

double extinction_prob_limit(double x0_norm, double rho, double gamma, double m, double cstar) {
    require_fast_diffusion(m, "extinction_prob_limit");
    return 1.0 - std::pow(x0_norm, 1.0 - m) * cstar / (rho * std::pow(gamma, m + 1.0));
}

SmallnessConditions smallness_conditions(double x0_norm, double rho, double gamma, double m, double cstar) {
    require_fast_diffusion(m, "smallness_conditions");
    SmallnessConditions s;
    s.threshold = cstar > 0.0 ? rho * std::pow(gamma, m + 1.0) / cstar : std::numeric_limits<double>::infinity();
    s.norm_condition = x0_norm < s.threshold;
    s.power_condition = std::pow(x0_norm, 1.0 - m) < s.threshold;
    return s;
}

std::vector<double> supermartingale_statistic(const Trajectory& traj, double cstar, double m) {
    require_fast_diffusion(m, "supermartingale_statistic");
    std::vector<double> out;
    out.reserve(traj.records.size());
    for (const auto& r : traj.records)
        out.push_back(std::exp(-cstar * (1.0 - m) * r.t) * std::pow(r.hminus1, 1.0 - m));
    return out;
}

MomentBoundReport moment_bound_check(std::span<const double> sup_l2_sq, double x0_l2_sq, double c_inf_sq, double T) {
    MomentBoundReport rep;
    const auto e = mean_and_se(sup_l2_sq);
    rep.n = e.n;
    rep.estimate = e.mean;
    rep.se = e.se;
    rep.ucl = ucl95(e);
    rep.bound = 2.0 * x0_l2_sq * std::exp(3.0 * c_inf_sq * T);
    rep.ratio = rep.bound > 0.0 ? rep.estimate / rep.bound : 0.0;
    rep.pass = rep.ucl <= rep.bound;
    return rep;
}

std::vector<double> mass_series(const Trajectory& traj) {
    std::vector<double> out;
    for (const auto& r : traj.records) out.push_back(r.mass);
    return out;
}

std::vector<double> lp_series(const Trajectory& traj, double p) {
    std::vector<double> out;
    if (p == 2.0) {
        for (const auto& r : traj.records) out.push_back(r.l2);
    } else if (p == traj.lp_exponent) {
        for (const auto& r : traj.records) out.push_back(r.lmp1);
    } else {
        throw DomainError("lp_series: only p = 2 and p = m + 1 are recorded");
    }
    return out;
}

}  // namespace spme
