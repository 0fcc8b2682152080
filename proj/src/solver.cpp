#include "spme/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "spme/errors.hpp"

namespace spme {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

double observed_hminus1(const Grid& g, std::span<const double> x) {
    if (g.periodic() && !g.spec().zero_mode.shift) {
        double avg = 0.0;
        for (double v : x) avg += v;
        avg /= static_cast<double>(x.size());
        std::vector<double> y(x.begin(), x.end());
        for (auto& v : y) v -= avg;
        return std::sqrt(std::max(0.0, g.quadratic_form(y, g.inverse_laplacian_symbol())));
    }
    return std::sqrt(std::max(0.0, g.quadratic_form(x, g.inverse_laplacian_symbol())));
}

// ---------------------------------------------------------------------------
// RegularizedFlux

RegularizedFlux::RegularizedFlux(MonotoneGraph graph, double lambda) : graph_(std::move(graph)), lambda_(lambda) {
    if (lambda > 0.0) {
        slope_guard_ = lambda;
        inner_mu_ = (1.0 + lambda * lambda) / lambda;
    } else if (lambda == 0.0) {
        if (!graph_.is_lipschitz())
            throw DomainError("flux: lambda = 0 requires a Lipschitz graph (got " + graph_.kind_name() + ")");
        slope_guard_ = kLipschitzGuard;
        inner_mu_ = 1.0 / kLipschitzGuard;
    } else {
        throw DomainError("flux: lambda must be >= 0");
    }
}

double RegularizedFlux::operator()(double r) const {
    if (lambda_ > 0.0) return yosida(graph_, lambda_, r) + lambda_ * r;
    return eval_graph(graph_, r).lo + slope_guard_ * r;
}

void RegularizedFlux::inverse_with_slope(double w, double& r, double& slope) const {
    if (lambda_ > 0.0) {
        // r = p + lambda eta with p = J_mu(w / lambda), eta = (w - lambda p) / (1 + lambda^2)
        const double lam = lambda_;
        const double p = resolvent(graph_, inner_mu_, w / lam);
        const double gslope = graph_.slope(p);
        const double dp = std::isinf(gslope) ? 0.0 : 1.0 / (lam * (1.0 + inner_mu_ * gslope));
        const double denom = 1.0 + lam * lam;
        const double eta = (w - lam * p) / denom;
        r = p + lam * eta;
        slope = dp + lam * (1.0 - lam * dp) / denom;
        return;
    }
    // psi + guard id for Lipschitz graphs, inverted piecewise without forming w / guard
    const double guard = slope_guard_;
    std::visit(Overloaded{
                   [&](const LinearGraph& l) {
                       r = w / (l.a + guard);
                       slope = 1.0 / (l.a + guard);
                   },
                   [&](const PowerGraph& p) {
                       r = w / (p.rho + guard);
                       slope = 1.0 / (p.rho + guard);
                   },
                   [&](const TabulatedGraph& t) {
                       const auto n = t.r.size();
                       auto value = [&](std::size_t i) { return t.y[i] + guard * t.r[i]; };
                       std::size_t seg;
                       if (w <= value(0)) {
                           seg = 0;
                       } else if (w >= value(n - 1)) {
                           seg = n - 2;
                       } else {
                           std::size_t lo = 0, hi = n - 1;
                           while (hi - lo > 1) {
                               const auto mid = (lo + hi) / 2;
                               if (value(mid) <= w) lo = mid;
                               else hi = mid;
                           }
                           seg = lo;
                       }
                       const double k = (t.y[seg + 1] - t.y[seg]) / (t.r[seg + 1] - t.r[seg]) + guard;
                       r = t.r[seg] + (w - value(seg)) / k;
                       slope = 1.0 / k;
                   },
                   [&](const HeavisideGraph&) {
                       throw DomainError("flux: lambda = 0 is not available for the Heaviside graph");
                   },
               },
               graph_.kind());
}

double RegularizedFlux::inverse(double w) const {
    double r, s;
    inverse_with_slope(w, r, s);
    return r;
}

double RegularizedFlux::inverse_lipschitz() const noexcept { return 1.0 / slope_guard_; }

double RegularizedFlux::primitive(double r) const {
    if (lambda_ > 0.0) return moreau_envelope(graph_, lambda_, r) + 0.5 * lambda_ * r * r;
    return potential(graph_, r) + 0.5 * slope_guard_ * r * r;
}

double RegularizedFlux::conjugate(double w) const {
    const double r = inverse(w);
    return w * r - primitive(r);
}

// ---------------------------------------------------------------------------
// SolverConfig

std::int64_t SolverConfig::step_count() const { return static_cast<std::int64_t>(std::llround(T / dt)); }

void validate(const SolverConfig& c, const MonotoneGraph& graph, const Grid& grid) {
    if (!(c.dt > 0.0)) throw ConsistencyError("solver.dt", "solver.dt", "dt must be > 0");
    if (!(c.T > 0.0)) throw ConsistencyError("solver.T", "solver.T", "T must be > 0");
    if (c.dt > c.T) throw ConsistencyError("solver.dt", "solver.T", "dt must not exceed T");
    if (c.lambda < 0.0) throw ConsistencyError("solver.lambda", "solver.lambda", "lambda must be >= 0");
    if (c.lambda == 0.0 && !graph.is_lipschitz())
        throw ConsistencyError("solver.lambda", "graph.kind",
                               "lambda = 0 is only allowed with Lipschitz graphs, got " + graph.kind_name());
    if (c.nu < 0.0) throw ConsistencyError("solver.nu", "solver.nu", "nu must be >= 0");
    if (c.save_every < 1) throw ConsistencyError("solver.save_every", "solver.save_every", "save_every must be >= 1");
    if (!(c.inner_tol > 0.0)) throw ConsistencyError("solver.inner_tol", "solver.inner_tol", "must be > 0");
    if (c.inner_budget < 1) throw ConsistencyError("solver.inner_budget", "solver.inner_budget", "must be >= 1");
    if (c.noise_substeps < 1)
        throw ConsistencyError("solver.noise_substeps", "solver.noise_substeps", "must be >= 1");
    if (grid.periodic() && c.nu == 0.0 && grid.spec().zero_mode.shift)
        throw ConsistencyError("solver.nu", "domain.zero_mode", "nu = 0 on a periodic box uses the exact (-Delta)");
}

// ---------------------------------------------------------------------------
// DriftSolver

DriftSolver::DriftSolver(GridPtr grid, RegularizedFlux flux, double dt, double nu, double tol, int budget,
                         InnerMethod method)
    : grid_(std::move(grid)), flux_(std::move(flux)), dt_(dt), nu_(nu), tol_(tol), budget_(budget), method_(method) {
    const auto& xi = grid_->xi_sq();
    symbol_a_.resize(xi.size());
    symbol_residual_.resize(xi.size());
    const double nr = std::max(nu, 1.0);
    double wsum = 0.0, asum = 0.0;
    for (std::size_t m = 0; m < xi.size(); ++m) {
        symbol_a_[m] = nu + xi[m];
        symbol_residual_[m] = 1.0 / (nr + xi[m]);
        // r2c storage counts interior modes twice
        const double w = grid_->periodic() ? ((m == 0) ? 1.0 : 2.0) : 1.0;
        wsum += w;
        asum += w * symbol_a_[m];
    }
    mean_symbol_a_ = asum / wsum;
}

double DriftSolver::residual_norm(std::span<const double> u, std::span<const double> b) const {
    const auto n = u.size();
    std::vector<double> w(n), aw(n), g(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = flux_(u[i]);
    grid_->apply_symbol(w, aw, symbol_a_);
    for (std::size_t i = 0; i < n; ++i) g[i] = u[i] + dt_ * aw[i] - b[i];
    return std::sqrt(std::max(0.0, grid_->quadratic_form(g, symbol_residual_)));
}

InnerSolveInfo DriftSolver::solve(std::span<const double> b, std::vector<double>& u) const {
    return method_ == InnerMethod::newton ? solve_newton(b, u) : solve_fixed_point(b, u);
}

InnerSolveInfo DriftSolver::solve_newton(std::span<const double> b, std::vector<double>& u) const {
    const auto& g = *grid_;
    const std::size_t n = b.size();
    InnerSolveInfo info;
    const double bnorm = std::sqrt(std::max(0.0, g.quadratic_form(b, symbol_residual_)));
    info.target = tol_ * std::max(bnorm, 1e-30);
    u.assign(n, 0.0);
    if (bnorm == 0.0) return info;

    std::vector<double> w(n), r(n), e(n), aw(n), res(n);
    std::vector<double> w_trial(n), r_trial(n), e_trial(n), aw_trial(n), res_trial(n);
    std::vector<double> delta(n), cg_r(n), cg_z(n), cg_p(n), cg_ap(n), precond(n);

    auto evaluate = [&](const std::vector<double>& wv, std::vector<double>& rv, std::vector<double>& ev,
                        std::vector<double>& awv, std::vector<double>& gv) {
        for (std::size_t i = 0; i < n; ++i) flux_.inverse_with_slope(wv[i], rv[i], ev[i]);
        g.apply_symbol(wv, awv, symbol_a_);
        for (std::size_t i = 0; i < n; ++i) gv[i] = rv[i] + dt_ * awv[i] - b[i];
        return std::sqrt(std::max(0.0, g.quadratic_form(gv, symbol_residual_)));
    };
    // convex functional with gradient (per cell) equal to the residual
    auto merit = [&](const std::vector<double>& wv, const std::vector<double>& awv) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += flux_.conjugate(wv[i]) - b[i] * wv[i];
        return acc + 0.5 * dt_ * dot(awv, wv);
    };

    for (std::size_t i = 0; i < n; ++i) w[i] = flux_(b[i]);
    double rnorm = evaluate(w, r, e, aw, res);

    for (int it = 0;; ++it) {
        info.iterations = it;
        info.residual = rnorm;
        if (rnorm <= info.target) {
            u = r;
            return info;
        }
        if (it >= budget_) {
            std::ostringstream os;
            os << "drift solve: Newton budget " << budget_ << " exhausted, residual " << rnorm << " > target "
               << info.target;
            throw NonConvergence(os.str(), rnorm);
        }

        // (E + dt A) delta = -G by Jacobi-preconditioned CG
        const double forcing = std::clamp(rnorm / bnorm, 1e-14, 1e-2);
        for (std::size_t i = 0; i < n; ++i) {
            precond[i] = 1.0 / (e[i] + dt_ * mean_symbol_a_);
            cg_r[i] = -res[i];
            delta[i] = 0.0;
        }
        const double rhs_norm = std::sqrt(dot(cg_r, cg_r));
        for (std::size_t i = 0; i < n; ++i) cg_z[i] = precond[i] * cg_r[i];
        cg_p = cg_z;
        double rz = dot(cg_r, cg_z);
        const int cg_budget = static_cast<int>(std::max<std::size_t>(200, 4 * n));
        for (int k = 0; k < cg_budget; ++k) {
            g.apply_symbol(cg_p, cg_ap, symbol_a_);
            for (std::size_t i = 0; i < n; ++i) cg_ap[i] = e[i] * cg_p[i] + dt_ * cg_ap[i];
            const double pap = dot(cg_p, cg_ap);
            if (!(pap > 0.0)) break;
            const double alpha = rz / pap;
            for (std::size_t i = 0; i < n; ++i) {
                delta[i] += alpha * cg_p[i];
                cg_r[i] -= alpha * cg_ap[i];
            }
            ++info.linear_iterations;
            if (std::sqrt(dot(cg_r, cg_r)) <= forcing * rhs_norm) break;
            for (std::size_t i = 0; i < n; ++i) cg_z[i] = precond[i] * cg_r[i];
            const double rz_next = dot(cg_r, cg_z);
            const double beta = rz_next / rz;
            rz = rz_next;
            for (std::size_t i = 0; i < n; ++i) cg_p[i] = cg_z[i] + beta * cg_p[i];
        }

        // full step if it lowers the residual, Armijo backtracking on the merit otherwise
        for (std::size_t i = 0; i < n; ++i) w_trial[i] = w[i] + delta[i];
        double trial_norm = evaluate(w_trial, r_trial, e_trial, aw_trial, res_trial);
        if (!(trial_norm < rnorm)) {
            const double m0 = merit(w, aw);
            const double slope = dot(res, delta);
            double t = 1.0;
            while (true) {
                const double m1 = merit(w_trial, aw_trial);
                if (m1 <= m0 + 1e-4 * t * slope || t < 1e-12) break;
                t *= 0.5;
                for (std::size_t i = 0; i < n; ++i) w_trial[i] = w[i] + t * delta[i];
                trial_norm = evaluate(w_trial, r_trial, e_trial, aw_trial, res_trial);
            }
        }
        w.swap(w_trial);
        r.swap(r_trial);
        e.swap(e_trial);
        aw.swap(aw_trial);
        res.swap(res_trial);
        rnorm = trial_norm;
    }
}

InnerSolveInfo DriftSolver::solve_fixed_point(std::span<const double> b, std::vector<double>& u) const {
    const auto& g = *grid_;
    const std::size_t n = b.size();
    InnerSolveInfo info;
    const double bnorm = std::sqrt(std::max(0.0, g.quadratic_form(b, symbol_residual_)));
    info.target = tol_ * std::max(bnorm, 1e-30);
    u.assign(n, 0.0);
    if (bnorm == 0.0) return info;

    const double c = flux_.inverse_lipschitz();
    std::vector<double> relax(symbol_a_.size());
    for (std::size_t m = 0; m < relax.size(); ++m) relax[m] = 1.0 / (c + dt_ * symbol_a_[m]);

    std::vector<double> w(n), r(n), aw(n), res(n), rhs(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = flux_(b[i]);
    for (int it = 0;; ++it) {
        for (std::size_t i = 0; i < n; ++i) r[i] = flux_.inverse(w[i]);
        g.apply_symbol(w, aw, symbol_a_);
        for (std::size_t i = 0; i < n; ++i) res[i] = r[i] + dt_ * aw[i] - b[i];
        info.residual = std::sqrt(std::max(0.0, g.quadratic_form(res, symbol_residual_)));
        info.iterations = it;
        if (info.residual <= info.target) {
            u = r;
            return info;
        }
        if (it >= budget_) {
            std::ostringstream os;
            os << "drift solve: fixed-point budget " << budget_ << " exhausted, residual " << info.residual;
            throw NonConvergence(os.str(), info.residual);
        }
        for (std::size_t i = 0; i < n; ++i) rhs[i] = b[i] - r[i] + c * w[i];
        g.apply_symbol(rhs, w, relax);
    }
}

Field implicit_drift_solve(const Field& b, double dt, double lambda, double nu, const MonotoneGraph& graph, double tol,
                           InnerSolveInfo* info, InnerMethod method) {
    DriftSolver solver(b.grid(), RegularizedFlux(graph, lambda), dt, nu, tol, 10000, method);
    std::vector<double> u;
    auto i = solver.solve(b.values(), u);
    if (info) *info = i;
    return Field(b.grid(), std::move(u));
}

// ---------------------------------------------------------------------------
// Trajectory helpers

std::vector<double> Trajectory::times() const {
    std::vector<double> t;
    t.reserve(records.size());
    for (const auto& r : records) t.push_back(r.t);
    return t;
}

std::vector<double> Trajectory::hminus1_series() const {
    std::vector<double> v;
    v.reserve(records.size());
    for (const auto& r : records) v.push_back(r.hminus1);
    return v;
}

ObservableRecord observe(const Field& x, double nu, double p, std::int64_t step, double t, int inner_iters) {
    ObservableRecord rec;
    rec.step = step;
    rec.t = t;
    const auto& g = x.domain();
    rec.hminus1 = observed_hminus1(g, x.values());
    rec.hminus1_nu = nu > 0.0 ? hminus1_nu_norm(x, nu) : rec.hminus1;
    rec.l2 = lp_norm(x, 2.0);
    rec.lmp1 = lp_norm(x, p);
    rec.mass = mass(x);
    const auto [mn, mx] = std::minmax_element(x.data().begin(), x.data().end());
    rec.min = *mn;
    rec.max = *mx;
    rec.inner_iters = inner_iters;
    return rec;
}

// ---------------------------------------------------------------------------
// SpdeSolver

namespace {

double constant_noise_kappa(const NoiseSpec& noise) {
    double k = 0.0;
    for (const auto& m : noise.modes) k += std::pow(m.mu * m.amplitude, 2);
    return 0.5 * k;
}

}  // namespace

SpdeSolver::SpdeSolver(GridPtr grid, MonotoneGraph graph, SolverConfig config, NoiseSpec noise)
    : grid_(std::move(grid)),
      graph_(std::move(graph)),
      config_(config),
      noise_(std::move(noise)),
      noise_op_(noise_, grid_),
      drift_(grid_, RegularizedFlux(graph_, config.lambda), config.dt, config.nu, config.inner_tol,
             config.inner_budget, config.inner_method) {
    validate(config_, graph_, *grid_);
    if (noise_.spatially_constant()) {
        kappa_ = constant_noise_kappa(noise_);
        rescaled_drift_.emplace(grid_, RegularizedFlux(graph_, config.lambda), config.dt / (1.0 + config.dt * kappa_),
                                config.nu, config.inner_tol, config.inner_budget, config.inner_method);
    }
    const auto coercive = graph_.coercivity();
    lp_exponent_ = (coercive ? coercive->m : graph_.growth_exponent()) + 1.0;
}

InnerSolveInfo SpdeSolver::step_in_place(std::vector<double>& x, std::uint64_t path_index, std::int64_t n) const {
    std::vector<double> b(x);
    if (!noise_.silent()) {
        const auto inc = sample_increments(noise_, path_index, static_cast<std::uint64_t>(n), config_.dt,
                                           config_.noise_substeps);
        std::vector<double> dn(x.size());
        noise_op_.apply(x, inc, dn);
        for (std::size_t i = 0; i < b.size(); ++i) b[i] += dn[i];
    }
    auto info = drift_.solve(b, x);
    if (!all_finite(x)) throw NaNDetected("step " + std::to_string(n) + ": non-finite state after drift solve");
    return info;
}

InnerSolveInfo SpdeSolver::rescaled_step_in_place(std::vector<double>& x, std::uint64_t path_index,
                                                  std::int64_t n) const {
    if (!rescaled_drift_) throw RescalingInapplicable("rescaled step: noise has non-constant modes");
    double dw = 0.0;
    if (!noise_.silent()) {
        const auto inc = sample_increments(noise_, path_index, static_cast<std::uint64_t>(n), config_.dt,
                                           config_.noise_substeps);
        for (std::size_t k = 0; k < inc.size(); ++k) dw += noise_.modes[k].mu * noise_.modes[k].amplitude * inc[k];
    }
    const double factor = std::exp(dw) / (1.0 + config_.dt * kappa_);
    std::vector<double> b(x);
    for (auto& v : b) v *= factor;
    auto info = rescaled_drift_->solve(b, x);
    if (!all_finite(x)) throw NaNDetected("step " + std::to_string(n) + ": non-finite state after drift solve");
    return info;
}

Field SpdeSolver::step(const Field& x, std::uint64_t path_index, std::int64_t n, InnerSolveInfo* info) const {
    std::vector<double> v(x.data());
    auto i = step_in_place(v, path_index, n);
    if (info) *info = i;
    return Field(grid_, std::move(v));
}

template <class Stepper>
Trajectory SpdeSolver::integrate(const Field& x0, std::uint64_t path_index, const RecordSink& sink,
                                 Stepper&& stepper) const {
    Trajectory traj;
    traj.keys = {noise_.seed_base, path_index, config_.noise_substeps};
    traj.lp_exponent = lp_exponent_;

    std::vector<double> x(x0.data());
    const bool check_sign = std::all_of(x.begin(), x.end(), [](double v) { return v >= 0.0; });
    const double floor = -config_.positivity_tol * std::max(1.0, sup_norm(x0));
    const double nu = config_.nu;
    const auto steps = config_.step_count();

    traj.records.push_back(observe(x0, nu, lp_exponent_, 0, 0.0, 0));
    if (sink) sink(traj.records.back());
    traj.sup_l2_sq = traj.records.back().l2 * traj.records.back().l2;
    if (config_.snapshots) traj.snapshots.emplace_back(0.0, x0);

    for (std::int64_t n = 0; n < steps; ++n) {
        InnerSolveInfo info;
        try {
            info = stepper(x, path_index, n);
        } catch (const NonConvergence& e) {
            traj.failed = true;
            traj.failure_kind = "NonConvergence";
            traj.failure = e.what();
        } catch (const NaNDetected& e) {
            traj.failed = true;
            traj.failure_kind = "NaNDetected";
            traj.failure = e.what();
        }
        if (traj.failed) break;
        const double t = static_cast<double>(n + 1) * config_.dt;

        if (check_sign) {
            const auto it = std::min_element(x.begin(), x.end());
            if (*it < floor) {
                if (config_.positivity_clip) {
                    for (auto& v : x) v = std::max(v, 0.0);
                    ++traj.clipped_steps;
                } else {
                    std::ostringstream os;
                    os << "step " << (n + 1) << " t=" << t << ": min X = " << *it << " < " << floor
                       << " at grid index " << (it - x.begin());
                    traj.failed = true;
                    traj.failure_kind = "PositivityViolation";
                    traj.failure = os.str();
                    traj.terminal = Field(grid_, x);
                    return traj;
                }
            }
        }
        double l2sq = 0.0;
        for (double v : x) l2sq += v * v;
        traj.sup_l2_sq = std::max(traj.sup_l2_sq, l2sq * grid_->cell_volume());

        if ((n + 1) % config_.save_every == 0 || n + 1 == steps) {
            Field xf(grid_, x);
            traj.records.push_back(observe(xf, nu, lp_exponent_, n + 1, t, info.iterations));
            if (sink) sink(traj.records.back());
            if (config_.snapshots) traj.snapshots.emplace_back(t, std::move(xf));
        }
    }
    traj.terminal = Field(grid_, x);
    return traj;
}

Trajectory SpdeSolver::run_path(const Field& x0, std::uint64_t path_index, const RecordSink& sink) const {
    return integrate(x0, path_index, sink,
                     [this](std::vector<double>& x, std::uint64_t p, std::int64_t n) { return step_in_place(x, p, n); });
}

Trajectory SpdeSolver::run_rescaled(const Field& x0, std::uint64_t path_index, const RecordSink& sink) const {
    if (!noise_.spatially_constant())
        throw RescalingInapplicable("run_rescaled: every noise mode must be spatially constant");
    return integrate(x0, path_index, sink, [this](std::vector<double>& x, std::uint64_t p, std::int64_t n) {
        return rescaled_step_in_place(x, p, n);
    });
}

Trajectory run_path(const Field& x0, const MonotoneGraph& graph, const SolverConfig& config, const NoiseSpec& noise,
                    std::uint64_t path_index) {
    return SpdeSolver(x0.grid(), graph, config, noise).run_path(x0, path_index);
}

Trajectory run_deterministic(const Field& x0, const MonotoneGraph& graph, const SolverConfig& config) {
    return SpdeSolver(x0.grid(), graph, config, NoiseSpec{}).run_path(x0, 0);
}

Trajectory run_rescaled(const Field& x0, const MonotoneGraph& graph, const SolverConfig& config,
                        const NoiseSpec& scalar_noise, std::uint64_t path_index) {
    if (!scalar_noise.spatially_constant())
        throw RescalingInapplicable("run_rescaled: every noise mode must be spatially constant");
    return SpdeSolver(x0.grid(), graph, config, scalar_noise).run_rescaled(x0, path_index);
}

std::vector<DistanceSample> rescaled_distance_series(const Field& x0, const MonotoneGraph& graph,
                                                     const SolverConfig& config, const NoiseSpec& scalar_noise,
                                                     std::uint64_t path_index) {
    if (!scalar_noise.spatially_constant())
        throw RescalingInapplicable("rescaled comparison: every noise mode must be spatially constant");
    SpdeSolver solver(x0.grid(), graph, config, scalar_noise);
    const auto& g = *x0.grid();
    std::vector<double> direct(x0.data()), rescaled(x0.data()), diff(x0.size());
    std::vector<DistanceSample> out;
    out.push_back({0.0, 0.0});
    const auto steps = config.step_count();
    for (std::int64_t n = 0; n < steps; ++n) {
        solver.step_in_place(direct, path_index, n);
        solver.rescaled_step_in_place(rescaled, path_index, n);
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = direct[i] - rescaled[i];
        out.push_back({static_cast<double>(n + 1) * config.dt, observed_hminus1(g, diff)});
    }
    return out;
}

}  // namespace spme
