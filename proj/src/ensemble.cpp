#include "spme/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "spme/errors.hpp"

namespace spme {

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("SPME_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n);
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

EnsembleResult run_ensemble(const Field& x0, const MonotoneGraph& graph, const SolverConfig& config,
                            const NoiseSpec& noise, const EnsembleOptions& options) {
    if (options.n_paths < 1) throw DomainError("run_ensemble: n_paths must be >= 1");
    const auto start = std::chrono::steady_clock::now();
    const SpdeSolver solver(x0.grid(), graph, config, noise);

    EnsembleResult ens;
    ens.n_paths = options.n_paths;
    ens.threads = resolve_threads(options.threads);
    ens.seed_base = noise.seed_base;
    ens.noise_substeps = config.noise_substeps;
    ens.theta_ext = options.theta_ext;
    ens.paths.resize(options.n_paths);
    std::vector<Trajectory> trajs(options.n_paths);

    parallel_for(options.n_paths, ens.threads, [&](std::size_t i) {
        const std::uint64_t index = options.first_path + i;
        Trajectory tr = solver.run_path(x0, index);
        PathSummary& s = ens.paths[i];
        s.path_index = index;
        s.failed = tr.failed;
        s.failure_kind = tr.failure_kind;
        s.failure = tr.failure;
        s.tau = extinction_time(tr, options.theta_ext);
        s.initial_hminus1 = tr.records.front().hminus1;
        s.terminal_hminus1 = tr.records.back().hminus1;
        s.sup_l2_sq = tr.sup_l2_sq;
        s.clipped_steps = tr.clipped_steps;
        if (options.keep_trajectories) trajs[i] = std::move(tr);
    });

    // fold in path order
    for (const auto& s : ens.paths)
        if (s.failed) ++ens.failures;
    ens.budget_exceeded =
        static_cast<double>(ens.failures) > options.failure_budget * static_cast<double>(ens.n_paths);
    if (options.keep_trajectories) {
        ens.trajectories = std::move(trajs);
        for (std::size_t i = 0; i < ens.n_paths; ++i)
            if (!ens.paths[i].failed) {
                ens.times = ens.trajectories[i].times();
                break;
            }
    } else {
        const auto steps = config.step_count();
        ens.times.push_back(0.0);
        for (std::int64_t n = 1; n <= steps; ++n)
            if (n % config.save_every == 0 || n == steps) ens.times.push_back(static_cast<double>(n) * config.dt);
    }
    for (double t : ens.times) {
        const auto e = estimate_extinction_prob(ens, t);
        ens.cdf.push_back({t, e.p, e.se, e.ci});
    }
    ens.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return ens;
}

ProbabilityEstimate estimate_extinction_prob(const EnsembleResult& ens, double t) {
    ProbabilityEstimate e;
    std::size_t k = 0;
    for (const auto& s : ens.paths) {
        if (s.failed) continue;
        ++e.n;
        if (s.tau && *s.tau <= t) ++k;
    }
    if (e.n == 0) return e;
    e.p = static_cast<double>(k) / static_cast<double>(e.n);
    e.se = std::sqrt(e.p * (1.0 - e.p) / static_cast<double>(e.n));
    e.ci = wilson_interval(k, e.n);
    return e;
}

SupermartingaleCheck supermartingale_check(const EnsembleResult& ens, double cstar, double m) {
    if (!(m > 0.0 && m < 1.0)) throw DomainError("supermartingale_check: requires 0 < m < 1");
    std::vector<const Trajectory*> used;
    for (std::size_t i = 0; i < ens.trajectories.size(); ++i)
        if (!ens.paths[i].failed) used.push_back(&ens.trajectories[i]);
    if (used.empty()) throw DomainError("supermartingale_check: ensemble holds no completed trajectories");
    const std::size_t steps = used.front()->records.size();

    double scale = 0.0;
    for (const auto* tr : used) scale += std::pow(tr->records.front().hminus1, 1.0 - m);
    scale /= static_cast<double>(used.size());
    // rounding-level slack for ensembles whose differences are all identical
    const double slack = 1e-12 * scale;

    SupermartingaleCheck out;
    out.worst_excess = -std::numeric_limits<double>::infinity();
    std::vector<double> diff(used.size());
    const double rate = cstar * (1.0 - m);
    for (std::size_t n = 0; n + 1 < steps; ++n) {
        for (std::size_t i = 0; i < used.size(); ++i) {
            const auto& r0 = used[i]->records[n];
            const auto& r1 = used[i]->records[n + 1];
            diff[i] = std::exp(-rate * r1.t) * std::pow(r1.hminus1, 1.0 - m) -
                      std::exp(-rate * r0.t) * std::pow(r0.hminus1, 1.0 - m);
        }
        const auto e = mean_and_se(diff);
        const double excess = e.mean - 2.0 * e.se;
        if (excess > out.worst_excess) {
            out.worst_excess = excess;
            out.worst_step = n + 1;
        }
        if (excess > slack) out.pass = false;
    }
    return out;
}

double estimate_cstar(const EnsembleResult& ens, double m, double cap, double rel_tol) {
    if (supermartingale_check(ens, 0.0, m).pass) return 0.0;
    if (!(cap > 0.0) || !supermartingale_check(ens, cap, m).pass)
        throw ReachedCap("estimate_cstar: no C* <= " + std::to_string(cap) + " passes the supermartingale test");
    double lo = 0.0, hi = cap;
    while (hi - lo > rel_tol * hi) {
        const double mid = 0.5 * (lo + hi);
        if (supermartingale_check(ens, mid, m).pass) hi = mid;
        else lo = mid;
    }
    return hi;
}

std::string to_string(LadderParameter p) {
    switch (p) {
        case LadderParameter::lambda: return "lambda";
        case LadderParameter::nu: return "nu";
        case LadderParameter::dt: return "dt";
    }
    return "?";
}

namespace {

struct LevelPlan {
    SolverConfig config;
    std::int64_t stride = 1;  // steps between compared states
};

std::vector<LevelPlan> plan_levels(const SolverConfig& base, LadderParameter parameter,
                                   const std::vector<double>& values) {
    std::vector<LevelPlan> plans;
    if (parameter != LadderParameter::dt) {
        for (double v : values) {
            LevelPlan p{base, 1};
            (parameter == LadderParameter::lambda ? p.config.lambda : p.config.nu) = v;
            plans.push_back(p);
        }
        return plans;
    }
    const double coarse = *std::max_element(values.begin(), values.end());
    const double fine = *std::min_element(values.begin(), values.end());
    for (double v : values) {
        const double sub = v / fine;
        const double ratio = coarse / v;
        if (std::abs(sub - std::round(sub)) > 1e-9 * sub || std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
            throw DomainError("dt ladder: levels must be integer multiples of the finest step");
        LevelPlan p{base, static_cast<std::int64_t>(std::llround(ratio))};
        p.config.dt = v;
        p.config.noise_substeps = static_cast<int>(std::llround(sub));
        plans.push_back(p);
    }
    const double steps = base.T / coarse;
    if (std::abs(steps - std::round(steps)) > 1e-9 * steps)
        throw DomainError("dt ladder: T must be a multiple of the coarsest step");
    return plans;
}

// states at the compared times, including t = 0
std::vector<std::vector<double>> compared_states(const SpdeSolver& solver, const Field& x0, std::uint64_t path,
                                                 std::int64_t stride) {
    std::vector<std::vector<double>> out;
    std::vector<double> x(x0.data());
    out.push_back(x);
    const auto steps = solver.config().step_count();
    for (std::int64_t n = 0; n < steps; ++n) {
        solver.step_in_place(x, path, n);
        if ((n + 1) % stride == 0) out.push_back(x);
    }
    return out;
}

double sup_error_sq(const Grid& g, const std::vector<std::vector<double>>& a,
                    const std::vector<std::vector<double>>& b) {
    const std::size_t k = std::min(a.size(), b.size());
    std::vector<double> diff(a.front().size());
    double worst = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = a[j][i] - b[j][i];
        const double e = observed_hminus1(g, diff);
        worst = std::max(worst, e * e);
    }
    return worst;
}

}  // namespace

ConvergenceStudy coupled_convergence_study(const Field& x0, const MonotoneGraph& graph, const SolverConfig& base,
                                           const NoiseSpec& noise, LadderParameter parameter,
                                           std::vector<double> values, const ConvergenceOptions& options) {
    if (values.size() < 3) throw DomainError("coupled_convergence_study: ladder needs at least three levels");
    if (options.n_paths < 1) throw DomainError("coupled_convergence_study: n_paths must be >= 1");
    const auto plans = plan_levels(base, parameter, values);
    std::vector<SpdeSolver> solvers;
    for (const auto& p : plans) solvers.emplace_back(x0.grid(), graph, p.config, noise);

    const std::size_t n_pairs = values.size() - 1;
    const std::size_t n_paths = options.n_paths;
    std::vector<std::vector<double>> errors(n_pairs, std::vector<double>(n_paths, 0.0));
    std::vector<std::vector<double>> indep(n_pairs, std::vector<double>(n_paths, 0.0));
    std::vector<char> failed(n_paths, 0);
    const auto& g = *x0.grid();

    parallel_for(n_paths, resolve_threads(options.threads), [&](std::size_t i) {
        try {
            std::vector<std::vector<std::vector<double>>> states;
            for (std::size_t l = 0; l < plans.size(); ++l)
                states.push_back(compared_states(solvers[l], x0, i, plans[l].stride));
            for (std::size_t k = 0; k < n_pairs; ++k) {
                errors[k][i] = sup_error_sq(g, states[k], states[k + 1]);
                if (options.independent_check) {
                    const auto other =
                        compared_states(solvers[k + 1], x0, i + options.independent_offset, plans[k + 1].stride);
                    indep[k][i] = sup_error_sq(g, states[k], other);
                }
            }
        } catch (const NonConvergence&) {
            failed[i] = 1;
        } catch (const NaNDetected&) {
            failed[i] = 1;
        }
    });

    ConvergenceStudy study;
    study.parameter = parameter;
    study.values = values;
    study.n_paths = n_paths;
    for (char f : failed) study.failures += f ? 1 : 0;
    if (static_cast<double>(study.failures) > 0.01 * static_cast<double>(n_paths))
        throw NonConvergence("coupled_convergence_study: more than 1% of paths aborted",
                             static_cast<double>(study.failures));

    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < n_pairs; ++k) {
        std::vector<double> e, ind;
        for (std::size_t i = 0; i < n_paths; ++i) {
            if (failed[i]) continue;
            e.push_back(errors[k][i]);
            ind.push_back(indep[k][i]);
        }
        CoupledPair pair;
        pair.a = values[k];
        pair.b = values[k + 1];
        pair.error_sq = mean_and_se(e);
        if (options.independent_check) pair.independent_error_sq = mean_and_se(ind);
        study.pairs.push_back(pair);
        xs.push_back(pair.a + pair.b);
        ys.push_back(pair.error_sq.mean);
    }
    if (std::all_of(ys.begin(), ys.end(), [](double y) { return y > 0.0; })) {
        const auto fit = fit_loglog(xs, ys);
        study.exponent = fit.slope;
        study.r2 = fit.r2;
    }
    study.order = 0.5 * study.exponent;
    return study;
}

RescaledStudy rescaled_convergence_study(const Field& x0, const MonotoneGraph& graph, const SolverConfig& base,
                                         const NoiseSpec& scalar_noise, std::vector<double> dts,
                                         const ConvergenceOptions& options) {
    if (dts.size() < 2) throw DomainError("rescaled_convergence_study: need at least two step sizes");
    const auto plans = plan_levels(base, LadderParameter::dt, dts);
    const std::size_t n_paths = options.n_paths;
    std::vector<std::vector<double>> dist(plans.size(), std::vector<double>(n_paths, 0.0));

    parallel_for(n_paths * plans.size(), resolve_threads(options.threads), [&](std::size_t job) {
        const std::size_t l = job / n_paths;
        const std::size_t i = job % n_paths;
        const auto series = rescaled_distance_series(x0, graph, plans[l].config, scalar_noise, i);
        double worst = 0.0;
        for (const auto& s : series) worst = std::max(worst, s.distance);
        dist[l][i] = worst;
    });

    RescaledStudy study;
    std::vector<double> xs, ys;
    for (std::size_t l = 0; l < plans.size(); ++l) {
        study.levels.push_back({dts[l], mean_and_se(dist[l])});
        xs.push_back(dts[l]);
        ys.push_back(study.levels.back().sup_distance.mean);
    }
    if (std::all_of(ys.begin(), ys.end(), [](double y) { return y > 0.0; })) {
        const auto fit = fit_loglog(xs, ys);
        study.order = fit.slope;
        study.r2 = fit.r2;
    }
    return study;
}

}  // namespace spme
