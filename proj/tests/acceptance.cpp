// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: spme_acceptance [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spme/config.hpp"
#include "spme/embedding.hpp"
#include "spme/ensemble.hpp"
#include "spme/errors.hpp"
#include "spme/graph.hpp"
#include "spme/observables.hpp"
#include "spme/run.hpp"
#include "spme/solver.hpp"

using namespace spme;
namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Timer {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
    char buf[1024];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// smooth bump height * exp(1 - 1/(1 - s^2)), s = |x - centre| / radius
Field bump(const GridPtr& grid, double radius, double height, double floor = 0.0) {
    const double c = 0.5 * grid->spec().L;
    return Field::from_function(grid, [&](const std::vector<double>& x) {
        double s2 = 0.0;
        for (double v : x) s2 += (v - c) * (v - c);
        s2 /= radius * radius;
        return floor + (s2 < 1.0 ? height * std::exp(1.0 - 1.0 / (1.0 - s2)) : 0.0);
    });
}

GridPtr dirichlet(int d, int N, double L = pi) { return Grid::make({d, L, N, Boundary::dirichlet, {}}); }
GridPtr periodic(int d, int N, double L) { return Grid::make({d, L, N, Boundary::periodic, {}}); }

// min X over a trajectory relative to the positivity floor; tracked for criterion 9
struct PositivityLog {
    int scenarios = 0;
    int violations = 0;
    double worst = std::numeric_limits<double>::infinity();  // min X / max(1, |x0|_inf)
    std::vector<std::string> names;
    std::set<std::string> seen;

    void add(const std::string& name, const Trajectory& t) {
        if (t.records.empty() || t.records.front().min < 0.0) return;
        const double sup0 = std::max(1.0, std::max(std::abs(t.records.front().min), t.records.front().max));
        double mn = std::numeric_limits<double>::infinity();
        for (const auto& r : t.records) mn = std::min(mn, r.min);
        // an aborted path carries the offending minimum in its diagnostic only
        if (const auto at = t.failure.find("min X = "); at != std::string::npos)
            mn = std::min(mn, std::strtod(t.failure.c_str() + at + 8, nullptr));
        ++scenarios;
        worst = std::min(worst, mn / sup0);
        if (mn < -1e-8 * sup0 || t.failure_kind == "PositivityViolation") {
            ++violations;
            if (seen.insert(name).second)
                names.push_back(fmt("%s (min %.2e)", name.c_str(), mn / sup0));
        }
    }
};

PositivityLog positivity;

MonotoneGraph kinked_graph() { return MonotoneGraph::tabulated({-1.0, 0.0, 0.5, 2.0}, {-1.0, 0.0, 0.25, 2.0}); }

// ---------------------------------------------------------------------------

Outcome heat_oracle() {
    Timer timer;
    const double L = 2.0 * pi;
    const auto grid = periodic(1, 128, L);
    const Field x0 = Field::from_function(grid, [&](const std::vector<double>& x) { return std::sin(2.0 * pi * x[0] / L); });
    SolverConfig c;
    c.dt = 1e-4;
    c.T = 0.1;
    c.lambda = 0.0;
    const auto traj = run_deterministic(x0, MonotoneGraph::linear(1.0), c);
    const double k2 = std::pow(2.0 * pi / L, 2);
    const Field exact = x0 * std::exp(-k2 * c.T);
    const double err = lp_norm(traj.terminal - exact, 2.0) / lp_norm(exact, 2.0);
    const double secs = timer.seconds();

    // same run on the unit box, for the record
    const auto unit = periodic(1, 128, 1.0);
    const Field y0 = Field::from_function(unit, [&](const std::vector<double>& x) { return std::sin(2.0 * pi * x[0]); });
    const auto ut = run_deterministic(y0, MonotoneGraph::linear(1.0), c);
    const Field uexact = y0 * std::exp(-4.0 * pi * pi * c.T);
    const double uerr = lp_norm(ut.terminal - uexact, 2.0) / lp_norm(uexact, 2.0);

    return {!traj.failed && err <= 1e-3 && secs < 5.0,
            fmt("L=2pi rel L2 err %.3e (<= 1e-3), %.2f s (< 5 s); unit box L=1 gives %.3e", err, secs, uerr)};
}

Outcome graph_calculus() {
    struct Case {
        std::string name;
        MonotoneGraph g;
        std::vector<double> kinks;  // in r for psi_lambda at lambda = 1, scaled below
    };
    std::vector<Case> cases = {
        {"power m=1/5", MonotoneGraph::power(0.2, 1.0), {}},
        {"power m=1/2", MonotoneGraph::power(0.5, 1.0), {}},
        {"power m=2", MonotoneGraph::power(2.0, 1.0), {}},
        {"heaviside", MonotoneGraph::heaviside(1.0, 0.5, 0.1), {}},
        {"lipschitz", MonotoneGraph::tabulated({-2.0, -0.5, 0.0, 1.0, 3.0}, {-1.5, -0.5, 0.0, 2.0, 2.5}), {}},
    };
    std::mt19937_64 rng(97);
    std::uniform_real_distribution<double> unif(-5.0, 5.0);
    double worst_res = 0.0, worst_lip = 0.0, worst_fd = 0.0, worst_growth = 0.0;
    std::size_t pairs = 0;
    for (const auto& cs : cases) {
        for (double lambda : {1e-1, 1e-2, 1e-3}) {
            // resolvent residuals
            for (int i = 0; i < 2000; ++i) {
                const double s = unif(rng);
                const double p = resolvent(cs.g, lambda, s);
                worst_res = std::max(worst_res, resolvent_residual(cs.g, lambda, s, p) / std::max(1.0, std::abs(s)));
            }
            // Lipschitz constant of the Yosida approximation
            for (int i = 0; i < 10000; ++i) {
                const double a = unif(rng), b = unif(rng);
                if (a == b) continue;
                const double q = std::abs(yosida(cs.g, lambda, a) - yosida(cs.g, lambda, b)) / std::abs(a - b);
                worst_lip = std::max(worst_lip, q * lambda);
                ++pairs;
            }
            // d j_lambda / dr = psi_lambda at smooth points
            for (int i = 0; i < 2000; ++i) {
                const double r = unif(rng);
                const double h = 1e-6 * std::max(1.0, std::abs(r));
                const double pl = resolvent(cs.g, lambda, r - h), pr = resolvent(cs.g, lambda, r + h);
                // skip samples whose stencil straddles a kink of psi_lambda
                if (cs.g.slope(pl) != cs.g.slope(pr) && !std::holds_alternative<PowerGraph>(cs.g.kind())) continue;
                if (std::holds_alternative<HeavisideGraph>(cs.g.kind())) {
                    const auto& hv = std::get<HeavisideGraph>(cs.g.kind());
                    const double lo = hv.r_c * (1.0 + lambda * hv.alpha);
                    const double hi = lo + lambda * hv.rho;
                    if (std::abs(r - lo) < 4 * h || std::abs(r - hi) < 4 * h) continue;
                }
                if (std::holds_alternative<PowerGraph>(cs.g.kind()) && std::abs(r) < 1e-2) continue;
                const double fd =
                    (moreau_envelope(cs.g, lambda, r + h) - moreau_envelope(cs.g, lambda, r - h)) / (2.0 * h);
                const double y = yosida(cs.g, lambda, r);
                worst_fd = std::max(worst_fd, std::abs(fd - y) / std::max(std::abs(y), 1.0));
            }
            // growth |psi_lambda(r)| <= rho |r|^m for the power graphs
            if (const auto* pw = std::get_if<PowerGraph>(&cs.g.kind())) {
                for (int e = -60; e <= 30; ++e) {
                    const double r = std::pow(10.0, e / 10.0);
                    const double ratio = std::abs(yosida(cs.g, lambda, r)) / (pw->rho * std::pow(r, pw->m));
                    worst_growth = std::max(worst_growth, ratio);
                }
            }
        }
    }
    const bool pass = worst_res <= 1e-12 && worst_lip <= 1.0 + 1e-12 && worst_fd <= 1e-6 && worst_growth <= 1.0 + 1e-12;
    return {pass, fmt("max resolvent residual %.2e (<= 1e-12), max lambda*Lip - 1 = %.2e over %zu pairs (<= 1), "
                      "max FD mismatch %.2e (<= 1e-6), max |psi_l|/(rho|r|^m) - 1 = %.2e (C = rho)",
                      worst_res, worst_lip - 1.0, pairs, worst_fd, worst_growth - 1.0)};
}

// largest step-to-step increase of ||X||_{-1}, relative to its initial value
double max_rise(const Trajectory& t) {
    double rise = 0.0;
    for (std::size_t i = 1; i < t.records.size(); ++i)
        rise = std::max(rise, t.records[i].hminus1 - t.records[i - 1].hminus1);
    return rise / t.records.front().hminus1;
}

Outcome deterministic_extinction() {
    std::string detail;
    bool pass = true;
    {
        Timer timer;
        const auto grid = dirichlet(1, 64);
        const Field x0 = bump(grid, 1.0, 1.0);
        SolverConfig c;
        c.dt = 1e-4;
        c.T = 2.0;
        c.lambda = 1e-3;
        const auto traj = run_deterministic(x0, MonotoneGraph::power(0.5, 1.0), c);
        positivity.add("extinction d=1", traj);
        const double gamma = embedding_constant(grid, 0.5).gamma;
        const double tau_max = deterministic_extinction_bound(hminus1_norm(x0), 1.0, gamma, 0.5);
        const auto tau = extinction_time(traj);
        const double rise = max_rise(traj);
        const bool mono = rise <= 1e-12;
        const double secs = timer.seconds();
        const bool ok = !traj.failed && tau && *tau <= 1.05 * tau_max && mono && secs < 60.0;
        pass = pass && ok;
        detail += fmt("d=1: tau=%.4f, 1.05*tau_max=%.4f (gamma=%.6f), max rise %.1e h0 (<= 1e-12), %.1f s (< 60 s)",
                      tau ? *tau : -1.0, 1.05 * tau_max, gamma, rise, secs);
    }
    {
        Timer timer;
        const auto grid = dirichlet(3, 32);
        const Field x0 = bump(grid, 1.2, 0.05);
        SolverConfig c;
        c.dt = 1e-4;
        c.T = 0.03;
        c.lambda = 1e-3;
        const auto traj = run_deterministic(x0, MonotoneGraph::power(0.2, 1.0), c);
        positivity.add("extinction d=3", traj);
        const double gamma = embedding_constant(grid, 0.2).gamma;
        const double tau_max = deterministic_extinction_bound(hminus1_norm(x0), 1.0, gamma, 0.2);
        const auto tau = extinction_time(traj);
        const double rise = max_rise(traj);
        const bool mono = rise <= 1e-12;
        const double secs = timer.seconds();
        const bool ok = !traj.failed && tau && *tau <= 1.05 * tau_max && mono && secs < 900.0;
        pass = pass && ok;
        detail += fmt("; d=3 N=32^3 m=1/5: tau=%.4f, 1.05*tau_max=%.4f (gamma=%.6f), max rise %.1e h0 (<= 1e-12), %.1f s (< 900 s)",
                      tau ? *tau : -1.0, 1.05 * tau_max, gamma, rise, secs);
    }
    return {pass, detail};
}

nlohmann::json run_cli(const std::string& sub, const nlohmann::json& config, const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("spme_acceptance_" + tag);
    fs::create_directories(dir);
    const fs::path cfg = dir / "config_in.json";
    std::ofstream(cfg) << config.dump(2);
    RunOptions opt;
    opt.subcommand = sub;
    opt.config_path = cfg;
    opt.out = dir / "out";
    std::ostringstream out, err;
    const int code = run_command(opt, out, err);
    std::ifstream f(dir / "out" / "summary.json");
    nlohmann::json s = f ? nlohmann::json::parse(f) : nlohmann::json::object();
    s["exit_code"] = code;
    s["stderr"] = err.str();
    // the trajectory also feeds the positivity log
    if (fs::exists(dir / "out" / "trajectory.jsonl")) {
        Trajectory t;
        t.records = read_trajectory_jsonl(dir / "out" / "trajectory.jsonl");
        positivity.add("cli " + tag, t);
    }
    return s;
}

const nlohmann::json* find_check(const nlohmann::json& s, const std::string& name) {
    if (!s.contains("checks")) return nullptr;
    for (const auto& c : s["checks"])
        if (c["name"] == name) return &c;
    return nullptr;
}

Outcome mass_dichotomy() {
    const nlohmann::json pme = {
        {"domain", {{"d", 1}, {"L", 1.0}, {"N", 64}, {"boundary", "periodic"}}},
        {"graph", {{"kind", "power"}, {"m", 2.0}, {"rho", 1.0}}},
        {"solver", {{"dt", 1e-4}, {"T", 0.1}, {"lambda", 1e-3}}},
        {"initial", {{"kind", "bump"}, {"radius", 0.25}, {"height", 1.0}, {"floor", 0.1}}},
    };
    const nlohmann::json fd = {
        {"domain", {{"d", 1}, {"L", pi}, {"N", 64}, {"boundary", "dirichlet"}}},
        {"graph", {{"kind", "power"}, {"m", 0.5}, {"rho", 1.0}}},
        {"solver", {{"dt", 1e-4}, {"T", 2.0}, {"lambda", 1e-3}}},
        {"initial", {{"kind", "bump"}, {"radius", 1.0}, {"height", 1.0}}},
    };
    const auto a = run_cli("det", pme, "pme");
    const auto b = run_cli("det", fd, "fd");
    const auto* ca = find_check(a, "mass_conserved");
    const auto* cb = find_check(b, "mass_vanishes");
    const bool pass = a["exit_code"] == 0 && b["exit_code"] == 0 && ca && cb && (*ca)["pass"] == true &&
                      (*cb)["pass"] == true;
    return {pass, fmt("periodic PME m=2 relative mass drift %.3e (<= 1e-8); Dirichlet m=1/2 mass(tau)/mass(0) %.3e "
                      "(<= 1e-4) at tau=%.4f",
                      ca ? (*ca)["value"].get<double>() : -1.0, cb ? (*cb)["value"].get<double>() : -1.0,
                      b.value("tau", nlohmann::json(-1.0)).is_number() ? b["tau"].get<double>() : -1.0)};
}

Outcome parameter_rates() {
    const auto grid = dirichlet(1, 64);
    const Field x0 = bump(grid, 1.0, 1.0);
    const auto g = MonotoneGraph::heaviside(1.0, 0.5, 0.0);
    SolverConfig c;
    c.dt = 1e-3;
    c.T = 0.2;
    c.lambda = 1e-2;
    NoiseSpec noise;
    noise.seed_base = 7;
    noise.modes = {NoiseMode::constant(0.1), NoiseMode::sine(0.1, {1})};
    ConvergenceOptions opt;
    opt.n_paths = 64;
    opt.threads = 0;
    opt.independent_check = true;
    const std::vector<double> ladder = {1e-1, 5e-2, 2.5e-2};
    const auto lam = coupled_convergence_study(x0, g, c, noise, LadderParameter::lambda, ladder, opt);
    const auto nu = coupled_convergence_study(x0, g, c, noise, LadderParameter::nu, ladder, opt);
    auto in_range = [](double e) { return e >= 0.8 && e <= 1.3; };
    bool crn = true;
    for (const auto* st : {&lam, &nu})
        for (const auto& p : st->pairs) crn = crn && p.error_sq.mean < p.independent_error_sq->mean;
    const bool pass = in_range(lam.exponent) && in_range(nu.exponent);
    return {pass,
            fmt("lambda exponent %.3f, nu exponent %.3f (both need [0.8, 1.3]); errors^2 lambda %.3e, %.3e; nu %.3e, "
                "%.3e; CRN below independent noise: %s",
                lam.exponent, nu.exponent, lam.pairs[0].error_sq.mean, lam.pairs[1].error_sq.mean,
                nu.pairs[0].error_sq.mean, nu.pairs[1].error_sq.mean, crn ? "yes" : "no")};
}

Outcome moment_bound() {
    // sign-changing data crossing every breakpoint of the graph
    const auto grid = dirichlet(1, 32);
    const Field x0 = Field::from_function(grid, [](const std::vector<double>& x) { return std::sin(2.0 * x[0]); });
    const auto g = kinked_graph();
    SolverConfig c;
    c.dt = 1e-3;
    c.T = 0.5;
    c.lambda = 1e-3;
    NoiseSpec noise;
    noise.seed_base = 5;
    noise.modes = {NoiseMode::constant(0.3)};
    EnsembleOptions opt;
    opt.n_paths = 256;
    const auto ens = run_ensemble(x0, g, c, noise, opt);
    for (const auto& t : ens.trajectories) positivity.add("moment ensemble", t);
    std::vector<double> sups;
    for (const auto& p : ens.paths)
        if (!p.failed) sups.push_back(p.sup_l2_sq);
    const double cinf = c_infinity_sq(noise, grid).c_infinity_sq;
    const double x0sq = std::pow(lp_norm(x0, 2.0), 2);
    const auto rep = moment_bound_check(sups, x0sq, cinf, c.T);
    return {rep.pass && !ens.budget_exceeded,
            fmt("UCL95 of E sup|X|_2^2 = %.4e <= bound 2|x|^2 e^{3 C_inf^2 T} = %.4e (C_inf^2=%.3f, ratio %.2e, "
                "%zu paths)",
                rep.ucl, rep.bound, cinf, rep.ratio, rep.n)};
}

Outcome rescaling() {
    const auto grid = dirichlet(1, 64);
    const Field x0 = bump(grid, 1.0, 1.0);
    const auto g = MonotoneGraph::power(0.5, 1.0);
    SolverConfig c;
    c.T = 0.2;
    c.lambda = 1e-3;
    const double h = 1e-3;
    NoiseSpec noise;
    noise.seed_base = 11;
    noise.modes = {NoiseMode::constant(0.5)};
    ConvergenceOptions opt;
    opt.n_paths = 32;
    const auto st = rescaled_convergence_study(x0, g, c, noise, {4 * h, 2 * h, h}, opt);
    bool decreasing = true;
    for (std::size_t i = 1; i < st.levels.size(); ++i)
        decreasing = decreasing && st.levels[i].sup_distance.mean < st.levels[i - 1].sup_distance.mean;

    c.dt = h;
    NoiseSpec silent = noise;
    silent.modes = {NoiseMode::constant(0.0)};
    double zero = 0.0;
    for (const auto& s : rescaled_distance_series(x0, g, c, silent, 0)) zero = std::max(zero, s.distance);
    const auto direct = run_path(x0, g, c, noise, 0);
    const auto resc = run_rescaled(x0, g, c, noise, 0);
    positivity.add("rescaled direct", direct);
    positivity.add("rescaled", resc);
    return {decreasing && st.order >= 0.4 && zero == 0.0,
            fmt("E sup distance %.3e, %.3e, %.3e for dt = 4h, 2h, h (h=1e-3); order %.3f (>= 0.4); zero-noise "
                "distance %.1e (== 0)",
                st.levels[0].sup_distance.mean, st.levels[1].sup_distance.mean, st.levels[2].sup_distance.mean,
                st.order, zero)};
}

Outcome stochastic_extinction() {
    const auto grid = dirichlet(1, 32);
    const Field x0 = bump(grid, 1.0, 0.1);
    const auto g = MonotoneGraph::power(0.5, 1.0);
    SolverConfig c;
    c.dt = 1e-3;
    c.T = 1.0;
    c.lambda = 1e-3;
    NoiseSpec noise;
    noise.seed_base = 3;
    noise.modes = {NoiseMode::constant(0.3), NoiseMode::sine(0.3, {1})};
    EnsembleOptions opt;
    opt.n_paths = 512;
    const auto ens = run_ensemble(x0, g, c, noise, opt);
    for (const auto& t : ens.trajectories) positivity.add("extinction ensemble", t);
    const double cinf = c_infinity_sq(noise, grid).c_infinity_sq;
    const double gamma = embedding_constant(grid, 0.5).gamma;
    const double xn = hminus1_norm(x0);
    double cstar = std::numeric_limits<double>::quiet_NaN();
    bool finite = true;
    try {
        cstar = estimate_cstar(ens, 0.5, 1e3 * cinf);
    } catch (const ReachedCap&) {
        finite = false;
    }
    const double limit = finite ? extinction_prob_limit(xn, 1.0, gamma, 0.5, cstar) : -1.0;
    std::size_t violations = 0, positive = 0;
    if (finite) {
        for (double t : ens.times) {
            if (t <= 0.0) continue;
            const double b = extinction_prob_bound(xn, t, 1.0, gamma, 0.5, cstar);
            if (b <= 0.0) continue;
            ++positive;
            const auto e = estimate_extinction_prob(ens, t);
            if (e.p + 2.0 * e.se < b) ++violations;
        }
    }
    // deterministic ensemble
    EnsembleOptions dopt;
    dopt.n_paths = 8;
    const auto dens = run_ensemble(x0, g, c, NoiseSpec{}, dopt);
    const double dcstar = estimate_cstar(dens, 0.5, 1.0);
    const bool pass = finite && !ens.budget_exceeded && limit >= 0.3 && violations == 0 && dcstar == 0.0;
    return {pass, fmt("C*hat=%.4g (cap %.3g), t->inf limit %.3f (>= 0.3), violations %zu of %zu positive-bound times, "
                      "P[tau<=T]=%.3f, deterministic C*hat=%.3g (== 0), %zu paths",
                      cstar, 1e3 * cinf, limit, violations, positive, estimate_extinction_prob(ens, c.T).p, dcstar,
                      ens.n_paths)};
}

Outcome positivity_check() {
    {
        const auto grid = dirichlet(1, 64);
        const Field x0 = bump(grid, 1.0, 1.0);
        SolverConfig c;
        c.dt = 1e-3;
        c.T = 0.5;
        NoiseSpec noise;
        noise.seed_base = 13;
        noise.modes = {NoiseMode::constant(0.3), NoiseMode::sine(0.3, {1})};
        for (double m : {0.2, 0.5, 2.0}) {
            const auto g = MonotoneGraph::power(m, 1.0);
            positivity.add(fmt("power m=%g det", m), run_deterministic(x0, g, c));
            for (std::uint64_t k = 0; k < 8; ++k) positivity.add(fmt("power m=%g path", m), run_path(x0, g, c, noise, k));
        }
        positivity.add("heaviside det", run_deterministic(x0, MonotoneGraph::heaviside(1.0, 0.5, 0.0), c));
        const auto pgrid = periodic(2, 32, 1.0);
        positivity.add("periodic pme d=2", run_deterministic(bump(pgrid, 0.3, 1.0, 0.1), MonotoneGraph::power(2.0, 1.0), c));
    }
    // a discontinuous nonnegative datum: the spectral step undershoots and must abort
    const auto grid = periodic(1, 64, 1.0);
    const Field step = Field::from_function(grid, [](const std::vector<double>& x) { return x[0] < 0.5 ? 1.0 : 0.0; });
    SolverConfig c;
    c.dt = 1e-4;
    c.T = 1e-2;
    c.lambda = 0.0;
    const auto t = run_deterministic(step, MonotoneGraph::linear(1.0), c);
    const bool aborted = t.failed && t.failure_kind == "PositivityViolation" && !t.failure.empty();

    // outside the default configurations: a positive bump through a kink of a piecewise-linear graph
    const auto dgrid = dirichlet(1, 32);
    SolverConfig kc;
    kc.dt = 1e-3;
    kc.T = 0.1;
    const auto kinked = run_deterministic(bump(dgrid, 1.0, 1.0), kinked_graph(), kc);
    std::string names;
    for (const auto& n : positivity.names) names += (names.empty() ? ": " : ", ") + n;
    return {positivity.violations == 0 && positivity.scenarios > 0 && aborted,
            fmt("%d scenarios with x0 >= 0, %d violations%s, worst min X / max(1,|x0|_inf) = %.3e (>= -1e-8); "
                "discontinuous datum aborted with diagnostics: %s; info: bump through a graph kink: %s",
                positivity.scenarios, positivity.violations, names.c_str(), positivity.worst,
                aborted ? t.failure.c_str() : "no", kinked.failed ? kinked.failure.c_str() : "no violation")};
}

Outcome determinism() {
    const auto grid = dirichlet(1, 32);
    const Field x0 = bump(grid, 1.0, 0.5);
    const auto g = MonotoneGraph::power(0.5, 1.0);
    SolverConfig c;
    c.dt = 1e-3;
    c.T = 0.3;
    c.lambda = 1e-3;
    NoiseSpec noise;
    noise.seed_base = 42;
    noise.modes = {NoiseMode::constant(0.3), NoiseMode::cosine(0.2, {2})};
    EnsembleOptions one, many;
    one.n_paths = many.n_paths = 24;
    one.threads = 1;
    many.threads = 4;
    const auto a = run_ensemble(x0, g, c, noise, one);
    const auto b = run_ensemble(x0, g, c, noise, many);
    bool same = a.n_paths == b.n_paths;
    for (std::size_t i = 0; same && i < a.n_paths; ++i) same = a.trajectories[i].records == b.trajectories[i].records;
    // replay path 17 from its recorded keys
    const auto& keys = a.trajectories[17].keys;
    NoiseSpec replay_noise = noise;
    replay_noise.seed_base = keys.seed_base;
    SolverConfig rc = c;
    rc.noise_substeps = keys.noise_substeps;
    const auto replay = run_path(x0, g, rc, replay_noise, keys.path_index);
    const bool replayed = replay.records == a.trajectories[17].records;
    return {same && replayed, fmt("24 paths with 1 and 4 threads bitwise equal: %s; path %llu replayed bitwise: %s",
                                  same ? "yes" : "no", static_cast<unsigned long long>(keys.path_index),
                                  replayed ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"heat oracle", heat_oracle},
        {"graph calculus", graph_calculus},
        {"deterministic extinction bound", deterministic_extinction},
        {"mass dichotomy", mass_dichotomy},
        {"lambda and nu coupling rates", parameter_rates},
        {"moment bound", moment_bound},
        {"rescaling equivalence", rescaling},
        {"stochastic extinction bound", stochastic_extinction},
        {"positivity", positivity_check},
        {"determinism and replay", determinism},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        Outcome o;
        Timer timer;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("[%s] %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first.c_str(),
                    o.detail.c_str(), timer.seconds());
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
