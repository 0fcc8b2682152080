#include "spme/run.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "spme/embedding.hpp"
#include "spme/ensemble.hpp"
#include "spme/errors.hpp"
#include "spme/observables.hpp"

namespace spme {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void write_json(const fs::path& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path.string());
    f << std::setw(2) << j << "\n";
}

json read_json(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot read " + path.string());
    return json::parse(f);
}

// Appends one JSON object per line and flushes after each.
class JsonlWriter {
public:
    explicit JsonlWriter(const fs::path& path) : out_(path) {
        if (!out_) throw Error("cannot write " + path.string());
    }
    void write(const json& j) {
        out_ << j.dump() << '\n';
        out_.flush();
    }

private:
    std::ofstream out_;
};

struct Check {
    std::string name;
    bool pass;
    json value;
    json limit;
};

json checks_json(const std::vector<Check>& checks) {
    json arr = json::array();
    for (const auto& c : checks) arr.push_back({{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"limit", c.limit}});
    return arr;
}

bool fast_diffusion(const MonotoneGraph& g) {
    const auto c = g.coercivity();
    return c && c->m > 0.0 && c->m < 1.0 && std::holds_alternative<PowerGraph>(g.kind());
}

double power_rho(const MonotoneGraph& g) {
    const auto c = g.coercivity();
    return c ? c->rho : 1.0;
}

std::string regime_label(const RunConfig& c) {
    const auto co = c.graph.coercivity();
    if (!co) return "not_fast_diffusion";
    const int d = c.domain.d;
    // m = (d - 2) / (d + 2), the Sobolev-critical exponent
    const double critical_m = static_cast<double>(d - 2) / static_cast<double>(d + 2);
    if (d >= 3 && std::abs(co->m - critical_m) < 1e-12) return "critical_exponent";
    return "desk_scale";
}

double embedding_gamma(const RunConfig& c, const GridPtr& grid) {
    const auto co = c.graph.coercivity();
    if (!co || co->m > 1.0)
        throw ConsistencyError("graph.kind", "analysis.gamma_starts",
                               "embedding constant needs a coercive graph with m <= 1");
    return embedding_constant(grid, co->m, c.analysis.gamma_starts, c.analysis.gamma_seed).gamma;
}

std::vector<double> report_times(const RunConfig& c, const std::vector<double>& recorded) {
    if (!c.analysis.report_grid.empty()) return c.analysis.report_grid;
    std::vector<double> out;
    for (double t : recorded)
        if (t > 0.0) out.push_back(t);
    return out;
}

Trajectory from_records(const std::vector<ObservableRecord>& records) {
    Trajectory t;
    t.records = records;
    return t;
}

}  // namespace

json record_json(const ObservableRecord& r) {
    return {{"step", r.step}, {"t", r.t},           {"hminus1", r.hminus1}, {"hminus1_nu", r.hminus1_nu},
            {"l2", r.l2},     {"lmp1", r.lmp1},     {"mass", r.mass},       {"min", r.min},
            {"max", r.max},   {"inner_iters", r.inner_iters}};
}

ObservableRecord record_from_json(const json& j) {
    ObservableRecord r;
    r.step = j.at("step").get<std::int64_t>();
    r.t = j.at("t").get<double>();
    r.hminus1 = j.at("hminus1").get<double>();
    r.hminus1_nu = j.at("hminus1_nu").get<double>();
    r.l2 = j.at("l2").get<double>();
    r.lmp1 = j.at("lmp1").get<double>();
    r.mass = j.at("mass").get<double>();
    r.min = j.at("min").get<double>();
    r.max = j.at("max").get<double>();
    r.inner_iters = j.at("inner_iters").get<int>();
    return r;
}

std::vector<ObservableRecord> read_trajectory_jsonl(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot read " + path.string());
    std::vector<ObservableRecord> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        out.push_back(record_from_json(json::parse(line)));
    }
    return out;
}

json summarize_path(const RunConfig& config, const std::vector<ObservableRecord>& records, const std::string& mode,
                    const std::string& failure) {
    const auto grid = Grid::make(config.domain);
    const auto nc = c_infinity_sq(config.noise, grid);
    json s;
    s["mode"] = mode;
    s["version"] = kVersion;
    s["config_hash"] = config_hash(config);
    s["c_infinity_sq"] = nc.c_infinity_sq;
    s["jj_sum"] = nc.jj_sum;
    s["records"] = records.size();
    s["regime"] = regime_label(config);
    std::vector<Check> checks;
    checks.push_back({"completed", failure.empty(), failure.empty() ? json("ok") : json(failure), nullptr});
    if (records.empty()) {
        s["checks"] = checks_json(checks);
        s["pass"] = false;
        return s;
    }

    const auto traj = from_records(records);
    const auto& r0 = records.front();
    const double sup0 = std::max(std::abs(r0.min), std::abs(r0.max));

    bool finite = true;
    double min_x = std::numeric_limits<double>::infinity();
    for (const auto& r : records) {
        finite = finite && std::isfinite(r.hminus1) && std::isfinite(r.l2) && std::isfinite(r.mass) &&
                 std::isfinite(r.min) && std::isfinite(r.max);
        min_x = std::min(min_x, r.min);
    }
    checks.push_back({"finite_observables", finite, nullptr, nullptr});
    if (r0.min >= 0.0) {
        const double floor = -config.solver.positivity_tol * std::max(1.0, sup0);
        checks.push_back({"positivity", min_x >= floor, min_x, floor});
    }

    const auto tau = extinction_time(traj, config.analysis.theta_ext);
    s["theta_ext"] = config.analysis.theta_ext;
    s["tau"] = nullable(tau);
    s["tau_resolution"] = config.solver.dt * config.solver.save_every;
    s["initial_hminus1"] = r0.hminus1;
    json sens = json::array();
    for (double th : {1e-4, 1e-5, 1e-6, 1e-7, 1e-8})
        sens.push_back({{"theta", th}, {"tau", nullable(extinction_time(traj, th))}});
    s["tau_sensitivity"] = sens;
    s["mass_initial"] = r0.mass;
    s["mass_final"] = records.back().mass;

    const bool fast = fast_diffusion(config.graph);
    s["threshold_crossing_only"] = !fast;
    if (fast) {
        const double m = config.graph.coercivity()->m;
        const double rho = power_rho(config.graph);
        const double gamma = embedding_gamma(config, grid);
        const double tau_max = deterministic_extinction_bound(r0.hminus1, rho, gamma, m);
        s["gamma"] = gamma;
        s["m"] = m;
        s["rho"] = rho;
        s["tau_max"] = tau_max;
        double cstar = nc.c_infinity_sq;
        if (config.analysis.cstar_policy == CstarPolicy::fixed) cstar = config.analysis.cstar_value;
        s["cstar"] = cstar;
        s["cstar_policy"] = config.analysis.cstar_policy == CstarPolicy::estimate
                                ? "c_infinity_sq (estimate needs an ensemble)"
                                : to_string(config.analysis.cstar_policy);
        const auto small = smallness_conditions(r0.hminus1, rho, gamma, m, cstar);
        s["smallness"] = {{"threshold", std::isfinite(small.threshold) ? json(small.threshold) : json(nullptr)},
                          {"norm_condition", small.norm_condition},
                          {"power_condition", small.power_condition}};
        if (mode == "det") {
            checks.push_back({"tau_found", tau.has_value(), nullable(tau), config.solver.T});
            if (tau) checks.push_back({"tau_within_bound", *tau <= 1.05 * tau_max, *tau, 1.05 * tau_max});
            const double slack = 1e-12 * r0.hminus1;
            bool mono = true;
            for (std::size_t i = 1; i < records.size(); ++i)
                if (records[i].hminus1 > records[i - 1].hminus1 + slack) mono = false;
            checks.push_back({"hminus1_nonincreasing", mono, nullptr, nullptr});
        }
    }
    if (mode == "det") {
        if (grid->periodic() && config.solver.nu == 0.0) {
            double drift = 0.0;
            for (const auto& r : records) drift = std::max(drift, std::abs(r.mass - r0.mass));
            // mean-free data: measure the drift against the L2 scale instead
            const double scale = r0.l2 * std::sqrt(grid->volume());
            const double denom = std::abs(r0.mass) > 1e-12 * scale ? std::abs(r0.mass) : scale;
            const double rel = denom > 0.0 ? drift / denom : drift;
            checks.push_back({"mass_conserved", rel <= 1e-8, rel, 1e-8});
        } else if (fast && tau) {
            double at_tau = r0.mass;
            for (const auto& r : records)
                if (r.t == *tau) at_tau = r.mass;
            const double rel = r0.mass != 0.0 ? std::abs(at_tau) / std::abs(r0.mass) : 0.0;
            checks.push_back({"mass_vanishes", rel <= 1e-4, rel, 1e-4});
        }
    }
    bool all = true;
    for (const auto& c : checks) all = all && c.pass;
    s["checks"] = checks_json(checks);
    s["pass"] = all;
    return s;
}

namespace {

json summarize_ensemble(const RunConfig& config, const EnsembleResult& ens) {
    const auto grid = Grid::make(config.domain);
    const auto nc = c_infinity_sq(config.noise, grid);
    json s;
    s["mode"] = "ensemble";
    s["version"] = kVersion;
    s["config_hash"] = config_hash(config);
    s["c_infinity_sq"] = nc.c_infinity_sq;
    s["jj_sum"] = nc.jj_sum;
    s["regime"] = regime_label(config);
    s["n_paths"] = ens.n_paths;
    s["failures"] = ens.failures;
    s["budget_exceeded"] = ens.budget_exceeded;
    s["theta_ext"] = ens.theta_ext;
    s["tau_resolution"] = config.solver.dt * config.solver.save_every;

    std::vector<Check> checks;
    checks.push_back({"failure_budget", !ens.budget_exceeded, ens.failures, 0.01 * static_cast<double>(ens.n_paths)});

    std::vector<double> taus, sups;
    double min_x = std::numeric_limits<double>::infinity();
    double x0_l2 = 0.0, x0_norm = 0.0, sup0 = 0.0, min0 = 0.0;
    bool have_first = false;
    for (std::size_t i = 0; i < ens.paths.size(); ++i) {
        const auto& p = ens.paths[i];
        if (p.failed) continue;
        if (p.tau) taus.push_back(*p.tau);
        sups.push_back(p.sup_l2_sq);
        if (!ens.trajectories.empty()) {
            const auto& rec = ens.trajectories[i].records;
            for (const auto& r : rec) min_x = std::min(min_x, r.min);
            if (!have_first) {
                x0_l2 = rec.front().l2;
                x0_norm = rec.front().hminus1;
                sup0 = std::max(std::abs(rec.front().min), std::abs(rec.front().max));
                min0 = rec.front().min;
                have_first = true;
            }
        }
    }
    const auto te = mean_and_se(taus);
    s["tau"] = {{"extinct", taus.size()},
                {"mean", taus.empty() ? json(nullptr) : json(te.mean)},
                {"se", taus.empty() ? json(nullptr) : json(te.se)},
                {"min", taus.empty() ? json(nullptr) : json(*std::min_element(taus.begin(), taus.end()))},
                {"max", taus.empty() ? json(nullptr) : json(*std::max_element(taus.begin(), taus.end()))}};
    if (have_first && min0 >= 0.0) {
        const double floor = -config.solver.positivity_tol * std::max(1.0, sup0);
        checks.push_back({"positivity", min_x >= floor, min_x, floor});
    }
    s["initial_hminus1"] = x0_norm;

    if (config.graph.is_lipschitz() && have_first) {
        const auto mb = moment_bound_check(sups, x0_l2 * x0_l2, nc.c_infinity_sq, config.solver.T);
        s["moment_bound"] = {{"estimate", mb.estimate}, {"se", mb.se}, {"ucl95", mb.ucl},
                             {"bound", mb.bound},       {"ratio", mb.ratio}, {"pass", mb.pass}};
        checks.push_back({"moment_bound", mb.pass, mb.ucl, mb.bound});
    }

    if (fast_diffusion(config.graph) && have_first) {
        const double m = config.graph.coercivity()->m;
        const double rho = power_rho(config.graph);
        const double gamma = embedding_gamma(config, grid);
        s["gamma"] = gamma;
        s["m"] = m;
        s["rho"] = rho;
        s["tau_max"] = deterministic_extinction_bound(x0_norm, rho, gamma, m);
        std::optional<double> cstar_hat;
        try {
            cstar_hat = estimate_cstar(ens, m, 1e3 * nc.c_infinity_sq);
            s["cstar_hat"] = *cstar_hat;
        } catch (const ReachedCap& e) {
            s["cstar_hat"] = nullptr;
            s["cstar_hat_error"] = e.what();
        }
        checks.push_back({"cstar_hat_finite", cstar_hat.has_value(), nullable(cstar_hat), 1e3 * nc.c_infinity_sq});
        double cstar = nc.c_infinity_sq;
        if (config.analysis.cstar_policy == CstarPolicy::fixed) cstar = config.analysis.cstar_value;
        if (config.analysis.cstar_policy == CstarPolicy::estimate && cstar_hat) cstar = *cstar_hat;
        s["cstar_policy"] = to_string(config.analysis.cstar_policy);
        s["cstar"] = cstar;
        s["cstar_default"] = nc.c_infinity_sq;
        const auto small = smallness_conditions(x0_norm, rho, gamma, m, cstar);
        s["smallness"] = {{"threshold", std::isfinite(small.threshold) ? json(small.threshold) : json(nullptr)},
                          {"norm_condition", small.norm_condition},
                          {"power_condition", small.power_condition}};
        s["bound_limit"] = extinction_prob_limit(x0_norm, rho, gamma, m, cstar);

        json curve = json::array();
        bool consistent = true;
        for (double t : report_times(config, ens.times)) {
            const auto e = estimate_extinction_prob(ens, t);
            const double b = extinction_prob_bound(x0_norm, t, rho, gamma, m, cstar);
            const bool ok = b <= 0.0 || e.p + 2.0 * e.se >= b;
            consistent = consistent && ok;
            curve.push_back({{"t", t}, {"p", e.p}, {"se", e.se}, {"ci", {e.ci.lo, e.ci.hi}}, {"bound", b}, {"ok", ok}});
        }
        s["extinction_curve"] = curve;
        checks.push_back({"bound_consistency", consistent, nullptr, nullptr});
        const auto sm = supermartingale_check(ens, cstar, m);
        s["supermartingale"] = {{"cstar", cstar}, {"pass", sm.pass}, {"worst_step", sm.worst_step},
                                {"worst_excess", sm.worst_excess}};
    } else {
        json cdf = json::array();
        for (const auto& c : ens.cdf) cdf.push_back({{"t", c.t}, {"p", c.p}, {"se", c.se}, {"ci", {c.ci.lo, c.ci.hi}}});
        s["extinction_cdf"] = cdf;
    }
    bool all = true;
    for (const auto& c : checks) all = all && c.pass;
    s["checks"] = checks_json(checks);
    s["pass"] = all;
    return s;
}

std::string path_file(std::uint64_t index) {
    std::ostringstream os;
    os << "path_" << std::setw(6) << std::setfill('0') << index << ".jsonl";
    return os.str();
}

void write_paths_index(const fs::path& dir, const EnsembleResult& ens) {
    json arr = json::array();
    for (const auto& p : ens.paths)
        arr.push_back({{"path_index", p.path_index},
                       {"file", path_file(p.path_index)},
                       {"failed", p.failed},
                       {"failure_kind", p.failure_kind},
                       {"failure", p.failure},
                       {"sup_l2_sq", p.sup_l2_sq},
                       {"clipped_steps", p.clipped_steps}});
    write_json(dir / "paths.json",
               {{"seed_base", ens.seed_base}, {"noise_substeps", ens.noise_substeps}, {"paths", arr}});
}

EnsembleResult load_ensemble(const fs::path& dir, const RunConfig& config) {
    const auto index = read_json(dir / "paths.json");
    EnsembleResult ens;
    ens.seed_base = index.at("seed_base").get<std::uint64_t>();
    ens.noise_substeps = index.at("noise_substeps").get<int>();
    ens.theta_ext = config.analysis.theta_ext;
    for (const auto& p : index.at("paths")) {
        PathSummary s;
        s.path_index = p.at("path_index").get<std::uint64_t>();
        s.failed = p.at("failed").get<bool>();
        s.failure_kind = p.at("failure_kind").get<std::string>();
        s.failure = p.at("failure").get<std::string>();
        s.sup_l2_sq = p.at("sup_l2_sq").get<double>();
        s.clipped_steps = p.at("clipped_steps").get<int>();
        Trajectory tr = from_records(read_trajectory_jsonl(dir / "paths" / p.at("file").get<std::string>()));
        s.tau = extinction_time(tr, ens.theta_ext);
        s.initial_hminus1 = tr.records.front().hminus1;
        s.terminal_hminus1 = tr.records.back().hminus1;
        if (s.failed) ++ens.failures;
        ens.paths.push_back(s);
        ens.trajectories.push_back(std::move(tr));
    }
    ens.n_paths = ens.paths.size();
    ens.budget_exceeded = static_cast<double>(ens.failures) > 0.01 * static_cast<double>(ens.n_paths);
    for (std::size_t i = 0; i < ens.n_paths; ++i)
        if (!ens.paths[i].failed) {
            ens.times = ens.trajectories[i].times();
            break;
        }
    for (double t : ens.times) {
        const auto e = estimate_extinction_prob(ens, t);
        ens.cdf.push_back({t, e.p, e.se, e.ci});
    }
    return ens;
}

void mark_failure(const fs::path& dir, const std::string& kind, const std::string& what) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream f(dir / "FAILED");
    f << kind << ": " << what << "\n";
}

std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const SchemaError*>(&e)) return "SchemaError";
    if (dynamic_cast<const ConsistencyError*>(&e)) return "ConsistencyError";
    if (dynamic_cast<const NonConvergence*>(&e)) return "NonConvergence";
    if (dynamic_cast<const SingularMode*>(&e)) return "SingularMode";
    if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
    if (dynamic_cast<const RescalingInapplicable*>(&e)) return "RescalingInapplicable";
    if (dynamic_cast<const NaNDetected*>(&e)) return "NaNDetected";
    if (dynamic_cast<const PositivityViolation*>(&e)) return "PositivityViolation";
    if (dynamic_cast<const ReachedCap*>(&e)) return "ReachedCap";
    return "Error";
}

class Runner {
public:
    Runner(RunConfig config, fs::path dir, std::ostream& out) : c_(std::move(config)), dir_(std::move(dir)), out_(out) {}

    int path(bool deterministic) {
        prepare();
        const auto grid = Grid::make(c_.domain);
        const Field x0 = make_initial(c_, grid);
        const NoiseSpec noise = deterministic ? NoiseSpec{} : c_.noise;
        SpdeSolver solver(grid, c_.graph, c_.solver, noise);
        JsonlWriter jsonl(dir_ / "trajectory.jsonl");
        write_field_snapshot(dir_ / "fields" / "initial", x0, 0.0);
        const auto traj = solver.run_path(x0, 0, [&](const ObservableRecord& r) { jsonl.write(record_json(r)); });
        write_fields(traj);
        const std::string mode = deterministic ? "det" : "path";
        auto summary = summarize_path(c_, traj.records, mode, traj.failed ? traj.failure_kind + ": " + traj.failure : "");
        summary["keys"] = {{"seed_base", traj.keys.seed_base}, {"path_index", traj.keys.path_index},
                           {"noise_substeps", traj.keys.noise_substeps}};
        write_json(dir_ / "summary.json", summary);
        report_line(summary);
        if (traj.failed) {
            mark_failure(dir_, traj.failure_kind, traj.failure);
            return exit_numeric;
        }
        return exit_ok;
    }

    int rescaled() {
        prepare();
        const auto grid = Grid::make(c_.domain);
        const Field x0 = make_initial(c_, grid);
        SpdeSolver solver(grid, c_.graph, c_.solver, c_.noise);
        if (!c_.noise.spatially_constant())
            throw RescalingInapplicable("rescaled: every noise mode must be spatially constant");
        JsonlWriter direct(dir_ / "trajectory.jsonl");
        JsonlWriter resc(dir_ / "rescaled.jsonl");
        const auto a = solver.run_path(x0, 0, [&](const ObservableRecord& r) { direct.write(record_json(r)); });
        const auto b = solver.run_rescaled(x0, 0, [&](const ObservableRecord& r) { resc.write(record_json(r)); });
        const auto series = rescaled_distance_series(x0, c_.graph, c_.solver, c_.noise, 0);
        JsonlWriter dist(dir_ / "distance.jsonl");
        double worst = 0.0;
        for (const auto& d : series) {
            dist.write({{"t", d.t}, {"distance", d.distance}});
            worst = std::max(worst, d.distance);
        }
        json s;
        s["mode"] = "rescaled";
        s["version"] = kVersion;
        s["config_hash"] = config_hash(c_);
        s["sup_distance"] = worst;
        s["kappa"] = 0.0;
        double kappa = 0.0;
        for (const auto& m : c_.noise.modes) kappa += 0.5 * std::pow(m.mu * m.amplitude, 2);
        s["kappa"] = kappa;
        std::vector<Check> checks;
        checks.push_back({"completed", !a.failed && !b.failed, nullptr, nullptr});
        if (c_.noise.silent()) checks.push_back({"zero_noise_distance", worst == 0.0, worst, 0.0});
        if (c_.analysis.rescaled_dts.size() >= 2) {
            ConvergenceOptions opt;
            opt.n_paths = c_.analysis.paths;
            opt.threads = c_.analysis.threads;
            const auto study = rescaled_convergence_study(x0, c_.graph, c_.solver, c_.noise, c_.analysis.rescaled_dts, opt);
            json levels = json::array();
            for (const auto& l : study.levels)
                levels.push_back({{"dt", l.dt}, {"mean_sup_distance", l.sup_distance.mean}, {"se", l.sup_distance.se}});
            s["study"] = {{"levels", levels}, {"order", study.order}, {"r2", study.r2}, {"paths", opt.n_paths}};
            checks.push_back({"rescaled_order", study.order >= 0.4, study.order, 0.4});
        }
        bool all = true;
        for (const auto& c : checks) all = all && c.pass;
        s["checks"] = checks_json(checks);
        s["pass"] = all;
        write_json(dir_ / "summary.json", s);
        report_line(s);
        if (a.failed || b.failed) {
            mark_failure(dir_, a.failed ? a.failure_kind : b.failure_kind, a.failed ? a.failure : b.failure);
            return exit_numeric;
        }
        return exit_ok;
    }

    int ensemble() {
        prepare();
        const auto grid = Grid::make(c_.domain);
        const Field x0 = make_initial(c_, grid);
        EnsembleOptions opt;
        opt.n_paths = c_.analysis.paths;
        opt.threads = c_.analysis.threads;
        opt.theta_ext = c_.analysis.theta_ext;
        const auto ens = run_ensemble(x0, c_.graph, c_.solver, c_.noise, opt);
        fs::create_directories(dir_ / "paths");
        for (std::size_t i = 0; i < ens.n_paths; ++i) {
            JsonlWriter w(dir_ / "paths" / path_file(ens.paths[i].path_index));
            for (const auto& r : ens.trajectories[i].records) w.write(record_json(r));
        }
        write_paths_index(dir_, ens);
        const auto summary = summarize_ensemble(c_, ens);
        write_json(dir_ / "summary.json", summary);
        write_json(dir_ / "run_info.json", {{"version", kVersion}, {"threads", ens.threads},
                                            {"wall_seconds", ens.wall_seconds}});
        report_line(summary);
        if (ens.budget_exceeded) {
            mark_failure(dir_, "EnsembleFailure", std::to_string(ens.failures) + " of " +
                                                      std::to_string(ens.n_paths) + " paths aborted");
            return exit_numeric;
        }
        return exit_ok;
    }

    int converge() {
        prepare();
        if (c_.analysis.ladder_values.size() < 3)
            throw ConsistencyError("analysis.ladder_values", "analysis.ladder", "a ladder needs at least three levels");
        const auto grid = Grid::make(c_.domain);
        const Field x0 = make_initial(c_, grid);
        ConvergenceOptions opt;
        opt.n_paths = c_.analysis.paths;
        opt.threads = c_.analysis.threads;
        opt.independent_check = c_.analysis.independent_check;
        const auto st = coupled_convergence_study(x0, c_.graph, c_.solver, c_.noise, c_.analysis.ladder,
                                                  c_.analysis.ladder_values, opt);
        json pairs = json::array();
        for (const auto& p : st.pairs) {
            json pj = {{"a", p.a}, {"b", p.b}, {"error_sq", p.error_sq.mean}, {"se", p.error_sq.se}};
            if (p.independent_error_sq) pj["independent_error_sq"] = p.independent_error_sq->mean;
            pairs.push_back(pj);
        }
        json s = {{"mode", "converge"},     {"version", kVersion},   {"config_hash", config_hash(c_)},
                  {"ladder", to_string(st.parameter)}, {"values", st.values}, {"pairs", pairs},
                  {"exponent", st.exponent}, {"r2", st.r2},           {"paths", st.n_paths},
                  {"failures", st.failures}};
        std::vector<Check> checks;
        if (st.parameter == LadderParameter::dt) {
            s["order"] = st.order;
        } else {
            checks.push_back({"exponent_in_range", st.exponent >= 0.8 && st.exponent <= 1.3, st.exponent,
                              json::array({0.8, 1.3})});
        }
        if (opt.independent_check) {
            bool better = true;
            for (const auto& p : st.pairs) better = better && p.error_sq.mean < p.independent_error_sq->mean;
            checks.push_back({"crn_reduces_error", better, nullptr, nullptr});
        }
        bool all = true;
        for (const auto& c : checks) all = all && c.pass;
        s["checks"] = checks_json(checks);
        s["pass"] = all;
        write_json(dir_ / "summary.json", s);
        report_line(s);
        return exit_ok;
    }

    int gamma() {
        prepare();
        const auto grid = Grid::make(c_.domain);
        const auto co = c_.graph.coercivity();
        if (!co || co->m > 1.0)
            throw ConsistencyError("graph.kind", "subcommand gamma", "needs a coercive graph with m <= 1");
        const auto res = embedding_constant(grid, co->m, c_.analysis.gamma_starts, c_.analysis.gamma_seed);
        json s = {{"mode", "gamma"},          {"version", kVersion},         {"config_hash", config_hash(c_)},
                  {"m", co->m},               {"gamma", res.gamma},          {"quotient", res.quotient},
                  {"starts", res.starts},     {"converged_starts", res.converged_starts},
                  {"iterations", res.iterations}, {"regime", regime_label(c_)}};
        write_json(dir_ / "summary.json", s);
        write_field_snapshot(dir_ / "fields" / "maximizer", res.maximizer, 0.0);
        out_ << "gamma = " << std::setprecision(12) << res.gamma << "\n";
        return exit_ok;
    }

    int report(bool check) {
        const auto stored = read_json(dir_ / "summary.json");
        const auto mode = stored.at("mode").get<std::string>();
        json fresh;
        if (mode == "det" || mode == "path") {
            const auto records = read_trajectory_jsonl(dir_ / "trajectory.jsonl");
            std::string failure;
            if (fs::exists(dir_ / "FAILED")) {
                std::ifstream f(dir_ / "FAILED");
                std::getline(f, failure);
            }
            fresh = summarize_path(c_, records, mode, failure);
            if (stored.contains("keys")) fresh["keys"] = stored["keys"];
        } else if (mode == "ensemble") {
            fresh = summarize_ensemble(c_, load_ensemble(dir_, c_));
        } else {
            fresh = stored;
        }
        const bool same = fresh == stored;
        write_json(dir_ / "report.json", fresh);
        out_ << "report: " << mode << " summary " << (same ? "reproduced" : "differs from stored") << "\n";
        for (const auto& c : fresh.value("checks", json::array()))
            out_ << "  [" << (c.at("pass").get<bool>() ? "PASS" : "FAIL") << "] " << c.at("name").get<std::string>()
                 << "\n";
        if (check && !(fresh.value("pass", false) && same)) return exit_check;
        return exit_ok;
    }

private:
    void prepare() {
        fs::create_directories(dir_ / "fields");
        std::error_code ec;
        fs::remove(dir_ / "FAILED", ec);
        write_json(dir_ / "config.json", to_json(c_));
    }

    void write_fields(const Trajectory& traj) {
        if (c_.analysis.snapshot_terminal && traj.terminal.size() > 0) {
            const double t = traj.records.empty() ? 0.0 : traj.records.back().t;
            write_field_snapshot(dir_ / "fields" / "terminal", traj.terminal, t);
        }
        for (const auto& [t, f] : traj.snapshots) {
            std::ostringstream os;
            os << "snap_" << std::setw(8) << std::setfill('0') << std::llround(t / c_.solver.dt);
            write_field_snapshot(dir_ / "fields" / os.str(), f, t);
        }
    }

    void report_line(const json& s) {
        out_ << s.at("mode").get<std::string>() << ": " << (s.value("pass", false) ? "all checks pass" : "checks failed")
             << " (" << dir_.string() << ")\n";
    }

    RunConfig c_;
    fs::path dir_;
    std::ostream& out_;
};

}  // namespace

int run_command(const RunOptions& options, std::ostream& out, std::ostream& err) {
    static const std::vector<std::string> known = {"path", "det", "rescaled", "ensemble", "converge", "gamma", "report"};
    if (std::find(known.begin(), known.end(), options.subcommand) == known.end()) {
        err << "unknown subcommand '" << options.subcommand << "'\n";
        return exit_config;
    }
    RunConfig config;
    try {
        config = load_config(options.config_path);
        if (options.paths) config.analysis.paths = *options.paths;
        if (options.threads) config.analysis.threads = *options.threads;
        if (options.seed) config.noise.seed_base = *options.seed;
        if (options.out) config.output_dir = options.out->string();
    } catch (const std::exception& e) {
        err << error_kind(e) << ": " << e.what() << "\n";
        return exit_config;
    }
    const fs::path dir = config.output_dir;
    try {
        Runner runner(config, dir, out);
        const auto& cmd = options.subcommand;
        if (cmd == "path") return runner.path(false);
        if (cmd == "det") return runner.path(true);
        if (cmd == "rescaled") return runner.rescaled();
        if (cmd == "ensemble") return runner.ensemble();
        if (cmd == "converge") return runner.converge();
        if (cmd == "gamma") return runner.gamma();
        return runner.report(options.check);
    } catch (const SchemaError& e) {
        err << "SchemaError: " << e.what() << "\n";
        return exit_config;
    } catch (const ConsistencyError& e) {
        err << "ConsistencyError: " << e.what() << "\n";
        mark_failure(dir, "ConsistencyError", e.what());
        return exit_config;
    } catch (const std::exception& e) {
        err << error_kind(e) << ": " << e.what() << "\n";
        mark_failure(dir, error_kind(e), e.what());
        return exit_numeric;
    }
}

}  // namespace spme
