#include "spme/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>

#include "spme/errors.hpp"

namespace spme {

using nlohmann::json;

namespace {

// Typed access to one JSON object that remembers which keys were read.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw SchemaError(path_, "expected an object");
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return j_.contains(key); }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
        if (!has(key)) return require(key, fallback);
        const auto& v = raw(key);
        if (!v.is_number()) throw SchemaError(at(key), "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw SchemaError(at(key), "must be finite");
        return x;
    }

    std::int64_t integer(const std::string& key, std::optional<std::int64_t> fallback = std::nullopt) {
        if (!has(key)) return require(key, fallback);
        const auto& v = raw(key);
        if (!v.is_number_integer()) throw SchemaError(at(key), "expected an integer");
        return v.get<std::int64_t>();
    }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
            throw SchemaError(at(key), "expected a nonnegative integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (!v.is_boolean()) throw SchemaError(at(key), "expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
        if (!has(key)) return require(key, fallback);
        const auto& v = raw(key);
        if (!v.is_string()) throw SchemaError(at(key), "expected a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt) {
        if (!has(key)) return require(key, fallback);
        const auto& v = raw(key);
        if (!v.is_array()) throw SchemaError(at(key), "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) throw SchemaError(at(key) + "[" + std::to_string(i) + "]", "expected a number");
            out.push_back(v[i].get<double>());
        }
        return out;
    }

    std::vector<int> integers(const std::string& key, std::optional<std::vector<int>> fallback = std::nullopt) {
        if (!has(key)) return require(key, fallback);
        const auto& v = raw(key);
        if (!v.is_array()) throw SchemaError(at(key), "expected an array of integers");
        std::vector<int> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number_integer())
                throw SchemaError(at(key) + "[" + std::to_string(i) + "]", "expected an integer");
            out.push_back(v[i].get<int>());
        }
        return out;
    }

    std::optional<Section> child(const std::string& key) {
        if (!has(key)) return std::nullopt;
        return Section(raw(key), at(key));
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key)) throw SchemaError(at(key), "unknown key");
    }

private:
    template <class T>
    T require(const std::string& key, const std::optional<T>& fallback) const {
        if (!fallback) throw SchemaError(at(key), "required key is missing");
        return *fallback;
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

DomainSpec parse_domain(Section s) {
    DomainSpec d;
    d.d = static_cast<int>(s.integer("d", 1));
    if (d.d < 1 || d.d > 3) throw SchemaError(s.at("d"), "must be 1, 2 or 3");
    d.L = s.number("L", 1.0);
    if (!(d.L > 0.0)) throw SchemaError(s.at("L"), "must be > 0");
    d.N = static_cast<int>(s.integer("N", 64));
    if (d.N < 8 || (d.N & (d.N - 1)) != 0) throw SchemaError(s.at("N"), "must be a power of two >= 8");
    const auto b = s.string("boundary", std::string("periodic"));
    if (b == "periodic") d.boundary = Boundary::periodic;
    else if (b == "dirichlet") d.boundary = Boundary::dirichlet;
    else throw SchemaError(s.at("boundary"), "expected \"periodic\" or \"dirichlet\"");
    if (auto z = s.child("zero_mode")) {
        const auto policy = z->string("policy", std::string("exclude"));
        if (policy == "exclude") {
            d.zero_mode = ZeroMode::exclude();
        } else if (policy == "shift") {
            const double eps0 = z->number("eps0");
            if (!(eps0 > 0.0)) throw SchemaError(z->at("eps0"), "must be > 0");
            d.zero_mode = ZeroMode::shifted(eps0);
        } else {
            throw SchemaError(z->at("policy"), "expected \"exclude\" or \"shift\"");
        }
        z->finish();
    }
    s.finish();
    return d;
}

MonotoneGraph parse_graph(Section s) {
    const auto kind = s.string("kind");
    auto wrap = [&](auto&& make) {
        try {
            return make();
        } catch (const DomainError& e) {
            throw SchemaError(s.at("kind"), e.what());
        }
    };
    MonotoneGraph g = MonotoneGraph::linear(1.0);
    if (kind == "power") {
        const double m = s.number("m"), rho = s.number("rho", 1.0);
        g = wrap([&] { return MonotoneGraph::power(m, rho); });
    } else if (kind == "heaviside") {
        const double rho = s.number("rho", 1.0), rc = s.number("r_c", 0.0), alpha = s.number("alpha", 0.0);
        g = wrap([&] { return MonotoneGraph::heaviside(rho, rc, alpha); });
    } else if (kind == "tabulated" || kind == "lipschitz") {
        auto r = s.numbers("r"), y = s.numbers("y");
        g = wrap([&] { return MonotoneGraph::tabulated(r, y); });
    } else if (kind == "linear") {
        const double a = s.number("a", 1.0);
        g = wrap([&] { return MonotoneGraph::linear(a); });
    } else {
        throw SchemaError(s.at("kind"), "unknown graph kind \"" + kind + "\"");
    }
    s.finish();
    return g;
}

NoiseSpec parse_noise(Section s) {
    NoiseSpec n;
    n.seed_base = s.unsigned_integer("seed_base", 0);
    if (s.has("modes")) {
        const auto& arr = s.raw("modes");
        if (!arr.is_array()) throw SchemaError(s.at("modes"), "expected an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Section m(arr[i], s.at("modes") + "[" + std::to_string(i) + "]");
            NoiseMode mode;
            mode.mu = m.number("mu");
            const auto shape = m.string("shape", std::string("constant"));
            if (shape == "constant") mode.shape = ModeShape::constant;
            else if (shape == "cos" || shape == "cosine") mode.shape = ModeShape::cosine;
            else if (shape == "sin" || shape == "sine") mode.shape = ModeShape::sine;
            else throw SchemaError(m.at("shape"), "expected constant, cos or sin");
            mode.amplitude = m.number("amplitude", 1.0);
            if (mode.shape != ModeShape::constant) mode.wavevector = m.integers("wavevector");
            else mode.wavevector = m.integers("wavevector", std::vector<int>{});
            m.finish();
            n.modes.push_back(std::move(mode));
        }
    }
    s.finish();
    return n;
}

SolverConfig parse_solver(Section s) {
    SolverConfig c;
    c.dt = s.number("dt", c.dt);
    c.T = s.number("T", c.T);
    c.lambda = s.number("lambda", c.lambda);
    c.nu = s.number("nu", c.nu);
    c.inner_tol = s.number("inner_tol", c.inner_tol);
    c.inner_budget = static_cast<int>(s.integer("inner_budget", c.inner_budget));
    c.save_every = static_cast<int>(s.integer("save_every", c.save_every));
    c.snapshots = s.boolean("snapshots", c.snapshots);
    c.positivity_clip = s.boolean("positivity_clip", c.positivity_clip);
    c.positivity_tol = s.number("positivity_tol", c.positivity_tol);
    c.noise_substeps = static_cast<int>(s.integer("noise_substeps", c.noise_substeps));
    const auto method = s.string("inner_method", std::string("newton"));
    if (method == "newton") c.inner_method = InnerMethod::newton;
    else if (method == "fixed_point") c.inner_method = InnerMethod::fixed_point;
    else throw SchemaError(s.at("inner_method"), "expected \"newton\" or \"fixed_point\"");
    if (!(c.dt > 0.0)) throw SchemaError(s.at("dt"), "must be > 0");
    if (!(c.T > 0.0)) throw SchemaError(s.at("T"), "must be > 0");
    if (c.lambda < 0.0) throw SchemaError(s.at("lambda"), "must be >= 0");
    if (c.nu < 0.0) throw SchemaError(s.at("nu"), "must be >= 0");
    if (!(c.inner_tol > 0.0)) throw SchemaError(s.at("inner_tol"), "must be > 0");
    if (c.inner_budget < 1) throw SchemaError(s.at("inner_budget"), "must be >= 1");
    if (c.save_every < 1) throw SchemaError(s.at("save_every"), "must be >= 1");
    if (c.noise_substeps < 1) throw SchemaError(s.at("noise_substeps"), "must be >= 1");
    s.finish();
    return c;
}

InitialSpec parse_initial(Section s) {
    const auto kind = s.string("kind", std::string("bump"));
    InitialSpec out;
    if (kind == "bump") {
        BumpInitial b;
        b.center = s.numbers("center", std::vector<double>{});
        b.radius = s.number("radius", b.radius);
        b.height = s.number("height", b.height);
        b.floor = s.number("floor", b.floor);
        if (!(b.radius > 0.0)) throw SchemaError(s.at("radius"), "must be > 0");
        out = b;
    } else if (kind == "mode") {
        ModeInitial m;
        m.wavevector = s.integers("wavevector");
        m.amplitude = s.number("amplitude", m.amplitude);
        m.shape = s.string("shape", m.shape);
        m.offset = s.number("offset", m.offset);
        if (m.shape != "sin" && m.shape != "cos") throw SchemaError(s.at("shape"), "expected \"sin\" or \"cos\"");
        out = m;
    } else if (kind == "file") {
        out = FileInitial{s.string("path")};
    } else {
        throw SchemaError(s.at("kind"), "expected bump, mode or file");
    }
    s.finish();
    return out;
}

AnalysisConfig parse_analysis(Section s) {
    AnalysisConfig a;
    a.theta_ext = s.number("theta_ext", a.theta_ext);
    if (!(a.theta_ext > 0.0 && a.theta_ext < 1.0)) throw SchemaError(s.at("theta_ext"), "must lie in (0, 1)");
    const auto policy = s.string("cstar_policy", std::string("c_infinity_sq"));
    if (policy == "c_infinity_sq") a.cstar_policy = CstarPolicy::c_infinity_sq;
    else if (policy == "estimate") a.cstar_policy = CstarPolicy::estimate;
    else if (policy == "fixed") a.cstar_policy = CstarPolicy::fixed;
    else throw SchemaError(s.at("cstar_policy"), "expected c_infinity_sq, estimate or fixed");
    a.cstar_value = s.number("cstar_value", a.cstar_value);
    if (a.cstar_value < 0.0) throw SchemaError(s.at("cstar_value"), "must be >= 0");
    a.report_grid = s.numbers("report_grid", std::vector<double>{});
    a.gamma_starts = static_cast<int>(s.integer("gamma_starts", a.gamma_starts));
    if (a.gamma_starts < 1) throw SchemaError(s.at("gamma_starts"), "must be >= 1");
    a.gamma_seed = s.unsigned_integer("gamma_seed", a.gamma_seed);
    const auto paths = s.integer("paths", 1);
    if (paths < 1) throw SchemaError(s.at("paths"), "must be >= 1");
    a.paths = static_cast<std::size_t>(paths);
    a.threads = static_cast<int>(s.integer("threads", 0));
    const auto ladder = s.string("ladder", std::string("lambda"));
    if (ladder == "lambda") a.ladder = LadderParameter::lambda;
    else if (ladder == "nu") a.ladder = LadderParameter::nu;
    else if (ladder == "dt") a.ladder = LadderParameter::dt;
    else throw SchemaError(s.at("ladder"), "expected lambda, nu or dt");
    a.ladder_values = s.numbers("ladder_values", std::vector<double>{});
    a.rescaled_dts = s.numbers("rescaled_dts", std::vector<double>{});
    a.independent_check = s.boolean("independent_check", a.independent_check);
    a.snapshot_terminal = s.boolean("snapshot_terminal", a.snapshot_terminal);
    s.finish();
    return a;
}

void cross_check(const RunConfig& c) {
    const auto& s = c.solver;
    if (s.dt > s.T) throw ConsistencyError("solver.dt", "solver.T", "dt must not exceed T");
    if (s.lambda == 0.0 && !c.graph.is_lipschitz())
        throw ConsistencyError("solver.lambda", "graph.kind",
                               "lambda = 0 requires a Lipschitz graph, got " + c.graph.kind_name());
    if (c.domain.boundary == Boundary::periodic && s.nu == 0.0 && c.domain.zero_mode.shift)
        throw ConsistencyError("solver.nu", "domain.zero_mode",
                               "nu = 0 on a periodic box needs the exclude zero-mode policy");
    if (c.domain.boundary == Boundary::dirichlet && c.domain.zero_mode.shift)
        throw ConsistencyError("domain.zero_mode", "domain.boundary", "zero-mode policy applies to periodic boxes only");
    for (std::size_t i = 0; i < c.noise.modes.size(); ++i) {
        const auto& m = c.noise.modes[i];
        if (m.shape != ModeShape::constant && static_cast<int>(m.wavevector.size()) != c.domain.d)
            throw ConsistencyError("noise.modes[" + std::to_string(i) + "].wavevector", "domain.d",
                                   "wave vector length must equal the dimension");
    }
    if (const auto* b = std::get_if<BumpInitial>(&c.initial)) {
        if (!b->center.empty() && static_cast<int>(b->center.size()) != c.domain.d)
            throw ConsistencyError("initial.center", "domain.d", "center length must equal the dimension");
    }
    if (const auto* m = std::get_if<ModeInitial>(&c.initial)) {
        if (static_cast<int>(m->wavevector.size()) != c.domain.d)
            throw ConsistencyError("initial.wavevector", "domain.d", "wave vector length must equal the dimension");
    }
    if (c.analysis.cstar_policy == CstarPolicy::estimate && c.domain.boundary != Boundary::dirichlet)
        throw ConsistencyError("analysis.cstar_policy", "domain.boundary",
                               "extinction analysis with an estimated C* needs a Dirichlet box");
    if (c.analysis.cstar_policy == CstarPolicy::fixed && !(c.analysis.cstar_value >= 0.0))
        throw ConsistencyError("analysis.cstar_policy", "analysis.cstar_value", "fixed policy needs cstar_value");
}

json graph_json(const MonotoneGraph& g) {
    return std::visit(
        [](const auto& k) -> json {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, PowerGraph>) return {{"kind", "power"}, {"m", k.m}, {"rho", k.rho}};
            else if constexpr (std::is_same_v<T, HeavisideGraph>)
                return {{"kind", "heaviside"}, {"rho", k.rho}, {"r_c", k.r_c}, {"alpha", k.alpha}};
            else if constexpr (std::is_same_v<T, TabulatedGraph>) return {{"kind", "tabulated"}, {"r", k.r}, {"y", k.y}};
            else return {{"kind", "linear"}, {"a", k.a}};
        },
        g.kind());
}

const char* shape_name(ModeShape s) {
    switch (s) {
        case ModeShape::constant: return "constant";
        case ModeShape::cosine: return "cos";
        case ModeShape::sine: return "sin";
    }
    return "constant";
}

}  // namespace

std::string to_string(CstarPolicy p) {
    switch (p) {
        case CstarPolicy::c_infinity_sq: return "c_infinity_sq";
        case CstarPolicy::estimate: return "estimate";
        case CstarPolicy::fixed: return "fixed";
    }
    return "?";
}

RunConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
    Section root(j, "");
    RunConfig c;
    c.base_dir = base_dir;
    if (auto s = root.child("domain")) c.domain = parse_domain(*s);
    if (auto s = root.child("graph")) c.graph = parse_graph(*s);
    else throw SchemaError("graph", "required key is missing");
    if (auto s = root.child("noise")) c.noise = parse_noise(*s);
    if (auto s = root.child("solver")) c.solver = parse_solver(*s);
    if (auto s = root.child("initial")) c.initial = parse_initial(*s);
    if (auto s = root.child("analysis")) c.analysis = parse_analysis(*s);
    c.output_dir = root.string("output_dir", c.output_dir);
    root.finish();
    cross_check(c);
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("", "cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError("", std::string("invalid JSON: ") + e.what());
    }
    return parse_config(j, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

json to_json(const RunConfig& c) {
    json j;
    json zm = {{"policy", c.domain.zero_mode.shift ? "shift" : "exclude"}};
    if (c.domain.zero_mode.shift) zm["eps0"] = c.domain.zero_mode.eps0;
    j["domain"] = {{"d", c.domain.d},
                   {"L", c.domain.L},
                   {"N", c.domain.N},
                   {"boundary", to_string(c.domain.boundary)},
                   {"zero_mode", zm}};
    j["graph"] = graph_json(c.graph);
    json modes = json::array();
    for (const auto& m : c.noise.modes) {
        json mj = {{"mu", m.mu}, {"shape", shape_name(m.shape)}, {"amplitude", m.amplitude}};
        mj["wavevector"] = m.wavevector;
        modes.push_back(mj);
    }
    j["noise"] = {{"seed_base", c.noise.seed_base}, {"modes", modes}};
    const auto& s = c.solver;
    j["solver"] = {{"dt", s.dt},
                   {"T", s.T},
                   {"lambda", s.lambda},
                   {"nu", s.nu},
                   {"inner_tol", s.inner_tol},
                   {"inner_budget", s.inner_budget},
                   {"save_every", s.save_every},
                   {"snapshots", s.snapshots},
                   {"positivity_clip", s.positivity_clip},
                   {"positivity_tol", s.positivity_tol},
                   {"noise_substeps", s.noise_substeps},
                   {"inner_method", s.inner_method == InnerMethod::newton ? "newton" : "fixed_point"}};
    j["initial"] = std::visit(
        [](const auto& i) -> json {
            using T = std::decay_t<decltype(i)>;
            if constexpr (std::is_same_v<T, BumpInitial>)
                return {{"kind", "bump"}, {"center", i.center}, {"radius", i.radius}, {"height", i.height},
                        {"floor", i.floor}};
            else if constexpr (std::is_same_v<T, ModeInitial>)
                return {{"kind", "mode"}, {"wavevector", i.wavevector}, {"amplitude", i.amplitude},
                        {"shape", i.shape}, {"offset", i.offset}};
            else return {{"kind", "file"}, {"path", i.path}};
        },
        c.initial);
    const auto& a = c.analysis;
    j["analysis"] = {{"theta_ext", a.theta_ext},
                     {"cstar_policy", to_string(a.cstar_policy)},
                     {"cstar_value", a.cstar_value},
                     {"report_grid", a.report_grid},
                     {"gamma_starts", a.gamma_starts},
                     {"gamma_seed", a.gamma_seed},
                     {"paths", a.paths},
                     {"threads", a.threads},
                     {"ladder", to_string(a.ladder)},
                     {"ladder_values", a.ladder_values},
                     {"rescaled_dts", a.rescaled_dts},
                     {"independent_check", a.independent_check},
                     {"snapshot_terminal", a.snapshot_terminal}};
    j["output_dir"] = c.output_dir;
    return j;
}

std::string config_hash(const RunConfig& c) {
    const std::string text = to_json(c).dump();
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Field make_initial(const RunConfig& c, const GridPtr& grid) {
    const double L = c.domain.L;
    const int d = c.domain.d;
    return std::visit(
        [&](const auto& init) -> Field {
            using T = std::decay_t<decltype(init)>;
            if constexpr (std::is_same_v<T, BumpInitial>) {
                std::vector<double> centre = init.center;
                if (centre.empty()) centre.assign(d, 0.5 * L);
                return Field::from_function(grid, [&](const std::vector<double>& x) {
                    double s2 = 0.0;
                    for (int a = 0; a < d; ++a) s2 += (x[a] - centre[a]) * (x[a] - centre[a]);
                    s2 /= init.radius * init.radius;
                    const double bump = s2 < 1.0 ? init.height * std::exp(1.0 - 1.0 / (1.0 - s2)) : 0.0;
                    return bump + init.floor;
                });
            } else if constexpr (std::is_same_v<T, ModeInitial>) {
                const bool periodic = c.domain.boundary == Boundary::periodic;
                return Field::from_function(grid, [&](const std::vector<double>& x) {
                    if (periodic) {
                        double phase = 0.0;
                        for (int a = 0; a < d; ++a) phase += 2.0 * std::numbers::pi * init.wavevector[a] * x[a] / L;
                        return init.amplitude * (init.shape == "sin" ? std::sin(phase) : std::cos(phase)) +
                               init.offset;
                    }
                    double v = init.amplitude;
                    for (int a = 0; a < d; ++a) v *= std::sin(std::numbers::pi * init.wavevector[a] * x[a] / L);
                    return v + init.offset;
                });
            } else {
                std::filesystem::path p = init.path;
                if (p.is_relative()) p = c.base_dir / p;
                Field f = read_field_snapshot(p);
                const auto& s = f.domain().spec();
                if (s.d != c.domain.d || s.N != c.domain.N || s.L != c.domain.L || s.boundary != c.domain.boundary)
                    throw ConsistencyError("initial.path", "domain", "stored field does not match the domain");
                return Field(grid, f.data());
            }
        },
        c.initial);
}

}  // namespace spme
