#include <doctest.h>

#include <json.hpp>

#include "spme/config.hpp"
#include "spme/errors.hpp"

using namespace spme;
using nlohmann::json;

namespace {

json minimal() {
    return {
        {"domain", {{"d", 1}, {"L", 3.14159}, {"N", 32}, {"boundary", "dirichlet"}}},
        {"graph", {{"kind", "power"}, {"m", 0.5}, {"rho", 1.0}}},
        {"solver", {{"dt", 1e-3}, {"T", 0.1}, {"lambda", 1e-3}}},
    };
}

}  // namespace

TEST_CASE("round trip is idempotent") {
    const auto a = parse_config(minimal());
    const json j = to_json(a);
    const auto b = parse_config(j);
    CHECK(to_json(b) == j);
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
}

TEST_CASE("defaults are materialized") {
    const auto c = parse_config(minimal());
    CHECK(c.analysis.theta_ext == 1e-6);
    CHECK(c.solver.inner_tol == 1e-10);
    CHECK(c.solver.inner_budget == 10000);
    CHECK_FALSE(c.solver.positivity_clip);
    CHECK(to_json(c)["analysis"]["theta_ext"] == 1e-6);
}

TEST_CASE("lambda = 0 with a power graph is inconsistent") {
    auto j = minimal();
    j["graph"]["m"] = 0.2;
    j["solver"]["lambda"] = 0.0;
    CHECK_THROWS_AS(parse_config(j), ConsistencyError);
    j["graph"] = {{"kind", "linear"}, {"a", 1.0}};
    CHECK_NOTHROW(parse_config(j));
}

TEST_CASE("schema errors name the offending key") {
    auto j = minimal();
    j["solver"]["dtt"] = 1.0;
    try {
        parse_config(j);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("solver.dtt") != std::string::npos);
    }
    auto k = minimal();
    k["graph"]["kind"] = "cubic";
    CHECK_THROWS_AS(parse_config(k), SchemaError);
    auto l = minimal();
    l["solver"]["dt"] = "small";
    CHECK_THROWS_AS(parse_config(l), SchemaError);
}

TEST_CASE("cross-field rules") {
    auto j = minimal();
    j["domain"]["zero_mode"] = {{"policy", "shift"}, {"eps0", 1e-3}};
    CHECK_THROWS_AS(parse_config(j), ConsistencyError);  // shift needs a periodic box

    auto k = minimal();
    k["initial"] = {{"kind", "bump"}, {"center", {1.0, 2.0}}};
    CHECK_THROWS_AS(parse_config(k), ConsistencyError);

    auto p = minimal();
    p["domain"]["boundary"] = "periodic";
    p["analysis"] = {{"cstar_policy", "estimate"}};
    CHECK_THROWS_AS(parse_config(p), ConsistencyError);
}

TEST_CASE("initial conditions") {
    auto j = minimal();
    j["initial"] = {{"kind", "mode"}, {"wavevector", {2}}, {"amplitude", 0.5}};
    const auto c = parse_config(j);
    const auto grid = Grid::make(c.domain);
    const Field f = make_initial(c, grid);
    const double L = c.domain.L;
    for (std::size_t i = 0; i < f.size(); ++i)
        CHECK(f[i] == doctest::Approx(0.5 * std::sin(2 * 3.141592653589793 * grid->coordinate(i, 0) / L)));

    auto b = minimal();
    b["initial"] = {{"kind", "bump"}, {"radius", 0.5}, {"height", 2.0}};
    const auto cb = parse_config(b);
    const Field fb = make_initial(cb, Grid::make(cb.domain));
    CHECK(sup_norm(fb) <= 2.0);
    CHECK(sup_norm(fb) > 1.9);
}
