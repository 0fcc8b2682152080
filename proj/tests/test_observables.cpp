#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "spme/errors.hpp"
#include "spme/observables.hpp"
#include "spme/stats.hpp"

using namespace spme;
using doctest::Approx;

namespace {

Trajectory series(const std::vector<double>& h) {
    Trajectory t;
    for (std::size_t i = 0; i < h.size(); ++i) {
        ObservableRecord r;
        r.step = static_cast<std::int64_t>(i);
        r.t = 0.1 * static_cast<double>(i);
        r.hminus1 = h[i];
        t.records.push_back(r);
    }
    return t;
}

}  // namespace

TEST_CASE("extinction time") {
    CHECK(extinction_time(series({0.0, 0.0})) == 0.0);
    CHECK(extinction_time(series({1.0, 0.5, 1e-7, 0.0})) == Approx(0.2));
    CHECK_FALSE(extinction_time(series({1.0, 0.5, 0.1})).has_value());
    CHECK(extinction_time(series({1.0, 0.5, 0.1}), 0.2) == Approx(0.2));
}

TEST_CASE("deterministic bound") {
    CHECK(deterministic_extinction_bound(0.0, 1.0, 2.0, 0.5) == 0.0);
    // ||x||^{1/2} / (rho (1/2) gamma^{3/2})
    CHECK(deterministic_extinction_bound(4.0, 2.0, 1.0, 0.5) == Approx(2.0 / (2.0 * 0.5)));
}

TEST_CASE("probability bound") {
    for (double t : {0.1, 1.0, 10.0}) CHECK(extinction_prob_bound(0.0, t, 1.0, 1.0, 0.5, 2.0) == 1.0);
    const double x = 0.3, rho = 1.2, g = 0.9, m = 0.4, c = 0.7;
    const double lim = 1.0 - std::pow(x, 1 - m) * c / (rho * std::pow(g, m + 1));
    CHECK(extinction_prob_limit(x, rho, g, m, c) == Approx(lim));
    CHECK(extinction_prob_bound(x, 1e4, rho, g, m, c) == Approx(lim));
    // small t: 1 - x^{1-m} / (rho (1-m) gamma^{m+1} t)
    const double t = 1e-3;
    const double exact = 1.0 - std::pow(x, 1 - m) * c / (rho * std::pow(g, m + 1) * (1.0 - std::exp(-c * (1 - m) * t)));
    CHECK(extinction_prob_bound(x, t, rho, g, m, c) == Approx(exact).epsilon(1e-12));
    CHECK(extinction_prob_bound(x, 2.0, rho, g, m, 0.0) ==
          Approx(1.0 - std::pow(x, 1 - m) / (rho * (1 - m) * std::pow(g, m + 1) * 2.0)));
    CHECK(extinction_prob_bound(x, 2.0, rho, g, m, 1e-12) == Approx(extinction_prob_bound(x, 2.0, rho, g, m, 0.0)));
    CHECK(extinction_prob_bound_from_proof(x, 2.0, rho, g, m, c) == Approx(extinction_prob_bound(x, 2.0, rho, g, m, c)));
}

TEST_CASE("smallness conditions") {
    const auto s = smallness_conditions(0.25, 1.0, 1.0, 0.5, 2.0);
    CHECK(s.threshold == Approx(0.5));
    CHECK(s.norm_condition);
    CHECK_FALSE(s.power_condition);  // 0.25^{1/2} = 0.5 is not below 0.5
    CHECK(smallness_conditions(0.2, 1.0, 1.0, 0.5, 2.0).power_condition);
    const auto z = smallness_conditions(100.0, 1.0, 1.0, 0.5, 0.0);
    CHECK(std::isinf(z.threshold));
    CHECK(z.power_condition);
}

TEST_CASE("supermartingale statistic") {
    for (double v : supermartingale_statistic(series({0.0, 0.0, 0.0}), 1.0, 0.5)) CHECK(v == 0.0);
    const auto m = supermartingale_statistic(series({4.0, 1.0}), 2.0, 0.5);
    CHECK(m[0] == Approx(2.0));
    CHECK(m[1] == Approx(std::exp(-2.0 * 0.5 * 0.1)));
}

TEST_CASE("moment bound check") {
    const std::vector<double> sups = {1.0, 1.0, 1.0};
    const auto r = moment_bound_check(sups, 1.0, 0.0, 1.0);
    CHECK(r.bound == Approx(2.0));
    CHECK(r.pass);
    const std::vector<double> big = {5.0, 6.0};
    CHECK_FALSE(moment_bound_check(big, 1.0, 0.0, 1.0).pass);
}

TEST_CASE("stats") {
    const std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
    const auto e = mean_and_se(x);
    CHECK(e.mean == Approx(2.5));
    CHECK(e.se == Approx(std::sqrt(5.0 / 3.0 / 4.0)));
    CHECK(ucl95(e) == Approx(2.5 + 1.645 * e.se).epsilon(1e-3));

    const auto w0 = wilson_interval(0, 100);
    CHECK(w0.lo <= 1e-15);
    CHECK(w0.hi == Approx(3.0 / 100).epsilon(0.3));  // rule of three
    const auto w = wilson_interval(50, 100);
    CHECK(w.lo == Approx(0.4038).epsilon(1e-3));
    CHECK(w.hi == Approx(0.5962).epsilon(1e-3));

    const std::vector<double> xs = {1.0, 2.0, 4.0, 8.0};
    std::vector<double> ys;
    for (double v : xs) ys.push_back(3.0 * std::pow(v, 1.5));
    const auto f = fit_loglog(xs, ys);
    CHECK(f.slope == Approx(1.5));
    CHECK(std::exp(f.intercept) == Approx(3.0));
    CHECK(f.r2 == Approx(1.0));
    ys[0] = -1.0;
    CHECK_THROWS_AS(fit_loglog(xs, ys), DomainError);
}
