#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "spme/noise.hpp"
#include "spme/stats.hpp"

using namespace spme;
using doctest::Approx;
constexpr double pi = std::numbers::pi;

TEST_CASE("noise constants") {
    const auto g = Grid::make({1, 1.0, 32, Boundary::periodic, {}});
    NoiseSpec none;
    none.modes = {NoiseMode::constant(0.0)};
    CHECK(c_infinity_sq(none, g).c_infinity_sq == 0.0);

    NoiseSpec one;
    one.modes = {NoiseMode::constant(0.4)};
    CHECK(c_infinity_sq(one, g).c_infinity_sq == Approx(72 * 0.16));

    // cos(2 pi x): |e|_inf = 1, |grad e|_inf = 2 pi
    NoiseSpec cosine;
    cosine.modes = {NoiseMode::cosine(0.5, {1})};
    CHECK(c_infinity_sq(cosine, g).c_infinity_sq == Approx(36 * 0.25 * (4 * pi * pi + 2)).epsilon(1e-9));
}

TEST_CASE("Philox known-answer vectors") {
    // Random123 kat_vectors for philox4x32_10
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == std::array<std::uint32_t, 4>{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          std::array<std::uint32_t, 4>{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
}

TEST_CASE("keyed normals are deterministic and standard") {
    CHECK(keyed_normal(3, 4, 5, 0) == keyed_normal(3, 4, 5, 0));
    CHECK(keyed_normal(3, 4, 5, 0) != keyed_normal(3, 4, 5, 1));
    std::vector<double> x;
    for (std::uint64_t i = 0; i < 20000; ++i) x.push_back(keyed_normal(9, i, 0, 0));
    const auto e = mean_and_se(x);
    CHECK(std::abs(e.mean) < 4 * e.se);
    double v = 0.0;
    for (double xi : x) v += xi * xi;
    CHECK(v / x.size() == Approx(1.0).epsilon(0.03));
}

TEST_CASE("substep increments aggregate the fine path") {
    NoiseSpec n;
    n.seed_base = 2;
    n.modes = {NoiseMode::constant(1.0), NoiseMode::sine(1.0, {1})};
    const double dt = 0.01;
    const auto coarse = sample_increments(n, 7, 3, 4 * dt, 4);
    std::vector<double> sum(2, 0.0);
    for (int j = 0; j < 4; ++j) {
        const auto fine = sample_increments(n, 7, 12 + j, dt, 1);
        for (int k = 0; k < 2; ++k) sum[k] += fine[k];
    }
    for (int k = 0; k < 2; ++k) CHECK(coarse[k] == Approx(sum[k]).epsilon(1e-14));
}

TEST_CASE("noise increment") {
    const auto g = Grid::make({1, 1.0, 16, Boundary::periodic, {}});
    const Field x = Field::from_function(g, [](const auto& p) { return 1.0 + p[0]; });
    NoiseSpec n;
    n.modes = {NoiseMode::constant(0.5, 2.0), NoiseMode::cosine(0.25, {1})};
    const std::vector<double> zero = {0.0, 0.0};
    CHECK(sup_norm(apply_noise_increment(x, n, zero)) == 0.0);
    const std::vector<double> inc = {0.1, -0.2};
    const Field out = apply_noise_increment(x, n, inc);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double p = g->coordinate(i, 0);
        CHECK(out[i] == Approx(0.5 * 2.0 * x[i] * 0.1 + 0.25 * std::cos(2 * pi * p) * x[i] * -0.2));
    }
}

TEST_CASE("multiplier ratios") {
    const auto g = Grid::make({1, pi, 64, Boundary::dirichlet, {}});
    const Field x = Field::from_function(g, [](const auto& p) { return std::sin(2 * p[0]); });
    const auto r1 = multiplier_bound_check(NoiseMode::constant(1.0), x);
    CHECK(r1.ratio_homogeneous == Approx(1.0));
    CHECK(r1.factor_sup_form >= 1.0);
    const auto r3 = multiplier_bound_check(NoiseMode::constant(1.0, -3.0), x);
    CHECK(r3.ratio_homogeneous == Approx(3.0));
}
