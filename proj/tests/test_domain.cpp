#include <doctest.h>

#include <cmath>
#include <numbers>

#include "spme/domain.hpp"
#include "spme/embedding.hpp"
#include "spme/errors.hpp"

using namespace spme;
using doctest::Approx;
constexpr double pi = std::numbers::pi;

namespace {

double max_diff(const Field& a, const Field& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("Laplacian of eigenfunctions") {
    const double L = 3.0;
    const auto per = Grid::make({1, L, 64, Boundary::periodic, {}});
    const Field s = Field::from_function(per, [&](const auto& x) { return std::sin(2 * pi * x[0] / L); });
    CHECK(max_diff(laplacian(s), s * -std::pow(2 * pi / L, 2)) < 1e-10);
    const Field c = Field::from_function(per, [](const auto&) { return 4.0; });
    CHECK(sup_norm(laplacian(c)) < 1e-12);

    const auto dir = Grid::make({1, L, 64, Boundary::dirichlet, {}});
    const Field e = Field::from_function(dir, [&](const auto& x) { return std::sin(pi * x[0] / L); });
    CHECK(max_diff(laplacian(e), e * -std::pow(pi / L, 2)) < 1e-10);
}

TEST_CASE("shifted Laplacian inverse") {
    const auto dir = Grid::make({2, pi, 16, Boundary::dirichlet, {}});
    const Field e = Field::from_function(dir, [](const auto& x) { return std::sin(x[0]) * std::sin(2 * x[1]); });
    CHECK(max_diff(inv_shifted_laplacian(e, 1.0), e * (1.0 / 6.0)) < 1e-12);
    const Field r = Field::from_function(dir, [](const auto& x) { return x[0] * (pi - x[1]); });
    CHECK(max_diff(shifted_laplacian(inv_shifted_laplacian(r, 0.3), 0.3), r) < 1e-10);
    CHECK(sup_norm(inv_shifted_laplacian(Field(dir), 2.0)) == 0.0);
}

TEST_CASE("negative norms") {
    const auto dir = Grid::make({1, pi, 64, Boundary::dirichlet, {}});
    const Field s = Field::from_function(dir, [](const auto& x) { return std::sin(x[0]); });
    CHECK(hminus1_norm(s) == Approx(lp_norm(s, 2.0)).epsilon(1e-12));
    CHECK(hminus1_norm(Field(dir)) == 0.0);

    // eigenvalue 4, unit L2 norm
    const Field e = Field::from_function(dir, [](const auto& x) { return std::sin(2 * x[0]); });
    const Field unit = e * (1.0 / lp_norm(e, 2.0));
    for (double nu : {0.5, 1.0, 7.0}) CHECK(hminus1_nu_norm(unit, nu) == Approx(1.0 / std::sqrt(nu + 4.0)));

    const Field r = Field::from_function(dir, [](const auto& x) { return x[0] * x[0]; });
    double prev = 1e300;
    for (double nu : {1e-6, 1e-3, 1.0, 10.0}) {
        const double v = hminus1_nu_norm(r, nu);
        CHECK(v <= prev);
        prev = v;
    }
    CHECK(hminus1_nu_norm(r, 1e-9) == Approx(hminus1_norm(r)).epsilon(1e-8));
}

TEST_CASE("periodic zero mode policy") {
    const auto per = Grid::make({1, 1.0, 32, Boundary::periodic, {}});
    const Field c = Field::from_function(per, [](const auto&) { return 1.0; });
    CHECK_THROWS_AS(hminus1_norm(c), SingularMode);
    const auto shifted = Grid::make({1, 1.0, 32, Boundary::periodic, ZeroMode::shifted(0.25)});
    const Field cs = Field::from_function(shifted, [](const auto&) { return 1.0; });
    CHECK(hminus1_norm(cs) == Approx(2.0));  // |1|_2 / sqrt(eps0)
}

TEST_CASE("seminorms, Lp norms and mass") {
    const auto per = Grid::make({1, 1.0, 64, Boundary::periodic, {}});
    const Field s = Field::from_function(per, [](const auto& x) { return std::sin(2 * pi * x[0]); });
    CHECK(h1_seminorm(s) == Approx(2 * pi * lp_norm(s, 2.0)));
    CHECK(h1_seminorm(Field::from_function(per, [](const auto&) { return 2.0; })) < 1e-12);

    // indicator of a quarter of the box
    const Field ind = Field::from_function(per, [](const auto& x) { return x[0] < 0.25 ? 1.0 : 0.0; });
    CHECK(lp_norm(ind, 3.0) == Approx(std::pow(0.25, 1.0 / 3.0)));
    CHECK(mass(ind) == Approx(0.25));
    CHECK(mean(ind) == Approx(0.25));
    CHECK(l2_inner(ind, ind) == Approx(0.25));
}

TEST_CASE("snapshot round trip") {
    const auto g = Grid::make({2, 2.0, 8, Boundary::dirichlet, {}});
    const Field f = Field::from_function(g, [](const auto& x) { return x[0] - 3 * x[1]; });
    const auto stem = std::filesystem::temp_directory_path() / "spme_unit_snapshot";
    write_field_snapshot(stem, f, 0.25);
    double t = 0.0;
    const Field back = read_field_snapshot(stem, &t);
    CHECK(t == 0.25);
    CHECK(back.data() == f.data());
}

TEST_CASE("embedding constant of the linear problem") {
    for (double L : {pi, 2.0}) {
        const auto g = Grid::make({1, L, 64, Boundary::dirichlet, {}});
        CHECK(embedding_constant(g, 1.0).gamma == Approx(pi / L).epsilon(1e-6));
    }
}

TEST_CASE("embedding quotient is attained by the maximizer") {
    const auto g = Grid::make({1, pi, 64, Boundary::dirichlet, {}});
    const auto res = embedding_constant(g, 0.5);
    CHECK(lp_norm(res.maximizer, 1.5) == Approx(1.0));
    CHECK(hminus1_norm(res.maximizer) == Approx(res.quotient));
    // any other admissible function does no better
    const Field s = Field::from_function(g, [](const auto& x) { return std::sin(x[0]) + 0.3 * std::sin(3 * x[0]); });
    CHECK(hminus1_norm(s) / lp_norm(s, 1.5) <= res.quotient * (1 + 1e-9));
}
