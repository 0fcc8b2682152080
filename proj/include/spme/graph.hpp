#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace spme {

/// psi(r) = rho |r|^{m-1} r, m > 0.
struct PowerGraph {
    double m = 1.0;
    double rho = 1.0;
};

/// psi(r) = rho H(r - r_c) + alpha r, with the jump filled in: psi(r_c) = [alpha r_c, alpha r_c + rho].
struct HeavisideGraph {
    double rho = 1.0;
    double r_c = 0.0;
    double alpha = 0.0;
};

/// Piecewise-linear interpolation of nondecreasing samples, extended linearly
/// with the end slopes. Requires psi(0) = 0.
struct TabulatedGraph {
    std::vector<double> r;
    std::vector<double> y;
};

struct LinearGraph {
    double a = 1.0;
};

using GraphKind = std::variant<PowerGraph, HeavisideGraph, TabulatedGraph, LinearGraph>;

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
    double project(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
};

/// psi(r) r >= rho |r|^{m+1}
struct Coercivity {
    double m;
    double rho;
};

/// A maximal monotone graph psi on the real line with 0 in psi(0).
///
/// Construction validates the kind's parameters and throws DomainError on
/// anything that would break monotonicity or the 0 in psi(0) normalization.
class MonotoneGraph {
public:
    explicit MonotoneGraph(GraphKind kind);

    static MonotoneGraph power(double m, double rho);
    static MonotoneGraph heaviside(double rho, double r_c, double alpha);
    static MonotoneGraph tabulated(std::vector<double> r, std::vector<double> y);
    static MonotoneGraph linear(double a);

    const GraphKind& kind() const noexcept { return kind_; }
    std::string kind_name() const;

    /// Exponent m and constant C with sup|psi(r)| <= C (1 + |r|^m).
    double growth_exponent() const noexcept { return growth_m_; }
    double growth_constant() const noexcept { return growth_c_; }
    std::optional<Coercivity> coercivity() const noexcept { return coercive_; }

    bool is_lipschitz() const noexcept;
    /// +inf when not Lipschitz.
    double lipschitz_constant() const noexcept;

    /// Derivative of the single-valued branch at r; +inf at jumps and at
    /// points of infinite slope (power graphs with m < 1 at r = 0).
    double slope(double r) const noexcept;

private:
    GraphKind kind_;
    double growth_m_ = 1.0;
    double growth_c_ = 0.0;
    std::optional<Coercivity> coercive_;
    // cumulative antiderivative of the tabulated graph at its breakpoints, shifted so that j(0) = 0
    std::vector<double> tab_integral_;

    friend double potential(const MonotoneGraph& g, double r);
};

/// Closed interval psi(r); degenerate where psi is single-valued.
Interval eval_graph(const MonotoneGraph& g, double r);

/// (1 + lambda psi)^{-1}(s). Throws NonConvergence when the scalar solve
/// misses its residual contract within 200 iterations.
double resolvent(const MonotoneGraph& g, double lambda, double s);

/// Yosida approximation psi_lambda(r) = (r - resolvent(g, lambda, r)) / lambda.
double yosida(const MonotoneGraph& g, double lambda, double r);

/// Convex potential j with j' = psi and j(0) = 0.
double potential(const MonotoneGraph& g, double r);

/// Moreau envelope j_lambda(r) = |r - p|^2 / (2 lambda) + j(p), p = resolvent(g, lambda, r).
double moreau_envelope(const MonotoneGraph& g, double lambda, double r);

/// Residual of the resolvent equation: |p + lambda proj_{psi(p)}((s - p)/lambda) - s|.
double resolvent_residual(const MonotoneGraph& g, double lambda, double s, double p);

}  // namespace spme
