#include "spme/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "spme/errors.hpp"

namespace spme {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kScalarBudget = 200;
constexpr double kScalarTol = 1e-12;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double tab_slope(const TabulatedGraph& t, std::size_t seg) {
    return (t.y[seg + 1] - t.y[seg]) / (t.r[seg + 1] - t.r[seg]);
}

// Segment index whose interval [r_i, r_{i+1}) holds r; end segments absorb the tails.
std::size_t tab_segment(const TabulatedGraph& t, double r) {
    const auto n = t.r.size();
    if (r <= t.r.front()) return 0;
    if (r >= t.r.back()) return n - 2;
    auto it = std::upper_bound(t.r.begin(), t.r.end(), r);
    return static_cast<std::size_t>(it - t.r.begin()) - 1;
}

double tab_value(const TabulatedGraph& t, double r) {
    const auto i = tab_segment(t, r);
    return t.y[i] + tab_slope(t, i) * (r - t.r[i]);
}

// q >= 0 solving q + a q^m = S, by monotone Newton from an upper bound on the
// convex side of the equation.
double power_positive_root(double m, double a, double S) {
    if (S == 0.0) return 0.0;
    if (a == 0.0) return S;
    if (m == 1.0) return S / (1.0 + a);
    if (m == 2.0) return 2.0 * S / (1.0 + std::sqrt(1.0 + 4.0 * a * S));
    if (m == 0.5) {
        const double v = 2.0 * S / (a + std::sqrt(a * a + 4.0 * S));
        return v * v;
    }
    if (m < 1.0) {
        // v = q^m; g(v) = v^{1/m} + a v - S is convex increasing on v >= 0
        const double inv_m = 1.0 / m;
        double v = std::min(S / a, std::pow(S, m));
        for (int it = 0; it < kScalarBudget; ++it) {
            const double vp = std::pow(v, inv_m - 1.0);
            const double g = v * vp + a * v - S;
            const double dg = inv_m * vp + a;
            const double step = g / dg;
            const double next = v - step;
            if (!(next > 0.0)) {
                v *= 0.5;
                continue;
            }
            if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * v) {
                v = next;
                return std::pow(v, inv_m);
            }
            v = next;
        }
        const double q = std::pow(v, inv_m);
        const double res = std::abs(q + a * std::pow(q, m) - S);
        if (res <= kScalarTol * std::max(1.0, S)) return q;
        throw NonConvergence("power resolvent: scalar Newton exceeded budget", res);
    }
    // m > 1: f(q) = q + a q^m is convex increasing
    double q = std::min(S, std::pow(S / a, 1.0 / m));
    for (int it = 0; it < kScalarBudget; ++it) {
        const double qp = std::pow(q, m - 1.0);
        const double f = q + a * q * qp - S;
        const double df = 1.0 + a * m * qp;
        const double step = f / df;
        const double next = q - step;
        if (!(next > 0.0)) {
            q *= 0.5;
            continue;
        }
        if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * q) return next;
        q = next;
    }
    const double res = std::abs(q + a * std::pow(q, m) - S);
    if (res <= kScalarTol * std::max(1.0, S)) return q;
    throw NonConvergence("power resolvent: scalar Newton exceeded budget", res);
}

}  // namespace

MonotoneGraph::MonotoneGraph(GraphKind kind) : kind_(std::move(kind)) {
    std::visit(
        Overloaded{
            [&](const PowerGraph& p) {
                if (!(p.m > 0.0) || !std::isfinite(p.m)) throw DomainError("power graph: m must be > 0");
                if (!(p.rho > 0.0) || !std::isfinite(p.rho)) throw DomainError("power graph: rho must be > 0");
                growth_m_ = p.m;
                growth_c_ = p.rho;
                coercive_ = Coercivity{p.m, p.rho};
            },
            [&](const HeavisideGraph& h) {
                if (!(h.rho > 0.0)) throw DomainError("heaviside graph: rho must be > 0");
                if (!(h.alpha >= 0.0)) throw DomainError("heaviside graph: alpha must be >= 0");
                if (!(h.r_c >= 0.0)) throw DomainError("heaviside graph: r_c must be >= 0 so that 0 is in psi(0)");
                growth_m_ = 1.0;
                growth_c_ = std::max(h.rho, h.alpha);
            },
            [&](const TabulatedGraph& t) {
                if (t.r.size() < 2 || t.r.size() != t.y.size())
                    throw DomainError("tabulated graph: need >= 2 samples of matching length");
                for (std::size_t i = 0; i + 1 < t.r.size(); ++i) {
                    if (!(t.r[i + 1] > t.r[i])) throw DomainError("tabulated graph: abscissae must increase strictly");
                    if (!(t.y[i + 1] >= t.y[i])) throw DomainError("tabulated graph: values must be nondecreasing");
                }
                if (std::abs(tab_value(t, 0.0)) > 1e-14 * (1.0 + std::abs(t.y.back()) + std::abs(t.y.front())))
                    throw DomainError("tabulated graph: psi(0) must be 0");
                growth_m_ = 1.0;
                double lip = 0.0;
                for (std::size_t i = 0; i + 1 < t.r.size(); ++i) lip = std::max(lip, tab_slope(t, i));
                growth_c_ = lip;
                // antiderivative F at breakpoints with F(r_0) = 0, then shift so that j(0) = 0
                tab_integral_.assign(t.r.size(), 0.0);
                for (std::size_t i = 0; i + 1 < t.r.size(); ++i)
                    tab_integral_[i + 1] = tab_integral_[i] + 0.5 * (t.y[i] + t.y[i + 1]) * (t.r[i + 1] - t.r[i]);
                const auto s0 = tab_segment(t, 0.0);
                const double dr = 0.0 - t.r[s0];
                const double f0 = tab_integral_[s0] + t.y[s0] * dr + 0.5 * tab_slope(t, s0) * dr * dr;
                for (auto& v : tab_integral_) v -= f0;
            },
            [&](const LinearGraph& l) {
                if (!(l.a >= 0.0) || !std::isfinite(l.a)) throw DomainError("linear graph: a must be >= 0");
                growth_m_ = 1.0;
                growth_c_ = l.a;
                if (l.a > 0.0) coercive_ = Coercivity{1.0, l.a};
            },
        },
        kind_);
}

MonotoneGraph MonotoneGraph::power(double m, double rho) { return MonotoneGraph(PowerGraph{m, rho}); }
MonotoneGraph MonotoneGraph::heaviside(double rho, double r_c, double alpha) {
    return MonotoneGraph(HeavisideGraph{rho, r_c, alpha});
}
MonotoneGraph MonotoneGraph::tabulated(std::vector<double> r, std::vector<double> y) {
    return MonotoneGraph(TabulatedGraph{std::move(r), std::move(y)});
}
MonotoneGraph MonotoneGraph::linear(double a) { return MonotoneGraph(LinearGraph{a}); }

std::string MonotoneGraph::kind_name() const {
    return std::visit(Overloaded{
                          [](const PowerGraph&) { return std::string("power"); },
                          [](const HeavisideGraph&) { return std::string("heaviside"); },
                          [](const TabulatedGraph&) { return std::string("lipschitz_tabulated"); },
                          [](const LinearGraph&) { return std::string("linear"); },
                      },
                      kind_);
}

bool MonotoneGraph::is_lipschitz() const noexcept { return std::isfinite(lipschitz_constant()); }

double MonotoneGraph::lipschitz_constant() const noexcept {
    return std::visit(Overloaded{
                          [](const PowerGraph& p) { return p.m == 1.0 ? p.rho : kInf; },
                          [](const HeavisideGraph&) { return kInf; },
                          [this](const TabulatedGraph&) { return growth_c_; },
                          [](const LinearGraph& l) { return l.a; },
                      },
                      kind_);
}

double MonotoneGraph::slope(double r) const noexcept {
    return std::visit(Overloaded{
                          [r](const PowerGraph& p) {
                              if (p.m == 1.0) return p.rho;
                              if (r == 0.0) return p.m < 1.0 ? kInf : 0.0;
                              return p.rho * p.m * std::pow(std::abs(r), p.m - 1.0);
                          },
                          [r](const HeavisideGraph& h) { return r == h.r_c ? kInf : h.alpha; },
                          [r](const TabulatedGraph& t) { return tab_slope(t, tab_segment(t, r)); },
                          [](const LinearGraph& l) { return l.a; },
                      },
                      kind_);
}

Interval eval_graph(const MonotoneGraph& g, double r) {
    return std::visit(Overloaded{
                          [r](const PowerGraph& p) {
                              const double v = p.rho * std::pow(std::abs(r), p.m - 1.0) * r;
                              return r == 0.0 ? Interval{0.0, 0.0} : Interval{v, v};
                          },
                          [r](const HeavisideGraph& h) {
                              const double lin = h.alpha * r;
                              if (r < h.r_c) return Interval{lin, lin};
                              if (r > h.r_c) return Interval{lin + h.rho, lin + h.rho};
                              return Interval{lin, lin + h.rho};
                          },
                          [r](const TabulatedGraph& t) {
                              const double v = tab_value(t, r);
                              return Interval{v, v};
                          },
                          [r](const LinearGraph& l) { return Interval{l.a * r, l.a * r}; },
                      },
                      g.kind());
}

double resolvent(const MonotoneGraph& g, double lambda, double s) {
    if (!(lambda > 0.0)) throw DomainError("resolvent: lambda must be > 0");
    return std::visit(Overloaded{
                          [&](const PowerGraph& p) {
                              const double q = power_positive_root(p.m, lambda * p.rho, std::abs(s));
                              return std::copysign(q, s);
                          },
                          [&](const HeavisideGraph& h) {
                              const double scale = 1.0 + lambda * h.alpha;
                              const double lower = h.r_c * scale;
                              if (s < lower) return s / scale;
                              if (s <= lower + lambda * h.rho) return h.r_c;
                              return (s - lambda * h.rho) / scale;
                          },
                          [&](const TabulatedGraph& t) {
                              // z_i = r_i + lambda y_i is strictly increasing; solve on the matching segment
                              const auto n = t.r.size();
                              std::size_t seg;
                              if (s <= t.r.front() + lambda * t.y.front()) {
                                  seg = 0;
                              } else if (s >= t.r.back() + lambda * t.y.back()) {
                                  seg = n - 2;
                              } else {
                                  std::size_t lo = 0, hi = n - 1;
                                  while (hi - lo > 1) {
                                      const auto mid = (lo + hi) / 2;
                                      if (t.r[mid] + lambda * t.y[mid] <= s) lo = mid;
                                      else hi = mid;
                                  }
                                  seg = lo;
                              }
                              const double z = t.r[seg] + lambda * t.y[seg];
                              return t.r[seg] + (s - z) / (1.0 + lambda * tab_slope(t, seg));
                          },
                          [&](const LinearGraph& l) { return s / (1.0 + lambda * l.a); },
                      },
                      g.kind());
}

double yosida(const MonotoneGraph& g, double lambda, double r) {
    // psi(J r) is free of the cancellation in (r - J r) / lambda where psi is single-valued
    const double p = resolvent(g, lambda, r);
    return eval_graph(g, p).project((r - p) / lambda);
}

double potential(const MonotoneGraph& g, double r) {
    return std::visit(Overloaded{
                          [r](const PowerGraph& p) { return p.rho * std::pow(std::abs(r), p.m + 1.0) / (p.m + 1.0); },
                          [r](const HeavisideGraph& h) {
                              return h.rho * std::max(r - h.r_c, 0.0) + 0.5 * h.alpha * r * r;
                          },
                          [&](const TabulatedGraph& t) {
                              const auto i = tab_segment(t, r);
                              const double dr = r - t.r[i];
                              return g.tab_integral_[i] + t.y[i] * dr + 0.5 * tab_slope(t, i) * dr * dr;
                          },
                          [r](const LinearGraph& l) { return 0.5 * l.a * r * r; },
                      },
                      g.kind());
}

double moreau_envelope(const MonotoneGraph& g, double lambda, double r) {
    const double p = resolvent(g, lambda, r);
    const double d = r - p;
    return d * d / (2.0 * lambda) + potential(g, p);
}

double resolvent_residual(const MonotoneGraph& g, double lambda, double s, double p) {
    const double eta = eval_graph(g, p).project((s - p) / lambda);
    return std::abs(p + lambda * eta - s);
}

}  // namespace spme
