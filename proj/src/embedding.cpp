#include "spme/embedding.hpp"

#include <cmath>
#include <random>

#include "spme/errors.hpp"

namespace spme {

namespace {

double p_norm(const std::vector<double>& u, double p, double cell) {
    double acc = 0.0;
    for (double v : u) acc += std::pow(std::abs(v), p);
    return std::pow(acc * cell, 1.0 / p);
}

void remove_mean(std::vector<double>& u) {
    double s = 0.0;
    for (double v : u) s += v;
    s /= static_cast<double>(u.size());
    for (auto& v : u) v -= s;
}

}  // namespace

EmbeddingResult embedding_constant(const GridPtr& grid, double m, int starts, std::uint64_t seed, int budget,
                                   double tol) {
    if (!(m > 0.0 && m <= 1.0)) throw DomainError("embedding_constant: m must lie in (0, 1]");
    if (starts < 1) throw DomainError("embedding_constant: need at least one start");

    const Grid& g = *grid;
    const bool project = g.periodic() && !g.spec().zero_mode.shift;
    const double p = m + 1.0;
    const double q = p / (p - 1.0);
    const double cell = g.cell_volume();
    const auto& green = g.inverse_laplacian_symbol();
    const std::size_t n = g.size();

    auto quotient = [&](const std::vector<double>& u) {
        const double num = std::sqrt(std::max(0.0, g.quadratic_form(u, green)));
        return num / p_norm(u, p, cell);
    };
    auto normalize = [&](std::vector<double>& u) {
        const double s = p_norm(u, p, cell);
        for (auto& v : u) v /= s;
    };

    EmbeddingResult best;
    best.starts = starts;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;

    std::vector<double> u(n), gu(n), next(n), trial(n);
    for (int s = 0; s < starts; ++s) {
        for (auto& v : u) v = normal(rng);
        if (project) remove_mean(u);
        normalize(u);
        double value = quotient(u);
        bool stagnated = false;
        for (int it = 0; it < budget; ++it) {
            ++best.iterations;
            g.apply_symbol(u, gu, green);
            for (std::size_t i = 0; i < n; ++i) next[i] = std::pow(std::abs(gu[i]), q - 2.0) * gu[i];
            if (project) remove_mean(next);
            normalize(next);
            double candidate = quotient(next);
            if (project) {
                // the projected update is not an exact maximization; damp until monotone
                double t = 1.0;
                while (candidate < value && t > 1e-6) {
                    t *= 0.5;
                    for (std::size_t i = 0; i < n; ++i) trial[i] = u[i] + t * (next[i] - u[i]);
                    normalize(trial);
                    candidate = quotient(trial);
                    if (candidate >= value) next = trial;
                }
                if (candidate < value) {
                    stagnated = true;
                    break;
                }
            }
            const double rel = (candidate - value) / candidate;
            u.swap(next);
            value = candidate;
            if (std::abs(rel) < tol) {
                stagnated = true;
                break;
            }
        }
        if (stagnated) ++best.converged_starts;
        if (value > best.quotient) {
            best.quotient = value;
            best.maximizer = Field(grid, u);
        }
    }
    if (best.converged_starts == 0)
        throw NonConvergence("embedding_constant: no start stagnated within budget", best.quotient);
    best.gamma = 1.0 / best.quotient;
    return best;
}

}  // namespace spme
