#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "spme/domain.hpp"

namespace spme {

enum class ModeShape { constant, cosine, sine };

/// One term mu_k e_k of the noise series. Trigonometric shapes are
/// amplitude * cos/sin(kappa . x) with kappa = 2 pi n / L for the integer
/// wave vector n; `constant` ignores the wave vector.
struct NoiseMode {
    double mu = 0.0;
    ModeShape shape = ModeShape::constant;
    std::vector<int> wavevector;
    double amplitude = 1.0;

    static NoiseMode constant(double mu, double c = 1.0) { return {mu, ModeShape::constant, {}, c}; }
    static NoiseMode cosine(double mu, std::vector<int> n, double amp = 1.0) {
        return {mu, ModeShape::cosine, std::move(n), amp};
    }
    static NoiseMode sine(double mu, std::vector<int> n, double amp = 1.0) {
        return {mu, ModeShape::sine, std::move(n), amp};
    }
};

struct NoiseSpec {
    std::vector<NoiseMode> modes;
    std::uint64_t seed_base = 0;

    std::size_t size() const noexcept { return modes.size(); }
    bool silent() const noexcept;
    bool spatially_constant() const noexcept;
};

std::string to_string(ModeShape s);

/// e_k and |grad e_k| sampled on the grid (gradient evaluated analytically).
Field evaluate_mode(const NoiseMode& mode, const GridPtr& grid);
Field mode_gradient_magnitude(const NoiseMode& mode, const GridPtr& grid);

struct NoiseConstants {
    /// 36 sum mu_k^2 (|grad e_k|_inf^2 + |e_k|_inf^2 + 1)
    double c_infinity_sq = 0.0;
    /// sum mu_k^2 (|e_k|_inf^2 + |grad e_k|_d^2 + 1)
    double jj_sum = 0.0;
};

NoiseConstants c_infinity_sq(const NoiseSpec& noise, const GridPtr& grid);

/// Gram matrix of the modes in the inhomogeneous H^{-1} inner product <(1 - Delta)^{-1} ., .>.
std::vector<std::vector<double>> mode_gram_matrix(const NoiseSpec& noise, const GridPtr& grid);

/// Philox4x32-10 block function.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

/// Standard normal draw addressed by (seed, path, fine step, mode). Pure function of its key.
double keyed_normal(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::uint32_t mode);

/// Brownian increments for step `step` of size dt, one per mode. Each is the
/// sum of `substeps` keyed draws on the fine index step * substeps + j, so
/// coarse and fine time grids see the same Brownian path.
std::vector<double> sample_increments(const NoiseSpec& noise, std::uint64_t path, std::uint64_t step, double dt,
                                      int substeps = 1);

/// Noise modes pre-evaluated on one grid.
class NoiseOperator {
public:
    NoiseOperator() = default;
    NoiseOperator(const NoiseSpec& noise, const GridPtr& grid);

    std::size_t size() const noexcept { return mu_.size(); }
    /// sum_k mu_k (e_k X) dbeta_k, accumulated mode by mode into `out`.
    void apply(std::span<const double> x, std::span<const double> increments, std::span<double> out) const;

private:
    std::vector<double> mu_;
    std::vector<std::vector<double>> shapes_;
};

/// Euler-Maruyama noise contribution sum_k mu_k (e_k . X) dbeta_k.
Field apply_noise_increment(const Field& x, const NoiseSpec& noise, std::span<const double> increments);

struct MultiplierReport {
    double ratio_homogeneous = 0.0;    ///< ||x e||_{-1} / ||x||_{-1}
    double ratio_inhomogeneous = 0.0;  ///< |x e|_{-1} / |x|_{-1} with (1 - Delta)^{-1}
    double e_sup = 0.0;
    double grad_sup = 0.0;
    double grad_ld = 0.0;                ///< |grad e|_d
    double factor_sup_form = 0.0;        ///< 2 (|e|_inf + |grad e|_inf)
    double factor_ld_form_base = 0.0;    ///< |e|_inf, to which C |grad e|_d is added
    double empirical_c = 0.0;            ///< (ratio - |e|_inf)_+ / |grad e|_d, 0 if grad vanishes
    bool violates_sup_form = false;
};

/// Discrete multiplier ratios for x -> e x against the two multiplier bounds.
MultiplierReport multiplier_bound_check(const NoiseMode& e, const Field& x);

}  // namespace spme
