#include "spme/noise.hpp"

#include <cmath>
#include <numbers>

#include "spme/errors.hpp"

namespace spme {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

std::vector<double> wave_numbers(const NoiseMode& mode, const Grid& grid) {
    std::vector<double> kappa(grid.dim(), 0.0);
    if (mode.shape == ModeShape::constant) return kappa;
    if (static_cast<int>(mode.wavevector.size()) != grid.dim())
        throw DomainError("noise mode: wave vector length must equal the domain dimension");
    for (int a = 0; a < grid.dim(); ++a)
        kappa[a] = 2.0 * std::numbers::pi * mode.wavevector[a] / grid.spec().L;
    return kappa;
}

}  // namespace

bool NoiseSpec::silent() const noexcept {
    for (const auto& m : modes)
        if (m.mu != 0.0 && m.amplitude != 0.0) return false;
    return true;
}

bool NoiseSpec::spatially_constant() const noexcept {
    for (const auto& m : modes)
        if (m.shape != ModeShape::constant && m.mu != 0.0) return false;
    return true;
}

std::string to_string(ModeShape s) {
    switch (s) {
        case ModeShape::constant: return "constant";
        case ModeShape::cosine: return "cosine";
        case ModeShape::sine: return "sine";
    }
    return "?";
}

Field evaluate_mode(const NoiseMode& mode, const GridPtr& grid) {
    const auto kappa = wave_numbers(mode, *grid);
    return Field::from_function(grid, [&](const std::vector<double>& x) {
        if (mode.shape == ModeShape::constant) return mode.amplitude;
        double phase = 0.0;
        for (std::size_t a = 0; a < x.size(); ++a) phase += kappa[a] * x[a];
        return mode.amplitude * (mode.shape == ModeShape::cosine ? std::cos(phase) : std::sin(phase));
    });
}

Field mode_gradient_magnitude(const NoiseMode& mode, const GridPtr& grid) {
    const auto kappa = wave_numbers(mode, *grid);
    double knorm = 0.0;
    for (double k : kappa) knorm += k * k;
    knorm = std::sqrt(knorm);
    return Field::from_function(grid, [&](const std::vector<double>& x) {
        if (mode.shape == ModeShape::constant) return 0.0;
        double phase = 0.0;
        for (std::size_t a = 0; a < x.size(); ++a) phase += kappa[a] * x[a];
        const double s = mode.shape == ModeShape::cosine ? std::sin(phase) : std::cos(phase);
        return std::abs(mode.amplitude) * knorm * std::abs(s);
    });
}

NoiseConstants c_infinity_sq(const NoiseSpec& noise, const GridPtr& grid) {
    NoiseConstants out;
    const double d = grid->dim();
    for (const auto& mode : noise.modes) {
        const double mu2 = mode.mu * mode.mu;
        const Field e = evaluate_mode(mode, grid);
        const Field grad = mode_gradient_magnitude(mode, grid);
        const double e_sup = sup_norm(e);
        const double g_sup = sup_norm(grad);
        const double g_ld = lp_norm(grad, d);
        out.c_infinity_sq += 36.0 * mu2 * (g_sup * g_sup + e_sup * e_sup + 1.0);
        out.jj_sum += mu2 * (e_sup * e_sup + g_ld * g_ld + 1.0);
    }
    return out;
}

std::vector<std::vector<double>> mode_gram_matrix(const NoiseSpec& noise, const GridPtr& grid) {
    const auto n = noise.size();
    std::vector<Field> shapes;
    for (const auto& m : noise.modes) shapes.push_back(evaluate_mode(m, grid));
    std::vector<double> sym(grid->mode_count());
    for (std::size_t m = 0; m < sym.size(); ++m) sym[m] = 1.0 / (1.0 + grid->xi_sq()[m]);
    std::vector<std::vector<double>> gram(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
            gram[i][j] = gram[j][i] = grid->bilinear_form(shapes[i].values(), shapes[j].values(), sym);
    return gram;
}

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, c[0], hi0, lo0);
        mulhilo(kPhiloxM1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kPhiloxW0;
        k[1] += kPhiloxW1;
    }
    return c;
}

double keyed_normal(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::uint32_t mode) {
    const auto r = philox4x32({static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
                               static_cast<std::uint32_t>(path), mode},
                              {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
    constexpr double two_m53 = 1.0 / 9007199254740992.0;
    const std::uint64_t a = ((static_cast<std::uint64_t>(r[0]) << 32) | r[1]) >> 11;
    const std::uint64_t b = ((static_cast<std::uint64_t>(r[2]) << 32) | r[3]) >> 11;
    const double u1 = (static_cast<double>(a) + 1.0) * two_m53;  // (0, 1]
    const double u2 = static_cast<double>(b) * two_m53;          // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<double> sample_increments(const NoiseSpec& noise, std::uint64_t path, std::uint64_t step, double dt,
                                      int substeps) {
    if (!(dt > 0.0)) throw DomainError("sample_increments: dt must be > 0");
    if (substeps < 1) throw DomainError("sample_increments: substeps must be >= 1");
    std::vector<double> inc(noise.size(), 0.0);
    const double scale = std::sqrt(dt / substeps);
    for (std::size_t k = 0; k < inc.size(); ++k) {
        double acc = 0.0;
        for (int j = 0; j < substeps; ++j)
            acc += keyed_normal(noise.seed_base, path, step * static_cast<std::uint64_t>(substeps) + j,
                                static_cast<std::uint32_t>(k));
        inc[k] = scale * acc;
    }
    return inc;
}

NoiseOperator::NoiseOperator(const NoiseSpec& noise, const GridPtr& grid) {
    for (const auto& m : noise.modes) {
        mu_.push_back(m.mu);
        shapes_.push_back(evaluate_mode(m, grid).data());
    }
}

void NoiseOperator::apply(std::span<const double> x, std::span<const double> increments,
                          std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 0; k < mu_.size(); ++k) {
        const double c = mu_[k] * increments[k];
        const auto& e = shapes_[k];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += (c * e[i]) * x[i];
    }
}

Field apply_noise_increment(const Field& x, const NoiseSpec& noise, std::span<const double> increments) {
    if (increments.size() != noise.size()) throw DomainError("apply_noise_increment: one increment per mode");
    NoiseOperator op(noise, x.grid());
    std::vector<double> out(x.size());
    op.apply(x.values(), increments, out);
    return Field(x.grid(), std::move(out));
}

MultiplierReport multiplier_bound_check(const NoiseMode& mode, const Field& x) {
    MultiplierReport r;
    const Field e = evaluate_mode(mode, x.grid());
    const Field grad = mode_gradient_magnitude(mode, x.grid());
    const Field xe = x.pointwise(e);
    r.e_sup = sup_norm(e);
    r.grad_sup = sup_norm(grad);
    r.grad_ld = lp_norm(grad, x.domain().dim());
    const double base = hminus1_norm(x);
    r.ratio_homogeneous = base > 0.0 ? hminus1_norm(xe) / base : 0.0;
    const double base_inh = hminus1_nu_norm(x, 1.0);
    r.ratio_inhomogeneous = base_inh > 0.0 ? hminus1_nu_norm(xe, 1.0) / base_inh : 0.0;
    r.factor_sup_form = 2.0 * (r.e_sup + r.grad_sup);
    r.factor_ld_form_base = r.e_sup;
    r.empirical_c = r.grad_ld > 0.0 ? std::max(0.0, r.ratio_homogeneous - r.e_sup) / r.grad_ld : 0.0;
    r.violates_sup_form = r.ratio_inhomogeneous > r.factor_sup_form;
    return r;
}

}  // namespace spme
