#include "spme/domain.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>

#include <json.hpp>

#include "spme/errors.hpp"

namespace spme {

namespace {

// FFTW's planner is not thread-safe; execution with the new-array API is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

std::vector<double>& scratch(int slot) {
    thread_local std::vector<double> buffers[3];
    return buffers[slot];
}

}  // namespace

std::string to_string(Boundary b) { return b == Boundary::periodic ? "periodic" : "dirichlet"; }

std::shared_ptr<const Grid> Grid::make(const DomainSpec& spec) {
    return std::shared_ptr<const Grid>(new Grid(spec));
}

Grid::Grid(const DomainSpec& spec) : spec_(spec) {
    if (spec.d < 1 || spec.d > 3) throw DomainError("domain: d must be 1, 2 or 3");
    if (!(spec.L > 0.0) || !std::isfinite(spec.L)) throw DomainError("domain: L must be > 0");
    if (spec.N < 8 || !std::has_single_bit(static_cast<unsigned>(spec.N)))
        throw DomainError("domain: N must be a power of two >= 8");
    if (spec.zero_mode.shift && !(spec.zero_mode.eps0 > 0.0))
        throw DomainError("domain: zero_mode shift requires eps0 > 0");

    const int d = spec.d;
    const int N = spec.N;
    size_ = 1;
    for (int a = 0; a < d; ++a) size_ *= static_cast<std::size_t>(N);
    h_ = spec.L / N;
    cell_volume_ = std::pow(h_, d);
    volume_ = std::pow(spec.L, d);

    std::vector<int> dims(d, N);
    const double pi = std::numbers::pi;

    if (periodic()) {
        const int half = N / 2 + 1;
        std::size_t modes = static_cast<std::size_t>(half);
        for (int a = 0; a + 1 < d; ++a) modes *= static_cast<std::size_t>(N);
        xi_sq_.resize(modes);
        weight_.resize(modes);
        const double k0 = 2.0 * pi / spec.L;
        for (std::size_t m = 0; m < modes; ++m) {
            std::size_t rest = m;
            const int last = static_cast<int>(rest % half);
            rest /= half;
            double s = std::pow(k0 * last, 2);
            for (int a = d - 2; a >= 0; --a) {
                int idx = static_cast<int>(rest % N);
                rest /= N;
                const int k = idx <= N / 2 ? idx : idx - N;
                s += std::pow(k0 * k, 2);
            }
            xi_sq_[m] = s;
            weight_[m] = (last == 0 || last == N / 2) ? 1.0 : 2.0;
        }
        zero_index_ = 0;
        quad_scale_ = cell_volume_ / static_cast<double>(size_);
        roundtrip_scale_ = 1.0 / static_cast<double>(size_);

        std::vector<double> in(size_);
        std::vector<std::complex<double>> out(modes);
        std::lock_guard lock(planner_mutex());
        plan_forward_ = fftw_plan_dft_r2c(d, dims.data(), in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                          FFTW_ESTIMATE | FFTW_UNALIGNED);
        plan_backward_ = fftw_plan_dft_c2r(d, dims.data(), reinterpret_cast<fftw_complex*>(out.data()), in.data(),
                                           FFTW_ESTIMATE | FFTW_UNALIGNED);
    } else {
        xi_sq_.resize(size_);
        weight_.resize(size_);
        const double k0 = pi / spec.L;
        for (std::size_t m = 0; m < size_; ++m) {
            std::size_t rest = m;
            double s = 0.0;
            double w = 1.0;
            for (int a = d - 1; a >= 0; --a) {
                const int idx = static_cast<int>(rest % N);
                rest /= N;
                s += std::pow(k0 * (idx + 1), 2);
                if (idx == N - 1) w *= 0.5;
            }
            xi_sq_[m] = s;
            weight_[m] = w;
        }
        const double two_n = 2.0 * N;
        quad_scale_ = cell_volume_ / std::pow(two_n, d);
        roundtrip_scale_ = 1.0 / std::pow(two_n, d);

        std::vector<double> in(size_), out(size_);
        std::vector<fftw_r2r_kind> fwd(d, FFTW_RODFT10), bwd(d, FFTW_RODFT01);
        std::lock_guard lock(planner_mutex());
        plan_forward_ =
            fftw_plan_r2r(d, dims.data(), in.data(), out.data(), fwd.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
        plan_backward_ =
            fftw_plan_r2r(d, dims.data(), out.data(), in.data(), bwd.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
    }
    if (!plan_forward_ || !plan_backward_) throw DomainError("domain: FFTW planning failed");

    inv_lap_.resize(xi_sq_.size());
    for (std::size_t m = 0; m < xi_sq_.size(); ++m) {
        if (periodic() && m == zero_index_) {
            inv_lap_[m] = spec.zero_mode.shift ? 1.0 / spec.zero_mode.eps0 : 0.0;
        } else {
            inv_lap_[m] = 1.0 / ((periodic() && spec.zero_mode.shift ? spec.zero_mode.eps0 : 0.0) + xi_sq_[m]);
        }
    }
}

Grid::~Grid() {
    std::lock_guard lock(planner_mutex());
    if (plan_forward_) fftw_destroy_plan(static_cast<fftw_plan>(plan_forward_));
    if (plan_backward_) fftw_destroy_plan(static_cast<fftw_plan>(plan_backward_));
}

double Grid::coordinate(std::size_t idx, int axis) const noexcept {
    const auto N = static_cast<std::size_t>(spec_.N);
    for (int a = spec_.d - 1; a > axis; --a) idx /= N;
    const auto i = static_cast<double>(idx % N);
    return periodic() ? i * h_ : (i + 0.5) * h_;
}

std::vector<double> Grid::point(std::size_t idx) const {
    std::vector<double> x(spec_.d);
    for (int a = 0; a < spec_.d; ++a) x[a] = coordinate(idx, a);
    return x;
}

void Grid::forward(std::span<const double> in, std::vector<double>& coeffs) const {
    auto& buf = scratch(2);
    buf.assign(in.begin(), in.end());
    if (periodic()) {
        coeffs.resize(2 * xi_sq_.size());
        fftw_execute_dft_r2c(static_cast<fftw_plan>(plan_forward_), buf.data(),
                             reinterpret_cast<fftw_complex*>(coeffs.data()));
    } else {
        coeffs.resize(size_);
        fftw_execute_r2r(static_cast<fftw_plan>(plan_forward_), buf.data(), coeffs.data());
    }
}

void Grid::backward(std::vector<double>& coeffs, std::span<double> out) const {
    if (periodic()) {
        fftw_execute_dft_c2r(static_cast<fftw_plan>(plan_backward_), reinterpret_cast<fftw_complex*>(coeffs.data()),
                             out.data());
    } else {
        fftw_execute_r2r(static_cast<fftw_plan>(plan_backward_), coeffs.data(), out.data());
    }
}

void Grid::apply_symbol(std::span<const double> in, std::span<double> out, std::span<const double> symbol) const {
    auto& c = scratch(0);
    forward(in, c);
    const double s = roundtrip_scale_;
    if (periodic()) {
        for (std::size_t m = 0; m < symbol.size(); ++m) {
            c[2 * m] *= symbol[m] * s;
            c[2 * m + 1] *= symbol[m] * s;
        }
    } else {
        for (std::size_t m = 0; m < symbol.size(); ++m) c[m] *= symbol[m] * s;
    }
    backward(c, out);
}

double Grid::quadratic_form(std::span<const double> u, std::span<const double> symbol) const {
    auto& c = scratch(0);
    forward(u, c);
    double acc = 0.0;
    if (periodic()) {
        for (std::size_t m = 0; m < symbol.size(); ++m)
            acc += weight_[m] * symbol[m] * (c[2 * m] * c[2 * m] + c[2 * m + 1] * c[2 * m + 1]);
    } else {
        for (std::size_t m = 0; m < symbol.size(); ++m) acc += weight_[m] * symbol[m] * c[m] * c[m];
    }
    return acc * quad_scale_;
}

double Grid::bilinear_form(std::span<const double> u, std::span<const double> v,
                           std::span<const double> symbol) const {
    auto& cu = scratch(0);
    auto& cv = scratch(1);
    forward(u, cu);
    forward(v, cv);
    double acc = 0.0;
    if (periodic()) {
        for (std::size_t m = 0; m < symbol.size(); ++m)
            acc += weight_[m] * symbol[m] * (cu[2 * m] * cv[2 * m] + cu[2 * m + 1] * cv[2 * m + 1]);
    } else {
        for (std::size_t m = 0; m < symbol.size(); ++m) acc += weight_[m] * symbol[m] * cu[m] * cv[m];
    }
    return acc * quad_scale_;
}

double Grid::coefficient_norm(std::span<const double> u) const {
    std::vector<double> one(mode_count(), 1.0);
    return std::sqrt(quadratic_form(u, one));
}

// ---------------------------------------------------------------------------

Field::Field(GridPtr grid) : grid_(std::move(grid)), values_(grid_->size(), 0.0) {}

Field::Field(GridPtr grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_->size()) throw DomainError("field: value count does not match grid size");
    for (double v : values_)
        if (!std::isfinite(v)) throw NaNDetected("field: non-finite entry");
}

void Field::check_compatible(const Field& o) const {
    if (grid_ != o.grid_) {
        const auto& a = grid_->spec();
        const auto& b = o.grid_->spec();
        if (a.d != b.d || a.N != b.N || a.L != b.L || a.boundary != b.boundary)
            throw DomainError("field: incompatible domains");
    }
}

Field Field::operator+(const Field& o) const {
    check_compatible(o);
    std::vector<double> v(values_);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += o.values_[i];
    return Field(grid_, std::move(v));
}

Field Field::operator-(const Field& o) const {
    check_compatible(o);
    std::vector<double> v(values_);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= o.values_[i];
    return Field(grid_, std::move(v));
}

Field Field::operator*(double c) const {
    std::vector<double> v(values_);
    for (auto& x : v) x *= c;
    return Field(grid_, std::move(v));
}

Field Field::pointwise(const Field& o) const {
    check_compatible(o);
    std::vector<double> v(values_);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= o.values_[i];
    return Field(grid_, std::move(v));
}

// ---------------------------------------------------------------------------

void require_admissible_negative_norm(const Grid& grid, std::span<const double> u) {
    if (!grid.periodic() || grid.spec().zero_mode.shift) return;
    double sum = 0.0, sup = 0.0;
    for (double v : u) {
        sum += v;
        sup = std::max(sup, std::abs(v));
    }
    const double avg = sum / static_cast<double>(u.size());
    if (std::abs(avg) > 1e-12 * sup)
        throw SingularMode("negative norm on periodic box needs mean-zero input (mean = " + std::to_string(avg) + ")");
}

Field laplacian(const Field& u) {
    const auto& g = u.domain();
    std::vector<double> sym(g.xi_sq());
    for (auto& s : sym) s = -s;
    std::vector<double> out(u.size());
    g.apply_symbol(u.values(), out, sym);
    return Field(u.grid(), std::move(out));
}

Field inv_shifted_laplacian(const Field& u, double alpha) {
    if (alpha < 0.0) throw DomainError("inv_shifted_laplacian: alpha must be >= 0");
    const auto& g = u.domain();
    std::vector<double> sym;
    if (alpha == 0.0) {
        require_admissible_negative_norm(g, u.values());
        sym = g.inverse_laplacian_symbol();
    } else {
        sym.resize(g.mode_count());
        for (std::size_t m = 0; m < sym.size(); ++m) sym[m] = 1.0 / (alpha + g.xi_sq()[m]);
    }
    std::vector<double> out(u.size());
    g.apply_symbol(u.values(), out, sym);
    return Field(u.grid(), std::move(out));
}

Field shifted_laplacian(const Field& u, double alpha) {
    const auto& g = u.domain();
    std::vector<double> sym(g.mode_count());
    for (std::size_t m = 0; m < sym.size(); ++m) sym[m] = alpha + g.xi_sq()[m];
    std::vector<double> out(u.size());
    g.apply_symbol(u.values(), out, sym);
    return Field(u.grid(), std::move(out));
}

double hminus1_norm(const Field& u) {
    const auto& g = u.domain();
    require_admissible_negative_norm(g, u.values());
    return std::sqrt(std::max(0.0, g.quadratic_form(u.values(), g.inverse_laplacian_symbol())));
}

double hminus1_nu_norm(const Field& u, double nu) {
    if (!(nu > 0.0)) throw DomainError("hminus1_nu_norm: nu must be > 0");
    const auto& g = u.domain();
    std::vector<double> sym(g.mode_count());
    for (std::size_t m = 0; m < sym.size(); ++m) sym[m] = 1.0 / (nu + g.xi_sq()[m]);
    return std::sqrt(std::max(0.0, g.quadratic_form(u.values(), sym)));
}

double hminus1_inner(const Field& u, const Field& v) {
    const auto& g = u.domain();
    require_admissible_negative_norm(g, u.values());
    require_admissible_negative_norm(g, v.values());
    return g.bilinear_form(u.values(), v.values(), g.inverse_laplacian_symbol());
}

double h1_seminorm(const Field& u) {
    const auto& g = u.domain();
    return std::sqrt(std::max(0.0, g.quadratic_form(u.values(), g.xi_sq())));
}

double lp_norm(const Field& u, double p) {
    if (!(p >= 1.0)) throw DomainError("lp_norm: p must be >= 1");
    double acc = 0.0;
    if (p == 2.0) {
        for (double v : u.values()) acc += v * v;
        return std::sqrt(acc * u.domain().cell_volume());
    }
    for (double v : u.values()) acc += std::pow(std::abs(v), p);
    return std::pow(acc * u.domain().cell_volume(), 1.0 / p);
}

double sup_norm(const Field& u) {
    double s = 0.0;
    for (double v : u.values()) s = std::max(s, std::abs(v));
    return s;
}

double mean(const Field& u) {
    double acc = 0.0;
    for (double v : u.values()) acc += v;
    return acc / static_cast<double>(u.size());
}

double mass(const Field& u) { return mean(u) * u.domain().volume(); }

double l2_inner(const Field& u, const Field& v) {
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
    return acc * u.domain().cell_volume();
}

// ---------------------------------------------------------------------------

void write_field_snapshot(const std::filesystem::path& stem, const Field& u, double t) {
    auto bin = stem;
    bin += ".f64";
    std::ofstream os(bin, std::ios::binary);
    if (!os) throw Error("cannot open " + bin.string());
    static_assert(std::endian::native == std::endian::little, "field files are little-endian");
    os.write(reinterpret_cast<const char*>(u.data().data()), static_cast<std::streamsize>(u.size() * sizeof(double)));

    const auto& s = u.domain().spec();
    nlohmann::json meta = {{"d", s.d},     {"L", s.L}, {"N", s.N}, {"boundary", to_string(s.boundary)},
                           {"t", t},       {"dtype", "float64"}, {"byte_order", "little"},
                           {"layout", "row-major, axis 0 slowest"}};
    auto side = stem;
    side += ".json";
    std::ofstream ms(side);
    ms << meta.dump(2) << '\n';
}

Field read_field_snapshot(const std::filesystem::path& stem, double* t) {
    auto side = stem;
    side += ".json";
    std::ifstream ms(side);
    if (!ms) throw Error("cannot open " + side.string());
    const auto meta = nlohmann::json::parse(ms);
    DomainSpec spec;
    spec.d = meta.at("d").get<int>();
    spec.L = meta.at("L").get<double>();
    spec.N = meta.at("N").get<int>();
    spec.boundary = meta.at("boundary").get<std::string>() == "periodic" ? Boundary::periodic : Boundary::dirichlet;
    if (t) *t = meta.at("t").get<double>();
    auto grid = Grid::make(spec);

    auto bin = stem;
    bin += ".f64";
    std::ifstream is(bin, std::ios::binary);
    if (!is) throw Error("cannot open " + bin.string());
    std::vector<double> v(grid->size());
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (is.gcount() != static_cast<std::streamsize>(v.size() * sizeof(double)))
        throw Error("field file truncated: " + bin.string());
    return Field(std::move(grid), std::move(v));
}

}  // namespace spme
