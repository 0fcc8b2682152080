#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace spme {

enum class Boundary { periodic, dirichlet };

/// Handling of the |xi| = 0 mode in negative-order norms on periodic boxes.
/// `exclude` demands mean-zero input; `shift` replaces 1/|xi|^2 by 1/(eps0 + |xi|^2).
struct ZeroMode {
    bool shift = false;
    double eps0 = 0.0;

    static ZeroMode exclude() { return {}; }
    static ZeroMode shifted(double eps0) { return {true, eps0}; }
};

struct DomainSpec {
    int d = 1;
    double L = 1.0;
    int N = 64;
    Boundary boundary = Boundary::periodic;
    ZeroMode zero_mode{};
};

std::string to_string(Boundary b);

/// Box geometry plus the transform plans for its spectral basis.
///
/// Periodic boxes use the real-to-complex exponential basis on nodes x_i = i h.
/// Dirichlet boxes use the sine basis sin(pi k x / L), k = 1..N, on cell
/// centres x_i = (i + 1/2) h, transformed with DST-II / DST-III.
///
/// A Grid is immutable after construction and its methods may be called
/// concurrently; plans are executed through FFTW's new-array interface.
class Grid {
public:
    static std::shared_ptr<const Grid> make(const DomainSpec& spec);
    ~Grid();
    Grid(const Grid&) = delete;
    Grid& operator=(const Grid&) = delete;

    const DomainSpec& spec() const noexcept { return spec_; }
    int dim() const noexcept { return spec_.d; }
    int points_per_axis() const noexcept { return spec_.N; }
    std::size_t size() const noexcept { return size_; }
    double spacing() const noexcept { return h_; }
    double cell_volume() const noexcept { return cell_volume_; }
    double volume() const noexcept { return volume_; }
    bool periodic() const noexcept { return spec_.boundary == Boundary::periodic; }

    /// Physical coordinate of grid index `idx` along `axis` (axis 0 slowest).
    double coordinate(std::size_t idx, int axis) const noexcept;
    std::vector<double> point(std::size_t idx) const;

    /// Number of stored spectral coefficients and |xi|^2 for each of them.
    std::size_t mode_count() const noexcept { return xi_sq_.size(); }
    const std::vector<double>& xi_sq() const noexcept { return xi_sq_; }
    /// Index of the |xi| = 0 mode (periodic only), or npos.
    std::size_t zero_mode_index() const noexcept { return zero_index_; }
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    /// out = F^{-1}[ symbol(xi) F[in] ]; `symbol` has mode_count() entries. in and out may alias.
    void apply_symbol(std::span<const double> in, std::span<double> out, std::span<const double> symbol) const;

    /// sum over modes of symbol(xi) |u_hat(xi)|^2 with Plancherel weights, i.e. <S u, u>_{L^2}.
    double quadratic_form(std::span<const double> u, std::span<const double> symbol) const;
    /// <S u, v>_{L^2} computed in coefficient space.
    double bilinear_form(std::span<const double> u, std::span<const double> v, std::span<const double> symbol) const;

    /// Raw coefficient l2 norm with Plancherel weights (equals |u|_2).
    double coefficient_norm(std::span<const double> u) const;

    /// Symbol 1/|xi|^2 under the domain's zero-mode policy (0 at an excluded zero mode).
    const std::vector<double>& inverse_laplacian_symbol() const noexcept { return inv_lap_; }

private:
    explicit Grid(const DomainSpec& spec);

    void forward(std::span<const double> in, std::vector<double>& coeffs) const;
    void backward(std::vector<double>& coeffs, std::span<double> out) const;
    double mode_weight(std::size_t k) const noexcept { return weight_[k]; }

    DomainSpec spec_;
    std::size_t size_ = 0;
    double h_ = 0.0;
    double cell_volume_ = 0.0;
    double volume_ = 0.0;
    std::vector<double> xi_sq_;
    std::vector<double> weight_;
    std::vector<double> inv_lap_;
    std::size_t zero_index_ = npos;
    double quad_scale_ = 0.0;     // grid quadrature of |u|^2 from weighted |coefficients|^2
    double roundtrip_scale_ = 0.0;  // 1 / (backward o forward)
    void* plan_forward_ = nullptr;
    void* plan_backward_ = nullptr;
};

using GridPtr = std::shared_ptr<const Grid>;

/// A real grid function on a Grid. Values are row-major with axis 0 slowest.
class Field {
public:
    Field() = default;
    explicit Field(GridPtr grid);
    Field(GridPtr grid, std::vector<double> values);

    template <class Fn>
    static Field from_function(GridPtr grid, Fn&& fn) {
        std::vector<double> v(grid->size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(grid->point(i));
        return Field(std::move(grid), std::move(v));
    }

    const GridPtr& grid() const noexcept { return grid_; }
    const Grid& domain() const noexcept { return *grid_; }
    std::span<const double> values() const noexcept { return values_; }
    const std::vector<double>& data() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    Field operator+(const Field& o) const;
    Field operator-(const Field& o) const;
    Field operator*(double c) const;
    friend Field operator*(double c, const Field& f) { return f * c; }
    /// Pointwise product.
    Field pointwise(const Field& o) const;

private:
    void check_compatible(const Field& o) const;
    GridPtr grid_;
    std::vector<double> values_;
};

Field laplacian(const Field& u);
/// (alpha - Delta)^{-1} u. alpha = 0 on periodic boxes follows the zero-mode policy.
Field inv_shifted_laplacian(const Field& u, double alpha);
/// (alpha - Delta) u.
Field shifted_laplacian(const Field& u, double alpha);

/// ||u||_{-1} = <(-Delta)^{-1} u, u>^{1/2}. Throws SingularMode on a periodic
/// box with excluded zero mode and |mean| > 1e-12 ||u||_inf.
double hminus1_norm(const Field& u);
/// |u|_{-1,nu} = <(nu - Delta)^{-1} u, u>^{1/2}, nu > 0.
double hminus1_nu_norm(const Field& u, double nu);
/// <(-Delta)^{-1} u, v> under the same admissibility rules as hminus1_norm.
double hminus1_inner(const Field& u, const Field& v);
double h1_seminorm(const Field& u);
double lp_norm(const Field& u, double p);
double sup_norm(const Field& u);
double mean(const Field& u);
/// Integral of u over the box.
double mass(const Field& u);
double l2_inner(const Field& u, const Field& v);

/// Check for the excluded-zero-mode contract; throws SingularMode.
void require_admissible_negative_norm(const Grid& grid, std::span<const double> u);

/// Writes `<stem>.f64` (raw little-endian doubles, row-major) and `<stem>.json`.
void write_field_snapshot(const std::filesystem::path& stem, const Field& u, double t);
Field read_field_snapshot(const std::filesystem::path& stem, double* t = nullptr);

}  // namespace spme
