#pragma once

#include "nlhk/coefficients.hpp"
#include "nlhk/fft.hpp"
#include "nlhk/table.hpp"

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlhk {

/// Raised when consecutive series terms stop shrinking; the horizon is too long.
struct NonContraction : std::runtime_error {
    NonContraction(const std::string& msg, double horizon, double suggested)
        : std::runtime_error(msg), horizon(horizon), suggested_horizon(suggested) {}
    double horizon;
    double suggested_horizon;
};

/// Non-finite values or an extent that would exceed the configured cap.
struct NumericalFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bookkeeping of one series term.
struct SeriesState {
    int n = 0;
    double sup = 0.0;
    double sup_ratio = 0.0;
};

/// Precomputed time-convolution machinery for one (coefficient, grid) pair.
///
/// Requires uniform time nodes t_k = k tau. Kernels S^b p0(s) are evaluated at
/// Gauss nodes of every panel [t_i, t_{i+1}]; the first panel is refined
/// geometrically down to s_res = dx^2/4 and extended to 0 by a constant.
class DuhamelOperator {
public:
    DuhamelOperator(const Coefficient& c, const SpaceTimeGrid& grid, int panel_points = 4);
    ~DuhamelOperator();

    const SpaceTimeGrid& grid() const { return grid_; }
    const Coefficient& coefficient() const { return c_; }
    bool translation_invariant() const { return ti_; }

    /// q_0 = p0 on the grid.
    KernelTable gaussian() const;

    /// q_1(t) = int_0^t int p0(t-s, x, z) S^b_z p0(s, z, y) dz ds.
    const KernelTable& first_term() const { return q1_; }

    /// V[g](t) = int_0^t int g(t-s, x, z) S^b_z p0(s, z, y) dz ds for g with g(0) = 0,
    /// g linear in time between nodes.
    KernelTable volterra(const KernelTable& g) const;

    /// int_0^t int p0(t-s, x, z) S^b_z g(s, z, y) dz ds with S^b applied on the
    /// lattice (d = 1 only); g(0) = 0, S^b g linear in time between nodes.
    KernelTable heat_volterra(const KernelTable& g) const;

    double s_res() const { return s_res_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    Coefficient c_;
    SpaceTimeGrid grid_;
    bool ti_;
    double s_res_ = 0.0;
    KernelTable q1_;
};

/// q_n from q_{n-1}. `prev.meta["term"]` tells whether prev is the Gaussian (0).
KernelTable iterate_once(const KernelTable& prev, const DuhamelOperator& op);
KernelTable iterate_once(const KernelTable& prev, const Coefficient& c);

struct SeriesOptions {
    double tol = 1e-8;
    int max_terms = 80;
    double stall_ratio = 0.9;
    bool keep_terms = false;
};

struct SeriesResult {
    KernelTable table;
    std::vector<SeriesState> states;
    std::vector<KernelTable> terms;  ///< q_0, q_1, ... when keep_terms
};

SeriesResult build_series(const Coefficient& c, const SpaceTimeGrid& grid, const SeriesOptions& opt = {});
SeriesResult build_series(const DuhamelOperator& op, const SeriesOptions& opt = {});

/// T_base = min(1, (a0 / max(|b|, a0))^{2/(2-beta)}), a0 = a0_factor * A(d,-beta).
double choose_base_horizon(const Coefficient& c, double a0_factor = 0.25);

/// Grid used by default for a base horizon T: K = 48, dx = sqrt(T)/16, L from
/// the horizon the table will eventually be extended to.
SpaceTimeGrid default_grid(const Coefficient& c, double T, double final_horizon, int K = 48, double dx = -1.0,
                           double L = -1.0);

/// Half-width that keeps the mass lost outside [-L, L]^d small up to time t.
double required_extent(const Coefficient& c, double t);

/// Table for b from a table for b^{(lambda)} built on the image grid.
KernelTable scaling_transfer(const KernelTable& src, double lambda);
/// Same, validating against an explicitly given target grid.
KernelTable scaling_transfer(const KernelTable& src, double lambda, const SpaceTimeGrid& target);

struct ExtendOptions {
    double L_cap = 64.0;
    double support_radius = -1.0;  ///< read from meta when negative
};

/// One Chapman-Kolmogorov step: nodes T + t_j for table nodes t_j on the
/// doubled step, up to min(2T, s).
KernelTable extend_time(const KernelTable& table, double s, const ExtendOptions& opt = {});
/// Repeats extend_time until s is reached.
KernelTable extend_to(const KernelTable& table, double s, const ExtendOptions& opt = {});

/// Zero-pads the lattice to half-width L_new.
KernelTable enlarge_extent(const KernelTable& table, double L_new);

/// int q(t1, x, z) q(t2, z, y) dz on the lattice for table time indices k1, k2;
/// returned as one time slice.
std::vector<double> compose(const KernelTable& table, std::size_t k1, std::size_t k2);

enum class DuhamelForm { First, Second };

struct ResidualReport {
    double first = 0.0;
    double second = 0.0;
    double mutual = 0.0;
    bool second_supported = true;
};

/// Relative sup residual of the Duhamel identity on the uniform prefix of the grid.
double duhamel_residual(const KernelTable& table, const DuhamelOperator& op, DuhamelForm form);
double duhamel_residual(const KernelTable& table, const Coefficient& c, DuhamelForm form);
ResidualReport duhamel_residuals(const KernelTable& table, const DuhamelOperator& op);

/// Smooth bounded test function with closed-form Laplacian.
struct TestFunction {
    std::function<double(const Point&)> f;
    std::function<double(const Point&)> laplacian;
    double c2_norm = 1.0;
    std::string name;
};

TestFunction gaussian_bump(double width, const Point& center, int d);
TestFunction cosine_wave(const Point& xi, int d);
TestFunction constant_one();

/// T_t f(x) = int q(t_k, x, y) f(y) dy (lattice trapezoid), t = t_k a grid time.
double apply_semigroup(const KernelTable& table, const std::function<double(const Point&)>& f, std::size_t k,
                       const Point& x);

struct GeneratorDefect {
    double defect = 0.0;
    double t = 0.0;
    Point x{0.0, 0.0};
    double scaled = 0.0;  ///< max of defect / t^2
    double t_scaled = 0.0;
};

/// sup over grid times t <= t_max and sampled x of |T_t f - f - int_0^t T_s(Δf + S^b f) ds|.
GeneratorDefect generator_check(const KernelTable& table, const Coefficient& c, const TestFunction& f,
                                const std::vector<Point>& xs, double t_max);

}  // namespace nlhk
