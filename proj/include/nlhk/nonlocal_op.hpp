#pragma once

#include "nlhk/coefficients.hpp"
#include "nlhk/quadrature.hpp"

#include <functional>
#include <vector>

namespace nlhk {

/// Radial rule for  int_0^{z_max} Phi(r) r^{-1-beta} dr.
///
/// The inner part uses Gauss-Jacobi with weight r^{1-beta} applied to
/// Phi(r)/r^2, which is smooth for the second-difference integrands used
/// here; the outer part is composite Gauss-Legendre over the given breaks.
/// Weights already contain the factor r^{-1-beta}.
struct PVQuadrature {
    double inner_radius = 0.0;
    double z_max = 0.0;
    QuadRule inner;
    QuadRule outer;
};

struct PVOptions {
    int inner_points = 20;
    int panel_points = 8;
    double panel_ratio = 0.5;
    double max_panel = 0.0;
};

PVQuadrature make_pv_quadrature(double beta, double r_in, double z_max, std::vector<double> breaks,
                                const PVOptions& opt = {});

struct SbValue {
    double value = 0.0;
    double error = 0.0;
    bool divergent = false;
};

struct ApplyOptions {
    double inner_radius = -1.0;  ///< default min(1, support radius)
    double z_max = -1.0;         ///< default support radius, or chosen from tolerance
    double tail_tol = 1e-8;
    double f_sup = -1.0;         ///< bound on |f|; estimated from the nodes when negative
    int angular_points = 64;     ///< d = 2 only
    std::vector<double> breaks;  ///< extra radial feature points of f around x
    PVOptions pv;
};

/// S^b f(x) = int (f(x+z) + f(x-z) - 2 f(x))/2 * b(x,z)/|z|^{d+beta} dz.
SbValue apply_Sb(const Coefficient& c, const std::function<double(const Point&)>& f, const Point& x,
                 const ApplyOptions& opt = {});

/// S^b_z p0(s, z, y): the operator applied to z -> p0(s, z, y), evaluated at z.
double Sb_gaussian(const Coefficient& c, double s, const Point& z, const Point& y);

/// Translation-invariant shortcut: S^b p0(s, .)(u) with the coefficient frozen at x = 0.
double Sb_gaussian_offset(const Coefficient& c, double s, const Point& u);

/// The absolute-integrand majorant |Δ^{β/2}_x| p0(s, x) of the Gaussian with
/// the gradient-compensated inner part, at x = z - y.
double abs_frac_gaussian(const ModelParams& p, double s, const Point& z, const Point& y);

/// S^b acting on functions sampled on a uniform 1-d lattice {x0 + j h}.
///
/// Second differences are interpolated in the jump variable by local
/// Lagrange polynomials whose products with b(x, r) r^{-1-beta} are
/// integrated exactly (product integration), so the operator is a fixed
/// stencil per lattice node. Values outside the lattice are taken as zero.
class LatticeSb {
public:
    LatticeSb(const Coefficient& c, double x0, double h, int n);

    /// (S^b f)(x0 + j h) for all j.
    std::vector<double> apply(const std::vector<double>& f) const;

    int size() const { return n_; }

private:
    std::vector<double> stencil_for(double x) const;

    Coefficient c_;
    double x0_, h_;
    int n_;
    bool ti_;
    std::vector<std::vector<double>> stencils_;  // one (TI) or n stencils; index m = 1..n-1
    std::vector<double> tails_;                  // tail mass beyond the lattice per node
};

}  // namespace nlhk
