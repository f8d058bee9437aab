#pragma once

#include "nlhk/coefficients.hpp"
#include "nlhk/table.hpp"

#include <memory>
#include <string>
#include <vector>

namespace nlhk {

/// psi(xi) = [|xi|^2] + int (1 - cos(xi.z)) b(z) |z|^{-d-beta} dz for an
/// x-independent b. The jump part is tabulated once on [0, k_direct] in |xi|
/// (radial b) and continued by b0/A |xi|^beta - kappa beyond, where b0 is the
/// value of b near the origin.
class LevySymbol {
public:
    /// |xi|^2 + a |xi|^beta
    static LevySymbol stable(const ModelParams& p, double a);
    /// Symbol of Δ + S^b; b must be translation invariant.
    static LevySymbol of(const Coefficient& c);
    /// Pure jump symbol of the stable process with jumps larger than 1 removed.
    static LevySymbol truncated_stable(const ModelParams& p);

    double operator()(const Point& xi) const;
    /// psi at |xi| = k, radial symbols only.
    double radial(double k) const;
    bool is_radial() const;
    /// Cheap lower bound of psi on |xi| = k, increasing for large k.
    double lower(double k) const;
    /// Smallest k beyond which t * lower(k) > 60, where e^{-t psi} is negligible.
    double cutoff(double t) const;
    bool nonneg() const;
    const ModelParams& params() const;
    bool has_laplacian() const;

private:
    struct State;
    std::shared_ptr<const State> s_;
};

struct OracleOptions {
    double period_tol = 1e-6;    ///< relative change under period doubling
    double ringing = -1e-8;      ///< relative negative threshold
    int max_refinements = 6;
    std::size_t max_points = std::size_t(1) << 24;
};

/// Lattice density over offsets u = x - y on {-L + j h}^d.
struct OracleDensity {
    int d = 1;
    double t = 0.0;
    double h = 0.0;
    double L = 0.0;
    int n = 0;
    std::vector<double> values;
    double periodization_error = 0.0;
    int refinements = 0;
    int fft_size = 0;
    std::vector<std::string> warnings;
};

/// Inverse DFT of e^{-t psi} on the dual lattice. The symbol is folded into the
/// Nyquist band, so lattice samples are exact up to periodization, which is
/// controlled by doubling the period.
OracleDensity density_from_symbol(const LevySymbol& sym, double t, double h, double L, const OracleOptions& opt = {});

/// density_from_symbol at every grid time, as a translation-invariant table.
KernelTable oracle_table(const LevySymbol& sym, const SpaceTimeGrid& grid, const OracleOptions& opt = {});

/// Pointwise density at |x - y| = r by a 1-d Fourier (d = 1) or Hankel (d = 2)
/// integral; radial symbols only.
double density_at(const LevySymbol& sym, double t, double r);

/// p_a(t, x, y): symbol |xi|^2 + a |xi|^beta.
double pa_density(double a, const ModelParams& p, double t, const Point& x, const Point& y);

/// \bar p_beta(t, x, y).
double truncated_stable_density(const ModelParams& p, double t, const Point& x, const Point& y);

}  // namespace nlhk
