#pragma once

#include "nlhk/coefficients.hpp"
#include "nlhk/table.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace nlhk {

/// Outcome of one inequality check. `margin` is value / threshold for upper
/// type checks and threshold / value for lower type checks, so pass iff
/// margin <= 1.
struct CheckReport {
    std::string check_id;
    std::map<std::string, double> constants;
    std::vector<double> worst_point;  ///< t, x..., y...
    double value = 0.0;
    double threshold = 0.0;
    double margin = 0.0;
    bool pass = false;
    std::string note;

    nlohmann::json to_json() const;
};

std::string to_json_lines(const std::vector<CheckReport>& reports);

struct Thresholds {
    double mass = 2e-3;
    double positivity = 1e-4;
    double oracle = 0.02;
    double near_diag_factor = 0.5;
    double near_diag_abs = 1e-6;
    double two_sided_ratio = 1e4;
    double finite_range_c7 = 50.0;
    double lemma_drift = 0.05;
    double duhamel = 1e-3;
    double duhamel_mutual = 5e-3;
    double generator = 1e-2;
    /// values below this fraction of the per-time peak are treated as rounding noise
    double noise_floor = 1e-13;
};

/// Lattice mass per (t, x), plus the Gaussian tail outside the box and the
/// one-jump far field t * int_{outside} J^b.
CheckReport check_conservativeness(const KernelTable& table, const Coefficient& c, const Thresholds& th = {});

/// Fits C3 >= q / p_{M_b}(t, c x, c y) and C1 <= q / p_{m_b}(t, x / c, y / c)
/// over shrink factors c in {1, 1/2, 1/4}, t <= 1.
CheckReport check_two_sided(const KernelTable& table, const Coefficient& c, const Thresholds& th = {});

/// q <= C7 [t^{-d/2} ∧ (p0 + \bar p_beta)(t, C8 x, C8 y)], the induction bound
/// q <= C0 (t/n)^n on |x-y| >= n r, and the far-field decay shape on [2, 6].
CheckReport check_finite_range(const KernelTable& table, const Coefficient& c, const Thresholds& th = {});

/// b >= 0: min >= -tol * sup. Otherwise a value below -tol * sup must exist,
/// searched on the table and on up to three rebuilt shorter horizons.
CheckReport check_positivity(const KernelTable& table, const Coefficient& c, const Thresholds& th = {});

/// q >= 0.5 p0 - 1e-6 on |x - y| <= 3 sqrt(t), t <= T_base.
CheckReport check_near_diag_lower(const KernelTable& table, const Coefficient& c, const Thresholds& th = {});

/// Relative error against the Fourier oracle on |x-y| <= radius sqrt(t), t in [t_min, t_max].
CheckReport check_oracle_agreement(const KernelTable& table, const Coefficient& c, double t_min, double t_max,
                                   double radius = 4.0, const Thresholds& th = {});

/// Both Duhamel forms and their mutual distance on the uniform prefix.
CheckReport check_duhamel(const KernelTable& table, const Coefficient& c, const Thresholds& th = {});

/// Generator identity for a Gaussian bump, defect / (||f||_{C^2} t^2).
CheckReport check_generator(const KernelTable& table, const Coefficient& c, double t_max, const Thresholds& th = {});

struct LemmaOptions {
    std::size_t samples = 64;        ///< base sample count, refit at twice as many
    std::size_t conv_samples = 48;   ///< for the space-time convolution fit
    double t_min = 1e-2;
};

/// Fits C9 ... C13 and the t-stability of C11; one report per constant.
std::vector<CheckReport> check_lemma_inequalities(const ModelParams& p, const LemmaOptions& opt = {},
                                                  const Thresholds& th = {});

/// int_0^t int h(t-s, x, z) f0(s, z, y) dz ds for |x - y| = r.
double h_f0_convolution(const ModelParams& p, double t, double r);
/// int_0^t int f0(s, z, y) dz ds by quadrature.
double f0_space_time_integral(const ModelParams& p, double t);

}  // namespace nlhk
