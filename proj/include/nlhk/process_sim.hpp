#pragma once

#include "nlhk/coefficients.hpp"
#include "nlhk/table.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace nlhk {

struct SimConfig {
    std::size_t n_paths = 10000;
    double dt = 1e-3;
    double eps_jump = 0.05;
    std::uint64_t seed = 1;
    double horizon = 0.25;
    /// proposal cut for unbounded support; the majorant mass beyond is reported
    double r_max = 1e3;
    bool record_positions = false;  ///< keep X at every step time
    bool record_jumps = true;

    void validate(const Coefficient& c) const;
    nlohmann::json to_json() const;
};

struct JumpRecord {
    double t = 0.0;
    Point pre{0.0, 0.0};
    Point z{0.0, 0.0};
};

struct PathSample {
    std::vector<double> positions;  ///< d values per step time k dt, k = 0..steps (if recorded)
    Point final_pos{0.0, 0.0};
    std::vector<JumpRecord> jumps;
};

struct SimResult {
    SimConfig cfg;
    int d = 1;
    Point x0{0.0, 0.0};
    std::size_t steps = 0;
    double rate = 0.0;            ///< majorant jump rate
    double tail_mass = 0.0;       ///< majorant rate beyond r_max, not simulated
    std::size_t proposals = 0;
    std::size_t accepted = 0;
    std::size_t clipped = 0;      ///< proposals with b / M_b > 1
    std::vector<PathSample> paths;

    Point position(std::size_t path, std::size_t step) const;
    nlohmann::json summary() const;
};

/// Majorant rate M_b * int_{eps <= |z| <= R} |z|^{-d-beta} dz, R = min(support, r_max).
double jump_rate(const Coefficient& c, double eps, double r_max);

/// Covariance entries int_{|z| < eps} z_i z_j b(x, z) |z|^{-d-beta} dz; (11, 22, 12).
std::array<double, 3> small_jump_covariance(const Coefficient& c, const Point& x, double eps);

SimResult simulate(const Coefficient& c, const SimConfig& cfg, const Point& x0);

struct KSResult {
    double distance = 0.0;
    double se = 0.0;             ///< 0.5 / sqrt(n), the largest pointwise SE of the empirical CDF
    double critical95 = 0.0;     ///< 1.36 / sqrt(n)
    std::size_t n = 0;
};

/// KS distance between the first coordinate of X_t and the marginal CDF of
/// q(t, x0, .) from the table; t must be a table time and the horizon of the run.
KSResult empirical_density_check(const SimResult& sim, const KernelTable& table, double t);

/// Wilson score interval.
struct Proportion {
    double p = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    std::size_t hits = 0;
    std::size_t n = 0;
};
Proportion wilson(std::size_t hits, std::size_t n, double z = 1.96);

struct ExitStats {
    double r = 0.0;
    std::vector<double> s;              ///< times
    std::vector<Proportion> p;          ///< P(tau <= s)
    double kappa = 0.0;                 ///< largest grid kappa < 32/9 with P(tau <= kappa r^2) <= 1/2 (upper CI)
    double median_over_r2 = 0.0;
    double c20 = 0.0;                   ///< max_s P(tau <= s) r^2 / s
};

/// Exit from B(x0, r) detected at the first step outside; no bridge correction.
ExitStats exit_time_stats(const SimResult& sim, double r);

/// P(sigma_{B(y, r)} < deadline), checked at step times.
Proportion hitting_prob_stats(const SimResult& sim, const Point& y, double r, double deadline);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double se = 0.0;
    bool valid = false;
};
/// Least squares of log p against log dist; invalid if any p is zero.
SlopeFit loglog_slope(const std::vector<double>& dist, const std::vector<double>& p);

struct Box {
    Point lo{0.0, 0.0};
    Point hi{0.0, 0.0};
    bool contains(const Point& x, int d) const;
};

struct LevySystemCheck {
    double lhs = 0.0;   ///< mean number of A -> B jumps per path
    double rhs = 0.0;   ///< mean of int 1_A(X_s) int_{B, |u - X_s| >= eps} J^b(X_s, u) du ds
    double se = 0.0;
    double defect = 0.0;  ///< (lhs - rhs) / se, 0 when both vanish
    bool pass = false;
};

/// Needs recorded positions and jumps.
LevySystemCheck levy_system_check(const SimResult& sim, const Coefficient& c, const Box& A, const Box& B);

}  // namespace nlhk
