#pragma once

#include <vector>

namespace nlhk {

struct QuadRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const { return nodes.size(); }
};

/// Gauss-Legendre rule with n points on [a, b].
QuadRule gauss_legendre(int n, double a = -1.0, double b = 1.0);

/// Gauss-Jacobi rule for the weight u^alpha on [0, 1] (alpha > -1):
/// sum_k w_k g(u_k) ~ int_0^1 u^alpha g(u) du, exact for polynomials of
/// degree 2n - 1.
QuadRule gauss_jacobi_unit(int n, double alpha);

/// Composite Gauss-Legendre over the breakpoints in `breaks` (sorted,
/// at least two entries). Each interval is further split so that no panel
/// is longer than `max_len` nor longer than `ratio` times its left end
/// (geometric grading away from zero when the first break is positive).
QuadRule composite_gauss(const std::vector<double>& breaks, int points_per_panel,
                         double max_len, double ratio = 1.0);

}  // namespace nlhk
