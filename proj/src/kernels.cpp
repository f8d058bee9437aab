#include "nlhk/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nlhk {

double gaussian_r(double t, double r, int d) {
    if (!(t > 0.0)) throw std::invalid_argument("gaussian: t must be positive");
    const double e = r * r / (4.0 * t);
    const double pref = std::pow(4.0 * M_PI * t, -0.5 * d);
    if (e > 745.0) return 0.0;
    return pref * std::exp(-e);
}

double gaussian(double t, const Point& x, const Point& y, int d) { return gaussian_r(t, dist(x, y, d), d); }

double gaussian_max_second_partial(double t, const Point& x, int d) {
    if (!(t > 0.0)) throw std::invalid_argument("gaussian: t must be positive");
    const double p = gaussian_r(t, norm(x, d), d);
    if (d == 1) return p * std::abs(x[0] * x[0] / (4.0 * t * t) - 1.0 / (2.0 * t));
    double m = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const double v = x[i] * x[j] / (4.0 * t * t) - (i == j ? 1.0 / (2.0 * t) : 0.0);
            m = std::max(m, std::abs(v));
        }
    return p * m;
}

namespace {

double fit_c9(int d) {
    // everything depends on u = |x|/√t only; scan u at t = 1 for both inequalities
    double c = 0.0;
    for (int i = 0; i <= 400000; ++i) {
        const double u = 1e-4 * i;
        const double g = gaussian_r(1.0, u, d);
        const double cap = std::min(1.0, u > 0.0 ? 1.0 / u : 1.0);
        const double second = g * std::max({std::abs(u * u / 4.0 - 0.5), 0.5, d == 2 ? u * u / 8.0 : 0.0});
        c = std::max(c, g / std::pow(cap, d + 2));
        c = std::max(c, second / std::pow(cap, d + 4));
    }
    return c;
}

}  // namespace

double gaussian_c9(int d) {
    if (d < 1 || d > kMaxDim) throw std::invalid_argument("gaussian_c9: unsupported dimension");
    static const double c1 = fit_c9(1);
    static const double c2 = fit_c9(2);
    return d == 1 ? c1 : c2;
}

double gaussian_hessian_bound(double t, const Point& x, int d) {
    if (!(t > 0.0)) throw std::invalid_argument("gaussian_hessian_bound: t must be positive");
    const double r = norm(x, d);
    const double cap = r > 0.0 ? std::min(1.0, std::sqrt(t) / r) : 1.0;
    return gaussian_c9(d) * std::pow(t, -(d + 2) / 2.0) * std::pow(cap, d + 4);
}

double f0(double t, double r, const ModelParams& p) {
    if (!(t > 0.0)) throw std::invalid_argument("f0: t must be positive");
    return std::pow(std::max(std::sqrt(t), r), -(p.d + p.beta));
}

double f0(double t, const Point& x, const Point& y, const ModelParams& p) { return f0(t, dist(x, y, p.d), p); }

double h_fn(double t, double r, const ModelParams& p) {
    if (!(t > 0.0)) throw std::invalid_argument("h: t must be positive");
    const double diag = std::pow(t, -0.5 * p.d);
    if (r == 0.0) return diag;
    return std::min(diag, gaussian_r(t, r, p.d) + t * std::pow(r, -(p.d + p.beta)));
}

double h_fn(double t, const Point& x, const Point& y, const ModelParams& p) { return h_fn(t, dist(x, y, p.d), p); }

StableNormalizer stable_normalizer(const ModelParams& p) {
    const double b = p.beta;
    const double log_a = std::log(b) + (b - 1.0) * std::log(2.0) + std::lgamma(0.5 * (p.d + b)) -
                         0.5 * p.d * std::log(M_PI) - std::lgamma(1.0 - 0.5 * b);
    return StableNormalizer{std::exp(log_a)};
}

}  // namespace nlhk
