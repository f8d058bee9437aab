#pragma once
// reference integrals for the tests, independent of the library quadrature

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <functional>

namespace ref {

inline double integrate(const std::function<double(double)>& f, double a, double b) {
    boost::math::quadrature::tanh_sinh<double> q;
    return q.integrate(f, a, b, 1e-11);
}

inline double integrate_gk(const std::function<double(double)>& f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-12);
}

inline double integrate_gk_loose(const std::function<double(double)>& f, double a, double b, double tol = 1e-8) {
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 8, tol);
}

// composite Gauss-Kronrod on [a, b] in `pieces` equal panels, for oscillatory integrands
inline double integrate_pieces(const std::function<double(double)>& f, double a, double b, int pieces) {
    double s = 0.0;
    const double h = (b - a) / pieces;
    for (int i = 0; i < pieces; ++i) s += integrate_gk(f, a + i * h, a + (i + 1) * h);
    return s;
}

inline double gaussian1(double t, double x) { return std::exp(-x * x / (4 * t)) / std::sqrt(4 * M_PI * t); }

inline double gaussian2(double t, double r) { return std::exp(-r * r / (4 * t)) / (4 * M_PI * t); }

// A(d, -beta) = beta 2^{beta-1} Gamma((d+beta)/2) / (pi^{d/2} Gamma(1 - beta/2))
inline double stable_A(int d, double beta) {
    return beta * std::pow(2.0, beta - 1) * std::tgamma((d + beta) / 2) / (std::pow(M_PI, d / 2.0) * std::tgamma(1 - beta / 2));
}

// d = 1 density of the symbol psi(xi) = xi^2 + jump(xi) at time t, distance r
inline double density1(const std::function<double(double)>& psi, double t, double r) {
    const double cut = std::sqrt(60.0 / t) + 1.0;
    const int pieces = 8 + static_cast<int>(cut * std::abs(r) / 2.0);
    return integrate_pieces([&](double k) { return std::exp(-t * psi(k)) * std::cos(k * r); }, 0.0, cut, pieces) /
           M_PI;
}

// (-Δ)^{beta/2} p0(s, .) at x, d = 1
inline double frac_lap_gaussian1(double beta, double s, double x) {
    const double cut = std::sqrt(80.0 / s) + 1.0;
    const int pieces = 8 + static_cast<int>(cut * std::abs(x) / 2.0);
    return integrate_pieces([&](double k) { return std::pow(k, beta) * std::exp(-s * k * k) * std::cos(k * x); }, 0.0,
                            cut, pieces) /
           M_PI;
}

// Gauss-Kronrod on geometric panels [z0, z0 q, ...] up to b
inline double integrate_graded(const std::function<double(double)>& f, double z0, double b) {
    double s = 0.0, a = z0;
    while (a < b) {
        const double e = std::min(b, 2.0 * a);
        s += integrate_gk(f, a, e);
        a = e;
    }
    return s;
}

// int_0^R (f(x+z) + f(x-z) - 2 f(x)) z^{-1-beta} dz; below z0 the integrand is f''(x) z^{1-beta}
inline double second_difference_integral(const std::function<double(double)>& f, double x, double beta, double R,
                                         std::initializer_list<double> breaks = {}) {
    auto g = [&](double z) { return (f(x + z) + f(x - z) - 2 * f(x)) * std::pow(z, -1 - beta); };
    const double z0 = 1e-4, h = 1e-3;
    const double f2 = (f(x + h) + f(x - h) - 2 * f(x)) / (h * h);
    double s = f2 * std::pow(z0, 2 - beta) / (2 - beta);
    double a = z0;
    for (double b : breaks) {
        if (b <= a || b >= R) continue;
        s += integrate_graded(g, a, b);
        a = b;
    }
    return s + integrate_graded(g, a, R);
}

}  // namespace ref
